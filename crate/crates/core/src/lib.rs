//! Re-ranking toolkit for embedding-based retrieval.
//!
//! Baseline rankings come from cosine distances on the input embeddings or
//! on exemplar-SVM features ([`svm::esvm_feature_transform`]). They can be
//! refined with k-reciprocal Jaccard re-ranking ([`jaccard`]) or with query
//! expansion ([`expansion`]), and scored with mAP, Top-1, Hard-k and Soft-k
//! ([`eval`]).

pub mod corpus;
pub mod error;
pub mod eval;
pub mod expansion;
pub mod jaccard;
pub mod pipeline;
pub mod ranking;
pub mod svm;

pub use corpus::{EmbeddingSet, Sample, Split};
pub use error::{Error, Result};
pub use ranking::{DistanceMatrix, Ranked, Ranking};
