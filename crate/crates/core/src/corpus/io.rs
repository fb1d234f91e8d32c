use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EmbeddingSet, Sample, Split};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"RRK1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Binary,
}

impl Format {
    /// `.csv` maps to CSV, everything else to the binary format.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Binary,
        }
    }
}

/// Loads a set in file row order. Loaded sets are tagged [`Split::Test`];
/// use [`EmbeddingSet::with_split`] to retag.
pub fn load_embeddings(path: impl AsRef<Path>, format: Format) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    match format {
        Format::Csv => read_csv(reader),
        Format::Binary => read_binary(reader).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        }),
    }
}

pub fn save_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    match format {
        Format::Csv => write_csv(set, &mut writer)?,
        Format::Binary => write_binary(set, &mut writer).map_err(|e| Error::io(path, e))?,
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn read_csv<R: Read>(reader: R) -> Result<EmbeddingSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(Error::EmptySet),
        Some(h) => h?,
    };
    let dim = check_header(&header)?;

    let mut samples = Vec::new();
    for (i, record) in records.enumerate() {
        // line 1 is the header
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.len() < 2 {
            return Err(Error::Parse {
                row,
                message: "missing sample_id or writer_id".into(),
            });
        }
        let found = record.len() - 2;
        if found != dim {
            return Err(Error::DimensionMismatch {
                row,
                expected: dim,
                found,
            });
        }
        let vector = record
            .iter()
            .skip(2)
            .enumerate()
            .map(|(j, field)| {
                field.trim().parse::<f32>().map_err(|_| Error::Parse {
                    row,
                    message: format!("field f{j}: cannot parse `{field}` as a number"),
                })
            })
            .collect::<Result<Vec<f32>>>()?;
        samples.push(Sample::new(&record[0], &record[1], vector));
    }
    if samples.is_empty() {
        return Err(Error::EmptySet);
    }
    // Re-number rows so errors from validation point at file lines.
    EmbeddingSet::with_dim(dim, samples, Split::Test).map_err(|e| match e {
        Error::DuplicateId { row, id } => Error::DuplicateId { row: row + 1, id },
        Error::NonFinite { row, id } => Error::NonFinite { row: row + 1, id },
        other => other,
    })
}

fn check_header(header: &csv::StringRecord) -> Result<usize> {
    let bad = |message: String| Error::Parse { row: 1, message };
    if header.len() < 2 || &header[0] != "sample_id" || &header[1] != "writer_id" {
        return Err(bad("header must start with `sample_id,writer_id`".into()));
    }
    for (j, name) in header.iter().skip(2).enumerate() {
        if name != format!("f{j}") {
            return Err(bad(format!("expected column `f{j}`, found `{name}`")));
        }
    }
    Ok(header.len() - 2)
}

fn write_csv<W: Write>(set: &EmbeddingSet, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["sample_id".to_string(), "writer_id".to_string()];
    header.extend((0..set.dim()).map(|j| format!("f{j}")));
    wtr.write_record(&header)?;
    for s in set.samples() {
        let mut row = Vec::with_capacity(set.dim() + 2);
        row.push(s.sample_id.clone());
        row.push(s.writer_id.clone());
        row.extend(s.vector.iter().map(|&x| format_sig9(x)));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Nine significant digits, enough to round-trip any `f32`.
fn format_sig9(x: f32) -> String {
    format!("{:.8e}", x)
}

fn write_binary<W: Write>(set: &EmbeddingSet, mut w: W) -> std::io::Result<()> {
    let count = u32::try_from(set.len()).expect("sample count fits in u32");
    let dim = u32::try_from(set.dim()).expect("dimension fits in u32");
    w.write_all(MAGIC)?;
    w.write_all(&count.to_le_bytes())?;
    w.write_all(&dim.to_le_bytes())?;
    for s in set.samples() {
        write_str(&mut w, &s.sample_id)?;
        write_str(&mut w, &s.writer_id)?;
        for &x in &s.vector {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    let len = u32::try_from(s.len()).expect("string length fits in u32");
    w.write_all(&len.to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_binary<R: Read>(mut r: R) -> Result<EmbeddingSet> {
    let mut magic = [0u8; 4];
    match r.read_exact(&mut magic) {
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Err(Error::EmptySet),
        other => other.map_err(|e| Error::io("", e))?,
    }
    if &magic != MAGIC {
        return Err(Error::Parse {
            row: 0,
            message: "bad magic bytes, expected RRK1".into(),
        });
    }
    let truncated = |row: usize| {
        move |e: std::io::Error| Error::Parse {
            row,
            message: format!("truncated record: {e}"),
        }
    };
    let count = read_u32(&mut r).map_err(truncated(0))? as usize;
    let dim = read_u32(&mut r).map_err(truncated(0))? as usize;
    if count == 0 {
        return Err(Error::EmptySet);
    }
    let mut samples = Vec::with_capacity(count.min(1 << 20));
    for row in 1..=count {
        let id = read_str(&mut r, row)?;
        let writer = read_str(&mut r, row)?;
        let mut vector = Vec::with_capacity(dim);
        let mut buf = [0u8; 4];
        for _ in 0..dim {
            r.read_exact(&mut buf).map_err(truncated(row))?;
            vector.push(f32::from_le_bytes(buf));
        }
        samples.push(Sample::new(id, writer, vector));
    }
    EmbeddingSet::with_dim(dim, samples, Split::Test)
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_str<R: Read>(r: &mut R, row: usize) -> Result<String> {
    let err = |message: String| Error::Parse { row, message };
    let len = read_u32(r).map_err(|e| err(format!("truncated record: {e}")))? as usize;
    let mut bytes = vec![0u8; len];
    r.read_exact(&mut bytes)
        .map_err(|e| err(format!("truncated record: {e}")))?;
    String::from_utf8(bytes).map_err(|_| err("string is not valid UTF-8".into()))
}
