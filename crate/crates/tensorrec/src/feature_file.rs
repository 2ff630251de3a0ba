//! Item feature files.
//!
//! Binary layout (little-endian): the magic `TRECFEA1`, `u32 K`, `u32 Q`,
//! then `Q` records of `u16` id length, the UTF-8 id, and `K` `f32` values.
//! The text fallback has one line per item: the id followed by `K`
//! tab- or space-separated decimals.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use tensorrec_core::data::Vocab;
use tensorrec_core::features::FeatureMatrix;

use crate::error::{create, open, Error, Result};

pub const FEATURE_MAGIC: &[u8; 8] = b"TRECFEA1";

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads the binary format, placing columns at `items`' dense indices.
pub fn read_features<R: Read>(mut r: R, items: &Vocab) -> Result<FeatureMatrix> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::HeaderMismatch("truncated header".into()))?;
    if &magic != FEATURE_MAGIC {
        return Err(Error::HeaderMismatch("bad magic".into()));
    }
    let k = read_u32(&mut r)? as usize;
    let q = read_u32(&mut r)? as usize;
    let mut records = Vec::with_capacity(q);
    let mut raw = vec![0u8; 4 * k];
    for _ in 0..q {
        let mut len = [0u8; 2];
        r.read_exact(&mut len)?;
        let mut id = vec![0u8; u16::from_le_bytes(len) as usize];
        r.read_exact(&mut id)?;
        let id = String::from_utf8(id).map_err(|_| Error::HeaderMismatch("item id is not UTF-8".into()))?;
        r.read_exact(&mut raw)?;
        let values: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        records.push((id, values));
    }
    let mut tail = [0u8; 1];
    if r.read(&mut tail)? != 0 {
        return Err(Error::HeaderMismatch(format!("trailing bytes after {q} records")));
    }
    Ok(FeatureMatrix::from_records(
        k,
        records.iter().map(|(id, v)| (id.as_str(), v.as_slice())),
        items,
    )?)
}

/// Writes the binary format; values are stored as `f32`.
pub fn write_features<W: Write>(mut w: W, features: &FeatureMatrix, ids: &[String]) -> Result<()> {
    if ids.len() != features.num_items() {
        return Err(Error::HeaderMismatch(format!(
            "{} ids for {} feature columns",
            ids.len(),
            features.num_items()
        )));
    }
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&(features.dim() as u32).to_le_bytes())?;
    w.write_all(&(ids.len() as u32).to_le_bytes())?;
    for (q, id) in ids.iter().enumerate() {
        let len = u16::try_from(id.len()).map_err(|_| Error::HeaderMismatch(format!("item id too long: {id}")))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(id.as_bytes())?;
        for &x in features.item(q) {
            w.write_all(&(x as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the text fallback. `K` is taken from the first record.
pub fn read_features_text<R: BufRead>(r: R, items: &Vocab) -> Result<FeatureMatrix> {
    let mut records: Vec<(String, Vec<f64>)> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(['\t', ' ']).filter(|s| !s.is_empty());
        let id = fields.next().ok_or(Error::MalformedLine(i + 1))?;
        let values = fields
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::MalformedLine(i + 1))?;
        if values.is_empty() || records.first().is_some_and(|(_, v)| v.len() != values.len()) {
            return Err(Error::MalformedLine(i + 1));
        }
        records.push((id.to_owned(), values));
    }
    let k = records.first().map(|(_, v)| v.len()).ok_or(Error::EmptyInput)?;
    Ok(FeatureMatrix::from_records(
        k,
        records.iter().map(|(id, v)| (id.as_str(), v.as_slice())),
        items,
    )?)
}

/// Loads either format, sniffing the magic.
pub fn load_features(path: &Path, items: &Vocab) -> Result<FeatureMatrix> {
    let mut reader = BufReader::new(open(path)?);
    let binary = reader.fill_buf()?.starts_with(FEATURE_MAGIC);
    if binary {
        read_features(reader, items)
    } else {
        read_features_text(reader, items)
    }
}

pub fn save_features(path: &Path, features: &FeatureMatrix, ids: &[String]) -> Result<()> {
    write_features(std::io::BufWriter::new(create(path)?), features, ids)
}
