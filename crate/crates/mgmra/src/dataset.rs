//! Dataset files: the `MGMR` binary format and a CSV import.
//!
//! Binary layout, little-endian: `"MGMR"`, `u32` version, `u32` record count,
//! `u32` stripes, `u32` input dim, then per record `u32` identity, `u8`
//! modality and `stripes·dim` `f32` values in stripe-major order.

use std::fs;
use std::path::Path;

use mgmra_core::data::{Dataset, SampleRecord};

use crate::bytes::{put_u32, to_u32, Reader};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MGMR";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

/// Bytes per record for the given shape.
pub fn record_size(num_stripes: usize, input_dim: usize) -> usize {
    4 + 1 + 4 * num_stripes * input_dim
}

pub fn encode(dataset: &Dataset) -> Result<Vec<u8>> {
    let width = dataset.record_width();
    let mut out = Vec::with_capacity(HEADER_LEN + dataset.len() * record_size(dataset.num_stripes(), dataset.input_dim()));
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, to_u32(dataset.len(), "record count")?);
    put_u32(&mut out, to_u32(dataset.num_stripes(), "stripe count")?);
    put_u32(&mut out, to_u32(dataset.input_dim(), "input dim")?);
    for r in dataset.records() {
        debug_assert_eq!(r.stripes.len(), width);
        put_u32(&mut out, r.identity);
        out.push(r.modality);
        for v in &r.stripes {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses an `MGMR` image; `path` only labels errors.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Dataset> {
    let mut r = Reader::open(bytes, path, "dataset", MAGIC, VERSION)?;
    let n = r.u32("record count")? as usize;
    let stripes = r.u32("stripe count")? as usize;
    let dim = r.u32("input dim")? as usize;
    let size = record_size(stripes, dim);
    if n.checked_mul(size).is_none_or(|total| total > r.remaining()) {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            kind: "dataset",
            detail: format!("header announces {n} records of {size} bytes, {} bytes present", r.remaining()),
        });
    }
    let mut dataset = Dataset::new(stripes, dim);
    for i in 0..n {
        let identity = r.u32("identity")?;
        let modality = r.u8("modality")?;
        let stripes = r
            .take(size - 5, "record values")?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        dataset
            .push(SampleRecord {
                identity,
                modality,
                stripes,
            })
            .map_err(|e| r.malformed(format!("record {i}: {e}")))?;
    }
    r.finish()?;
    Ok(dataset)
}

pub fn write(path: &Path, dataset: &Dataset) -> Result<()> {
    fs::write(path, encode(dataset)?).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// CSV with header `id,modality,s0_d0,s0_d1,…` in stripe-major order.
pub fn read_csv(path: &Path) -> Result<Dataset> {
    let malformed = |detail: String| Error::Malformed {
        path: path.to_path_buf(),
        detail,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 3 || &header[0] != "id" || &header[1] != "modality" {
        return Err(malformed("header must start with `id,modality` and name at least one value".into()));
    }
    let (stripes, dim) = value_shape(&header, 2).map_err(malformed)?;
    let mut dataset = Dataset::new(stripes, dim);
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let at = |detail: String| malformed(format!("row {}: {detail}", line + 1));
        let identity = row[0].parse::<u32>().map_err(|e| at(format!("id: {e}")))?;
        let modality = row[1].parse::<u8>().map_err(|e| at(format!("modality: {e}")))?;
        let stripes = row
            .iter()
            .skip(2)
            .map(|v| v.parse::<f32>().map_err(|e| at(format!("value `{v}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        dataset
            .push(SampleRecord {
                identity,
                modality,
                stripes,
            })
            .map_err(|e| at(e.to_string()))?;
    }
    Ok(dataset)
}

/// Infers `(stripes, dim)` from `s{i}_d{j}` column names starting at `first`.
fn value_shape(header: &csv::StringRecord, first: usize) -> std::result::Result<(usize, usize), String> {
    let parse = |name: &str| -> Option<(usize, usize)> {
        let (s, d) = name.strip_prefix('s')?.split_once("_d")?;
        Some((s.parse().ok()?, d.parse().ok()?))
    };
    let names: Vec<&str> = header.iter().skip(first).collect();
    let (last_s, last_d) = parse(names[names.len() - 1]).ok_or_else(|| format!("bad column `{}`", names[names.len() - 1]))?;
    let (stripes, dim) = (last_s + 1, last_d + 1);
    if names.len() != stripes * dim {
        return Err(format!("{} value columns do not form {stripes}×{dim}", names.len()));
    }
    for (k, name) in names.iter().enumerate() {
        if parse(name) != Some((k / dim, k % dim)) {
            return Err(format!("column `{name}` is out of order, expected s{}_d{}", k / dim, k % dim));
        }
    }
    Ok((stripes, dim))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Malformed {
            path: path.to_path_buf(),
            detail: format!("{:?}", other),
        },
    }
}

/// Loads a `.csv` import or an `MGMR` file.
pub fn load(path: &Path) -> Result<Dataset> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(path)
    } else {
        read(path)
    }
}
