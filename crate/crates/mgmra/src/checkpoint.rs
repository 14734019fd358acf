//! `MGCK` checkpoint files.
//!
//! Layout, little-endian: `"MGCK"`, `u32` version, `u32` tensor count, then
//! per tensor `u32` name length, UTF-8 name, `u32` rows, `u32` cols and
//! `rows·cols` `f64` values, row-major.

use std::fs;
use std::path::Path;

use mgmra_core::numerics::Matrix;
use mgmra_core::trainer::Checkpoint;

use crate::bytes::{put_u32, to_u32, Reader};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MGCK";
pub const VERSION: u32 = 1;

pub fn encode_tensors(tensors: &[(String, Matrix)]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, to_u32(tensors.len(), "tensor count")?);
    for (name, m) in tensors {
        put_u32(&mut out, to_u32(name.len(), "name length")?);
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, to_u32(m.rows(), "rows")?);
        put_u32(&mut out, to_u32(m.cols(), "cols")?);
        for v in m.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_tensors(bytes: &[u8], path: &Path) -> Result<Vec<(String, Matrix)>> {
    let mut r = Reader::open(bytes, path, "checkpoint", MAGIC, VERSION)?;
    let count = r.u32("tensor count")?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "tensor name")?)
            .map_err(|e| r.malformed(format!("tensor name is not UTF-8: {e}")))?
            .to_owned();
        let rows = r.u32("rows")? as usize;
        let cols = r.u32("cols")? as usize;
        let n = rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).ok_or_else(|| r.malformed(format!("tensor {name} is too large")))?;
        let data = r
            .take(n, &format!("tensor {name}"))?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        out.push((name, Matrix::from_vec(rows, cols, data)?));
    }
    r.finish()?;
    Ok(out)
}

pub fn encode(checkpoint: &Checkpoint) -> Result<Vec<u8>> {
    encode_tensors(&checkpoint.to_tensors())
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let tensors = decode_tensors(bytes, path)?;
    Checkpoint::from_tensors(tensors).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

pub fn save(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    fs::write(path, encode(checkpoint)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
