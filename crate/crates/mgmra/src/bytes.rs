//! Little-endian cursor shared by the binary formats.

use std::path::Path;

use crate::{Error, Result};

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
    kind: &'static str,
}

impl<'a> Reader<'a> {
    /// Checks the magic and version, leaving the cursor after them.
    pub(crate) fn open(bytes: &'a [u8], path: &'a Path, kind: &'static str, magic: &[u8; 4], version: u32) -> Result<Self> {
        if bytes.len() < 4 && magic.starts_with(bytes) {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                kind,
                detail: "file ends inside the magic".into(),
            });
        }
        if &bytes[..4.min(bytes.len())] != magic {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                kind,
            });
        }
        let mut r = Reader {
            bytes,
            pos: 4,
            path,
            kind,
        };
        let found = r.u32("version")?;
        if found != version {
            return Err(Error::VersionMismatch {
                path: path.to_path_buf(),
                kind,
                found,
                expected: version,
            });
        }
        Ok(r)
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                kind: self.kind,
                detail: format!("{what} needs {n} bytes at offset {}, {} remain", self.pos, self.remaining()),
            });
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn malformed(&self, detail: impl Into<String>) -> Error {
        Error::Malformed {
            path: self.path.to_path_buf(),
            detail: detail.into(),
        }
    }

    pub(crate) fn finish(self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(self.malformed(format!("{} trailing bytes after the {} payload", self.remaining(), self.kind)));
        }
        Ok(())
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Converts a count to the on-disk `u32`.
pub(crate) fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Core(mgmra_core::Error::Contract(format!("{what} {v} does not fit in u32"))))
}
