//! Binary parameter snapshot.
//!
//! Layout (little endian): 8-byte magic, `u32` version, `u32` record count,
//! then per record `u32` name length, UTF-8 name, `u32` rows, `u32` cols and
//! `rows * cols` row-major `f32` values.

use alloc::string::String;
use alloc::vec::Vec;

use super::{Matrix, ParamStore};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"THORPRM\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_params(store: &ParamStore<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + store.num_scalars() * 4);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for id in store.ids() {
        let name = store.name(id).as_bytes();
        let v = store.value(id);
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&(v.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(v.cols() as u32).to_le_bytes());
        for x in v.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Checkpoint(alloc::format!("truncated at byte {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Decode a snapshot; returns the store and the number of bytes consumed.
pub fn decode_params(bytes: &[u8]) -> Result<(ParamStore<f32>, usize)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(alloc::format!("unsupported version {version}")));
    }
    let count = r.u32()?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Checkpoint("shape overflow".into()))?;
        let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::Checkpoint("shape overflow".into()))?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        store.insert(&name, Matrix::from_vec(rows, cols, data)?)?;
    }
    Ok((store, r.pos))
}
