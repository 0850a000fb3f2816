//! Binary parameter file.
//!
//! ```text
//! magic "CFOC" | u32 version | u32 tensor count
//! per tensor: u32 name length | name bytes | u32 rank | u32 dims... | f32 data
//! ```
//! All integers and floats are little-endian.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{tensor_layout, ModelParams};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CFOC";
pub const VERSION: u32 = 1;

pub fn encode_params(p: &ModelParams<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * p.num_parameters() + 256);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let layout = tensor_layout();
    out.extend_from_slice(&(layout.len() as u32).to_le_bytes());
    for ((name, dims), data) in layout.iter().zip(p.tensors()) {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
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
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_params(bytes: &[u8]) -> Result<ModelParams<f32>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let layout = tensor_layout();
    let count = r.u32()? as usize;
    if count != layout.len() {
        return Err(Error::Format(format!("expected {} tensors, found {count}", layout.len())));
    }
    let mut p = ModelParams::<f32>::zeros();
    for ((name, dims), dst) in layout.iter().zip(p.tensors_mut()) {
        let len = r.u32()? as usize;
        let got = String::from_utf8_lossy(r.take(len)?);
        if got != *name {
            return Err(Error::Format(format!("expected tensor {name}, found {got}")));
        }
        let rank = r.u32()? as usize;
        let mut got_dims = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            got_dims.push(r.u32()? as usize);
        }
        if got_dims != *dims {
            return Err(Error::Format(format!("tensor {name}: shape {got_dims:?}, expected {dims:?}")));
        }
        let raw = r.take(4 * dst.len())?;
        for (v, b) in dst.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(b.try_into().unwrap());
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(p)
}
