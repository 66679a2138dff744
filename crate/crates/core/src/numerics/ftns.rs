//! FTNS binary tensor format.
//!
//! Layout: magic `FTNS`, u8 version (=1), u8 dtype (0=f32, 1=f64), u16 rank,
//! rank x u32 extents, then the payload little-endian row-major. All integers
//! little-endian. Format errors report the byte offset of the first
//! inconsistency.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"FTNS";
pub const VERSION: u8 = 1;

/// Refuse to allocate payloads above this element count when parsing, so a
/// corrupt header cannot trigger a huge allocation.
const MAX_ELEMENTS: u64 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::F64 => 1,
        }
    }

    fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

/// A parsed FTNS payload, before any precision decision.
#[derive(Debug, Clone)]
pub struct FtnsFile {
    pub dtype: DType,
    pub shape: Vec<usize>,
    data: FtnsData,
}

#[derive(Debug, Clone)]
enum FtnsData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl FtnsFile {
    /// Widens to the f64 pipeline representation; always lossless.
    pub fn to_tensor(&self) -> Result<Tensor> {
        let data = match &self.data {
            FtnsData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            FtnsData::F64(v) => v.clone(),
        };
        Tensor::new(&self.shape, data)
    }

    /// Narrow to f32. Reading an f64 file into an f32 consumer loses
    /// precision (round-to-nearest-even via the `as` cast), so it must be
    /// explicitly allowed.
    pub fn to_f32(&self, allow_narrowing: bool) -> Result<Vec<f32>> {
        match &self.data {
            FtnsData::F32(v) => Ok(v.clone()),
            FtnsData::F64(v) => {
                if !allow_narrowing {
                    return Err(Error::Data(
                        "refusing to narrow f64 tensor to f32 without allow_narrowing".into(),
                    ));
                }
                Ok(v.iter().map(|&x| x as f32).collect())
            }
        }
    }
}

fn format_err(path: &str, offset: u64, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_string(),
        offset,
        reason: reason.into(),
    }
}

/// Serializes a tensor to FTNS bytes in the given dtype. Writing f32 rounds
/// each value to the nearest representable f32.
pub fn encode(t: &Tensor, dtype: DType) -> Result<Vec<u8>> {
    if t.rank() > u16::MAX as usize {
        return Err(Error::Data(format!("rank {} exceeds u16", t.rank())));
    }
    for &e in t.shape() {
        if e > u32::MAX as usize {
            return Err(Error::Data(format!("extent {} exceeds u32", e)));
        }
    }
    let mut out = Vec::with_capacity(8 + 4 * t.rank() + t.numel() * dtype.size());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(dtype.code());
    out.extend_from_slice(&(t.rank() as u16).to_le_bytes());
    for &e in t.shape() {
        out.extend_from_slice(&(e as u32).to_le_bytes());
    }
    match dtype {
        DType::F32 => {
            for &v in t.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        DType::F64 => {
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Parses FTNS bytes; `label` names the source in error messages.
pub fn decode(bytes: &[u8], label: &str) -> Result<FtnsFile> {
    let need = |offset: usize, n: usize| -> Result<()> {
        if bytes.len() < offset + n {
            Err(format_err(
                label,
                bytes.len() as u64,
                format!("truncated: need {} bytes at offset {}, file has {}", n, offset, bytes.len()),
            ))
        } else {
            Ok(())
        }
    };

    need(0, 4)?;
    if &bytes[0..4] != MAGIC {
        return Err(format_err(label, 0, format!("bad magic {:?}, expected \"FTNS\"", &bytes[0..4])));
    }
    need(4, 1)?;
    if bytes[4] != VERSION {
        return Err(format_err(label, 4, format!("unsupported version {}, expected {}", bytes[4], VERSION)));
    }
    need(5, 1)?;
    let dtype = match bytes[5] {
        0 => DType::F32,
        1 => DType::F64,
        other => return Err(format_err(label, 5, format!("unknown dtype code {}", other))),
    };
    need(6, 2)?;
    let rank = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    need(8, 4 * rank)?;
    let mut shape = Vec::with_capacity(rank);
    let mut numel: u64 = 1;
    for i in 0..rank {
        let off = 8 + 4 * i;
        let e = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as u64;
        numel = numel.saturating_mul(e);
        if numel > MAX_ELEMENTS {
            return Err(format_err(label, off as u64, format!("extent product exceeds {} elements", MAX_ELEMENTS)));
        }
        shape.push(e as usize);
    }
    let payload_off = 8 + 4 * rank;
    let payload_len = numel as usize * dtype.size();
    if bytes.len() != payload_off + payload_len {
        return Err(format_err(
            label,
            payload_off as u64,
            format!(
                "payload length mismatch: header implies {} bytes, file has {} after header",
                payload_len,
                bytes.len().saturating_sub(payload_off)
            ),
        ));
    }
    let data = match dtype {
        DType::F32 => {
            let mut v = Vec::with_capacity(numel as usize);
            for i in 0..numel as usize {
                let off = payload_off + 4 * i;
                v.push(f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()));
            }
            FtnsData::F32(v)
        }
        DType::F64 => {
            let mut v = Vec::with_capacity(numel as usize);
            for i in 0..numel as usize {
                let off = payload_off + 8 * i;
                v.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
            }
            FtnsData::F64(v)
        }
    };
    Ok(FtnsFile { dtype, shape, data })
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    fs::write(path, encode(t, DType::F64)?)?;
    Ok(())
}

pub fn write_tensor_f32(path: &Path, t: &Tensor) -> Result<()> {
    fs::write(path, encode(t, DType::F32)?)?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<FtnsFile> {
    let bytes = fs::read(path)?;
    decode(&bytes, &path.display().to_string())
}

/// Reads a file straight into the f64 pipeline (widening f32 losslessly).
pub fn read_tensor(path: &Path) -> Result<Tensor> {
    read_file(path)?.to_tensor()
}
