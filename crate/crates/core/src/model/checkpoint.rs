//! Checkpoint files: a text manifest (config + step) followed by every
//! parameter tensor as an embedded FTNS blob.
//!
//! Layout, all integers little-endian:
//!   "FCKP" | version u8 | manifest_len u32 | manifest utf-8 |
//!   tensor_count u32 | repeat { name_len u16 | name | blob_len u32 | blob }

use crate::error::{Error, Result};
use crate::model::config::FactConfig;
use crate::model::params::FactParams;
use crate::numerics::ftns::{self, DType};
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 4] = b"FCKP";
const VERSION: u8 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: FactParams,
    pub step: u64,
}

pub fn encode_checkpoint(params: &FactParams, step: u64) -> Result<Vec<u8>> {
    let manifest = format!("{}step={}\n", params.config.to_kv(), step);
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, tensor) in params.names().iter().zip(params.tensors()) {
        let blob = ftns::encode(tensor, DType::F64)?;
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(blob.len() as u32).to_le_bytes());
        out.extend_from_slice(&blob);
    }
    Ok(out)
}

pub fn save_checkpoint(path: &Path, params: &FactParams, step: u64) -> Result<()> {
    fs::write(path, encode_checkpoint(params, step)?)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> Reader<'a> {
    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.clone(),
            offset: self.pos as u64,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.fail(format!(
                "truncated: need {n} bytes for {what}, {} remain",
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_checkpoint(bytes: &[u8], label: &str) -> Result<Checkpoint> {
    let mut r = Reader {
        bytes,
        pos: 0,
        path: label.to_string(),
    };
    if r.take(4, "magic")? != MAGIC {
        r.pos = 0;
        return Err(r.fail("bad magic, expected FCKP"));
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(r.fail(format!("unsupported version {version}")));
    }
    let manifest_len = r.u32("manifest length")? as usize;
    let manifest_at = r.pos;
    let manifest = std::str::from_utf8(r.take(manifest_len, "manifest")?).map_err(|e| Error::Format {
        path: label.to_string(),
        offset: manifest_at as u64,
        reason: format!("manifest is not utf-8: {e}"),
    })?;

    let mut config = FactConfig::desk();
    let mut step = None;
    for line in manifest.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Format {
            path: label.to_string(),
            offset: manifest_at as u64,
            reason: format!("manifest line {line:?} is not key=value"),
        })?;
        if key == "step" {
            step = Some(value.parse::<u64>().map_err(|_| Error::Format {
                path: label.to_string(),
                offset: manifest_at as u64,
                reason: format!("bad step value {value:?}"),
            })?);
        } else {
            config.apply_kv(key, value).map_err(|e| Error::Format {
                path: label.to_string(),
                offset: manifest_at as u64,
                reason: e.to_string(),
            })?;
        }
    }
    let step = step.ok_or_else(|| Error::Format {
        path: label.to_string(),
        offset: manifest_at as u64,
        reason: "manifest missing step".to_string(),
    })?;

    let count = r.u32("tensor count")? as usize;
    let mut names = Vec::with_capacity(count);
    let mut tensors = Vec::with_capacity(count);
    for i in 0..count {
        let name_len = r.u16("name length")? as usize;
        let name_at = r.pos;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|e| Error::Format {
                path: label.to_string(),
                offset: name_at as u64,
                reason: format!("tensor {i} name is not utf-8: {e}"),
            })?
            .to_string();
        let blob_len = r.u32("blob length")? as usize;
        let blob_at = r.pos;
        let blob = r.take(blob_len, "tensor blob")?;
        let tensor = ftns::decode(blob, &format!("{label}[{name}]"))
            .and_then(|f| f.to_tensor())
            .map_err(|e| Error::Format {
                path: label.to_string(),
                offset: blob_at as u64,
                reason: format!("tensor {name:?}: {e}"),
            })?;
        names.push(name);
        tensors.push(tensor.with_grad());
    }
    if r.pos != bytes.len() {
        return Err(r.fail(format!("{} trailing bytes", bytes.len() - r.pos)));
    }

    let params = FactParams::from_parts(config, names, tensors).map_err(|e| Error::Format {
        path: label.to_string(),
        offset: 0,
        reason: format!("catalog mismatch: {e}"),
    })?;
    Ok(Checkpoint { params, step })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    decode_checkpoint(&bytes, &path.display().to_string())
}
