//! Binary checkpoint format.
//!
//! Layout (little-endian): magic `ENCK`, version `u16`, JSON metadata length
//! `u32` and UTF-8 JSON text, tensor count `u32`, then per tensor: name length
//! `u32`, UTF-8 name, rank `u32`, `rank` dims as `u32`, `f64` payload.
//! A SHA-256 digest of all preceding bytes closes the file.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::{ParameterSet, Tensor};

use super::ModelConfig;

const MAGIC: &[u8; 4] = b"ENCK";
const VERSION: u16 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub num_nodes: usize,
    pub num_snapshots: usize,
    /// Free-form run settings echoed alongside the model.
    #[serde(default)]
    pub extra: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: ParameterSet,
}

fn corrupt(message: impl Into<String>) -> Error {
    Error::Format {
        kind: "checkpoint",
        message: message.into(),
    }
}

pub fn write_checkpoint<W: Write>(checkpoint: &Checkpoint, mut out: W) -> Result<()> {
    let json = serde_json::to_vec(&checkpoint.meta)?;
    let mut buf = Vec::with_capacity(64 + json.len() + 8 * checkpoint.params.num_entries());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    buf.extend_from_slice(&(checkpoint.params.len() as u32).to_le_bytes());
    for (name, tensor) in checkpoint.params.iter() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(tensor.rank() as u32).to_le_bytes());
        for &d in tensor.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &x in tensor.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    out.write_all(&buf)?;
    Ok(())
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(checkpoint, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.bytes.len() - self.pos {
            return Err(corrupt("unexpected end of file"));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

/// Reads a whole checkpoint. Nothing is returned unless the entire file
/// validates.
pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if !bytes.starts_with(MAGIC) {
        return Err(corrupt("bad magic"));
    }
    if bytes.len() < MAGIC.len() + 2 + DIGEST_LEN {
        return Err(corrupt("unexpected end of file"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt("checksum mismatch"));
    }
    let mut cur = Cursor { bytes: body, pos: MAGIC.len() + 2 };
    let json_len = cur.u32()?;
    let meta: CheckpointMeta = serde_json::from_slice(cur.take(json_len)?)
        .map_err(|e| corrupt(format!("metadata: {e}")))?;
    let count = cur.u32()?;
    let mut params = ParameterSet::new();
    for _ in 0..count {
        let name_len = cur.u32()?;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| corrupt("tensor name is not UTF-8"))?
            .to_string();
        let rank = cur.u32()?;
        if rank == 0 || rank > 8 {
            return Err(corrupt(format!("tensor `{name}`: bad rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u32()?);
        }
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&l| l > 0)
            .ok_or_else(|| corrupt(format!("tensor `{name}`: bad shape {shape:?}")))?;
        let payload = cur.take(len.checked_mul(8).ok_or_else(|| corrupt("tensor too large"))?)?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = Tensor::new(shape, data).map_err(|e| corrupt(format!("tensor `{name}`: {e}")))?;
        if params.contains(&name) {
            return Err(corrupt(format!("duplicate tensor `{name}`")));
        }
        params.insert(name, tensor);
    }
    if cur.pos != body.len() {
        return Err(corrupt("trailing bytes"));
    }
    Ok(Checkpoint { meta, params })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    read_checkpoint(fs::File::open(path)?)
}
