//! Named-tensor checkpoint container.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes   "EABNCKPT"
//! version      u32       currently 1
//! seed         u64       initialisation seed
//! header_len   u64       followed by header_len bytes of UTF-8 (JSON by convention)
//! count        u64       number of tensors
//! per tensor:
//!   name_len   u32, name bytes (UTF-8)
//!   init_len   u32, init description bytes (UTF-8)
//!   rank       u32
//!   dims       rank × u64
//!   values     prod(dims) × f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, TensorError};
use crate::params::{InitScheme, ParamStore};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"EABNCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    /// Human-readable description of how the tensor was initialised.
    pub init: String,
    pub tensor: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub header: String,
    pub tensors: Vec<NamedTensor>,
}

fn bad(msg: impl Into<String>) -> TensorError {
    TensorError::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn from_store(store: &ParamStore, seed: u64, header: impl Into<String>) -> Self {
        let tensors = store
            .iter()
            .map(|(_, p)| NamedTensor { name: p.name.clone(), init: p.init.describe(), tensor: p.value.clone() })
            .collect();
        Self { seed, header: header.into(), tensors }
    }

    /// Copies tensors into `store` by name. Every parameter of the store
    /// must be present with the same shape; extra tensors are an error too.
    pub fn load_into(&self, store: &mut ParamStore) -> Result<()> {
        if self.tensors.len() != store.len() {
            return Err(bad(format!("{} tensors in checkpoint, model has {}", self.tensors.len(), store.len())));
        }
        for nt in &self.tensors {
            let id = store.find(&nt.name).ok_or_else(|| bad(format!("unknown tensor {}", nt.name)))?;
            let expected = store.get(id).value.shape().to_vec();
            if nt.tensor.shape() != expected.as_slice() {
                return Err(bad(format!("{}: shape {:?}, model expects {expected:?}", nt.name, nt.tensor.shape())));
            }
            *store.value_mut(id) = nt.tensor.clone();
        }
        Ok(())
    }

    /// Builds a fresh store from the checkpoint contents.
    pub fn to_store(&self) -> Result<ParamStore> {
        let mut store = ParamStore::new();
        for nt in &self.tensors {
            store.insert(nt.name.clone(), nt.tensor.clone(), InitScheme::External)?;
        }
        Ok(store)
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.header.len() as u64).to_le_bytes())?;
        w.write_all(self.header.as_bytes())?;
        w.write_all(&(self.tensors.len() as u64).to_le_bytes())?;
        for nt in &self.tensors {
            write_str(w, &nt.name)?;
            write_str(w, &nt.init)?;
            let shape = nt.tensor.shape();
            w.write_all(&(shape.len() as u32).to_le_bytes())?;
            for &d in shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in nt.tensor.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated file"))?;
        if &magic != MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let seed = read_u64(r)?;
        let header_len = read_len(r, u64::MAX)?;
        let header = String::from_utf8(read_bytes(r, header_len)?).map_err(|_| bad("header is not UTF-8"))?;
        let count = read_len(r, u64::MAX)?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let name = read_str(r)?;
            let init = read_str(r)?;
            let rank = read_u32(r)? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(read_len(r, u64::MAX)?);
            }
            let numel = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| bad(format!("{name}: shape overflow")))?;
            let bytes = read_bytes(r, numel.checked_mul(8).ok_or_else(|| bad("tensor too large"))?)?;
            let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            tensors.push(NamedTensor { name, init, tensor: Tensor::new(shape, data)? });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(bad("trailing bytes after last tensor"));
        }
        Ok(Self { seed, header, tensors })
    }
}

fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| bad("truncated file"))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| bad("truncated file"))?;
    Ok(u64::from_le_bytes(b))
}

fn read_len(r: &mut impl Read, max: u64) -> Result<usize> {
    let v = read_u64(r)?;
    if v > max {
        return Err(bad(format!("length {v} out of range")));
    }
    usize::try_from(v).map_err(|_| bad(format!("length {v} out of range")))
}

fn read_bytes(r: &mut impl Read, len: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(bad("truncated file"));
    }
    Ok(buf)
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let len = read_u32(r)? as usize;
    String::from_utf8(read_bytes(r, len)?).map_err(|_| bad("string is not UTF-8"))
}

pub fn write_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    ckpt.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    Checkpoint::read_from(&mut r)
}
