//! Binary model checkpoints.
//!
//! ```text
//! "ERVC1"                       magic, 5 bytes
//! version: u32                  currently 1
//! count:   u32                  number of tensors
//! per tensor:
//!   name_len: u32, name: UTF-8 bytes
//!   dtype: u8                   1 = f32, 2 = f64
//!   rank: u32, dims: rank × u64
//!   values: product(dims) × dtype, IEEE-754
//! ```
//!
//! All integers and values are little-endian.

use std::fs;
use std::path::Path;

use radview_core::engine::{DType, Model, Scalar, Tensor};
use thiserror::Error;

pub const MAGIC: &[u8; 5] = b"ERVC1";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated")]
    Truncated,
    #[error("unknown dtype code {0}")]
    BadDType(u8),
    #[error("tensor name is not UTF-8")]
    BadName,
    #[error("{0} trailing bytes after last tensor")]
    TrailingBytes(usize),
    #[error("checkpoint tensor {name}: {reason}")]
    Mismatch { name: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorValues {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorValues {
    pub fn dtype(&self) -> DType {
        match self {
            TensorValues::F32(_) => DType::F32,
            TensorValues::F64(_) => DType::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorValues::F32(v) => v.len(),
            TensorValues::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bitwise equality, so NaN payloads compare too.
    pub fn bits_eq(&self, other: &TensorValues) -> bool {
        match (self, other) {
            (TensorValues::F32(a), TensorValues::F32(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (TensorValues::F64(a), TensorValues::F64(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: TensorValues,
}

impl NamedTensor {
    pub fn from_tensor<T: Scalar>(name: &str, t: &Tensor<T>) -> Self {
        let values = match T::DTYPE {
            DType::F32 => TensorValues::F32(t.data().iter().map(|v| v.as_f64() as f32).collect()),
            DType::F64 => TensorValues::F64(t.data().iter().map(|v| v.as_f64()).collect()),
        };
        NamedTensor {
            name: name.into(),
            shape: t.shape().to_vec(),
            values,
        }
    }

    /// Converts to the build precision; values are cast when dtypes differ.
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let data = match &self.values {
            TensorValues::F32(v) => v.iter().map(|&x| T::from_f64_lossy(x as f64)).collect(),
            TensorValues::F64(v) => v.iter().map(|&x| T::from_f64_lossy(x)).collect(),
        };
        Tensor::from_vec(&self.shape, data).expect("checked at decode")
    }
}

pub fn encode(tensors: &[NamedTensor]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.push(t.values.dtype() as u8);
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match &t.values {
            TensorValues::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorValues::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<NamedTensor>, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(5).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let count = r.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| CheckpointError::BadName)?
            .to_string();
        let code = r.take(1)?[0];
        let dtype = DType::from_code(code).ok_or(CheckpointError::BadDType(code))?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(16));
        for _ in 0..rank {
            shape.push(usize::try_from(r.u64()?).map_err(|_| CheckpointError::Truncated)?);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(CheckpointError::Truncated)?;
        let raw = r.take(n.checked_mul(dtype.size()).ok_or(CheckpointError::Truncated)?)?;
        let values = match dtype {
            DType::F32 => TensorValues::F32(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()),
            DType::F64 => TensorValues::F64(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
        };
        out.push(NamedTensor { name, shape, values });
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(out)
}

/// Parameters and batch-norm buffers of a model, in model order.
pub fn model_tensors<T: Scalar>(model: &Model<T>) -> Vec<NamedTensor> {
    model
        .named_tensors()
        .map(|(name, t)| NamedTensor::from_tensor(name, t))
        .collect()
}

/// Loads every tensor of the model from `tensors`; names and shapes must
/// match exactly.
pub fn load_into<T: Scalar>(model: &mut Model<T>, tensors: &[NamedTensor]) -> Result<(), CheckpointError> {
    let expected: Vec<String> = model.named_tensors().map(|(n, _)| n.to_string()).collect();
    if expected.len() != tensors.len() {
        return Err(CheckpointError::Mismatch {
            name: "*".into(),
            reason: format!("model has {} tensors, checkpoint {}", expected.len(), tensors.len()),
        });
    }
    for t in tensors {
        model
            .set_tensor(&t.name, t.to_tensor())
            .map_err(|e| CheckpointError::Mismatch {
                name: t.name.clone(),
                reason: e.to_string(),
            })?;
    }
    Ok(())
}

pub fn save(path: &Path, tensors: &[NamedTensor]) -> Result<(), CheckpointError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, encode(tensors))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<NamedTensor>, CheckpointError> {
    decode(&fs::read(path)?)
}
