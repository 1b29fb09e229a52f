//! Versioned binary checkpoint container.
//!
//! ```text
//! "FCKP"            magic
//! u32               format version
//! u64               FNV-1a hash of the header text
//! u32 + bytes       header text (the model spec, JSON)
//! u32               tensor count
//! per tensor:
//!   u32 + bytes     name
//!   u8              dtype (0 = f32, 1 = f64)
//!   u8              kind (0 = trainable, 1 = buffer)
//!   u32             rank, then u64 per extent
//!   payload         little-endian elements
//! u32               CRC-32 of everything above
//! ```
//!
//! All integers are little-endian.

use std::path::Path;

use thiserror::Error;

use super::param::{Module, ParamKind};
use super::tensor::{DType, Scalar, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("checkpoint checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { stored: u32, computed: u32 },
    #[error("checkpoint header hash mismatch")]
    HeaderHash,
    #[error("checkpoint has malformed field: {0}")]
    Malformed(String),
    #[error("checkpoint is missing tensor `{0}`")]
    Missing(String),
    #[error("checkpoint has unexpected tensor `{0}`")]
    Unexpected(String),
    #[error("tensor `{name}` has shape {found:?}, model expects {expected:?}")]
    ShapeMismatch {
        name: String,
        found: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("tensor `{name}` stored as {found:?}, model expects {expected:?}")]
    DTypeMismatch {
        name: String,
        found: DType,
        expected: DType,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// FNV-1a, 64-bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredTensor {
    pub name: String,
    pub dtype: DType,
    pub kind: ParamKind,
    pub shape: Vec<usize>,
    pub payload: Vec<u8>,
}

impl StoredTensor {
    pub fn elements(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn to_tensor<T: Scalar>(&self) -> Result<Tensor<T>, CheckpointError> {
        if self.dtype != T::DTYPE {
            return Err(CheckpointError::DTypeMismatch {
                name: self.name.clone(),
                found: self.dtype,
                expected: T::DTYPE,
            });
        }
        let w = self.dtype.size();
        let data = self.payload.chunks_exact(w).map(T::read_le).collect();
        Tensor::from_vec(&self.shape, data).map_err(|e| CheckpointError::Malformed(e.to_string()))
    }
}

/// Decoded checkpoint contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: String,
    pub tensors: Vec<StoredTensor>,
}

impl Checkpoint {
    pub fn from_module<T: Scalar, M: Module<T> + ?Sized>(module: &M, header: &str) -> Self {
        let mut tensors = Vec::new();
        module.visit("", &mut |name, p| {
            let mut payload = Vec::with_capacity(p.value.len() * T::DTYPE.size());
            for &v in p.value.data() {
                v.write_le(&mut payload);
            }
            tensors.push(StoredTensor {
                name: name.to_string(),
                dtype: T::DTYPE,
                kind: p.kind,
                shape: p.value.shape().to_vec(),
                payload,
            });
        });
        Self {
            header: header.to_string(),
            tensors,
        }
    }

    /// Total number of trainable scalars stored.
    pub fn trainable_elements(&self) -> usize {
        self.tensors
            .iter()
            .filter(|t| t.kind == ParamKind::Trainable)
            .map(StoredTensor::elements)
            .sum()
    }

    /// Copies stored values into `module`. Names, shapes and dtypes must
    /// match exactly.
    pub fn load_into<T: Scalar, M: Module<T> + ?Sized>(
        &self,
        module: &mut M,
    ) -> Result<(), CheckpointError> {
        let mut seen = 0usize;
        let mut err = None;
        module.visit_mut("", &mut |name, p| {
            if err.is_some() {
                return;
            }
            let Some(stored) = self.tensors.iter().find(|t| t.name == name) else {
                err = Some(CheckpointError::Missing(name.to_string()));
                return;
            };
            seen += 1;
            if stored.shape != p.value.shape() {
                err = Some(CheckpointError::ShapeMismatch {
                    name: name.to_string(),
                    found: stored.shape.clone(),
                    expected: p.value.shape().to_vec(),
                });
                return;
            }
            match stored.to_tensor::<T>() {
                Ok(t) => p.value = t,
                Err(e) => err = Some(e),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        if seen != self.tensors.len() {
            let names = module.param_names();
            let extra = self
                .tensors
                .iter()
                .find(|t| !names.contains(&t.name))
                .map(|t| t.name.clone())
                .unwrap_or_default();
            return Err(CheckpointError::Unexpected(extra));
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&fnv1a64(self.header.as_bytes()).to_le_bytes());
        put_bytes(&mut out, self.header.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            put_bytes(&mut out, t.name.as_bytes());
            out.push(t.dtype as u8);
            out.push(match t.kind {
                ParamKind::Trainable => 0,
                ParamKind::Buffer => 1,
            });
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            out.extend_from_slice(&t.payload);
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let mut r = Reader { bytes, pos: 4 };
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        if bytes.len() < 8 {
            return Err(CheckpointError::Truncated {
                offset: bytes.len(),
            });
        }
        let body_end = bytes.len() - 4;
        let stored = u32::from_le_bytes(bytes[body_end..].try_into().expect("4 bytes"));
        let computed = crc32fast::hash(&bytes[..body_end]);
        let r_checked = |r: &Reader| r.pos <= body_end;
        let hash = r.u64()?;
        let header = r.bytes_prefixed()?;
        let header = String::from_utf8(header.to_vec())
            .map_err(|_| CheckpointError::Malformed("header utf-8".into()))?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let name = String::from_utf8(r.bytes_prefixed()?.to_vec())
                .map_err(|_| CheckpointError::Malformed("tensor name utf-8".into()))?;
            let dtype = DType::from_code(r.u8()?)
                .ok_or_else(|| CheckpointError::Malformed(format!("dtype of `{name}`")))?;
            let kind = match r.u8()? {
                0 => ParamKind::Trainable,
                1 => ParamKind::Buffer,
                _ => return Err(CheckpointError::Malformed(format!("kind of `{name}`"))),
            };
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                shape.push(r.u64()? as usize);
            }
            let len = shape
                .iter()
                .try_fold(dtype.size(), |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| CheckpointError::Malformed(format!("shape of `{name}`")))?;
            let payload = r.take(len)?.to_vec();
            tensors.push(StoredTensor {
                name,
                dtype,
                kind,
                shape,
                payload,
            });
        }
        if !r_checked(&r) {
            return Err(CheckpointError::Truncated {
                offset: bytes.len(),
            });
        }
        if r.pos != body_end {
            // Either trailing garbage or a truncated trailer; the checksum decides.
            if r.pos > body_end {
                return Err(CheckpointError::Truncated {
                    offset: bytes.len(),
                });
            }
        }
        if stored != computed {
            return Err(CheckpointError::Checksum { stored, computed });
        }
        if hash != fnv1a64(header.as_bytes()) {
            return Err(CheckpointError::HeaderHash);
        }
        Ok(Self { header, tensors })
    }

    pub fn write(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CheckpointError> {
        Self::decode(&std::fs::read(path)?)
    }
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_le_bytes());
    out.extend_from_slice(b);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        // The trailing CRC is never part of a field.
        let limit = self.bytes.len().saturating_sub(4);
        let end = self.pos.checked_add(n).filter(|&e| e <= limit);
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(CheckpointError::Truncated {
                offset: self.bytes.len(),
            }),
        }
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn bytes_prefixed(&mut self) -> Result<&'a [u8], CheckpointError> {
        let n = self.u32()? as usize;
        self.take(n)
    }
}
