// SPDX-License-Identifier: MIT OR Apache-2.0

//! The VATD1 tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "VATD1\n"                      6 bytes magic
//! header_len                     u32
//! header                         UTF-8 JSON, header_len bytes
//! zero padding                   up to the next 64-byte file offset
//! payload                        f32 tensors, each at a 64-byte aligned
//!                                offset relative to the payload start,
//!                                zero padding between tensors
//! checksum                       u64 FNV-1a over the payload bytes
//! ```
//!
//! The header is `{"format":"VATD1","version":1,"metadata":{..},
//! "payload_bytes":N,"tensors":[{"name","shape","dtype":"f32","byte_offset"}]}`.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VassError};
use crate::numerics::DenseMatrix;

pub const MAGIC: &[u8; 6] = b"VATD1\n";
pub const VERSION: u32 = 1;
pub const ALIGN: usize = 64;

/// One named `f32` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(VassError::InvalidData(format!(
                "tensor `{name}` has shape {shape:?} ({expected} values) but {} values",
                data.len()
            )));
        }
        Ok(Self { name, shape, data })
    }

    /// Narrows a matrix to `f32` storage.
    pub fn from_matrix(name: impl Into<String>, m: &DenseMatrix) -> Self {
        Self {
            name: name.into(),
            shape: vec![m.rows(), m.cols()],
            data: m.data().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn from_vector(name: impl Into<String>, v: &[f64]) -> Self {
        Self {
            name: name.into(),
            shape: vec![v.len()],
            data: v.iter().map(|&x| x as f32).collect(),
        }
    }

    /// Widens a rank-2 tensor to an `f64` matrix (rank-1 becomes one row).
    pub fn to_matrix(&self) -> Result<DenseMatrix> {
        let (rows, cols) = match self.shape.as_slice() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            other => {
                return Err(VassError::InvalidData(format!(
                    "tensor `{}` has rank {}, expected 1 or 2",
                    self.name,
                    other.len()
                )))
            }
        };
        DenseMatrix::new(rows, cols, self.data.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn to_vec_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }
}

/// A set of tensors plus string metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TensorDump {
    pub metadata: BTreeMap<String, String>,
    pub tensors: Vec<Tensor>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    metadata: BTreeMap<String, String>,
    payload_bytes: u64,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    byte_offset: u64,
}

fn align_up(n: usize) -> usize {
    n.div_ceil(ALIGN) * ALIGN
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl TensorDump {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn push(&mut self, tensor: Tensor) {
        self.tensors.push(tensor);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Like [`get`](Self::get) but reports a missing tensor as an error.
    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| VassError::NotFound(format!("tensor `{name}`")))
    }

    /// Serialises to the VATD1 byte layout.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut names = HashSet::new();
        let mut entries = Vec::with_capacity(self.tensors.len());
        let mut offset = 0usize;
        for t in &self.tensors {
            if !names.insert(t.name.as_str()) {
                return Err(VassError::DuplicateId(t.name.clone()));
            }
            let expected: usize = t.shape.iter().product();
            if expected != t.data.len() {
                return Err(VassError::InvalidData(format!(
                    "tensor `{}` shape {:?} does not match {} values",
                    t.name,
                    t.shape,
                    t.data.len()
                )));
            }
            offset = align_up(offset);
            entries.push(TensorEntry {
                name: t.name.clone(),
                shape: t.shape.clone(),
                dtype: "f32".into(),
                byte_offset: offset as u64,
            });
            offset += t.data.len() * 4;
        }
        let payload_len = offset;
        let header = Header {
            format: "VATD1".into(),
            version: VERSION,
            metadata: self.metadata.clone(),
            payload_bytes: payload_len as u64,
            tensors: entries,
        };
        let header_bytes = serde_json::to_vec(&header)?;
        let header_len = u32::try_from(header_bytes.len())
            .map_err(|_| VassError::Header("header exceeds 4 GiB".into()))?;

        let payload_start = align_up(MAGIC.len() + 4 + header_bytes.len());
        let mut out = Vec::with_capacity(payload_start + payload_len + 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&header_len.to_le_bytes());
        out.extend_from_slice(&header_bytes);
        out.resize(payload_start, 0);
        for (t, e) in self.tensors.iter().zip(&header.tensors) {
            out.resize(payload_start + e.byte_offset as usize, 0);
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.resize(payload_start + payload_len, 0);
        let checksum = fnv1a64(&out[payload_start..]);
        out.extend_from_slice(&checksum.to_le_bytes());
        Ok(out)
    }

    /// Parses and validates VATD1 bytes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(VassError::BadMagic);
        }
        let len_end = MAGIC.len() + 4;
        if bytes.len() < len_end {
            return Err(VassError::Header("file ends inside header length".into()));
        }
        let header_len =
            u32::from_le_bytes(bytes[MAGIC.len()..len_end].try_into().expect("4 bytes")) as usize;
        let header_end = len_end
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| VassError::Header("file ends inside header".into()))?;
        let raw: serde_json::Value = serde_json::from_slice(&bytes[len_end..header_end])
            .map_err(|e| VassError::Header(e.to_string()))?;
        if let Some(v) = raw.get("version") {
            if v.as_u64() != Some(u64::from(VERSION)) {
                return Err(VassError::UnsupportedVersion {
                    found: v.to_string(),
                    supported: VERSION.to_string(),
                });
            }
        }
        let header: Header =
            serde_json::from_value(raw).map_err(|e| VassError::Header(e.to_string()))?;
        if header.format != "VATD1" {
            return Err(VassError::Header(format!("format tag `{}`", header.format)));
        }

        let payload_start = align_up(header_end);
        let payload_len = usize::try_from(header.payload_bytes)
            .map_err(|_| VassError::Header("payload too large".into()))?;
        let expected_total = payload_start + payload_len + 8;
        if bytes.len() < expected_total {
            return Err(VassError::Checksum(format!(
                "truncated: {} bytes present, {} declared",
                bytes.len(),
                expected_total
            )));
        }
        if bytes.len() > expected_total {
            return Err(VassError::Header(format!(
                "{} trailing bytes after checksum",
                bytes.len() - expected_total
            )));
        }
        if bytes[header_end..payload_start].iter().any(|&b| b != 0) {
            return Err(VassError::Header("non-zero header padding".into()));
        }
        let payload = &bytes[payload_start..payload_start + payload_len];
        let stored = u64::from_le_bytes(
            bytes[payload_start + payload_len..].try_into().expect("8 bytes"),
        );
        let actual = fnv1a64(payload);
        if stored != actual {
            return Err(VassError::Checksum(format!(
                "stored {stored:016x}, computed {actual:016x}"
            )));
        }

        let mut names = HashSet::new();
        let mut cursor = 0usize;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in header.tensors {
            if e.dtype != "f32" {
                return Err(VassError::Header(format!("tensor `{}` has dtype {}", e.name, e.dtype)));
            }
            if !names.insert(e.name.clone()) {
                return Err(VassError::DuplicateId(e.name));
            }
            let off = e.byte_offset as usize;
            if !off.is_multiple_of(ALIGN) {
                return Err(VassError::Header(format!("tensor `{}` offset {off} unaligned", e.name)));
            }
            if off < cursor {
                return Err(VassError::Header(format!("tensor `{}` overlaps its predecessor", e.name)));
            }
            let count = e
                .shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| VassError::Header(format!("tensor `{}` shape overflows", e.name)))?;
            let end = off
                .checked_add(count * 4)
                .filter(|&end| end <= payload_len)
                .ok_or_else(|| VassError::Header(format!("tensor `{}` exceeds payload", e.name)))?;
            let data = payload[off..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            tensors.push(Tensor {
                name: e.name,
                shape: e.shape,
                data,
            });
            cursor = end;
        }
        Ok(Self {
            metadata: header.metadata,
            tensors,
        })
    }
}

pub fn write_tensor_dump(dump: &TensorDump, path: &Path) -> Result<()> {
    super::write_atomic(path, &dump.to_bytes()?)
}

pub fn read_tensor_dump(path: &Path) -> Result<TensorDump> {
    TensorDump::from_bytes(&std::fs::read(path)?)
}
