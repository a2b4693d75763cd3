//! Self-describing binary container used for every artifact on disk.
//!
//! Layout:
//!
//! ```text
//! magic      8 bytes   "SUBSPC01"
//! header_len u64 LE    byte length of the JSON header
//! header     JSON      {format, version, kind, encoding, meta, matrices:[{name, rows, cols, offset}]}
//! payload    f64 LE    per matrix, row-major, interleaved (re, im)
//! ```
//!
//! `offset` is the byte offset of a matrix inside the payload. Writing the
//! same container twice yields identical bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

pub const MAGIC: &[u8; 8] = b"SUBSPC01";
const FORMAT: &str = "subspace-container";
const VERSION: u32 = 1;
const ENCODING: &str = "f64-le interleaved (re, im), row-major";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedMatrix {
    pub name: String,
    pub data: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub meta: serde_json::Value,
    pub matrices: Vec<NamedMatrix>,
}

#[derive(Serialize, Deserialize)]
struct MatrixEntry {
    name: String,
    rows: usize,
    cols: usize,
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    kind: String,
    encoding: String,
    meta: serde_json::Value,
    matrices: Vec<MatrixEntry>,
}

impl Container {
    pub fn new(kind: impl Into<String>, meta: serde_json::Value) -> Self {
        Self {
            kind: kind.into(),
            meta,
            matrices: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, data: CMatrix) {
        self.matrices.push(NamedMatrix {
            name: name.into(),
            data,
        });
    }

    pub fn matrix(&self, name: &str) -> Option<&CMatrix> {
        self.matrices
            .iter()
            .find(|m| m.name == name)
            .map(|m| &m.data)
    }

    pub fn require(&self, name: &str) -> Result<&CMatrix> {
        self.matrix(name)
            .ok_or_else(|| Error::Format(format!("missing matrix '{name}' in {} container", self.kind)))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut entries = Vec::with_capacity(self.matrices.len());
        let mut offset = 0u64;
        for m in &self.matrices {
            entries.push(MatrixEntry {
                name: m.name.clone(),
                rows: m.data.nrows(),
                cols: m.data.ncols(),
                offset,
            });
            offset += (m.data.len() * 16) as u64;
        }
        let header = Header {
            format: FORMAT.to_string(),
            version: VERSION,
            kind: self.kind.clone(),
            encoding: ENCODING.to_string(),
            meta: self.meta.clone(),
            matrices: entries,
        };
        let header = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(16 + header.len() + offset as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for m in &self.matrices {
            for r in 0..m.data.nrows() {
                for c in 0..m.data.ncols() {
                    let z = m.data[(r, c)];
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let payload_start = 16usize
            .checked_add(header_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| Error::Format("truncated header".into()))?;
        let header: Header = serde_json::from_slice(&bytes[16..payload_start])?;
        if header.format != FORMAT || header.version != VERSION {
            return Err(Error::Format(format!(
                "unsupported container {} v{}",
                header.format, header.version
            )));
        }
        let payload = &bytes[payload_start..];
        let mut matrices = Vec::with_capacity(header.matrices.len());
        for e in header.matrices {
            let start = e.offset as usize;
            let len = e.rows * e.cols * 16;
            let chunk = payload
                .get(start..start + len)
                .ok_or_else(|| Error::Format(format!("matrix '{}' out of bounds", e.name)))?;
            let mut data = CMatrix::zeros(e.rows, e.cols);
            for (i, cell) in chunk.chunks_exact(16).enumerate() {
                let re = f64::from_le_bytes(cell[..8].try_into().unwrap());
                let im = f64::from_le_bytes(cell[8..].try_into().unwrap());
                data[(i / e.cols, i % e.cols)] = C64::new(re, im);
            }
            matrices.push(NamedMatrix { name: e.name, data });
        }
        Ok(Self {
            kind: header.kind,
            meta: header.meta,
            matrices,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Decodes the `meta` field into a typed value.
    pub fn meta_as<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        Ok(serde_json::from_value(self.meta.clone())?)
    }
}
