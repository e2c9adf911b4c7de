//! Per-frame feature matrices and their two wire formats: comma-separated
//! text and the little-endian `RPM1` binary layout.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Magic bytes opening every binary matrix file.
pub const BINARY_MAGIC: &[u8; 4] = b"RPM1";

/// Which appearance stream a matrix was extracted from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    /// Frame appearance features (RGB-derived).
    Spatial,
    /// Motion features (optical-flow-derived).
    Temporal,
}

impl fmt::Display for StreamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamKind::Spatial => f.write_str("spatial"),
            StreamKind::Temporal => f.write_str("temporal"),
        }
    }
}

/// Row-major matrix of per-frame feature vectors: `n_frames` rows of `dim`
/// finite values. Frames are rows; features are columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_frames: usize,
    dim: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    /// Builds a matrix after checking shape rules: at least two frames, at
    /// least one feature, `values.len() == n_frames * dim`, all values finite.
    pub fn new(n_frames: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if n_frames < 2 {
            return Err(Error::InvalidShape {
                reason: format!("need at least 2 frames, got {n_frames}"),
            });
        }
        if dim == 0 {
            return Err(Error::InvalidShape {
                reason: "feature dimension must be at least 1".to_string(),
            });
        }
        if values.len() != n_frames * dim {
            return Err(Error::InvalidShape {
                reason: format!(
                    "{} values cannot fill a {n_frames}x{dim} matrix",
                    values.len()
                ),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidShape {
                reason: format!("non-finite value at element {i}"),
            });
        }
        Ok(Self {
            n_frames,
            dim,
            values,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All values, row-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// One frame's feature vector.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Frame-wise concatenation: row `i` of the result is `self.row(i)`
    /// followed by `other.row(i)`. Frame counts must match.
    pub fn concat_features(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.n_frames != other.n_frames {
            return Err(Error::FrameCountMismatch {
                spatial: self.n_frames,
                temporal: other.n_frames,
            });
        }
        let dim = self.dim + other.dim;
        let mut values = Vec::with_capacity(self.n_frames * dim);
        for i in 0..self.n_frames {
            values.extend_from_slice(self.row(i));
            values.extend_from_slice(other.row(i));
        }
        FeatureMatrix::new(self.n_frames, dim, values)
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    match fs::read(path) {
        Ok(bytes) => Ok(bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingFile {
            path: path.to_path_buf(),
        }),
        Err(e) => Err(Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    file.write_all(bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Loads the text format: UTF-8, LF line endings, one frame per line, fields
/// separated by `,`. Every line must have the same field count and every
/// field must parse as a finite decimal number.
pub fn load_text_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })?;

    let mut values = Vec::new();
    let mut dim = 0usize;
    let mut n_frames = 0usize;
    for (line_idx, line) in text.split('\n').enumerate() {
        // A trailing newline yields one final empty segment; skip it.
        if line.is_empty() {
            continue;
        }
        n_frames += 1;
        let mut fields = 0usize;
        for (field_idx, field) in line.split(',').enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::NonNumericField {
                path: path.to_path_buf(),
                line: line_idx + 1,
                field: field_idx + 1,
                text: field.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonNumericField {
                    path: path.to_path_buf(),
                    line: line_idx + 1,
                    field: field_idx + 1,
                    text: field.to_string(),
                });
            }
            values.push(value);
            fields += 1;
        }
        if n_frames == 1 {
            dim = fields;
        } else if fields != dim {
            return Err(Error::RaggedRows {
                path: path.to_path_buf(),
                line: line_idx + 1,
                expected: dim,
                found: fields,
            });
        }
    }

    if n_frames < 2 {
        return Err(Error::TooFewFrames {
            path: path.to_path_buf(),
            found: n_frames,
        });
    }
    FeatureMatrix::new(n_frames, dim, values)
}

/// Saves the text format. Values are printed in the shortest decimal form
/// that parses back to the identical bits, so save/load round-trips exactly.
pub fn save_text_matrix(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for i in 0..m.n_frames() {
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    write_bytes(path, out.as_bytes())
}

/// Loads the binary format: magic `RPM1`, then `n_frames` and `dim` as
/// little-endian u32, then `n_frames * dim` f64 values, row-major
/// little-endian.
pub fn load_binary_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;

    if bytes.len() < 4 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: "RPM1",
        });
    }
    if bytes.len() < 12 {
        return Err(Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected: 12,
            found: bytes.len() as u64,
        });
    }
    let n_frames = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as u64;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as u64;
    let expected = 12 + n_frames * dim * 8;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    if found > expected {
        return Err(Error::TrailingBytes {
            path: path.to_path_buf(),
            extra: found - expected,
        });
    }
    if n_frames < 2 {
        return Err(Error::TooFewFrames {
            path: path.to_path_buf(),
            found: n_frames as usize,
        });
    }
    if dim == 0 {
        return Err(Error::InvalidShape {
            reason: format!("{}: feature dimension is 0", path.display()),
        });
    }

    let count = (n_frames * dim) as usize;
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let start = 12 + i * 8;
        let v = f64::from_le_bytes(bytes[start..start + 8].try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::NonFiniteValue {
                path: path.to_path_buf(),
                index: i,
            });
        }
        values.push(v);
    }
    FeatureMatrix::new(n_frames as usize, dim as usize, values)
}

/// Saves the binary format; byte-for-byte deterministic for a given matrix.
pub fn save_binary_matrix(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if m.n_frames() > u32::MAX as usize || m.dim() > u32::MAX as usize {
        return Err(Error::InvalidShape {
            reason: "matrix too large for the binary header".to_string(),
        });
    }
    let mut bytes = Vec::with_capacity(12 + m.values().len() * 8);
    bytes.extend_from_slice(BINARY_MAGIC);
    bytes.extend_from_slice(&(m.n_frames() as u32).to_le_bytes());
    bytes.extend_from_slice(&(m.dim() as u32).to_le_bytes());
    for v in m.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_bytes(path, &bytes)
}

/// Loads either format, sniffing the `RPM1` magic to pick the decoder.
pub fn load_matrix_auto(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    if bytes.len() >= 4 && &bytes[..4] == BINARY_MAGIC {
        load_binary_matrix(path)
    } else {
        load_text_matrix(path)
    }
}
