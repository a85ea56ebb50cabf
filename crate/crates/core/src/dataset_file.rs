//! Binary container for windowed datasets.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "BWDS"
//! 4       2           version (u16) = 1
//! 6       4           N  window count (u32)
//! 10      4           W  window length in samples (u32)
//! 14      4           C  class count (u32)
//! 18      4           S  window step (u32)
//! 22      ...         C class names, each u16 byte length + UTF-8 bytes
//! ...     2           positive class index (u16)
//! ...     N*W*3*4     window values, f32, window-major then time then (x, y, z)
//! ...     N*2         label indices (u16)
//! ```
//!
//! The file ends exactly after the label block.

use thiserror::Error;

use crate::window::{ClassMap, Window, WindowSource, WindowedDataset, CHANNELS};

pub const MAGIC: &[u8; 4] = b"BWDS";
pub const VERSION: u16 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetFileError {
    #[error("not a windowed dataset file (bad magic)")]
    BadMagic,
    #[error("unsupported dataset version {0}")]
    UnsupportedVersion(u16),
    #[error("dataset file truncated while reading {0}")]
    Truncated(&'static str),
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("class name is not UTF-8")]
    BadUtf8,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u16, classes: usize },
    #[error("invalid header: {0}")]
    InvalidHeader(String),
}

pub fn encode(ds: &WindowedDataset) -> Vec<u8> {
    let n = ds.len();
    let w = ds.window_size;
    let mut out = Vec::with_capacity(64 + n * (w * CHANNELS * 4 + 2));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [n, w, ds.class_map.len(), ds.step] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for name in ds.class_map.names() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    out.extend_from_slice(&(ds.class_map.positive() as u16).to_le_bytes());
    for win in &ds.windows {
        debug_assert_eq!(win.values.len(), w);
        for row in &win.values {
            for v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    for win in &ds.windows {
        out.extend_from_slice(&(win.label_index as u16).to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], DatasetFileError> {
        let end = self.pos.checked_add(n).ok_or(DatasetFileError::Truncated(what))?;
        let s = self.buf.get(self.pos..end).ok_or(DatasetFileError::Truncated(what))?;
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, DatasetFileError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, DatasetFileError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<WindowedDataset, DatasetFileError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic").map_err(|_| DatasetFileError::BadMagic)? != MAGIC {
        return Err(DatasetFileError::BadMagic);
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(DatasetFileError::UnsupportedVersion(version));
    }
    let n = r.u32("window count")? as usize;
    let w = r.u32("window size")? as usize;
    let c = r.u32("class count")? as usize;
    let s = r.u32("step")? as usize;
    if w == 0 || s == 0 || s > w {
        return Err(DatasetFileError::InvalidHeader(format!("window {w}, step {s}")));
    }

    let mut names = Vec::with_capacity(c.min(1024));
    for _ in 0..c {
        let len = r.u16("class name length")? as usize;
        let raw = r.take(len, "class name")?;
        names.push(String::from_utf8(raw.to_vec()).map_err(|_| DatasetFileError::BadUtf8)?);
    }
    let positive = r.u16("positive class")? as usize;
    let class_map =
        ClassMap::from_parts(names, positive).map_err(|e| DatasetFileError::InvalidHeader(e.to_string()))?;

    let value_bytes = n
        .checked_mul(w * CHANNELS * 4)
        .ok_or(DatasetFileError::Truncated("window values"))?;
    let values = r.take(value_bytes, "window values")?;
    let labels = r.take(n * 2, "labels")?;
    if r.pos != bytes.len() {
        return Err(DatasetFileError::TrailingBytes(bytes.len() - r.pos));
    }

    let mut windows = Vec::with_capacity(n);
    for (k, (chunk, label)) in values
        .chunks_exact(w * CHANNELS * 4)
        .zip(labels.chunks_exact(2))
        .enumerate()
    {
        let label = u16::from_le_bytes([label[0], label[1]]);
        if label as usize >= c {
            return Err(DatasetFileError::LabelOutOfRange { label, classes: c });
        }
        let rows = chunk
            .chunks_exact(CHANNELS * 4)
            .map(|row| {
                let mut out = [0f32; CHANNELS];
                for (slot, b) in out.iter_mut().zip(row.chunks_exact(4)) {
                    *slot = f32::from_le_bytes(b.try_into().unwrap());
                }
                out
            })
            .collect();
        windows.push(Window {
            values: rows,
            label_index: label as usize,
            source: WindowSource { segment: 0, offset: k },
        });
    }
    Ok(WindowedDataset {
        windows,
        class_map,
        window_size: w,
        step: s,
    })
}
