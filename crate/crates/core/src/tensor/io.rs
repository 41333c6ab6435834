//! CFT1 tensor files.
//!
//! Little-endian layout:
//!
//! ```text
//! "CFT1"            4 bytes magic
//! dtype             u8   (1 = f32, 2 = u32)
//! ndim              u8   (2 or 3)
//! extents           ndim × u32
//! payload           product(extents) × 4 bytes, row-major, channel-fastest
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::grid::check_dims;
use super::{DenseGrid, LabelMap};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CFT1";
pub const DTYPE_F32: u8 = 1;
pub const DTYPE_U32: u8 = 2;

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Accept NaN and infinities in the payload.
    pub allow_nonfinite: bool,
}

struct Header {
    dims: Vec<usize>,
    payload_offset: usize,
}

fn read_header(bytes: &[u8], want_dtype: u8) -> Result<Header> {
    if bytes.len() < 6 {
        return Err(Error::HeaderTruncated {
            needed: 6,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    if bytes[4] != want_dtype {
        return Err(Error::UnsupportedDtype {
            code: bytes[4],
            expected: want_dtype,
        });
    }
    let ndim = bytes[5] as usize;
    if !(2..=3).contains(&ndim) {
        return Err(Error::BadRank(ndim));
    }
    let payload_offset = 6 + 4 * ndim;
    if bytes.len() < payload_offset {
        return Err(Error::HeaderTruncated {
            needed: payload_offset,
            found: bytes.len(),
        });
    }
    let dims: Vec<usize> = bytes[6..payload_offset]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    check_dims(&dims)?;
    let expected = dims
        .iter()
        .try_fold(4usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::ShapeMismatch(format!("extents {dims:?} overflow")))?;
    let found = bytes.len() - payload_offset;
    if found < expected {
        return Err(Error::PayloadTruncated { expected, found });
    }
    if found > expected {
        return Err(Error::TrailingBytes {
            extra: found - expected,
        });
    }
    Ok(Header {
        dims,
        payload_offset,
    })
}

fn write_header(out: &mut Vec<u8>, dtype: u8, dims: &[usize]) {
    out.extend_from_slice(&MAGIC);
    out.push(dtype);
    out.push(dims.len() as u8);
    for &d in dims {
        let d = u32::try_from(d).expect("extent exceeds u32");
        out.extend_from_slice(&d.to_le_bytes());
    }
}

pub fn decode_grid(bytes: &[u8], opts: LoadOptions) -> Result<DenseGrid> {
    let header = read_header(bytes, DTYPE_F32)?;
    let data: Vec<f32> = bytes[header.payload_offset..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let grid = DenseGrid::new(header.dims, data)?;
    if !opts.allow_nonfinite {
        if let Some(index) = grid.first_non_finite() {
            return Err(Error::NonFinite { index });
        }
    }
    Ok(grid)
}

pub fn encode_grid(grid: &DenseGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(6 + 4 * grid.dims().len() + 4 * grid.data().len());
    write_header(&mut out, DTYPE_F32, grid.dims());
    for v in grid.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_labels(bytes: &[u8]) -> Result<LabelMap> {
    let header = read_header(bytes, DTYPE_U32)?;
    if header.dims.len() != 2 {
        return Err(Error::BadRank(header.dims.len()));
    }
    let data = bytes[header.payload_offset..]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    LabelMap::new(header.dims[0], header.dims[1], data)
}

pub fn encode_labels(labels: &LabelMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(14 + 4 * labels.data().len());
    write_header(&mut out, DTYPE_U32, &[labels.height(), labels.width()]);
    for v in labels.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<DenseGrid> {
    load_grid_with(path, LoadOptions::default())
}

pub fn load_grid_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<DenseGrid> {
    decode_grid(&read_file(path.as_ref())?, opts)
}

pub fn save_grid(grid: &DenseGrid, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_grid(grid))
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    decode_labels(&read_file(path.as_ref())?)
}

pub fn save_labels(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_labels(labels))
}

/// Binary PGM (P5) with the class index as the gray level.
pub fn write_pgm(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(32 + labels.data().len());
    write!(out, "P5\n{} {}\n255\n", labels.width(), labels.height()).unwrap();
    for (pixel, &label) in labels.data().iter().enumerate() {
        let gray = u8::try_from(label).map_err(|_| Error::LabelOutOfRange {
            label,
            pixel,
            classes: 256,
        })?;
        out.push(gray);
    }
    write_file(path, &out)
}
