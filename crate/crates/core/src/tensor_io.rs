//! `BMBT` tensor files.
//!
//! Layout: magic `"BMBT"`, version byte (1), dtype byte (1 = f64, 2 = f32),
//! rank byte, `rank` little-endian `u64` dims, then the little-endian payload.
//! Grids are stored with rank 4 as `[T, h, w, d]`.

use std::fs;
use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::grid::Grid;
use crate::real::Real;

pub const MAGIC: [u8; 4] = *b"BMBT";
pub const VERSION: u8 = 1;
const FIXED_HEADER: usize = 7;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub dtype: u8,
    pub dims: Vec<u64>,
}

impl Header {
    pub fn byte_len(&self) -> usize {
        FIXED_HEADER + 8 * self.dims.len()
    }

    fn elements(&self) -> Result<usize, FormatError> {
        self.dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(usize::try_from(d).ok()?))
            .ok_or(FormatError::DimOverflow)
    }
}

pub fn decode_header(bytes: &[u8]) -> Result<Header, FormatError> {
    if bytes.len() < FIXED_HEADER {
        return Err(FormatError::Truncated {
            expected: FIXED_HEADER,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    if bytes[4] != VERSION {
        return Err(FormatError::UnsupportedVersion(bytes[4]));
    }
    let dtype = bytes[5];
    if dtype != f64::DTYPE && dtype != f32::DTYPE {
        return Err(FormatError::UnknownDtype(dtype));
    }
    let rank = bytes[6] as usize;
    let header_len = FIXED_HEADER + 8 * rank;
    if bytes.len() < header_len {
        return Err(FormatError::Truncated {
            expected: header_len,
            found: bytes.len(),
        });
    }
    let dims = bytes[FIXED_HEADER..header_len]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Header { dtype, dims })
}

pub fn encode_grid<R: Real>(grid: &Grid<R>) -> Vec<u8> {
    let dims = grid.dims();
    let mut out = Vec::with_capacity(FIXED_HEADER + 32 + grid.data().len() * R::BYTES);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(R::DTYPE);
    out.push(dims.len() as u8);
    for d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in grid.data() {
        v.write_le(&mut out);
    }
    out
}

pub fn decode_grid<R: Real>(bytes: &[u8]) -> Result<Grid<R>> {
    let header = decode_header(bytes)?;
    if header.dtype != R::DTYPE {
        return Err(FormatError::DtypeMismatch {
            expected: R::DTYPE,
            found: header.dtype,
        }
        .into());
    }
    if header.dims.len() != 4 {
        return Err(FormatError::RankMismatch {
            expected: 4,
            found: header.dims.len(),
        }
        .into());
    }
    let count = header.elements()?;
    let start = header.byte_len();
    let expected = count
        .checked_mul(R::BYTES)
        .and_then(|n| n.checked_add(start))
        .ok_or(FormatError::DimOverflow)?;
    if bytes.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            found: bytes.len(),
        }
        .into());
    }
    if bytes.len() > expected {
        return Err(FormatError::TrailingBytes(bytes.len() - expected).into());
    }
    let data = bytes[start..]
        .chunks_exact(R::BYTES)
        .map(R::read_le)
        .collect();
    let d = &header.dims;
    Grid::new(
        [d[0] as usize, d[1] as usize, d[2] as usize, d[3] as usize],
        data,
    )
}

pub fn write_tensor<R: Real>(grid: &Grid<R>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_grid(grid)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor<R: Real>(path: impl AsRef<Path>) -> Result<Grid<R>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_grid(&bytes)
}

/// Reads just the header, e.g. to pick a precision before decoding.
pub fn read_header(path: impl AsRef<Path>) -> Result<Header> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_header(&bytes)?)
}
