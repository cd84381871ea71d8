//! Flat binary grids, used for slice potentials and mode functions.
//!
//! Little-endian throughout:
//!
//! | offset | type       | content                                   |
//! |--------|------------|-------------------------------------------|
//! | 0      | `[u8; 8]`  | magic `CGGRID01`                          |
//! | 8      | `u64` × 3  | `ny`, `nz`, number of grids `n`           |
//! | 32     | `f64` × 5  | slice `x`, `y_min`, `z_min`, `dy`, `dz` (m) |
//! | 72     | `f64` × n·ny·nz | grid `k`, node `(i, j)` at `(k·ny + i)·nz + j` |
//!
//! Node `(i, j)` sits at `(y_min + i·dy, z_min + j·dz)`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::emit::write_bytes;
use crate::modes::SliceGrid;

pub const MAGIC: &[u8; 8] = b"CGGRID01";
pub const HEADER_LEN: usize = 72;

#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub ny: usize,
    pub nz: usize,
    pub x: f64,
    pub y_min: f64,
    pub z_min: f64,
    pub dy: f64,
    pub dz: f64,
    /// Each of length `ny·nz`.
    pub grids: Vec<Vec<f64>>,
}

impl GridFile {
    /// Header of `g` with the given node values.
    pub fn for_slice(g: &SliceGrid, grids: Vec<Vec<f64>>) -> Self {
        GridFile {
            ny: g.ny,
            nz: g.nz,
            x: g.x,
            y_min: g.y_min,
            z_min: g.z_min,
            dy: g.dy,
            dz: g.dz,
            grids,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.ny * self.nz;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * n * self.grids.len());
        out.extend_from_slice(MAGIC);
        for v in [self.ny, self.nz, self.grids.len()] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for v in [self.x, self.y_min, self.z_min, self.dy, self.dz] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for g in &self.grids {
            assert_eq!(g.len(), n, "grid size must match the header");
            for v in g {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Parse {
            path: "grid".into(),
            message: m.into(),
        };
        if b.len() < HEADER_LEN || &b[..8] != MAGIC {
            return Err(bad("not a grid file"));
        }
        let u =
            |k: usize| u64::from_le_bytes(b[8 + 8 * k..16 + 8 * k].try_into().unwrap()) as usize;
        let f = |off: usize| f64::from_le_bytes(b[off..off + 8].try_into().unwrap());
        let (ny, nz, count) = (u(0), u(1), u(2));
        let n = ny
            .checked_mul(nz)
            .ok_or_else(|| bad("grid dimensions overflow"))?;
        let expected = n
            .checked_mul(count)
            .and_then(|v| v.checked_mul(8))
            .and_then(|v| v.checked_add(HEADER_LEN));
        if expected != Some(b.len()) {
            return Err(bad("file length does not match header"));
        }
        let grids = (0..count)
            .map(|k| (0..n).map(|i| f(HEADER_LEN + 8 * (k * n + i))).collect())
            .collect();
        Ok(GridFile {
            ny,
            nz,
            x: f(32),
            y_min: f(40),
            z_min: f(48),
            dy: f(56),
            dz: f(64),
            grids,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_bytes(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let b = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GridFile {
        GridFile {
            ny: 3,
            nz: 2,
            x: 1e-5,
            y_min: -2e-6,
            z_min: 1e-6,
            dy: 2e-6,
            dz: 0.5e-6,
            grids: vec![(0..6).map(|k| k as f64 * 0.1).collect(), vec![-1.0; 6]],
        }
    }

    #[test]
    fn layout_is_as_documented() {
        let b = sample().to_bytes();
        assert_eq!(b.len(), HEADER_LEN + 8 * 12);
        assert_eq!(&b[..8], MAGIC);
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(b[24..32].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(b[56..64].try_into().unwrap()), 2e-6);
        // Grid 0, node (i = 2, j = 1).
        let off = HEADER_LEN + 8 * (2 * 2 + 1);
        assert_eq!(f64::from_le_bytes(b[off..off + 8].try_into().unwrap()), 0.5);
    }

    #[test]
    fn round_trip_and_truncation() {
        let g = sample();
        let b = g.to_bytes();
        assert_eq!(GridFile::from_bytes(&b).unwrap(), g);
        assert!(GridFile::from_bytes(&b[..b.len() - 1]).is_err());
        assert!(GridFile::from_bytes(b"CGGRID02").is_err());
    }
}
