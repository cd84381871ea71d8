//! Two parallel wires with co-directed currents and an in-plane bias
//! orthogonal to them: the local model of the splitting region.
//!
//! With total current `I`, bias `B` and `d_split = μ0 I / (2π B)` the field
//! zeros are, in closed form,
//!
//! * `d < d_split`: `y = 0`, `z = (d_split ± sqrt(d_split² - d²)) / 2`
//! * `d = d_split`: a single zero at `z = d_split / 2`
//! * `d > d_split`: `y = ±sqrt(d² - d_split²) / 2`, `z = d_split / 2`

use serde::{Deserialize, Serialize};

use super::minima::{find_transverse_minima, MinimumPoint, SearchOptions, SearchWindow, Z_FLOOR};
use super::{side_guide_height, AtomSpecies};
use crate::error::{Error, Result};
use crate::geometry::{build_parallel_pair, Vec3};

/// Relative band around `d_split` classified as fused.
pub const FUSED_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoWireCase {
    /// `d < d_split`: two minima one above the other on the midline.
    StackedPair,
    /// `d = d_split`: the two minima fuse.
    Fused,
    /// `d > d_split`: one minimum above each wire.
    SideBySide,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoWireClassification {
    pub case: TwoWireCase,
    /// Wire separation, m.
    pub d: f64,
    /// m
    pub d_split: f64,
}

pub fn classify_two_wire(d: f64, total_current: f64, bias: f64) -> Result<TwoWireClassification> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::param("wire separation must be positive"));
    }
    let d_split = side_guide_height(total_current, bias)?;
    let rel = (d - d_split) / d_split;
    let case = if rel.abs() <= FUSED_TOLERANCE {
        TwoWireCase::Fused
    } else if rel < 0.0 {
        TwoWireCase::StackedPair
    } else {
        TwoWireCase::SideBySide
    };
    Ok(TwoWireClassification { case, d, d_split })
}

/// Numerical minima of the two-wire potential in the slice `x = 0`, found with
/// [`find_transverse_minima`] on long (quasi-infinite) wires. Minima below
/// [`Z_FLOOR`] are not reported.
pub fn two_wire_minima(
    d: f64,
    total_current: f64,
    bias: f64,
    species: &AtomSpecies,
    grid: usize,
) -> Result<Vec<MinimumPoint>> {
    let d_split = side_guide_height(total_current, bias)?;
    let scale = d.max(d_split);
    let c = build_parallel_pair(d, total_current, Vec3::new(0.0, bias, 0.0), 1e4 * scale)?;
    let half = 0.5 * d + d_split;
    let w = SearchWindow::new((-half, half), (Z_FLOOR, 1.5 * d_split), grid, grid)?;
    find_transverse_minima(&c, species, 0.0, &w, &SearchOptions::default())
}
