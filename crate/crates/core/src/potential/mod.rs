//! Adiabatic trapping potential `V = μ|B|` for low-field-seeking atoms, its
//! transverse minima, saddles and harmonic frequencies.

mod minima;
mod saddle;
mod trace;
mod two_wire;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use minima::{
    find_transverse_minima, refine_minimum, MinimumPoint, SearchOptions, SearchWindow,
    TransverseHessian, Z_FLOOR,
};
pub use saddle::{barrier_height, find_saddle, SaddlePoint};
pub use trace::{trace_minima, FourthPort, MinimaTrace, TraceOptions, TraceSlice, Track};
pub use two_wire::{
    classify_two_wire, two_wire_minima, TwoWireCase, TwoWireClassification, FUSED_TOLERANCE,
};

use crate::error::{Error, Result};
use crate::field::{field_and_jacobian, total_field};
use crate::geometry::{Circuit, Vec3};
use crate::units::{AMU, BOHR_MAGNETON, MU0};

/// Mass and effective magnetic moment `g_F m_F μ_B` of a low-field seeker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomSpecies {
    /// kg
    pub mass: f64,
    /// J/T
    pub moment: f64,
}

impl AtomSpecies {
    pub fn new(mass: f64, moment: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::param("species mass must be positive"));
        }
        if !(moment >= 0.0 && moment.is_finite()) {
            return Err(Error::param("species moment must be non-negative"));
        }
        Ok(AtomSpecies { mass, moment })
    }

    /// ⁷Li with an effective moment of one Bohr magneton.
    pub fn lithium7() -> Self {
        AtomSpecies {
            mass: 7.016_003_4 * AMU,
            moment: BOHR_MAGNETON,
        }
    }
}

impl Default for AtomSpecies {
    fn default() -> Self {
        Self::lithium7()
    }
}

/// `μ |B(p)|`, J.
pub fn potential(c: &Circuit, s: &AtomSpecies, p: &Vec3) -> Result<f64> {
    Ok(s.moment * total_field(c, p)?.norm())
}

/// Potential and its gradient `μ Jᵀ B / |B|`. The gradient is set to zero
/// where the field vanishes exactly.
pub fn potential_gradient(c: &Circuit, s: &AtomSpecies, p: &Vec3) -> Result<(f64, Vec3)> {
    let (b, j) = field_and_jacobian(c, p)?;
    let bn = b.norm();
    let grad = if bn > 0.0 {
        j.tr_mul(&b) * (s.moment / bn)
    } else {
        Vec3::zeros()
    };
    Ok((s.moment * bn, grad))
}

/// Height of the side-guide minimum above a straight wire, `μ0 I / (2π B⊥)`.
/// The same expression gives the splitting distance of two parallel wires
/// carrying `I` in total.
pub fn side_guide_height(current: f64, b_perp: f64) -> Result<f64> {
    if !(current > 0.0 && current.is_finite()) {
        return Err(Error::param("current must be positive"));
    }
    if !(b_perp > 0.0 && b_perp.is_finite()) {
        return Err(Error::param("perpendicular bias must be positive"));
    }
    Ok(MU0 * current / (2.0 * PI * b_perp))
}

/// Transverse angular trap frequencies `ω_i = sqrt(h_i / m)` at a minimum,
/// ascending. Fails for conical (zero-field) or otherwise non-positive-definite
/// minima.
pub fn harmonic_frequencies(s: &AtomSpecies, m: &MinimumPoint) -> Result<(f64, f64)> {
    let h = m.hessian.as_ref().ok_or_else(|| {
        Error::DegenerateTrap(format!(
            "field vanishes at ({:.4e}, {:.4e}, {:.4e}); |B| has a conical minimum",
            m.position.x, m.position.y, m.position.z
        ))
    })?;
    let [h1, h2] = h.eigenvalues;
    if !(h1 > 0.0 && h2 > 0.0) {
        return Err(Error::DegenerateTrap(format!(
            "transverse Hessian eigenvalues {h1:.4e}, {h2:.4e} J/m² are not positive"
        )));
    }
    Ok(((h1 / s.mass).sqrt(), (h2 / s.mass).sqrt()))
}
