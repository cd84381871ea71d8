//! Left–right (`y → -y`) symmetry of computed modes.
//!
//! Individual vectors of a (near-)degenerate cluster are an arbitrary basis of
//! the cluster subspace, so clusters are compared through their spectral
//! projector `P = Σ ψψᵀ`: `‖P - MPM‖_F / ‖P‖_F`, with `M` the mirror. Modes
//! outside clusters use the density residual `‖ρ - Mρ‖ / ‖ρ‖`, `ρ = ψ²`.

use serde::{Deserialize, Serialize};

use super::{ModeSet, SliceGrid};
use crate::error::{Error, Result};

/// Neighbouring eigenvalues closer than this fraction of the reference level
/// spacing belong to one cluster.
pub const CLUSTER_GAP: f64 = 1e-3;

/// Largest `|V(y, z) - V(-y, z)|`, relative to the potential range, of a
/// slice accepted as symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorResidual {
    pub mode: usize,
    /// First mode of the cluster containing `mode`.
    pub cluster_start: usize,
    pub cluster_size: usize,
    pub residual: f64,
}

/// Groups consecutive eigenvalues closer than `gap`.
pub fn cluster_modes(eigenvalues: &[f64], gap: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (k, e) in eigenvalues.iter().enumerate() {
        match out.last_mut() {
            Some(c) if e - eigenvalues[c[c.len() - 1]] < gap => c.push(k),
            _ => out.push(vec![k]),
        }
    }
    out
}

/// Mean level spacing of the computed spectrum, the reference for clusters.
fn mean_spacing(m: &ModeSet) -> f64 {
    let n = m.eigenvalues.len();
    if n < 2 {
        return f64::INFINITY;
    }
    (m.eigenvalues[n - 1] - m.eigenvalues[0]) / (n - 1) as f64
}

/// Mirror residual of every mode; clusters are formed with an absolute
/// eigenvalue `gap` (J). The slice itself need not be symmetric, only its
/// node set.
pub fn mirror_residuals(g: &SliceGrid, m: &ModeSet, gap: f64) -> Result<Vec<MirrorResidual>> {
    if !g.is_centred() {
        return Err(Error::param(
            "mirror residuals need a grid centred on y = 0",
        ));
    }
    let area = g.dy * g.dz;
    let mirror: Vec<usize> = (0..g.len()).map(|k| g.mirror_index(k)).collect();
    let mut out = Vec::with_capacity(m.modes.len());
    for cluster in cluster_modes(&m.eigenvalues, gap) {
        let size = cluster.len();
        let residual = if size == 1 {
            let psi = &m.modes[cluster[0]];
            let (mut diff, mut total) = (0.0, 0.0);
            for (k, &mk) in mirror.iter().enumerate() {
                let (a, b) = (psi[k] * psi[k], psi[mk] * psi[mk]);
                diff += (a - b).powi(2);
                total += a * a;
            }
            (diff / total).sqrt()
        } else {
            // ‖P - MPM‖² = 2 ‖(1 - P) M Ψ‖², evaluated on the vectors to
            // avoid the cancellation in 2 (|C| - ‖Ψᵀ M Ψ‖²).
            let mut outside = 0.0;
            for &a in &cluster {
                let pa = &m.modes[a];
                let mut v: Vec<f64> = mirror.iter().map(|&mk| pa[mk]).collect();
                for &b in &cluster {
                    let pb = &m.modes[b];
                    let o: f64 = pb.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>() * area;
                    v.iter_mut().zip(pb).for_each(|(y, x)| *y -= o * x);
                }
                outside += v.iter().map(|y| y * y).sum::<f64>() * area;
            }
            (2.0 * outside / size as f64).sqrt()
        };
        for &k in &cluster {
            out.push(MirrorResidual {
                mode: k,
                cluster_start: cluster[0],
                cluster_size: size,
                residual,
            });
        }
    }
    Ok(out)
}

/// Mirror residuals of a slice that must itself be symmetric; clusters use
/// [`CLUSTER_GAP`] times the mean level spacing.
pub fn symmetry_check(g: &SliceGrid, m: &ModeSet) -> Result<Vec<MirrorResidual>> {
    if !g.is_centred() {
        return Err(Error::Precondition(
            "slice grid is not centred on y = 0".into(),
        ));
    }
    let vmin = g.min_potential();
    let range = g.potential.iter().map(|v| v - vmin).fold(0.0, f64::max);
    let worst = (0..g.len())
        .map(|k| (g.potential[k] - g.potential[g.mirror_index(k)]).abs())
        .fold(0.0, f64::max);
    if worst > SYMMETRY_TOLERANCE * range.max(f64::MIN_POSITIVE) {
        return Err(Error::Precondition(format!(
            "slice is not mirror symmetric: |V(y) - V(-y)| reaches {:.3e} of the potential range",
            worst / range
        )));
    }
    mirror_residuals(g, m, CLUSTER_GAP * mean_spacing(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::solve_modes;
    use crate::units::HBAR;

    const MASS: f64 = 1.165e-26;

    #[test]
    fn clusters() {
        let c = cluster_modes(&[0.0, 1.0, 1.0005, 2.0, 2.0002, 2.0004, 3.0], 1e-3);
        assert_eq!(c, vec![vec![0], vec![1, 2], vec![3, 4, 5], vec![6]]);
    }

    fn well(shift: f64, n: usize) -> SliceGrid {
        let omega = 2.0 * std::f64::consts::PI * 1e3;
        let ell = (HBAR / (MASS * omega)).sqrt();
        let h = 5.0 * ell;
        SliceGrid::from_fn(0.0, (-h, h), (-h, h), n, n, |y, z| {
            let y = y - shift * ell;
            Ok(0.5 * MASS * omega * omega * (y * y + 1.3 * z * z))
        })
        .unwrap()
    }

    #[test]
    fn symmetric_well_has_tiny_residuals() {
        let g = well(0.0, 72);
        let m = solve_modes(&g, MASS, 12).unwrap();
        let r = symmetry_check(&g, &m).unwrap();
        assert_eq!(r.len(), 12);
        assert!(r.iter().all(|x| x.residual < 1e-6), "{r:?}");
    }

    #[test]
    fn shifted_well_is_rejected_or_asymmetric() {
        let g = well(0.5, 72);
        let m = solve_modes(&g, MASS, 4).unwrap();
        assert!(matches!(
            symmetry_check(&g, &m),
            Err(Error::Precondition(_))
        ));
        let r = mirror_residuals(&g, &m, 0.0).unwrap();
        assert!(r.iter().all(|x| x.residual > 1e-3), "{r:?}");
    }

    #[test]
    fn degenerate_pair_compared_as_projector() {
        // Isotropic well: (1,0) and (0,1) are exactly degenerate; any rotation
        // of the pair is an eigenbasis but the projector stays symmetric.
        let omega = 2.0 * std::f64::consts::PI * 1e3;
        let ell = (HBAR / (MASS * omega)).sqrt();
        let h = 5.0 * ell;
        let g = SliceGrid::from_fn(0.0, (-h, h), (-h, h), 72, 72, |y, z| {
            Ok(0.5 * MASS * omega * omega * (y * y + z * z))
        })
        .unwrap();
        let mut m = solve_modes(&g, MASS, 3).unwrap();
        let (a, b) = (m.modes[1].clone(), m.modes[2].clone());
        let (c, s) = (0.6_f64, 0.8_f64);
        m.modes[1] = a.iter().zip(&b).map(|(x, y)| c * x + s * y).collect();
        m.modes[2] = a.iter().zip(&b).map(|(x, y)| -s * x + c * y).collect();
        let r = symmetry_check(&g, &m).unwrap();
        assert_eq!(r[1].cluster_size, 2);
        assert!(r[1].residual < 1e-6, "{r:?}");
        // Without clustering the rotated vectors look asymmetric.
        let raw = mirror_residuals(&g, &m, 0.0).unwrap();
        assert!(raw[1].residual > 1e-2, "{raw:?}");
    }

    #[test]
    fn off_centre_grid_is_rejected() {
        let g = SliceGrid::from_fn(0.0, (0.0, 1.0), (0.0, 1.0), 5, 5, |_, _| Ok(0.0)).unwrap();
        let m = ModeSet {
            eigenvalues: vec![0.0],
            modes: vec![vec![0.0; 25]],
            residuals: vec![0.0],
            orthonormality_error: 0.0,
            ground_width: (0.0, 0.0),
            boundary_margin: 0.0,
            basis_size: 1,
        };
        assert!(mirror_residuals(&g, &m, 0.0).is_err());
        assert!(symmetry_check(&g, &m).is_err());
    }
}
