//! Transverse Schrödinger modes of the guide potential on a slice grid.
//!
//! `H = -ħ²/2m (∂²_y + ∂²_z) + V(y, z)` is discretised with 5-point finite
//! differences and Dirichlet walls just outside the grid. The lowest
//! eigenpairs come from block Lanczos with full reorthogonalisation applied
//! to `(H - σ)⁻¹`, with `σ` the grid minimum of `V`, so that the wanted
//! low-lying modes are the dominant ones. The shifted operator is applied
//! through a band Cholesky factorisation.

mod banded;
mod symmetry;

pub use symmetry::{
    cluster_modes, mirror_residuals, symmetry_check, MirrorResidual, CLUSTER_GAP,
    SYMMETRY_TOLERANCE,
};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Circuit, Vec3};
use crate::parallel::map_indexed;
use crate::potential::{potential, AtomSpecies, Z_FLOOR};
use crate::units::{BOLTZMANN, HBAR, MICROKELVIN};
use banded::BandCholesky;

/// Potential ceiling above the slice minimum: `100 k_B × 250 μK`.
pub const DEFAULT_CEILING: f64 = 100.0 * BOLTZMANN * 250.0 * MICROKELVIN;

/// Uniform grid of potential values on a transverse slice. Node `(i, j)` is at
/// `(y_min + i dy, z_min + j dz)` and stored at `i * nz + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceGrid {
    pub x: f64,
    pub y_min: f64,
    pub z_min: f64,
    pub dy: f64,
    pub dz: f64,
    pub ny: usize,
    pub nz: usize,
    /// J
    pub potential: Vec<f64>,
}

impl SliceGrid {
    /// Grid of `ny × nz` nodes spanning `y` and `z` inclusive, with values
    /// from `v(y, z)`.
    pub fn from_fn<F>(
        x: f64,
        y: (f64, f64),
        z: (f64, f64),
        ny: usize,
        nz: usize,
        v: F,
    ) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<f64>,
    {
        if ny < 3 || nz < 3 {
            return Err(Error::param("slice grid needs at least 3x3 nodes"));
        }
        if !(y.1 > y.0 && z.1 > z.0) || ![y.0, y.1, z.0, z.1].iter().all(|v| v.is_finite()) {
            return Err(Error::param("slice grid range is empty"));
        }
        let dy = (y.1 - y.0) / (ny - 1) as f64;
        let dz = (z.1 - z.0) / (nz - 1) as f64;
        let mut potential = Vec::with_capacity(ny * nz);
        for i in 0..ny {
            for j in 0..nz {
                potential.push(v(y.0 + dy * i as f64, z.0 + dz * j as f64)?);
            }
        }
        Ok(SliceGrid {
            x,
            y_min: y.0,
            z_min: z.0,
            dy,
            dz,
            ny,
            nz,
            potential,
        })
    }

    pub fn len(&self) -> usize {
        self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.potential.is_empty()
    }

    pub fn y(&self, i: usize) -> f64 {
        self.y_min + self.dy * i as f64
    }

    pub fn z(&self, j: usize) -> f64 {
        self.z_min + self.dz * j as f64
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.potential[i * self.nz + j]
    }

    pub fn min_potential(&self) -> f64 {
        self.potential.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of node `(i, j)` reflected through `y = 0`. Requires a grid
    /// centred on `y = 0`.
    pub fn mirror_index(&self, k: usize) -> usize {
        let (i, j) = (k / self.nz, k % self.nz);
        (self.ny - 1 - i) * self.nz + j
    }

    /// The node set is symmetric about `y = 0`.
    pub fn is_centred(&self) -> bool {
        let y_max = self.y(self.ny - 1);
        (self.y_min + y_max).abs() <= 1e-12 * (y_max - self.y_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub y: (f64, f64),
    pub z: (f64, f64),
    pub ny: usize,
    pub nz: usize,
    /// Cap on `V - min V`, J.
    pub ceiling: f64,
}

impl GridSpec {
    /// `n × n` nodes over `|y| <= half_width`, `z ∈ z`.
    pub fn centred(half_width: f64, z: (f64, f64), n: usize) -> Self {
        GridSpec {
            y: (-half_width, half_width),
            z,
            ny: n,
            nz: n,
            ceiling: DEFAULT_CEILING,
        }
    }
}

/// Samples `V` on the slice `x`, capping it `ceiling` above its grid minimum.
pub fn build_slice(c: &Circuit, s: &AtomSpecies, x: f64, g: &GridSpec) -> Result<SliceGrid> {
    if g.z.0 < Z_FLOOR {
        return Err(Error::param(format!(
            "slice grid reaches below z = {Z_FLOOR:e} m, onto the wires"
        )));
    }
    if !(g.ceiling > 0.0) {
        return Err(Error::param("potential ceiling must be positive"));
    }
    let mut grid = SliceGrid::from_fn(x, g.y, g.z, g.ny, g.nz, |y, z| {
        potential(c, s, &Vec3::new(x, y, z)).map_err(|e| match e {
            Error::Singularity { .. } => Error::param(format!("slice grid touches a wire: {e}")),
            e => e,
        })
    })?;
    let cap = grid.min_potential() + g.ceiling;
    for v in &mut grid.potential {
        *v = v.min(cap);
    }
    Ok(grid)
}

/// Smallest Krylov basis limit; few-mode requests still need room for the
/// unwanted part of the spectrum to separate.
pub const MIN_BASIS: usize = 200;

/// Largest accepted `‖Hψ - Eψ‖ / ‖Hψ‖`.
pub const RESIDUAL_LIMIT: f64 = 1e-6;
/// Largest accepted `|⟨ψ_i, ψ_j⟩ - δ_ij|`.
pub const ORTHONORMALITY_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub block_size: usize,
    /// Relative Ritz residual for convergence of the shifted-inverse problem.
    pub tolerance: f64,
    /// Krylov basis size limit, as a multiple of the number of modes (never
    /// below [`MIN_BASIS`]).
    pub max_basis_factor: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            block_size: 8,
            tolerance: 1e-10,
            max_basis_factor: 12,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    /// J, ascending.
    pub eigenvalues: Vec<f64>,
    /// Mode `k` on the grid layout of [`SliceGrid`], normalised so that
    /// `Σ ψ² dy dz = 1`.
    pub modes: Vec<Vec<f64>>,
    /// `‖Hψ - Eψ‖ / ‖Hψ‖` per mode.
    pub residuals: Vec<f64>,
    /// Largest `|⟨ψ_i, ψ_j⟩ - δ_ij|`.
    pub orthonormality_error: f64,
    /// RMS width of the ground state along `y` and `z`, in grid spacings.
    pub ground_width: (f64, f64),
    /// Lowest `V - V_min` on the grid boundary over `E_max - V_min`. Below
    /// about 10 the highest modes feel the walls; reported, not enforced.
    pub boundary_margin: f64,
    /// Lanczos vectors used.
    pub basis_size: usize,
}

/// `(H - offset) / (κ_y + κ_z)` with `κ = ħ²/(2m h²)` and `offset` the grid
/// minimum of `V`.
struct Hamiltonian<'a> {
    g: &'a SliceGrid,
    ky: f64,
    kz: f64,
    diag: Vec<f64>,
    offset: f64,
    scale: f64,
}

impl<'a> Hamiltonian<'a> {
    fn new(g: &'a SliceGrid, mass: f64) -> Self {
        let ky = HBAR * HBAR / (2.0 * mass * g.dy * g.dy);
        let kz = HBAR * HBAR / (2.0 * mass * g.dz * g.dz);
        let scale = ky + kz;
        let offset = g.min_potential();
        let diag = g
            .potential
            .iter()
            .map(|v| (2.0 * ky + 2.0 * kz + (v - offset)) / scale)
            .collect();
        Hamiltonian {
            g,
            ky: ky / scale,
            kz: kz / scale,
            diag,
            offset,
            scale,
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (ny, nz) = (self.g.ny, self.g.nz);
        for i in 0..ny {
            for j in 0..nz {
                let k = i * nz + j;
                let mut s = self.diag[k] * x[k];
                if j > 0 {
                    s -= self.kz * x[k - 1];
                }
                if j + 1 < nz {
                    s -= self.kz * x[k + 1];
                }
                if i > 0 {
                    s -= self.ky * x[k - nz];
                }
                if i + 1 < ny {
                    s -= self.ky * x[k + nz];
                }
                out[k] = s;
            }
        }
    }

    /// Entry `[k][l]` for `l <= k` within the band.
    fn entry(&self, k: usize, l: usize) -> f64 {
        let nz = self.g.nz;
        if k == l {
            self.diag[k]
        } else if k - l == 1 && !k.is_multiple_of(nz) {
            -self.kz
        } else if k - l == nz {
            -self.ky
        } else {
            0.0
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the components along `basis` (two passes); returns the summed
/// coefficients.
fn orthogonalise(basis: &[Vec<f64>], w: &mut [f64]) -> Vec<f64> {
    let mut coef = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (c, q) in coef.iter_mut().zip(basis) {
            let a = dot(q, w);
            axpy(-a, q, w);
            *c += a;
        }
    }
    coef
}

/// The lowest `n` eigenpairs of the slice Hamiltonian for a particle of
/// `mass`, with default solver options.
pub fn solve_modes(g: &SliceGrid, mass: f64, n: usize) -> Result<ModeSet> {
    solve_modes_with(g, mass, n, &SolverOptions::default())
}

pub fn solve_modes_with(
    g: &SliceGrid,
    mass: f64,
    n: usize,
    opts: &SolverOptions,
) -> Result<ModeSet> {
    let dim = g.len();
    if n == 0 {
        return Err(Error::param("number of modes must be at least one"));
    }
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::param("mass must be positive"));
    }
    if opts.block_size == 0 || !(opts.tolerance > 0.0) {
        return Err(Error::param("invalid solver options"));
    }
    if g.potential.len() != dim || g.potential.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("slice potential must be finite on every node"));
    }
    let p = opts.block_size.min(dim);
    let max_basis = ((opts.max_basis_factor * n).max(MIN_BASIS) + 2 * p).min(dim);
    if n > max_basis {
        return Err(Error::param("more modes requested than grid nodes"));
    }

    // The kinetic term is positive definite, so the shift by min V keeps the
    // operator positive definite.
    let h = Hamiltonian::new(g, mass);
    let chol = BandCholesky::factor(dim, g.nz, |k, l| h.entry(k, l))?;
    let op = |v: &[f64]| {
        let mut x = v.to_vec();
        chol.solve(&mut x);
        x
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut random_unit = |basis: &[Vec<f64>], extra: &[Vec<f64>]| -> Vec<f64> {
        loop {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
            orthogonalise(basis, &mut v);
            orthogonalise(extra, &mut v);
            let nv = norm(&v);
            if nv > 1e-8 {
                v.iter_mut().for_each(|x| *x /= nv);
                return v;
            }
        }
    };

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut block: Vec<Vec<f64>> = Vec::new();
    for _ in 0..p {
        let v = random_unit(&basis, &block);
        block.push(v);
    }
    // Projected operator, filled column by column.
    let mut t = DMatrix::<f64>::zeros(max_basis + p, max_basis + p);
    let mut result = None;

    while basis.len() + p <= max_basis + p && !block.is_empty() {
        let j0 = basis.len();
        basis.append(&mut block);
        let ws: Vec<Vec<f64>> = map_indexed(p, |c| op(&basis[j0 + c]));
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(p);
        let mut r = DMatrix::<f64>::zeros(p, p);
        let scale = ws.iter().map(|w| norm(w)).fold(0.0, f64::max);
        for (c, mut w) in ws.into_iter().enumerate() {
            let coef = orthogonalise(&basis, &mut w);
            for (k, a) in coef.into_iter().enumerate() {
                t[(k, j0 + c)] = a;
            }
            let coef = orthogonalise(&next, &mut w);
            for (d, a) in coef.into_iter().enumerate() {
                r[(d, c)] = a;
            }
            let nw = norm(&w);
            if nw > 1e-12 * scale {
                r[(next.len(), c)] = nw;
                w.iter_mut().for_each(|x| *x /= nw);
                next.push(w);
            } else {
                // Invariant subspace reached in this direction: continue
                // with a fresh random vector.
                let v = random_unit(&basis, &next);
                next.push(v);
            }
        }
        let m = basis.len();
        for c in 0..p {
            for d in 0..p {
                t[(m + d, j0 + c)] = r[(d, c)];
            }
        }
        if m >= n {
            let tm = t.view((0, 0), (m, m)).into_owned();
            let sym = (&tm + tm.transpose()) * 0.5;
            let eig = SymmetricEigen::new(sym);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let wanted = &order[..n];
            let theta_max = eig.eigenvalues[order[0]].abs();
            let converged = wanted.iter().all(|&k| {
                let y = eig.eigenvectors.column(k);
                let mut res2 = 0.0;
                for d in 0..p {
                    let mut s = 0.0;
                    for c in 0..p {
                        s += r[(d, c)] * y[j0 + c];
                    }
                    res2 += s * s;
                }
                res2.sqrt() <= opts.tolerance * theta_max
            });
            if converged || m + p > max_basis {
                result = Some((eig, order, converged));
                break;
            }
        }
        block = next;
    }

    let (eig, order, converged) = result.ok_or_else(|| Error::Solver {
        message: "Lanczos basis exhausted before any Ritz values were formed".into(),
        residual: f64::NAN,
    })?;
    let m = basis.len();
    let area = g.dy * g.dz;
    let mut eigenvalues = Vec::with_capacity(n);
    let mut modes = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    let mut hx = vec![0.0; dim];
    for &k in &order[..n] {
        let y = eig.eigenvectors.column(k);
        let mut psi = vec![0.0; dim];
        for i in 0..m {
            axpy(y[i], &basis[i], &mut psi);
        }
        let nv = norm(&psi);
        psi.iter_mut().for_each(|x| *x /= nv);
        let lambda = 1.0 / eig.eigenvalues[k];
        h.apply(&psi, &mut hx);
        let (mut res, mut hn) = (0.0, 0.0);
        let shift = h.offset / h.scale;
        for (a, b) in hx.iter().zip(&psi) {
            res += (a - lambda * b).powi(2);
            hn += (a + shift * b).powi(2);
        }
        residuals.push((res / hn).sqrt());
        eigenvalues.push(h.offset + lambda * h.scale);
        modes.push(psi);
    }
    // The Ritz estimate is only a stopping rule; acceptance is judged on
    // the true residuals of the assembled vectors.
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    if worst >= RESIDUAL_LIMIT {
        let why = if converged {
            "Ritz pairs converged but the assembled residual is too large"
        } else {
            "eigenpairs did not converge"
        };
        return Err(Error::Solver {
            message: format!("{why} within {m} Lanczos vectors ({n} modes requested)"),
            residual: worst,
        });
    }

    let mut ortho = 0.0_f64;
    for a in 0..n {
        for b in a..n {
            let d = dot(&modes[a], &modes[b]) - if a == b { 1.0 } else { 0.0 };
            ortho = ortho.max(d.abs());
        }
    }
    if ortho >= ORTHONORMALITY_LIMIT {
        return Err(Error::Solver {
            message: format!("modes lost orthonormality ({ortho:.3e})"),
            residual: worst,
        });
    }
    let ground_width = rms_width(g, &modes[0]);
    if ground_width.0 < 4.0 || ground_width.1 < 4.0 {
        return Err(Error::Precondition(format!(
            "grid too coarse: ground state spans {:.1} x {:.1} spacings (rms), at least 4 needed",
            ground_width.0, ground_width.1
        )));
    }
    let eigenvalues_max = eigenvalues[n - 1];
    let inv = 1.0 / area.sqrt();
    for psi in &mut modes {
        psi.iter_mut().for_each(|x| *x *= inv);
    }
    Ok(ModeSet {
        eigenvalues,
        modes,
        residuals,
        orthonormality_error: ortho,
        ground_width,
        boundary_margin: boundary_margin(g, eigenvalues_max),
        basis_size: m,
    })
}

fn boundary_margin(g: &SliceGrid, e_max: f64) -> f64 {
    let vmin = g.min_potential();
    let mut edge = f64::INFINITY;
    for i in 0..g.ny {
        for j in 0..g.nz {
            if i == 0 || j == 0 || i + 1 == g.ny || j + 1 == g.nz {
                edge = edge.min(g.value(i, j) - vmin);
            }
        }
    }
    edge / (e_max - vmin)
}

/// RMS extent of `|ψ|²` (unit vector norm) along `y` and `z`, in spacings.
fn rms_width(g: &SliceGrid, psi: &[f64]) -> (f64, f64) {
    let (mut my, mut mz, mut syy, mut szz) = (0.0, 0.0, 0.0, 0.0);
    for (k, v) in psi.iter().enumerate() {
        let w = v * v;
        let (i, j) = ((k / g.nz) as f64, (k % g.nz) as f64);
        my += w * i;
        mz += w * j;
        syy += w * i * i;
        szz += w * j * j;
    }
    (
        (syy - my * my).max(0.0).sqrt(),
        (szz - mz * mz).max(0.0).sqrt(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WireSegment;
    use crate::potential::{
        find_transverse_minima, harmonic_frequencies, side_guide_height, SearchWindow,
    };
    use crate::units::GAUSS;

    const MASS: f64 = 1.165e-26;

    /// Isotropic 1 kHz oscillator on `n × n` nodes over ±`l` oscillator
    /// lengths.
    fn harmonic(n: usize, l: f64) -> (SliceGrid, f64) {
        let omega = 2.0 * std::f64::consts::PI * 1e3;
        let ell = (HBAR / (MASS * omega)).sqrt();
        let half = l * ell;
        let g = SliceGrid::from_fn(0.0, (-half, half), (-half, half), n, n, |y, z| {
            Ok(0.5 * MASS * omega * omega * (y * y + z * z))
        })
        .unwrap();
        (g, HBAR * omega)
    }

    #[test]
    fn harmonic_spectrum_and_degeneracy() {
        let (g, hw) = harmonic(256, 6.0);
        let m = solve_modes(&g, MASS, 15).unwrap();
        let mut k = 0;
        for shell in 0..5 {
            for _ in 0..=shell {
                let e = m.eigenvalues[k] / hw;
                let expected = (shell + 1) as f64;
                assert!(
                    (e / expected - 1.0).abs() < 5e-3,
                    "mode {k}: {e} vs {expected}"
                );
                k += 1;
            }
        }
        assert!(m.orthonormality_error < 1e-8);
        // Edge of the box at 6 oscillator lengths: V = 18 ħω against E = 5 ħω.
        assert!(
            (m.boundary_margin - 18.0 / 5.0).abs() < 0.01,
            "{}",
            m.boundary_margin
        );
        assert!(m.residuals.iter().all(|&r| r < 1e-6));
        // Normalisation on the continuum measure.
        let norm2: f64 = m.modes[0].iter().map(|v| v * v).sum::<f64>() * g.dy * g.dz;
        assert!((norm2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refinement_converges_from_above() {
        let (g1, hw) = harmonic(64, 5.0);
        let (g2, _) = harmonic(127, 5.0);
        let a = solve_modes(&g1, MASS, 10).unwrap();
        let b = solve_modes(&g2, MASS, 10).unwrap();
        let exact = [1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 4.0, 4.0, 4.0, 4.0];
        for k in 0..10 {
            let ea = (a.eigenvalues[k] / hw - exact[k]).abs();
            let eb = (b.eigenvalues[k] / hw - exact[k]).abs();
            assert!(eb < ea, "mode {k}: {eb} vs {ea}");
        }
    }

    #[test]
    fn deterministic() {
        let (g, _) = harmonic(64, 5.0);
        let a = solve_modes(&g, MASS, 6).unwrap();
        let b = solve_modes(&g, MASS, 6).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let (g, _) = harmonic(16, 7.0);
        assert!(matches!(
            solve_modes(&g, MASS, 2),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn bad_inputs() {
        let (g, _) = harmonic(20, 7.0);
        assert!(solve_modes(&g, MASS, 0).is_err());
        assert!(solve_modes(&g, -1.0, 1).is_err());
    }

    #[test]
    fn build_slice_checks() {
        let w = WireSegment::new(Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), 0.8).unwrap();
        let c = Circuit::new(vec![w], Vec3::new(3.0 * GAUSS, 12.0 * GAUSS, 0.0)).unwrap();
        let s = AtomSpecies::lithium7();
        let r0 = side_guide_height(0.8, 12.0 * GAUSS).unwrap();
        let mut spec = GridSpec::centred(r0, (0.0, 2.0 * r0), 11);
        assert!(build_slice(&c, &s, 0.0, &spec).is_err());
        spec.z = (0.5 * r0, 1.5 * r0);
        let g = build_slice(&c, &s, 0.0, &spec).unwrap();
        assert!(g.is_centred());
        let k = 5 * 11 + 5;
        assert_eq!(g.y(5), 0.0);
        assert!((g.z(5) - r0).abs() < 1e-18);
        assert_eq!(g.potential[k], g.min_potential());
        assert!(g
            .potential
            .iter()
            .all(|&v| v <= g.min_potential() + DEFAULT_CEILING));

        let flat = build_slice(
            &Circuit::bias_only(Vec3::new(0.0, GAUSS, 0.0)),
            &s,
            0.0,
            &spec,
        )
        .unwrap();
        assert!(flat.potential.iter().all(|&v| v == flat.potential[0]));
    }

    #[test]
    fn ioffe_guide_ground_spacing_matches_trap_frequency() {
        let w = WireSegment::new(Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), 0.8).unwrap();
        let c = Circuit::new(vec![w], Vec3::new(3.0 * GAUSS, 12.0 * GAUSS, 0.0)).unwrap();
        let s = AtomSpecies::lithium7();
        let r0 = side_guide_height(0.8, 12.0 * GAUSS).unwrap();
        let win = SearchWindow::symmetric(2.0 * r0, 2.5 * r0, 41).unwrap();
        let m0 = find_transverse_minima(&c, &s, 0.0, &win, &Default::default()).unwrap()[0];
        let (w1, w2) = harmonic_frequencies(&s, &m0).unwrap();
        let ell = (HBAR / (s.mass * w1)).sqrt();
        let half = 8.0 * ell;
        let spec = GridSpec {
            y: (-half, half),
            z: (m0.position.z - half, m0.position.z + half),
            ny: 101,
            nz: 101,
            ceiling: DEFAULT_CEILING,
        };
        let g = build_slice(&c, &s, 0.0, &spec).unwrap();
        let m = solve_modes(&g, s.mass, 3).unwrap();
        let gap = (m.eigenvalues[1] - m.eigenvalues[0]) / (HBAR * w1.min(w2));
        assert!((gap - 1.0).abs() < 0.02, "{gap}");
    }
}
