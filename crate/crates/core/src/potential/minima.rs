use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use serde::{Deserialize, Serialize};

use super::{potential_gradient, AtomSpecies};
use crate::error::{Error, Result};
use crate::field::{field_and_jacobian, total_field};
use crate::geometry::{Circuit, Vec3};

/// Lowest height searched for minima, m. The thin-wire field diverges in
/// the chip plane.
pub const Z_FLOOR: f64 = 1e-6;

/// Two refined minima closer than this are the same minimum, m.
const POSITION_TOLERANCE: f64 = 1e-8;

/// Rectangular region of a transverse slice `x = const` together with the
/// coarse scan resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchWindow {
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub ny: usize,
    pub nz: usize,
}

impl SearchWindow {
    pub fn new(y: (f64, f64), z: (f64, f64), ny: usize, nz: usize) -> Result<Self> {
        let w = SearchWindow {
            y_min: y.0,
            y_max: y.1,
            z_min: z.0,
            z_max: z.1,
            ny,
            nz,
        };
        w.validate()?;
        Ok(w)
    }

    /// Symmetric window `|y| <= half_width`, `Z_FLOOR <= z <= z_max`.
    pub fn symmetric(half_width: f64, z_max: f64, n: usize) -> Result<Self> {
        Self::new((-half_width, half_width), (Z_FLOOR, z_max), n, n)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.y_min, self.y_max, self.z_min, self.z_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.y_max > self.y_min) || !(self.z_max > self.z_min) {
            return Err(Error::param("search window is empty"));
        }
        if self.z_min < Z_FLOOR {
            return Err(Error::param(format!(
                "search window reaches below the {Z_FLOOR:e} m floor"
            )));
        }
        if self.ny < 3 || self.nz < 3 {
            return Err(Error::param("search grid needs at least 3x3 nodes"));
        }
        Ok(())
    }

    fn y_at(&self, i: usize) -> f64 {
        self.y_min + (self.y_max - self.y_min) * i as f64 / (self.ny - 1) as f64
    }

    fn z_at(&self, j: usize) -> f64 {
        self.z_min + (self.z_max - self.z_min) * j as f64 / (self.nz - 1) as f64
    }

    pub fn spacing(&self) -> (f64, f64) {
        (
            (self.y_max - self.y_min) / (self.ny - 1) as f64,
            (self.z_max - self.z_min) / (self.nz - 1) as f64,
        )
    }

    fn contains(&self, y: f64, z: f64, slack: f64) -> bool {
        y >= self.y_min - slack
            && y <= self.y_max + slack
            && z >= self.z_min - slack
            && z <= self.z_max + slack
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Gradient scale `G` (T/m) for the convergence test `|∇V| < 1e-9 μ G`.
    /// Defaults to `|bias| / z_max` of the window.
    pub gradient_scale: Option<f64>,
}

/// Eigen-decomposition of the 2x2 transverse Hessian of `V` in `(y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransverseHessian {
    /// Ascending, J/m².
    pub eigenvalues: [f64; 2],
    /// Unit eigenvectors as `(y, z)` pairs, matching `eigenvalues`.
    pub axes: [[f64; 2]; 2],
}

impl TransverseHessian {
    fn from_matrix(h: Matrix2<f64>) -> Self {
        let sym = (h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let (a, b) = if eig.eigenvalues[0] <= eig.eigenvalues[1] {
            (0, 1)
        } else {
            (1, 0)
        };
        let axis = |k: usize| {
            let v = eig.eigenvectors.column(k);
            // Fix the sign so that results are reproducible: first nonzero
            // component positive.
            let s = if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
                -1.0
            } else {
                1.0
            };
            [s * v[0], s * v[1]]
        };
        TransverseHessian {
            eigenvalues: [eig.eigenvalues[a], eig.eigenvalues[b]],
            axes: [axis(a), axis(b)],
        }
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        let mut m = Matrix2::zeros();
        for k in 0..2 {
            let v = Vector2::new(self.axes[k][0], self.axes[k][1]);
            m += v * v.transpose() * self.eigenvalues[k];
        }
        m
    }
}

/// A local minimum of `V` restricted to a transverse slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimumPoint {
    pub position: Vec3,
    /// J
    pub potential: f64,
    /// |B| at the minimum, T.
    pub field: f64,
    /// In-slice `|∇V|` at the reported position, J/m. Zero for conical minima.
    pub gradient_norm: f64,
    /// `None` when the field vanishes at the minimum (quadrupole line), where
    /// `|B|` is conical rather than quadratic.
    pub hessian: Option<TransverseHessian>,
}

impl MinimumPoint {
    pub fn is_conical(&self) -> bool {
        self.hessian.is_none()
    }
}

fn at(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z)
}

/// `f = |B|²` and its in-slice gradient `2 J_tᵀ B`.
fn field_sq(c: &Circuit, p: &Vec3) -> Result<(f64, Vector2<f64>, Vec3, f64)> {
    let (b, j) = field_and_jacobian(c, p)?;
    let g = Vector2::new(
        2.0 * (j[(0, 1)] * b.x + j[(1, 1)] * b.y + j[(2, 1)] * b.z),
        2.0 * (j[(0, 2)] * b.x + j[(1, 2)] * b.y + j[(2, 2)] * b.z),
    );
    Ok((b.norm_squared(), g, b, j.norm()))
}

fn fd_hessian<F>(grad: F, y: f64, z: f64, h: f64) -> Result<Matrix2<f64>>
where
    F: Fn(f64, f64) -> Result<Vector2<f64>>,
{
    let gyp = grad(y + h, z)?;
    let gym = grad(y - h, z)?;
    let gzp = grad(y, z + h)?;
    let gzm = grad(y, z - h)?;
    let cy = (gyp - gym) / (2.0 * h);
    let cz = (gzp - gzm) / (2.0 * h);
    let m = Matrix2::new(cy[0], cz[0], cy[1], cz[1]);
    Ok((m + m.transpose()) * 0.5)
}

fn fd_step(b: f64, jnorm: f64) -> f64 {
    let ell = if jnorm > 0.0 { b / jnorm } else { 1e-6 };
    (1e-4 * ell).clamp(1e-11, 1e-8)
}

fn gradient_scale(c: &Circuit, w: &SearchWindow, opts: &SearchOptions) -> f64 {
    opts.gradient_scale
        .unwrap_or_else(|| c.bias.norm() / w.z_max)
        .max(1e-300)
}

/// Local descent on `|B|²` in the slice `x = const`, started at `(y, z)`.
/// Returns `None` if the iterate leaves the window or does not settle.
pub fn refine_minimum(
    c: &Circuit,
    s: &AtomSpecies,
    x: f64,
    start: (f64, f64),
    window: &SearchWindow,
    opts: &SearchOptions,
) -> Result<Option<MinimumPoint>> {
    match descend(c, x, start, window, opts)? {
        Some((y, z)) => classify_point(c, s, x, y, z),
        None => Ok(None),
    }
}

/// Stationary point of `|B|²` reached by damped Newton descent from `start`.
fn descend(
    c: &Circuit,
    x: f64,
    start: (f64, f64),
    window: &SearchWindow,
    opts: &SearchOptions,
) -> Result<Option<(f64, f64)>> {
    let gtol = 1e-9 * gradient_scale(c, window, opts);
    let (dy, dz) = window.spacing();
    let max_step = 2.0 * dy.max(dz);
    let (mut y, mut z) = start;
    let mut lambda = 0.0_f64;
    let mut converged = false;
    let grad_f = |yy: f64, zz: f64| -> Result<Vector2<f64>> { Ok(field_sq(c, &at(x, yy, zz))?.1) };

    for _ in 0..200 {
        let (f, g, _, jn) = field_sq(c, &at(x, y, z))?;
        let bn = f.sqrt();
        // Field zero reached: conical minimum.
        if bn <= 1e-12 * (c.bias.norm() + jn * 1e-6) {
            converged = true;
            break;
        }
        // In-slice |∇V| = μ |∇f| / (2|B|); compare in field units.
        if g.norm() / (2.0 * bn) < gtol {
            converged = true;
            break;
        }
        let h = fd_step(bn, jn);
        if z - h < window.z_min * 0.5 {
            return Ok(None);
        }
        let hess = fd_hessian(grad_f, y, z, h)?;
        let mut accepted = false;
        for _ in 0..40 {
            let m = hess + Matrix2::identity() * lambda;
            let step = match m.cholesky() {
                Some(ch) => -ch.solve(&g),
                None => {
                    lambda = if lambda == 0.0 {
                        hess.norm() * 1e-3
                    } else {
                        lambda * 4.0
                    };
                    continue;
                }
            };
            let step = if step.norm() > max_step {
                step * (max_step / step.norm())
            } else {
                step
            };
            let (ny, nz) = (y + step[0], z + step[1]);
            if nz <= window.z_min * 0.5 {
                lambda = if lambda == 0.0 {
                    hess.norm() * 1e-3
                } else {
                    lambda * 4.0
                };
                continue;
            }
            let fn_ = total_field(c, &at(x, ny, nz))?.norm_squared();
            if fn_ <= f {
                let moved = step.norm();
                y = ny;
                z = nz;
                lambda *= 0.25;
                accepted = true;
                if moved < 1e-15 * (1.0 + y.abs().max(z.abs())) {
                    converged = true;
                }
                break;
            }
            lambda = if lambda == 0.0 {
                hess.norm() * 1e-3
            } else {
                lambda * 4.0
            };
        }
        if !accepted || converged {
            // No descent possible: either converged to rounding level or stuck.
            converged = true;
            break;
        }
        if !window.contains(y, z, max_step) {
            return Ok(None);
        }
    }
    if !converged || !window.contains(y, z, 0.0) {
        return Ok(None);
    }
    Ok(Some((y, z)))
}

/// A descent that stalls on a saddle of `|B|²` (typically on a symmetry line
/// between two nearby minima) is restarted on both sides along the direction
/// of negative curvature.
fn escape_saddle(
    c: &Circuit,
    s: &AtomSpecies,
    x: f64,
    at_saddle: (f64, f64),
    window: &SearchWindow,
    opts: &SearchOptions,
) -> Result<Vec<MinimumPoint>> {
    let (y, z) = at_saddle;
    let (b, j) = field_and_jacobian(c, &at(x, y, z))?;
    let h = fd_step(b.norm(), j.norm());
    let grad_f = |yy: f64, zz: f64| -> Result<Vector2<f64>> { Ok(field_sq(c, &at(x, yy, zz))?.1) };
    let eig = SymmetricEigen::new(fd_hessian(grad_f, y, z, h)?);
    let k = if eig.eigenvalues[0] <= eig.eigenvalues[1] {
        0
    } else {
        1
    };
    if eig.eigenvalues[k] >= 0.0 {
        return Ok(Vec::new());
    }
    let v = eig.eigenvectors.column(k).into_owned();
    let (dy, dz) = window.spacing();
    let kick = 0.1 * dy.min(dz);
    let mut out = Vec::new();
    for sign in [-1.0, 1.0] {
        let start = (y + sign * kick * v[0], z + sign * kick * v[1]);
        if !window.contains(start.0, start.1, 0.0) {
            continue;
        }
        if let Some((yy, zz)) = descend(c, x, start, window, opts)? {
            if let Some(m) = classify_point(c, s, x, yy, zz)? {
                out.push(m);
            }
        }
    }
    Ok(out)
}

/// Builds the [`MinimumPoint`] at `(x, y, z)`, or `None` if the point is not
/// a local minimum of `V` in the slice.
fn classify_point(
    c: &Circuit,
    s: &AtomSpecies,
    x: f64,
    y: f64,
    z: f64,
) -> Result<Option<MinimumPoint>> {
    let p = at(x, y, z);
    let (b, j) = field_and_jacobian(c, &p)?;
    let bn = b.norm();
    let jn = j.norm();
    let scale = c.bias.norm() + jn * 1e-6;
    if bn <= 1e-9 * scale {
        // Zero of the field. It is a minimum of |B|; check that the in-slice
        // Jacobian is non-degenerate so that |B| grows in all directions.
        let jt = nalgebra::Matrix3x2::new(
            j[(0, 1)],
            j[(0, 2)],
            j[(1, 1)],
            j[(1, 2)],
            j[(2, 1)],
            j[(2, 2)],
        );
        let g = jt.tr_mul(&jt);
        if g.determinant() <= 1e-12 * g.norm_squared() {
            return Ok(None);
        }
        return Ok(Some(MinimumPoint {
            position: p,
            potential: s.moment * bn,
            field: bn,
            gradient_norm: 0.0,
            hessian: None,
        }));
    }
    let grad_v = |yy: f64, zz: f64| -> Result<Vector2<f64>> {
        let (_, g) = potential_gradient(c, s, &at(x, yy, zz))?;
        Ok(Vector2::new(g.y, g.z))
    };
    let h = fd_step(bn, jn);
    let hess = TransverseHessian::from_matrix(fd_hessian(grad_v, y, z, h)?);
    let scale = hess.eigenvalues[1].abs().max(1e-300);
    if hess.eigenvalues[0] < -1e-6 * scale {
        return Ok(None);
    }
    let g = grad_v(y, z)?;
    Ok(Some(MinimumPoint {
        position: p,
        potential: s.moment * bn,
        field: bn,
        gradient_norm: g.norm(),
        hessian: Some(hess),
    }))
}

/// All local minima of `V` in the slice `x = const` within `window`: a coarse
/// scan of `|B|²` seeds local descents, whose results are deduplicated and
/// sorted by `y` (then `z`).
pub fn find_transverse_minima(
    c: &Circuit,
    s: &AtomSpecies,
    x: f64,
    window: &SearchWindow,
    opts: &SearchOptions,
) -> Result<Vec<MinimumPoint>> {
    window.validate()?;
    let (ny, nz) = (window.ny, window.nz);
    let mut f = vec![0.0; ny * nz];
    for i in 0..ny {
        for j in 0..nz {
            f[i * nz + j] = total_field(c, &at(x, window.y_at(i), window.z_at(j)))?.norm_squared();
        }
    }
    let mut seeds = Vec::new();
    for i in 0..ny {
        for j in 0..nz {
            let v = f[i * nz + j];
            let mut is_min = true;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= ny as i64 || jj >= nz as i64 {
                        continue;
                    }
                    if f[ii as usize * nz + jj as usize] <= v {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if is_min {
                seeds.push((window.y_at(i), window.z_at(j)));
            }
        }
    }

    let mut found: Vec<MinimumPoint> = Vec::new();
    for seed in seeds {
        let Some((y, z)) = descend(c, x, seed, window, opts)? else {
            continue;
        };
        let candidates = match classify_point(c, s, x, y, z)? {
            Some(m) => vec![m],
            None => escape_saddle(c, s, x, (y, z), window, opts)?,
        };
        for m in candidates {
            let dup = found
                .iter()
                .any(|q| (q.position - m.position).norm() <= POSITION_TOLERANCE);
            if !dup {
                found.push(m);
            }
        }
    }
    found.sort_by(|a, b| {
        a.position
            .y
            .total_cmp(&b.position.y)
            .then(a.position.z.total_cmp(&b.position.z))
    });
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WireSegment;
    use crate::potential::side_guide_height;
    use crate::units::GAUSS;

    fn side_guide(ioffe: f64) -> Circuit {
        let w = WireSegment::new(Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), 0.8).unwrap();
        Circuit::new(vec![w], Vec3::new(ioffe * GAUSS, 12.0 * GAUSS, 0.0)).unwrap()
    }

    #[test]
    fn single_wire_has_one_minimum_at_r0() {
        let r0 = side_guide_height(0.8, 12.0 * GAUSS).unwrap();
        let s = AtomSpecies::lithium7();
        let w = SearchWindow::symmetric(2.0 * r0, 2.5 * r0, 41).unwrap();
        for ioffe in [0.0, 3.0] {
            let m = find_transverse_minima(&side_guide(ioffe), &s, 0.0, &w, &Default::default())
                .unwrap();
            assert_eq!(m.len(), 1, "{m:?}");
            assert!((m[0].position.z - r0).abs() < 1e-8, "{:?}", m[0].position);
            assert!(m[0].position.y.abs() < 1e-8);
            assert_eq!(m[0].is_conical(), ioffe == 0.0);
        }
    }

    #[test]
    fn gradient_and_hessian_are_consistent() {
        let r0 = side_guide_height(0.8, 12.0 * GAUSS).unwrap();
        let s = AtomSpecies::lithium7();
        let c = side_guide(3.0);
        let w = SearchWindow::symmetric(2.0 * r0, 2.5 * r0, 31).unwrap();
        let m = find_transverse_minima(&c, &s, 0.0, &w, &Default::default()).unwrap()[0];
        let g_ref = 12.0 * GAUSS / r0;
        assert!(
            m.gradient_norm < 1e-9 * s.moment * g_ref,
            "{}",
            m.gradient_norm
        );

        // Independent check: second differences of V itself with a coarser step.
        let h = 2e-7;
        let v = |dy: f64, dz: f64| {
            super::super::potential(&c, &s, &(m.position + Vec3::new(0.0, dy, dz))).unwrap()
        };
        let v0 = v(0.0, 0.0);
        let hyy = (v(h, 0.0) - 2.0 * v0 + v(-h, 0.0)) / (h * h);
        let hzz = (v(0.0, h) - 2.0 * v0 + v(0.0, -h)) / (h * h);
        let hm = m.hessian.unwrap().matrix();
        assert!((hm[(0, 0)] - hyy).abs() / hyy < 1e-2);
        assert!((hm[(1, 1)] - hzz).abs() / hzz < 1e-2);
    }

    #[test]
    fn empty_or_low_window_rejected() {
        assert!(SearchWindow::new((0.0, 0.0), (1e-5, 1e-4), 10, 10).is_err());
        assert!(SearchWindow::new((-1e-4, 1e-4), (0.0, 1e-4), 10, 10).is_err());
        assert!(SearchWindow::new((-1e-4, 1e-4), (1e-4, 1e-5), 10, 10).is_err());
    }

    #[test]
    fn bias_only_has_no_minimum() {
        let c = Circuit::bias_only(Vec3::new(0.0, 3.0 * GAUSS, 0.0));
        let w = SearchWindow::symmetric(1e-4, 2e-4, 21).unwrap();
        let m = find_transverse_minima(&c, &AtomSpecies::lithium7(), 0.0, &w, &Default::default())
            .unwrap();
        assert!(m.is_empty());
    }
}
