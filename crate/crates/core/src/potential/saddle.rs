use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::minima::{MinimumPoint, Z_FLOOR};
use super::{potential, potential_gradient, AtomSpecies};
use crate::error::{Error, Result};
use crate::geometry::{Circuit, Vec3};

/// Index-1 stationary point of `V` in a transverse slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddlePoint {
    pub position: Vec3,
    pub potential: f64,
}

struct Slice<'a> {
    c: &'a Circuit,
    s: &'a AtomSpecies,
    x: f64,
}

impl Slice<'_> {
    fn v(&self, y: f64, z: f64) -> Result<f64> {
        potential(self.c, self.s, &Vec3::new(self.x, y, z))
    }

    fn grad(&self, y: f64, z: f64) -> Result<Vector2<f64>> {
        let (_, g) = potential_gradient(self.c, self.s, &Vec3::new(self.x, y, z))?;
        Ok(Vector2::new(g.y, g.z))
    }

    fn hessian(&self, y: f64, z: f64, h: f64) -> Result<Matrix2<f64>> {
        let cy = (self.grad(y + h, z)? - self.grad(y - h, z)?) / (2.0 * h);
        let cz = (self.grad(y, z + h)? - self.grad(y, z - h)?) / (2.0 * h);
        let m = Matrix2::new(cy[0], cz[0], cy[1], cz[1]);
        Ok((m + m.transpose()) * 0.5)
    }

    /// Newton iteration on `∇V = 0`; returns a point only if it is an index-1
    /// saddle.
    fn newton_saddle(&self, start: (f64, f64), span: f64) -> Result<Option<(f64, f64)>> {
        let (mut y, mut z) = start;
        let h = (1e-5 * span).clamp(1e-11, 1e-8);
        let mut g = self.grad(y, z)?;
        for _ in 0..100 {
            if z - h < 0.5 * Z_FLOOR {
                return Ok(None);
            }
            let hm = self.hessian(y, z, h)?;
            let Some(inv) = hm.try_inverse() else {
                return Ok(None);
            };
            let mut step = -(inv * g);
            if step.norm() > 0.25 * span {
                step *= 0.25 * span / step.norm();
            }
            let mut improved = false;
            for _ in 0..30 {
                let (ny, nz) = (y + step[0], z + step[1]);
                if nz > 0.5 * Z_FLOOR {
                    let gn = self.grad(ny, nz)?;
                    if gn.norm() < g.norm() {
                        y = ny;
                        z = nz;
                        g = gn;
                        improved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !improved || step.norm() < 1e-14 * span {
                break;
            }
        }
        let hm = self.hessian(y, z, h)?;
        if hm.determinant() < 0.0 {
            Ok(Some((y, z)))
        } else {
            Ok(None)
        }
    }
}

/// Saddle between two minima of the same slice: the maximum of `V` along the
/// straight connector seeds a Newton search for the index-1 stationary point.
/// If that fails, a minimax (bottleneck) path on a grid around the pair
/// provides the seed instead.
pub fn find_saddle(
    c: &Circuit,
    s: &AtomSpecies,
    a: &MinimumPoint,
    b: &MinimumPoint,
) -> Result<SaddlePoint> {
    let x = a.position.x;
    if (a.position.x - b.position.x).abs() > 1e-12 {
        return Err(Error::param("minima belong to different slices"));
    }
    let pa = Vector2::new(a.position.y, a.position.z);
    let pb = Vector2::new(b.position.y, b.position.z);
    let span = (pb - pa).norm();
    if span <= 1e-8 {
        return Err(Error::param("minima are not distinct"));
    }
    let sl = Slice { c, s, x };
    let floor = a.potential.max(b.potential);

    let n = 200;
    let mut best = (f64::NEG_INFINITY, pa);
    for k in 1..n {
        let p = pa + (pb - pa) * (k as f64 / n as f64);
        let v = sl.v(p[0], p[1])?;
        if v > best.0 {
            best = (v, p);
        }
    }
    let accept = |y: f64, z: f64| -> Result<Option<SaddlePoint>> {
        let v = sl.v(y, z)?;
        let lo = Vector2::new(pa[0].min(pb[0]), pa[1].min(pb[1])) - Vector2::repeat(span);
        let hi = Vector2::new(pa[0].max(pb[0]), pa[1].max(pb[1])) + Vector2::repeat(span);
        let inside = y >= lo[0] && y <= hi[0] && z >= lo[1] && z <= hi[1];
        if inside && v >= floor - 1e-12 * floor.abs() {
            Ok(Some(SaddlePoint {
                position: Vec3::new(x, y, z),
                potential: v,
            }))
        } else {
            Ok(None)
        }
    };
    if let Some((y, z)) = sl.newton_saddle((best.1[0], best.1[1]), span)? {
        if let Some(sp) = accept(y, z)? {
            return Ok(sp);
        }
    }

    let (gy, gz, gv) = bottleneck(&sl, pa, pb, span)?;
    if let Some((y, z)) = sl.newton_saddle((gy, gz), span)? {
        if let Some(sp) = accept(y, z)? {
            return Ok(sp);
        }
    }
    Ok(SaddlePoint {
        position: Vec3::new(x, gy, gz),
        potential: gv,
    })
}

/// Height of the saddle above the higher of the two minima, J.
pub fn barrier_height(
    c: &Circuit,
    s: &AtomSpecies,
    a: &MinimumPoint,
    b: &MinimumPoint,
) -> Result<f64> {
    let sp = find_saddle(c, s, a, b)?;
    Ok((sp.potential - a.potential.max(b.potential)).max(0.0))
}

#[derive(PartialEq)]
struct Node(f64, usize);

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on the bottleneck value.
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Minimax path between the grid nodes nearest `pa` and `pb`; returns the
/// highest node on that path.
fn bottleneck(
    sl: &Slice<'_>,
    pa: Vector2<f64>,
    pb: Vector2<f64>,
    span: f64,
) -> Result<(f64, f64, f64)> {
    let n = 81usize;
    let y0 = pa[0].min(pb[0]) - 0.5 * span;
    let y1 = pa[0].max(pb[0]) + 0.5 * span;
    let z0 = (pa[1].min(pb[1]) - 0.5 * span).max(Z_FLOOR);
    let z1 = pa[1].max(pb[1]) + 0.5 * span;
    let yy = |i: usize| y0 + (y1 - y0) * i as f64 / (n - 1) as f64;
    let zz = |j: usize| z0 + (z1 - z0) * j as f64 / (n - 1) as f64;
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = sl.v(yy(i), zz(j))?;
        }
    }
    let nearest = |p: Vector2<f64>| {
        let i = (((p[0] - y0) / (y1 - y0)) * (n - 1) as f64).round() as usize;
        let j = (((p[1] - z0) / (z1 - z0)) * (n - 1) as f64).round() as usize;
        i.min(n - 1) * n + j.min(n - 1)
    };
    let (src, dst) = (nearest(pa), nearest(pb));
    let mut best = vec![f64::INFINITY; n * n];
    let mut prev = vec![usize::MAX; n * n];
    best[src] = v[src];
    let mut heap = BinaryHeap::new();
    heap.push(Node(v[src], src));
    while let Some(Node(cost, k)) = heap.pop() {
        if k == dst {
            break;
        }
        if cost > best[k] {
            continue;
        }
        let (i, j) = (k / n, k % n);
        for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (ii, jj) = (i as i64 + di, j as i64 + dj);
            if ii < 0 || jj < 0 || ii >= n as i64 || jj >= n as i64 {
                continue;
            }
            let kk = ii as usize * n + jj as usize;
            let c = cost.max(v[kk]);
            if c < best[kk] {
                best[kk] = c;
                prev[kk] = k;
                heap.push(Node(c, kk));
            }
        }
    }
    let mut k = dst;
    let mut top = (v[dst], dst);
    while k != src && prev[k] != usize::MAX {
        if v[k] > top.0 {
            top = (v[k], k);
        }
        k = prev[k];
    }
    Ok((yy(top.1 / n), zz(top.1 % n), top.0))
}
