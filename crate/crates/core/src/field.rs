//! Magnetic field of thin straight filaments (closed-form Biot–Savart) plus a
//! homogeneous bias, with analytic Jacobians.
//!
//! For a segment from `a` to `b` with unit direction `u`, length `L`, and
//! `r1 = p - a`, `r2 = p - b`, `a1 = r1·u`, `a2 = r2·u`:
//!
//! ```text
//! B = μ0 I / 4π · (u × r1) · F
//! F = (a1/R1 - a2/R2) / ρ²                          (a1 > 0 > a2, beside the wire)
//! F = L (a1 + a2) / (R1 R2 (a1 R2 + a2 R1))         (otherwise, beyond an end)
//! ```
//!
//! with `ρ = |u × r1|`. The second form is the first with the cancelling
//! difference of cosines rewritten; it stays finite on the axis beyond the
//! ends, where the field vanishes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Circuit, Vec3, WireSegment};
use crate::units::MU0_OVER_4PI;

pub type Mat3 = nalgebra::Matrix3<f64>;

/// Evaluation points closer than this to any filament are rejected, m.
pub const SINGULARITY_GUARD: f64 = 1e-9;

/// Field and (optionally) its Jacobian `J[i][j] = ∂B_i/∂x_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub b: Vec3,
    pub jacobian: Option<Mat3>,
}

struct SegmentGeometry {
    u: Vec3,
    len: f64,
    r1: Vec3,
    r2: Vec3,
    a1: f64,
    a2: f64,
    rn1: f64,
    rn2: f64,
    w: Vec3,
    rho2: f64,
    beside: bool,
}

impl SegmentGeometry {
    fn new(seg: &WireSegment, p: &Vec3, index: usize) -> Result<Self> {
        let d = seg.end - seg.start;
        let len = d.norm();
        let u = d / len;
        let r1 = p - seg.start;
        let r2 = p - seg.end;
        let a1 = r1.dot(&u);
        let a2 = r2.dot(&u);
        let rn1 = r1.norm();
        let rn2 = r2.norm();
        let w = u.cross(&r1);
        let rho2 = w.norm_squared();
        let beside = a1 > 0.0 && a2 < 0.0;
        let distance = if a1 >= 0.0 && a2 <= 0.0 {
            rho2.sqrt()
        } else {
            rn1.min(rn2)
        };
        if !(distance >= SINGULARITY_GUARD) {
            return Err(Error::Singularity {
                segment: index,
                distance,
            });
        }
        Ok(SegmentGeometry {
            u,
            len,
            r1,
            r2,
            a1,
            a2,
            rn1,
            rn2,
            w,
            rho2,
            beside,
        })
    }

    fn factor(&self) -> f64 {
        if self.beside {
            (self.a1 / self.rn1 - self.a2 / self.rn2) / self.rho2
        } else {
            let den = self.rn1 * self.rn2 * (self.a1 * self.rn2 + self.a2 * self.rn1);
            self.len * (self.a1 + self.a2) / den
        }
    }

    fn factor_gradient(&self, f: f64) -> Vec3 {
        let (u, r1, r2) = (&self.u, &self.r1, &self.r2);
        let (a1, a2, n1, n2) = (self.a1, self.a2, self.rn1, self.rn2);
        if self.beside {
            let dn = (u / n1 - r1 * (a1 / (n1 * n1 * n1))) - (u / n2 - r2 * (a2 / (n2 * n2 * n2)));
            let drho2 = self.w.cross(u) * 2.0;
            (dn - drho2 * f) / self.rho2
        } else {
            let s = a1 + a2;
            let d = a1 * n2 + a2 * n1;
            let dd = u * (n1 + n2) + r2 * (a1 / n2) + r1 * (a2 / n1);
            (u * (2.0 / s) - r1 / (n1 * n1) - r2 / (n2 * n2) - dd / d) * f
        }
    }
}

fn cross_matrix(u: &Vec3) -> Mat3 {
    Mat3::new(0.0, -u.z, u.y, u.z, 0.0, -u.x, -u.y, u.x, 0.0)
}

fn segment_field_at(seg: &WireSegment, p: &Vec3, index: usize) -> Result<Vec3> {
    let g = SegmentGeometry::new(seg, p, index)?;
    Ok(g.w * (MU0_OVER_4PI * seg.current * g.factor()))
}

fn segment_field_jacobian_at(seg: &WireSegment, p: &Vec3, index: usize) -> Result<(Vec3, Mat3)> {
    let g = SegmentGeometry::new(seg, p, index)?;
    let c = MU0_OVER_4PI * seg.current;
    let f = g.factor();
    let grad = g.factor_gradient(f);
    let b = g.w * (c * f);
    let j = (cross_matrix(&g.u) * f + g.w * grad.transpose()) * c;
    Ok((b, j))
}

/// Field of a single filament segment, T.
pub fn segment_field(seg: &WireSegment, p: &Vec3) -> Result<Vec3> {
    segment_field_at(seg, p, 0)
}

/// Field and Jacobian of a single segment.
pub fn segment_field_jacobian(seg: &WireSegment, p: &Vec3) -> Result<(Vec3, Mat3)> {
    segment_field_jacobian_at(seg, p, 0)
}

/// Superposition of all segment fields plus the bias.
pub fn total_field(c: &Circuit, p: &Vec3) -> Result<Vec3> {
    let mut b = c.bias;
    for (i, seg) in c.segments.iter().enumerate() {
        b += segment_field_at(seg, p, i)?;
    }
    Ok(b)
}

/// Analytic Jacobian of the total field.
pub fn field_jacobian(c: &Circuit, p: &Vec3) -> Result<Mat3> {
    Ok(field_and_jacobian(c, p)?.1)
}

pub fn field_and_jacobian(c: &Circuit, p: &Vec3) -> Result<(Vec3, Mat3)> {
    let mut b = c.bias;
    let mut j = Mat3::zeros();
    for (i, seg) in c.segments.iter().enumerate() {
        let (bs, js) = segment_field_jacobian_at(seg, p, i)?;
        b += bs;
        j += js;
    }
    Ok((b, j))
}

pub fn field_sample(c: &Circuit, p: &Vec3, with_jacobian: bool) -> Result<FieldSample> {
    if with_jacobian {
        let (b, j) = field_and_jacobian(c, p)?;
        Ok(FieldSample {
            b,
            jacobian: Some(j),
        })
    } else {
        Ok(FieldSample {
            b: total_field(c, p)?,
            jacobian: None,
        })
    }
}

/// Distance from `p` to the closest point of any segment (infinite for a
/// bias-only circuit).
pub fn distance_to_nearest_wire(c: &Circuit, p: &Vec3) -> f64 {
    c.segments
        .iter()
        .map(|s| {
            let d = s.end - s.start;
            let t = ((p - s.start).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            (p - (s.start + d * t)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Central-difference Jacobian with step `max(1 nm, 1e-6 · distance to the
/// nearest wire)`. Used as the independent cross-check of [`field_jacobian`].
pub fn field_jacobian_fd(c: &Circuit, p: &Vec3) -> Result<Mat3> {
    let dist = distance_to_nearest_wire(c, p);
    let h = if dist.is_finite() {
        (1e-6 * dist).max(1e-9)
    } else {
        1e-9
    };
    let mut j = Mat3::zeros();
    for k in 0..3 {
        let mut e = Vec3::zeros();
        e[k] = h;
        let col = (total_field(c, &(p + e))? - total_field(c, &(p - e))?) / (2.0 * h);
        j.set_column(k, &col);
    }
    Ok(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::GAUSS;

    fn long_wire(current: f64) -> WireSegment {
        WireSegment::new(Vec3::new(-1e6, 0.0, 0.0), Vec3::new(1e6, 0.0, 0.0), current).unwrap()
    }

    #[test]
    fn infinite_wire_limit() {
        let b = segment_field(&long_wire(1.0), &Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((b.norm() - 2e-7).abs() / 2e-7 < 1e-12, "{}", b.norm());
        // Right-hand rule: current along +x, point above, field along -y.
        assert!(b.y < 0.0 && b.x.abs() < 1e-30 && b.z.abs() < 1e-30);
    }

    #[test]
    fn on_axis_beyond_end_is_zero() {
        let s = WireSegment::new(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), 1.0).unwrap();
        for p in [Vec3::new(2.0, 0.0, 0.0), Vec3::new(-0.5, 0.0, 0.0)] {
            assert_eq!(segment_field(&s, &p).unwrap(), Vec3::zeros());
            let (_, j) = segment_field_jacobian(&s, &p).unwrap();
            assert!(j.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn half_infinite_perpendicular_at_end() {
        // Independent oracle: ∫_{-∞}^{0} μ0 I r / (4π (s² + r²)^{3/2}) ds = μ0 I / (4π r).
        let s = WireSegment::new(Vec3::new(-1e6, 0.0, 0.0), Vec3::zeros(), 2.0).unwrap();
        let r = 0.3;
        let b = segment_field(&s, &Vec3::new(0.0, r, 0.0)).unwrap();
        let expected = 1e-7 * 2.0 / r;
        assert!((b.norm() - expected).abs() / expected < 1e-10);
    }

    #[test]
    fn singularity_guard() {
        let s = long_wire(1.0);
        assert!(matches!(
            segment_field(&s, &Vec3::new(0.0, 0.0, 5e-10)),
            Err(Error::Singularity { .. })
        ));
        let short = WireSegment::new(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), 1.0).unwrap();
        assert!(segment_field(&short, &Vec3::new(1.0 + 5e-10, 0.0, 0.0)).is_err());
        assert!(segment_field(&short, &Vec3::new(1.0 + 5e-9, 0.0, 0.0)).is_ok());
    }

    #[test]
    fn side_guide_zero() {
        // r0 = μ0 I / (2π B) = 2e-7 · 0.8 / 12e-4 m.
        let r0 = 2e-7 * 0.8 / 12e-4;
        let c = Circuit::new(vec![long_wire(0.8)], Vec3::new(0.0, 12.0 * GAUSS, 0.0)).unwrap();
        let b = total_field(&c, &Vec3::new(0.0, 0.0, r0)).unwrap();
        assert!(b.norm() < 1e-15, "{b:?}");
        let c = c.with_bias(Vec3::new(3.0 * GAUSS, 12.0 * GAUSS, 0.0));
        let b = total_field(&c, &Vec3::new(0.0, 0.0, r0)).unwrap();
        assert!((b.norm() - 3.0 * GAUSS).abs() < 1e-15);
    }

    #[test]
    fn gradient_at_side_guide() {
        let r0 = 2e-7 * 0.8 / 12e-4;
        let c = Circuit::new(vec![long_wire(0.8)], Vec3::new(0.0, 12.0 * GAUSS, 0.0)).unwrap();
        let j = field_jacobian(&c, &Vec3::new(0.0, 0.0, r0)).unwrap();
        // d/dr (μ0 I / 2π r) at r0 equals B_bias / r0 = 9 T/m.
        assert!((j[(1, 2)].abs() - 9.0).abs() < 1e-9, "{j}");
    }

    #[test]
    fn bias_only_and_zero_current() {
        let bias = Vec3::new(1e-4, -2e-4, 3e-4);
        let c = Circuit::bias_only(bias);
        assert_eq!(total_field(&c, &Vec3::new(1.0, 2.0, 3.0)).unwrap(), bias);
        assert_eq!(
            field_jacobian(&c, &Vec3::new(1.0, 2.0, 3.0)).unwrap(),
            Mat3::zeros()
        );
        let c = Circuit::new(vec![long_wire(0.0)], bias).unwrap();
        assert_eq!(total_field(&c, &Vec3::new(0.0, 1e-4, 1e-4)).unwrap(), bias);
    }
}
