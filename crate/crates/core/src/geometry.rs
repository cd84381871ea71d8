//! Wire circuits: thin current filaments in the chip plane plus a homogeneous
//! bias field.
//!
//! Conventions: the chip surface is the plane `z = 0`, atoms live at `z > 0`,
//! the input guide of a splitter runs along `+x` and ends at the origin, and
//! the bias field points along `+y` unless stated otherwise. "Left" is the
//! `+y` side when looking down the input guide.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{GAUSS, MU0};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Sanity bound on the magnitude of any segment current, A.
pub const MAX_CURRENT: f64 = 100.0;

/// Two endpoints closer than this are treated as the same node, m.
pub const NODE_TOLERANCE: f64 = 1e-9;

/// Default opening half-angle of the Y, rad (10°).
pub const DEFAULT_HALF_ANGLE: f64 = 10.0 * std::f64::consts::PI / 180.0;

/// Default lead length in units of the input guide height.
pub const DEFAULT_LEAD_FACTOR: f64 = 10.0;

/// A straight filament carrying a signed current, positive from `start` to `end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireSegment {
    pub start: Vec3,
    pub end: Vec3,
    pub current: f64,
}

impl WireSegment {
    pub fn new(start: Vec3, end: Vec3, current: f64) -> Result<Self> {
        let seg = WireSegment {
            start,
            end,
            current,
        };
        seg.check()?;
        Ok(seg)
    }

    fn check(&self) -> Result<()> {
        if !all_finite(&self.start) || !all_finite(&self.end) || !self.current.is_finite() {
            return Err(Error::param(
                "segment has non-finite coordinates or current",
            ));
        }
        if (self.end - self.start).norm() <= NODE_TOLERANCE {
            return Err(Error::param("segment start and end coincide"));
        }
        if self.current.abs() >= MAX_CURRENT {
            return Err(Error::param(format!(
                "segment current {} A exceeds the {} A bound",
                self.current, MAX_CURRENT
            )));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }

    /// Mirror image under `y -> -y`; the current keeps its sign because both
    /// endpoints are reflected.
    pub fn mirrored_y(&self) -> Self {
        WireSegment {
            start: mirror_point(&self.start),
            end: mirror_point(&self.end),
            current: self.current,
        }
    }
}

/// Wire segments plus a homogeneous bias field (tesla). Any Ioffe component
/// along the input guide is part of `bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub segments: Vec<WireSegment>,
    pub bias: Vec3,
}

impl Circuit {
    /// Builds a circuit and rejects it if any node violates current
    /// conservation.
    pub fn new(segments: Vec<WireSegment>, bias: Vec3) -> Result<Self> {
        for s in &segments {
            s.check()?;
        }
        let c = Circuit { segments, bias };
        let violations = validate_circuit(&c);
        if violations.is_empty() {
            Ok(c)
        } else {
            Err(Error::Validation(violations))
        }
    }

    pub fn bias_only(bias: Vec3) -> Self {
        Circuit {
            segments: Vec::new(),
            bias,
        }
    }

    /// Reflection `y -> -y` of geometry and currents. The bias transforms as
    /// an axial vector, `(bx, by, bz) -> (-bx, by, -bz)`, so that the field of
    /// the mirrored circuit at the mirrored point is the mirrored field.
    pub fn mirrored_y(&self) -> Self {
        Circuit {
            segments: self.segments.iter().map(WireSegment::mirrored_y).collect(),
            bias: mirror_axial(&self.bias),
        }
    }

    pub fn with_bias(mut self, bias: Vec3) -> Self {
        self.bias = bias;
        self
    }

    /// All currents multiplied by `s`; bias untouched.
    pub fn scaled_currents(&self, s: f64) -> Self {
        Circuit {
            segments: self
                .segments
                .iter()
                .map(|seg| WireSegment {
                    current: seg.current * s,
                    ..*seg
                })
                .collect(),
            bias: self.bias,
        }
    }
}

pub fn mirror_point(p: &Vec3) -> Vec3 {
    Vec3::new(p.x, -p.y, p.z)
}

/// Reflection of an axial vector (magnetic field) under `y -> -y`.
pub fn mirror_axial(b: &Vec3) -> Vec3 {
    Vec3::new(-b.x, b.y, -b.z)
}

fn all_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// A failed circuit check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// Net current into a node with two or more attached segments.
    Junction {
        node: [f64; 3],
        degree: usize,
        net_current: f64,
    },
    NonFinite {
        what: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Junction {
                node,
                degree,
                net_current,
            } => write!(
                f,
                "node ({:.6e}, {:.6e}, {:.6e}) m with {} segments has net current {:.6e} A",
                node[0], node[1], node[2], degree, net_current
            ),
            Violation::NonFinite { what } => write!(f, "non-finite {what}"),
        }
    }
}

/// Returns every conservation or finiteness violation. Nodes of degree one
/// are terminals (leads to the outside world) and are exempt.
pub fn validate_circuit(c: &Circuit) -> Vec<Violation> {
    let mut out = Vec::new();
    if !all_finite(&c.bias) {
        out.push(Violation::NonFinite {
            what: "bias field".into(),
        });
    }
    for (i, s) in c.segments.iter().enumerate() {
        if !all_finite(&s.start) || !all_finite(&s.end) || !s.current.is_finite() {
            out.push(Violation::NonFinite {
                what: format!("segment {i}"),
            });
        }
    }
    if !out.is_empty() {
        return out;
    }

    // (position, degree, net inflow, summed |I| for the tolerance)
    let mut nodes: Vec<(Vec3, usize, f64, f64)> = Vec::new();
    let mut attach = |p: Vec3, inflow: f64| match nodes
        .iter_mut()
        .find(|(q, ..)| (q - p).norm() <= NODE_TOLERANCE)
    {
        Some(n) => {
            n.1 += 1;
            n.2 += inflow;
            n.3 += inflow.abs();
        }
        None => nodes.push((p, 1, inflow, inflow.abs())),
    };
    for s in &c.segments {
        attach(s.start, -s.current);
        attach(s.end, s.current);
    }
    for (p, degree, net, scale) in nodes {
        if degree >= 2 && net.abs() > 1e-12 * scale.max(1e-12) {
            out.push(Violation::Junction {
                node: [p.x, p.y, p.z],
                degree,
                net_current: net,
            });
        }
    }
    out
}

/// Parameters of the Y-shaped splitter wire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YSplitterParams {
    /// Length of the input wire, ending at the origin, m.
    pub input_length: f64,
    /// Length of each output arm, m.
    pub arm_length: f64,
    /// Opening half-angle between the input axis and each arm, rad.
    pub half_angle: f64,
    /// Current in the input wire, A.
    pub total_current: f64,
    /// Share of `total_current` sent through the left (`+y`) arm.
    pub current_fraction_left: f64,
    /// Homogeneous bias including any Ioffe component, T.
    pub bias: Vec3,
}

impl YSplitterParams {
    /// Y with default geometry for a given current and bias: 10° half-angle and
    /// leads ten input-guide heights long.
    pub fn new(total_current: f64, bias: Vec3) -> Self {
        let height = guide_height_for_leads(total_current, bias.y);
        YSplitterParams {
            input_length: DEFAULT_LEAD_FACTOR * height,
            arm_length: DEFAULT_LEAD_FACTOR * height,
            half_angle: DEFAULT_HALF_ANGLE,
            total_current,
            current_fraction_left: 0.5,
            bias,
        }
    }

    pub fn with_fraction(mut self, f: f64) -> Self {
        self.current_fraction_left = f;
        self
    }

    pub fn with_half_angle(mut self, a: f64) -> Self {
        self.half_angle = a;
        self
    }

    pub fn with_bias(mut self, b: Vec3) -> Self {
        self.bias = b;
        self
    }

    pub fn with_current(mut self, i: f64) -> Self {
        self.total_current = i;
        self
    }

    pub fn with_lengths(mut self, input_length: f64, arm_length: f64) -> Self {
        self.input_length = input_length;
        self.arm_length = arm_length;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.input_length > 0.0 && self.input_length.is_finite()) {
            return Err(Error::param("input_length must be positive"));
        }
        if !(self.arm_length > 0.0 && self.arm_length.is_finite()) {
            return Err(Error::param("arm_length must be positive"));
        }
        if !(self.half_angle > 0.0 && self.half_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::param("half_angle must lie in (0, π/2)"));
        }
        if !(0.0..=1.0).contains(&self.current_fraction_left) {
            return Err(Error::param("current_fraction_left must lie in [0, 1]"));
        }
        if !self.total_current.is_finite() || self.total_current.abs() >= MAX_CURRENT {
            return Err(Error::param("total_current out of range"));
        }
        if !all_finite(&self.bias) {
            return Err(Error::param("bias must be finite"));
        }
        Ok(())
    }

    /// Unit vector along the left (`+y`) arm.
    pub fn left_direction(&self) -> Vec3 {
        Vec3::new(self.half_angle.cos(), self.half_angle.sin(), 0.0)
    }

    /// Unit vector along the right (`-y`) arm.
    pub fn right_direction(&self) -> Vec3 {
        Vec3::new(self.half_angle.cos(), -self.half_angle.sin(), 0.0)
    }

    /// Separation of the two arm wires at longitudinal position `x >= 0`.
    pub fn arm_separation_at(&self, x: f64) -> f64 {
        2.0 * x.max(0.0) * self.half_angle.tan()
    }

    /// Longitudinal position at which the arms are `d` apart.
    pub fn x_at_arm_separation(&self, d: f64) -> f64 {
        d / (2.0 * self.half_angle.tan())
    }
}

impl Default for YSplitterParams {
    /// 0.8 A and 12 G along `+y`, the parameters of the loaded guide.
    fn default() -> Self {
        YSplitterParams::new(0.8, Vec3::new(0.0, 12.0 * GAUSS, 0.0))
    }
}

fn guide_height_for_leads(current: f64, bias_perp: f64) -> f64 {
    if current.abs() > 0.0 && bias_perp.abs() > 0.0 {
        MU0 * current.abs() / (2.0 * std::f64::consts::PI * bias_perp.abs())
    } else {
        // No guide: fall back to a millimetre-scale layout.
        1e-4
    }
}

/// Input wire along `+x` ending at the origin and two straight arms leaving
/// the origin at `±half_angle` in the chip plane.
pub fn build_y_splitter(p: &YSplitterParams) -> Result<Circuit> {
    p.validate()?;
    let origin = Vec3::zeros();
    let input = WireSegment::new(
        Vec3::new(-p.input_length, 0.0, 0.0),
        origin,
        p.total_current,
    )?;
    let left_current = p.current_fraction_left * p.total_current;
    // Written as a difference so that the junction sums to zero exactly.
    let right_current = p.total_current - left_current;
    let left = WireSegment::new(origin, p.left_direction() * p.arm_length, left_current)?;
    let (c, s) = (p.half_angle.cos(), p.half_angle.sin());
    let right = WireSegment::new(
        origin,
        Vec3::new(c * p.arm_length, -(s * p.arm_length), 0.0),
        right_current,
    )?;
    Circuit::new(vec![input, left, right], p.bias)
}

/// Two wires running parallel at separation `separation` up to `split_x`
/// and diverging at `±half_angle` afterwards. Each wire carries half the
/// total current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParallelSplitParams {
    pub separation: f64,
    pub split_x: f64,
    pub input_length: f64,
    pub arm_length: f64,
    pub half_angle: f64,
    pub total_current: f64,
    pub bias: Vec3,
}

impl ParallelSplitParams {
    pub fn new(separation: f64, split_x: f64, total_current: f64, bias: Vec3) -> Self {
        let height = guide_height_for_leads(total_current, bias.y);
        ParallelSplitParams {
            separation,
            split_x,
            input_length: DEFAULT_LEAD_FACTOR * height,
            arm_length: DEFAULT_LEAD_FACTOR * height,
            half_angle: DEFAULT_HALF_ANGLE,
            total_current,
            bias,
        }
    }
}

pub fn build_parallel_then_split(p: &ParallelSplitParams) -> Result<Circuit> {
    if !(p.separation > 0.0 && p.separation.is_finite()) {
        return Err(Error::param("wire separation must be positive"));
    }
    if !(p.input_length > 0.0 && p.arm_length > 0.0) {
        return Err(Error::param("lengths must be positive"));
    }
    if !(p.half_angle > 0.0 && p.half_angle < std::f64::consts::FRAC_PI_2) {
        return Err(Error::param("half_angle must lie in (0, π/2)"));
    }
    let half = 0.5 * p.total_current;
    let hd = 0.5 * p.separation;
    let x0 = p.split_x - p.input_length;
    let (c, s) = (p.half_angle.cos(), p.half_angle.sin());
    let mut segs = Vec::with_capacity(4);
    for side in [1.0, -1.0] {
        let bend = Vec3::new(p.split_x, side * hd, 0.0);
        segs.push(WireSegment::new(Vec3::new(x0, side * hd, 0.0), bend, half)?);
        let end = Vec3::new(
            p.split_x + c * p.arm_length,
            side * (hd + s * p.arm_length),
            0.0,
        );
        segs.push(WireSegment::new(bend, end, half)?);
    }
    Circuit::new(segs, p.bias)
}

/// Two straight parallel wires along `x` at `y = ±separation/2`, each carrying
/// half of `total_current` in the same direction, from `-half_length` to
/// `+half_length`.
pub fn build_parallel_pair(
    separation: f64,
    total_current: f64,
    bias: Vec3,
    half_length: f64,
) -> Result<Circuit> {
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(Error::param("wire separation must be positive"));
    }
    if !(half_length > 0.0) {
        return Err(Error::param("half_length must be positive"));
    }
    let hd = 0.5 * separation;
    let half = 0.5 * total_current;
    let segs = [1.0, -1.0]
        .into_iter()
        .map(|side| {
            WireSegment::new(
                Vec3::new(-half_length, side * hd, 0.0),
                Vec3::new(half_length, side * hd, 0.0),
                half,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Circuit::new(segs, bias)
}

/// Guide made of two parallel wires with opposite currents and a bias normal
/// to the chip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterWireParams {
    /// Wire separation, m.
    pub separation: f64,
    /// Current in the `+y` wire (flowing along `+x`); the `-y` wire carries
    /// the opposite current, A.
    pub current: f64,
    /// Bias along `z`, T (signed).
    pub bias_z: f64,
    /// Wires run from `-half_length` to `+half_length` along `x`, m.
    pub half_length: f64,
}

pub fn build_counter_wire_guide(p: &CounterWireParams) -> Result<Circuit> {
    if !(p.separation > 0.0 && p.separation.is_finite()) {
        return Err(Error::param("wire separation must be positive"));
    }
    if !(p.half_length > 0.0) {
        return Err(Error::param("half_length must be positive"));
    }
    if !p.bias_z.is_finite() {
        return Err(Error::param("bias must be finite"));
    }
    let hd = 0.5 * p.separation;
    let segs = vec![
        WireSegment::new(
            Vec3::new(-p.half_length, hd, 0.0),
            Vec3::new(p.half_length, hd, 0.0),
            p.current,
        )?,
        WireSegment::new(
            Vec3::new(-p.half_length, -hd, 0.0),
            Vec3::new(p.half_length, -hd, 0.0),
            -p.current,
        )?,
    ];
    Circuit::new(segs, Vec3::new(0.0, 0.0, p.bias_z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn y(fraction: f64, total: f64) -> Circuit {
        build_y_splitter(
            &YSplitterParams::default()
                .with_fraction(fraction)
                .with_bias(Vec3::new(0.0, 12.0 * GAUSS, 0.0))
                .with_lengths(1e-3, 1e-3)
                .with_half_angle(DEFAULT_HALF_ANGLE)
                .with_current(total),
        )
        .unwrap()
    }

    #[test]
    fn equal_split_divides_current() {
        let c = y(0.5, 0.8);
        assert_eq!(c.segments[0].current, 0.8);
        assert_eq!(c.segments[1].current, 0.4);
        assert_eq!(c.segments[2].current, 0.4);
        assert!(validate_circuit(&c).is_empty());
    }

    #[test]
    fn one_sided_drive() {
        let c = y(1.0, 0.8);
        assert_eq!(c.segments[1].current, 0.8);
        assert_eq!(c.segments[2].current, 0.0);
        assert!(c.segments[1].end.y > 0.0);
    }

    #[test]
    fn zero_current_is_valid() {
        let c = y(0.5, 0.0);
        assert!(c.segments.iter().all(|s| s.current == 0.0));
    }

    #[test]
    fn unbalanced_junction_reported() {
        let mut c = y(0.5, 0.8);
        c.segments[2].current = 0.3;
        let v = validate_circuit(&c);
        assert_eq!(v.len(), 1);
        match &v[0] {
            Violation::Junction {
                degree,
                net_current,
                ..
            } => {
                assert_eq!(*degree, 3);
                assert!((net_current - 0.1).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(Circuit::new(c.segments.clone(), c.bias).is_err());
    }

    #[test]
    fn open_segment_has_no_violations() {
        let s = WireSegment::new(Vec3::zeros(), Vec3::new(1e-3, 0.0, 0.0), 1.0).unwrap();
        assert!(validate_circuit(&Circuit::bias_only(Vec3::zeros())).is_empty());
        assert!(Circuit::new(vec![s], Vec3::zeros()).is_ok());
    }

    #[test]
    fn invalid_params_rejected() {
        let p = YSplitterParams::default();
        assert!(build_y_splitter(&p.with_half_angle(0.0)).is_err());
        assert!(build_y_splitter(&p.with_half_angle(std::f64::consts::FRAC_PI_2)).is_err());
        assert!(build_y_splitter(&p.with_fraction(1.2)).is_err());
        assert!(build_y_splitter(&p.with_lengths(0.0, 1e-3)).is_err());
        assert!(WireSegment::new(Vec3::zeros(), Vec3::x(), 150.0).is_err());
        assert!(WireSegment::new(Vec3::zeros(), Vec3::zeros(), 1.0).is_err());
    }

    #[test]
    fn mirrored_fraction_swaps_arms() {
        for f in [0.0, 0.2, 0.5, 0.73, 1.0] {
            let a = y(f, 0.8).mirrored_y();
            let b = y(1.0 - f, 0.8);
            // Arms swap places in the segment list.
            assert_eq!(a.segments[0], b.segments[0]);
            assert_eq!(a.segments[1].end, b.segments[2].end);
            assert_eq!(a.segments[2].end, b.segments[1].end);
            assert!((a.segments[1].current - b.segments[2].current).abs() < 1e-15);
            assert!((a.segments[2].current - b.segments[1].current).abs() < 1e-15);
            assert_eq!(a.bias, b.bias);
        }
    }

    #[test]
    fn parallel_split_is_symmetric_and_conserving() {
        let p = ParallelSplitParams::new(100e-6, 0.0, 0.8, Vec3::new(0.0, 12.0 * GAUSS, 0.0));
        let c = build_parallel_then_split(&p).unwrap();
        assert_eq!(c.segments.len(), 4);
        assert!(validate_circuit(&c).is_empty());
        let m = c.mirrored_y();
        for s in &m.segments {
            assert!(c.segments.iter().any(|t| t == s));
        }
        assert!(build_parallel_then_split(&ParallelSplitParams {
            separation: 0.0,
            ..p
        })
        .is_err());
    }

    #[test]
    fn counter_wire_currents_oppose() {
        let c = build_counter_wire_guide(&CounterWireParams {
            separation: 50e-6,
            current: 0.5,
            bias_z: 10.0 * GAUSS,
            half_length: 1e-2,
        })
        .unwrap();
        assert_eq!(c.segments[0].current, -c.segments[1].current);
        assert_eq!(c.bias, Vec3::new(0.0, 0.0, 10.0 * GAUSS));
    }
}
