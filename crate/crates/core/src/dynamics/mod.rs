//! Classical Monte Carlo transport of thermal atoms through a guide.
//!
//! Atoms are point particles moving under `F = -∇(μ|B|)` (plus an optional
//! uniform gravity term), integrated with velocity Verlet. Every atom draws
//! from its own ChaCha stream, selected by its index, so an ensemble is
//! reproducible from the master seed alone and independent of scheduling.

mod experiment;

pub use experiment::{
    back_fraction, back_reflection_estimate, min_field_diagnostic, run_batch, run_split_experiment,
    run_y_batch, BackReflection, FateCounts, MinFieldHistogram, SplitPoint, SplitStats,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::field_and_jacobian;
use crate::geometry::{Circuit, Vec3, YSplitterParams};
use crate::potential::{
    find_transverse_minima, harmonic_frequencies, side_guide_height, AtomSpecies, MinimumPoint,
    SearchWindow, Z_FLOOR,
};
use crate::units::BOLTZMANN;

/// How transverse positions are drawn around the input-guide minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Sampling {
    /// Gaussian along the Hessian axes with variance `k_B T / (m ω_i²)`.
    Harmonic,
    /// Rejection sampling of `exp(-(V - V_min) / k_B T)` over a square of
    /// half-width `extent` (m) centred on the minimum, clipped at the floor.
    /// Works for conical (zero-field) minima.
    Boltzmann { extent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub species: AtomSpecies,
    /// K
    pub temperature: f64,
    pub n_atoms: usize,
    /// Longitudinal start position, m. Atoms move towards `+x`.
    pub start_x: f64,
    pub master_seed: u64,
    pub sampling: Sampling,
}

impl EnsembleSpec {
    pub fn new(
        species: AtomSpecies,
        temperature: f64,
        n_atoms: usize,
        start_x: f64,
        seed: u64,
    ) -> Self {
        EnsembleSpec {
            species,
            temperature,
            n_atoms,
            start_x,
            master_seed: seed,
            sampling: Sampling::Harmonic,
        }
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::param("temperature must be positive"));
        }
        if self.n_atoms == 0 {
            return Err(Error::param("ensemble needs at least one atom"));
        }
        if !self.start_x.is_finite() {
            return Err(Error::param("start_x must be finite"));
        }
        if let Sampling::Boltzmann { extent } = self.sampling {
            if !(extent > 0.0 && extent.is_finite()) {
                return Err(Error::param("Boltzmann sampling extent must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomState {
    pub position: Vec3,
    pub velocity: Vec3,
}

impl AtomState {
    /// Reflection `y → -y`.
    pub fn mirrored_y(&self) -> Self {
        AtomState {
            position: Vec3::new(self.position.x, -self.position.y, self.position.z),
            velocity: Vec3::new(self.velocity.x, -self.velocity.y, self.velocity.z),
        }
    }
}

/// Generator for atom `index`: the master seed selects the key, the index
/// the stream.
pub fn atom_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Search window for the guide minimum at `start_x`: a square of three guide
/// heights centred above the input wire.
pub fn input_window(c: &Circuit, current: f64) -> Result<SearchWindow> {
    let b_perp = c.bias.y.abs().max(c.bias.z.abs());
    let r0 = side_guide_height(current.abs(), b_perp)?;
    SearchWindow::new((-1.5 * r0, 1.5 * r0), (Z_FLOOR, 3.0 * r0), 61, 91)
}

/// The input-guide minimum at `x`: the highest minimum in `window`.
pub fn guide_minimum(
    c: &Circuit,
    s: &AtomSpecies,
    x: f64,
    window: &SearchWindow,
) -> Result<MinimumPoint> {
    let minima = find_transverse_minima(c, s, x, window, &Default::default())?;
    minima
        .into_iter()
        .max_by(|a, b| a.position.z.total_cmp(&b.position.z))
        .ok_or_else(|| Error::Setup(format!("no transverse minimum at x = {x:e} m")))
}

/// Initial states of the ensemble, positions thermal about the input-guide
/// minimum at `start_x`, velocities Maxwell–Boltzmann with `v_x > 0`.
pub fn sample_ensemble(
    spec: &EnsembleSpec,
    c: &Circuit,
    window: &SearchWindow,
) -> Result<Vec<AtomState>> {
    spec.validate()?;
    let s = &spec.species;
    let m0 = guide_minimum(c, s, spec.start_x, window)?;
    let kt = BOLTZMANN * spec.temperature;
    let sigma_v = (kt / s.mass).sqrt();

    let axes = match spec.sampling {
        Sampling::Harmonic => {
            let (w1, w2) = harmonic_frequencies(s, &m0).map_err(|e| Error::Setup(e.to_string()))?;
            let h = m0.hessian.expect("checked by harmonic_frequencies");
            let sig = [
                kt.sqrt() / (w1 * s.mass.sqrt()),
                kt.sqrt() / (w2 * s.mass.sqrt()),
            ];
            Some((h.axes, sig))
        }
        Sampling::Boltzmann { .. } => None,
    };

    let mut out = Vec::with_capacity(spec.n_atoms);
    for i in 0..spec.n_atoms {
        let mut rng = atom_rng(spec.master_seed, i as u64);
        let (dy, dz) = match (spec.sampling, axes) {
            (Sampling::Harmonic, Some((ax, sig))) => {
                let g1: f64 = rng.sample(StandardNormal);
                let g2: f64 = rng.sample(StandardNormal);
                (
                    g1 * sig[0] * ax[0][0] + g2 * sig[1] * ax[1][0],
                    g1 * sig[0] * ax[0][1] + g2 * sig[1] * ax[1][1],
                )
            }
            (Sampling::Boltzmann { extent }, _) => {
                boltzmann_offset(c, s, &m0, kt, extent, &mut rng)?
            }
            _ => unreachable!(),
        };
        let position = m0.position + Vec3::new(0.0, dy, dz);
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let velocity = Vec3::new(v[0].abs(), v[1], v[2]) * sigma_v;
        out.push(AtomState { position, velocity });
    }
    Ok(out)
}

fn boltzmann_offset(
    c: &Circuit,
    s: &AtomSpecies,
    m0: &MinimumPoint,
    kt: f64,
    extent: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    let p0 = m0.position;
    let z_lo = (p0.z - extent).max(Z_FLOOR);
    for _ in 0..1_000_000 {
        let dy = extent * (2.0 * rng.random::<f64>() - 1.0);
        let z = z_lo + (p0.z + extent - z_lo) * rng.random::<f64>();
        let u: f64 = rng.random();
        let p = Vec3::new(p0.x, p0.y + dy, z);
        let v = match crate::potential::potential(c, s, &p) {
            Ok(v) => v,
            Err(Error::Singularity { .. }) => continue,
            Err(e) => return Err(e),
        };
        if u < (-(v - m0.potential) / kt).exp() {
            return Ok((dy, z - p0.z));
        }
    }
    Err(Error::Setup(
        "Boltzmann sampling did not accept any point".into(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fate {
    Left,
    Right,
    Back,
    LostSurface,
    LostEscape,
    Timeout,
}

impl Fate {
    pub const ALL: [Fate; 6] = [
        Fate::Left,
        Fate::Right,
        Fate::Back,
        Fate::LostSurface,
        Fate::LostEscape,
        Fate::Timeout,
    ];
}

/// Half-space `(p - point) · normal >= 0` that ends a trajectory with `fate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionPlane {
    pub point: Vec3,
    pub normal: Vec3,
    pub fate: Fate,
}

impl DetectionPlane {
    fn crossed(&self, p: &Vec3) -> bool {
        (p - self.point).dot(&self.normal) >= 0.0
    }
}

/// Where trajectories end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub planes: Vec<DetectionPlane>,
    /// Atoms with `x < back_x` are reflected.
    pub back_x: f64,
    pub z_floor: f64,
    pub box_min: Vec3,
    pub box_max: Vec3,
}

/// Detection planes sit at this fraction of each arm length.
pub const DETECTION_FRACTION: f64 = 0.9;

impl Region {
    /// Detection planes across both arms at 90% of their length, back plane
    /// at `start_x`, box `margin` beyond the wires.
    pub fn for_y_splitter(p: &YSplitterParams, start_x: f64, margin: f64) -> Self {
        let (l, r) = (p.left_direction(), p.right_direction());
        let reach = DETECTION_FRACTION * p.arm_length;
        let tip = p.arm_length * l;
        Region {
            planes: vec![
                DetectionPlane {
                    point: reach * l,
                    normal: l,
                    fate: Fate::Left,
                },
                DetectionPlane {
                    point: reach * r,
                    normal: r,
                    fate: Fate::Right,
                },
            ],
            back_x: start_x,
            z_floor: Z_FLOOR,
            box_min: Vec3::new(
                start_x.min(-p.input_length) - margin,
                -tip.y - margin,
                Z_FLOOR,
            ),
            box_max: Vec3::new(tip.x + margin, tip.y + margin, margin),
        }
    }

    /// A straight guide along `x` whose single exit plane at `end_x` counts
    /// as [`Fate::Left`].
    pub fn for_straight_guide(start_x: f64, end_x: f64, margin: f64) -> Self {
        Region {
            planes: vec![DetectionPlane {
                point: Vec3::new(end_x, 0.0, 0.0),
                normal: Vec3::x(),
                fate: Fate::Left,
            }],
            back_x: start_x,
            z_floor: Z_FLOOR,
            box_min: Vec3::new(start_x - margin, -margin, Z_FLOOR),
            box_max: Vec3::new(end_x + margin, margin, margin),
        }
    }

    /// Mirror image under `y → -y`; Left and Right planes swap roles.
    pub fn mirrored_y(&self) -> Self {
        let m = |v: &Vec3| Vec3::new(v.x, -v.y, v.z);
        Region {
            planes: self
                .planes
                .iter()
                .map(|d| DetectionPlane {
                    point: m(&d.point),
                    normal: m(&d.normal),
                    fate: match d.fate {
                        Fate::Left => Fate::Right,
                        Fate::Right => Fate::Left,
                        f => f,
                    },
                })
                .collect(),
            back_x: self.back_x,
            z_floor: self.z_floor,
            box_min: Vec3::new(self.box_min.x, -self.box_max.y, self.box_min.z),
            box_max: Vec3::new(self.box_max.x, -self.box_min.y, self.box_max.z),
        }
    }

    fn fate_at(&self, p: &Vec3) -> Option<Fate> {
        if p.z <= self.z_floor {
            return Some(Fate::LostSurface);
        }
        // Planes are checked in order; the first crossed one wins.
        if let Some(d) = self.planes.iter().find(|d| d.crossed(p)) {
            return Some(d.fate);
        }
        if p.x < self.back_x {
            return Some(Fate::Back);
        }
        let inside = (0..3).all(|k| p[k] >= self.box_min[k] && p[k] <= self.box_max[k]);
        (!inside).then_some(Fate::LostEscape)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integrator {
    /// Base time step, s.
    pub dt: f64,
    /// s
    pub t_max: f64,
    /// The step is halved (up to this many times) while `|a| dt` exceeds
    /// `1e-2 |v|`. Zero gives a fixed step.
    pub max_halvings: u32,
    /// Uniform acceleration along `-z`, m/s². Off by default.
    pub gravity: f64,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator {
            dt: 1e-7,
            t_max: 0.05,
            max_halvings: 8,
            gravity: 0.0,
        }
    }
}

impl Integrator {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt must be positive"));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::param("t_max must be positive"));
        }
        if !(self.gravity >= 0.0 && self.gravity.is_finite()) {
            return Err(Error::param("gravity must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    pub fate: Fate,
    pub final_state: AtomState,
    /// Smallest `|B|` met along the path, T.
    pub min_field: f64,
    /// s
    pub flight_time: f64,
    /// Largest `x` reached, m.
    pub max_x: f64,
}

/// Acceleration and `|B|` at `p`.
fn accel(c: &Circuit, s: &AtomSpecies, g: f64, p: &Vec3) -> Result<(Vec3, f64)> {
    let (b, j) = field_and_jacobian(c, p)?;
    let bn = b.norm();
    let mut a = if bn > 0.0 {
        j.tr_mul(&b) * (-s.moment / (s.mass * bn))
    } else {
        Vec3::zeros()
    };
    a.z -= g;
    Ok((a, bn))
}

/// Total energy `m v²/2 + μ|B| + m g z`, J.
pub fn energy(c: &Circuit, s: &AtomSpecies, gravity: f64, st: &AtomState) -> Result<f64> {
    let b = crate::field::total_field(c, &st.position)?.norm();
    Ok(0.5 * s.mass * st.velocity.norm_squared() + s.moment * b + s.mass * gravity * st.position.z)
}

pub fn propagate(
    state: &AtomState,
    c: &Circuit,
    s: &AtomSpecies,
    integ: &Integrator,
    region: &Region,
) -> TrajectoryOutcome {
    propagate_observed(state, c, s, integ, region, |_, _| {})
}

/// [`propagate`] calling `observe(t, state)` after every step.
pub fn propagate_observed<F>(
    state: &AtomState,
    c: &Circuit,
    s: &AtomSpecies,
    integ: &Integrator,
    region: &Region,
    mut observe: F,
) -> TrajectoryOutcome
where
    F: FnMut(f64, &AtomState),
{
    let mut st = *state;
    let mut t = 0.0;
    let mut max_x = st.position.x;
    let outcome = |fate, st: AtomState, min_field, t, max_x| TrajectoryOutcome {
        fate,
        final_state: st,
        min_field,
        flight_time: t,
        max_x,
    };
    let (mut a, b0) = match accel(c, s, integ.gravity, &st.position) {
        Ok(v) => v,
        Err(_) => return outcome(Fate::LostSurface, st, 0.0, t, max_x),
    };
    let mut min_field = b0;
    if let Some(f) = region.fate_at(&st.position) {
        return outcome(f, st, min_field, t, max_x);
    }
    loop {
        if t >= integ.t_max {
            return outcome(Fate::Timeout, st, min_field, t, max_x);
        }
        let mut h = integ.dt;
        let speed = st.velocity.norm();
        let an = a.norm();
        let mut halvings = 0;
        while halvings < integ.max_halvings && an * h > 1e-2 * speed {
            h *= 0.5;
            halvings += 1;
        }
        let p1 = st.position + st.velocity * h + a * (0.5 * h * h);
        let (a1, b1) = match accel(c, s, integ.gravity, &p1) {
            Ok(v) => v,
            Err(_) => {
                st.position = p1;
                return outcome(Fate::LostSurface, st, min_field, t + h, max_x);
            }
        };
        st.velocity += (a + a1) * (0.5 * h);
        st.position = p1;
        a = a1;
        t += h;
        min_field = min_field.min(b1);
        max_x = max_x.max(p1.x);
        observe(t, &st);
        if let Some(f) = region.fate_at(&p1) {
            return outcome(f, st, min_field, t, max_x);
        }
    }
}
