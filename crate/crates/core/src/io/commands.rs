//! Subcommands as plain data. Parameters use file units (μm, G, A, μK) and
//! are converted to SI here; the command-line front end only fills these
//! structs, so a manifest can replay a run without it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::emit::{to_json_string, write_json, write_text, Cell, Table};
use super::grid::GridFile;
use super::layout::LayoutFile;
use crate::dynamics::{
    back_fraction, min_field_diagnostic, run_split_experiment, run_y_batch, EnsembleSpec,
    Integrator, Sampling,
};
use crate::error::{Error, Result};
use crate::field::total_field;
use crate::geometry::{build_y_splitter, Circuit, Vec3, YSplitterParams};
use crate::modes::{
    build_slice, mirror_residuals, solve_modes_with, symmetry_check, GridSpec, SolverOptions,
    CLUSTER_GAP, DEFAULT_CEILING,
};
use crate::parallel::map_indexed;
use crate::potential::{
    classify_two_wire, harmonic_frequencies, side_guide_height, trace_minima, AtomSpecies,
    SearchWindow, TraceOptions,
};
use crate::units::{
    gauss_to_tesla, m_to_um, tesla_to_gauss, um_to_m, AMU, BOHR_MAGNETON, BOLTZMANN, MICROKELVIN,
};

/// `n` equally spaced values from `start` to `end` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub end: f64,
    pub n: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self.n {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|k| self.start + (self.end - self.start) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.n == 0 || !self.start.is_finite() || !self.end.is_finite() {
            return Err(Error::param(format!(
                "{what}: need finite bounds and n >= 1"
            )));
        }
        Ok(())
    }
}

/// `start`, `start + step`, … up to `end` (inclusive within rounding).
pub fn stepped_range(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(end >= start) || !start.is_finite() || !end.is_finite() {
        return Err(Error::param("range needs start <= end and a positive step"));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| start + step * k as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeciesParams {
    pub mass_amu: f64,
    /// Effective moment in Bohr magnetons.
    pub moment_bohr: f64,
}

impl Default for SpeciesParams {
    fn default() -> Self {
        SpeciesParams {
            mass_amu: 7.016_003_4,
            moment_bohr: 1.0,
        }
    }
}

impl SpeciesParams {
    pub fn species(&self) -> Result<AtomSpecies> {
        AtomSpecies::new(self.mass_amu * AMU, self.moment_bohr * BOHR_MAGNETON)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldMapParams {
    /// μm
    pub x: Axis,
    pub y: Axis,
    pub z: Axis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimaTraceParams {
    /// Slice positions, μm.
    pub x: Axis,
    /// Transverse search window, μm, with its seed grid.
    pub y_range: (f64, f64),
    pub z_range: (f64, f64),
    pub grid_ny: usize,
    pub grid_nz: usize,
    #[serde(default)]
    pub species: SpeciesParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyParams {
    pub d_um: f64,
    pub current_a: f64,
    pub bias_g: f64,
}

/// How the ensemble's transverse positions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingChoice {
    /// Boltzmann without an Ioffe field (conical guide), harmonic otherwise.
    #[default]
    Auto,
    Harmonic,
    Boltzmann,
}

/// A Y splitter with its ensemble and integrator, in file units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YExperimentParams {
    pub current_a: f64,
    /// Bias perpendicular to the input wire in the chip plane (`y`), G.
    pub bias_g: f64,
    /// Axial (`x`) bias, G.
    pub ioffe_g: f64,
    pub half_angle_deg: f64,
    pub temp_uk: f64,
    pub n_atoms: usize,
    /// Start of the ensemble, μm; default three guide heights before the
    /// junction.
    pub start_x_um: Option<f64>,
    pub sampling: SamplingChoice,
    /// s
    pub dt: f64,
    pub t_max: f64,
    #[serde(default)]
    pub species: SpeciesParams,
}

impl YExperimentParams {
    /// Defaults: 0.8 A, 8 G, 3 G Ioffe, 250 μK, 10⁴ atoms.
    pub fn new(current_a: f64, bias_g: f64, ioffe_g: f64) -> Self {
        YExperimentParams {
            current_a,
            bias_g,
            ioffe_g,
            half_angle_deg: 10.0,
            temp_uk: 250.0,
            n_atoms: 10_000,
            start_x_um: None,
            sampling: SamplingChoice::Auto,
            dt: Integrator::default().dt,
            t_max: Integrator::default().t_max,
            species: SpeciesParams::default(),
        }
    }

    pub fn y_params(&self) -> YSplitterParams {
        let bias = Vec3::new(
            gauss_to_tesla(self.ioffe_g),
            gauss_to_tesla(self.bias_g),
            0.0,
        );
        YSplitterParams::new(self.current_a, bias).with_half_angle(self.half_angle_deg.to_radians())
    }

    pub fn ensemble(&self, seed: u64) -> Result<EnsembleSpec> {
        let r0 = side_guide_height(self.current_a, gauss_to_tesla(self.bias_g))?;
        let start_x = self.start_x_um.map(um_to_m).unwrap_or(-3.0 * r0);
        let boltzmann = match self.sampling {
            SamplingChoice::Auto => self.ioffe_g == 0.0,
            SamplingChoice::Harmonic => false,
            SamplingChoice::Boltzmann => true,
        };
        let mut spec = EnsembleSpec::new(
            self.species.species()?,
            self.temp_uk * MICROKELVIN,
            self.n_atoms,
            start_x,
            seed,
        );
        if boltzmann {
            spec = spec.with_sampling(Sampling::Boltzmann { extent: r0 });
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn integrator(&self) -> Integrator {
        Integrator {
            dt: self.dt,
            t_max: self.t_max,
            ..Integrator::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCurveParams {
    #[serde(flatten)]
    pub experiment: YExperimentParams,
    /// Left-arm current fractions.
    pub fractions: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackReflectionParams {
    #[serde(flatten)]
    pub experiment: YExperimentParams,
    /// Spin-flip diagnostic threshold on the smallest `|B|`, G.
    pub spin_flip_threshold_g: f64,
    pub histogram_bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModesParams {
    pub slice_x_um: f64,
    /// Nodes per side.
    pub grid: usize,
    pub n_modes: usize,
    /// The grid spans `±y_half_width_um`, so it is mirror-centred.
    pub y_half_width_um: f64,
    pub z_range_um: (f64, f64),
    #[serde(default)]
    pub species: SpeciesParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YBuildParams {
    pub current_a: f64,
    /// G
    pub bias_g: [f64; 3],
    pub fraction_left: f64,
    pub half_angle_deg: f64,
    /// μm; default ten guide heights.
    pub input_length_um: Option<f64>,
    pub arm_length_um: Option<f64>,
}

impl Default for YBuildParams {
    fn default() -> Self {
        let p = YSplitterParams::default();
        YBuildParams {
            current_a: p.total_current,
            bias_g: [
                tesla_to_gauss(p.bias.x),
                tesla_to_gauss(p.bias.y),
                tesla_to_gauss(p.bias.z),
            ],
            fraction_left: p.current_fraction_left,
            half_angle_deg: p.half_angle.to_degrees(),
            input_length_um: None,
            arm_length_um: None,
        }
    }
}

impl YBuildParams {
    pub fn y_params(&self) -> YSplitterParams {
        let b = self.bias_g;
        let bias = Vec3::new(
            gauss_to_tesla(b[0]),
            gauss_to_tesla(b[1]),
            gauss_to_tesla(b[2]),
        );
        let mut p = YSplitterParams::new(self.current_a, bias)
            .with_fraction(self.fraction_left)
            .with_half_angle(self.half_angle_deg.to_radians());
        if let Some(l) = self.input_length_um {
            p.input_length = um_to_m(l);
        }
        if let Some(l) = self.arm_length_um {
            p.arm_length = um_to_m(l);
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", content = "parameters", rename_all = "kebab-case")]
pub enum Command {
    FieldMap(FieldMapParams),
    MinimaTrace(MinimaTraceParams),
    Classify(ClassifyParams),
    SplitCurve(SplitCurveParams),
    BackReflection(BackReflectionParams),
    Modes(ModesParams),
    YBuild(YBuildParams),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FieldMap(_) => "field-map",
            Command::MinimaTrace(_) => "minima-trace",
            Command::Classify(_) => "classify",
            Command::SplitCurve(_) => "split-curve",
            Command::BackReflection(_) => "back-reflection",
            Command::Modes(_) => "modes",
            Command::YBuild(_) => "y-build",
        }
    }

    /// Whether the command reads its circuit from `--layout`.
    pub fn uses_layout(&self) -> bool {
        matches!(
            self,
            Command::FieldMap(_) | Command::MinimaTrace(_) | Command::Modes(_)
        )
    }
}

/// Runs `cmd`, writing its files into `out`; returns their names.
pub fn execute(
    cmd: &Command,
    layout: Option<&LayoutFile>,
    seed: u64,
    out: &Path,
) -> Result<Vec<String>> {
    let circuit = match (cmd.uses_layout(), layout) {
        (true, Some(l)) => Some(l.to_circuit()?),
        (true, None) => return Err(Error::param(format!("{} needs a layout file", cmd.name()))),
        (false, Some(_)) => {
            return Err(Error::param(format!(
                "{} builds its own circuit and takes no layout file",
                cmd.name()
            )))
        }
        (false, None) => None,
    };
    let files: Vec<(&str, String)> = match cmd {
        Command::FieldMap(p) => vec![("field_map.csv", field_map(circuit.as_ref().unwrap(), p)?)],
        Command::MinimaTrace(p) => minima_trace(circuit.as_ref().unwrap(), p)?,
        Command::Classify(p) => vec![("classify.json", classify(p)?)],
        Command::SplitCurve(p) => vec![("split_curve.csv", split_curve(p, seed)?)],
        Command::BackReflection(p) => back_reflection(p, seed)?,
        Command::Modes(p) => return modes(circuit.as_ref().unwrap(), p, seed, out),
        Command::YBuild(p) => vec![("layout.json", y_build(p)?)],
    };
    let mut names = Vec::new();
    for (name, text) in files {
        write_text(&out.join(name), &text)?;
        names.push(name.to_string());
    }
    Ok(names)
}

/// Columns `x_um,y_um,z_um,bx_g,by_g,bz_g,b_g`; `NaN` on points within the
/// singularity guard of a wire. Rows run with `z` fastest, then `y`, then
/// `x`.
fn field_map(c: &Circuit, p: &FieldMapParams) -> Result<String> {
    p.x.validate("x axis")?;
    p.y.validate("y axis")?;
    p.z.validate("z axis")?;
    let (xs, ys, zs) = (p.x.values(), p.y.values(), p.z.values());
    let n = xs.len() * ys.len() * zs.len();
    let rows = map_indexed(n, |k| {
        let (x, y, z) = (
            xs[k / (ys.len() * zs.len())],
            ys[(k / zs.len()) % ys.len()],
            zs[k % zs.len()],
        );
        let b = total_field(c, &Vec3::new(um_to_m(x), um_to_m(y), um_to_m(z)))
            .unwrap_or(Vec3::repeat(f64::NAN));
        [x, y, z, b.x, b.y, b.z, b.norm()]
    });
    let mut t = Table::new(&["x_um", "y_um", "z_um", "bx_g", "by_g", "bz_g", "b_g"]);
    for r in rows {
        let mut cells: Vec<Cell> = r[..3].iter().map(|&v| v.into()).collect();
        cells.extend(r[3..].iter().map(|&v| tesla_to_gauss(v).into()));
        t.push(cells);
    }
    Ok(t.to_csv_string())
}

#[derive(Serialize)]
struct TrackSummary {
    id: usize,
    parents: Vec<usize>,
    first_x_um: f64,
    last_x_um: f64,
    ambiguous_end: bool,
}

#[derive(Serialize)]
struct FourthPortSummary {
    track_id: usize,
    birth_x_um: f64,
    death_x_um: f64,
    birth_z_um: f64,
    from_surface: bool,
}

#[derive(Serialize)]
struct TraceSummary {
    split_x_um: Option<f64>,
    lateral_split_x_um: Option<f64>,
    fourth_port: Option<FourthPortSummary>,
    output_tracks: Vec<usize>,
    tracks: Vec<TrackSummary>,
}

/// `minima_trace.csv` with columns
/// `x_um,track_id,y_um,z_um,v_uk,b_g,omega1,omega2,barrier_uk` (energies as
/// `V / k_B`, trap frequencies in rad/s and `NaN` at conical minima, barrier
/// to the lower of the neighbouring saddles and `NaN` without a neighbour),
/// plus `trace_summary.json`.
fn minima_trace(c: &Circuit, p: &MinimaTraceParams) -> Result<Vec<(&'static str, String)>> {
    p.x.validate("x axis")?;
    let s = p.species.species()?;
    let window = SearchWindow::new(
        (um_to_m(p.y_range.0), um_to_m(p.y_range.1)),
        (um_to_m(p.z_range.0), um_to_m(p.z_range.1)),
        p.grid_ny,
        p.grid_nz,
    )?;
    let trace = trace_minima(
        c,
        &s,
        (um_to_m(p.x.start), um_to_m(p.x.end)),
        p.x.n,
        &TraceOptions::new(window),
    )?;
    let uk = |e: f64| e / (BOLTZMANN * MICROKELVIN);
    let mut t = Table::new(&[
        "x_um",
        "track_id",
        "y_um",
        "z_um",
        "v_uk",
        "b_g",
        "omega1",
        "omega2",
        "barrier_uk",
    ]);
    for sl in &trace.slices {
        for (k, m) in sl.minima.iter().enumerate() {
            let (w1, w2) = harmonic_frequencies(&s, m).unwrap_or((f64::NAN, f64::NAN));
            let left = k.checked_sub(1).and_then(|i| sl.barriers[i]);
            let right = sl.barriers.get(k).copied().flatten();
            let barrier = match (left, right) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => f64::NAN,
            };
            t.push(vec![
                m_to_um(sl.x).into(),
                sl.track_ids[k].into(),
                m_to_um(m.position.y).into(),
                m_to_um(m.position.z).into(),
                uk(m.potential).into(),
                tesla_to_gauss(m.field).into(),
                w1.into(),
                w2.into(),
                uk(barrier).into(),
            ]);
        }
    }
    let x_of = |sl: usize| m_to_um(trace.slices[sl].x);
    let summary = TraceSummary {
        split_x_um: trace.split_x.map(m_to_um),
        lateral_split_x_um: trace.lateral_split_x.map(m_to_um),
        fourth_port: trace.fourth_port.map(|f| FourthPortSummary {
            track_id: f.track_id,
            birth_x_um: m_to_um(f.birth_x),
            death_x_um: m_to_um(f.death_x),
            birth_z_um: m_to_um(f.birth_z),
            from_surface: f.from_surface,
        }),
        output_tracks: trace.output_tracks.clone(),
        tracks: trace
            .tracks
            .iter()
            .map(|tr| TrackSummary {
                id: tr.id,
                parents: tr.parents.clone(),
                first_x_um: x_of(tr.first_slice()),
                last_x_um: x_of(tr.last_slice()),
                ambiguous_end: tr.ambiguous_end,
            })
            .collect(),
    };
    Ok(vec![
        ("minima_trace.csv", t.to_csv_string()),
        ("trace_summary.json", to_json_string(&summary)),
    ])
}

#[derive(Serialize)]
struct ClassifyVerdict {
    case: crate::potential::TwoWireCase,
    d_um: f64,
    d_split_um: f64,
}

/// One-line JSON verdict.
fn classify(p: &ClassifyParams) -> Result<String> {
    let v = classify_two_wire(um_to_m(p.d_um), p.current_a, gauss_to_tesla(p.bias_g))?;
    let verdict = ClassifyVerdict {
        case: v.case,
        d_um: p.d_um,
        d_split_um: m_to_um(v.d_split),
    };
    let mut line = serde_json::to_string(&verdict).expect("verdict serialises");
    line.push('\n');
    Ok(line)
}

/// Columns `fraction,n_left,n_right,n_back,n_lost,left_frac,err`, where
/// `left_frac = n_left / (n_left + n_right)` and `err` its binomial
/// standard error.
fn split_curve(p: &SplitCurveParams, seed: u64) -> Result<String> {
    let e = &p.experiment;
    let points = run_split_experiment(
        &e.ensemble(seed)?,
        &e.y_params(),
        &p.fractions,
        &e.integrator(),
    )?;
    let mut t = Table::new(&[
        "fraction",
        "n_left",
        "n_right",
        "n_back",
        "n_lost",
        "left_frac",
        "err",
    ]);
    for pt in &points {
        let c = &pt.stats.counts;
        let (share, err) = pt.stats.left_share();
        t.push(vec![
            pt.fraction.into(),
            c.left.into(),
            c.right.into(),
            c.back.into(),
            c.lost().into(),
            share.into(),
            err.into(),
        ]);
    }
    Ok(t.to_csv_string())
}

/// Soft bound on the back fraction among atoms reaching the junction.
pub const BACK_REFLECTION_BOUND: f64 = 0.25;

#[derive(Serialize)]
struct BackReport {
    back_fraction: f64,
    error: f64,
    reached_junction: u64,
    within_soft_bound: bool,
    soft_bound: f64,
    counts: crate::dynamics::FateCounts,
    spin_flip_threshold_g: f64,
    fraction_below_threshold: f64,
}

/// `back_reflection.json` and the min-`|B|` histogram `min_field.csv`
/// (`lo_g,hi_g,count`).
fn back_reflection(p: &BackReflectionParams, seed: u64) -> Result<Vec<(&'static str, String)>> {
    let e = &p.experiment;
    let out = run_y_batch(
        &e.ensemble(seed)?,
        &e.y_params().with_fraction(0.5),
        &e.integrator(),
    )?;
    let b = back_fraction(&out);
    let h = min_field_diagnostic(
        &out,
        gauss_to_tesla(p.spin_flip_threshold_g),
        p.histogram_bins,
    );
    let report = BackReport {
        back_fraction: b.fraction,
        error: b.error,
        reached_junction: b.reached_junction,
        within_soft_bound: b.fraction <= BACK_REFLECTION_BOUND,
        soft_bound: BACK_REFLECTION_BOUND,
        counts: b.stats.counts,
        spin_flip_threshold_g: p.spin_flip_threshold_g,
        fraction_below_threshold: h.fraction_below,
    };
    let mut t = Table::new(&["lo_g", "hi_g", "count"]);
    for (k, &n) in h.counts.iter().enumerate() {
        t.push(vec![
            tesla_to_gauss(h.edges[k]).into(),
            tesla_to_gauss(h.edges[k + 1]).into(),
            n.into(),
        ]);
    }
    Ok(vec![
        ("back_reflection.json", to_json_string(&report)),
        ("min_field.csv", t.to_csv_string()),
    ])
}

#[derive(Serialize)]
struct ModesSummary {
    slice_x_um: f64,
    /// The slice passed the mirror-symmetry precondition.
    symmetric_slice: bool,
    max_mirror_residual: f64,
    max_residual: f64,
    orthonormality_error: f64,
    ground_width_spacings: (f64, f64),
    boundary_margin: f64,
    basis_size: usize,
}

/// `eigenvalues.csv`
/// (`index,energy_uk,residual,mirror_residual,cluster_start,cluster_size`,
/// energies as `E / k_B` on the absolute potential scale), `potential.bin`
/// and `modes.bin` in the [`GridFile`] layout, and `modes_summary.json`.
fn modes(c: &Circuit, p: &ModesParams, seed: u64, out: &Path) -> Result<Vec<String>> {
    let s = p.species.species()?;
    let h = um_to_m(p.y_half_width_um);
    let spec = GridSpec {
        y: (-h, h),
        z: (um_to_m(p.z_range_um.0), um_to_m(p.z_range_um.1)),
        ny: p.grid,
        nz: p.grid,
        ceiling: DEFAULT_CEILING,
    };
    let g = build_slice(c, &s, um_to_m(p.slice_x_um), &spec)?;
    let opts = SolverOptions {
        seed,
        ..SolverOptions::default()
    };
    let m = solve_modes_with(&g, s.mass, p.n_modes, &opts)?;
    let (symmetric, mirror) = match symmetry_check(&g, &m) {
        Ok(r) => (true, r),
        Err(Error::Precondition(_)) => {
            let n = m.eigenvalues.len();
            let spacing = if n > 1 {
                (m.eigenvalues[n - 1] - m.eigenvalues[0]) / (n - 1) as f64
            } else {
                f64::INFINITY
            };
            (false, mirror_residuals(&g, &m, CLUSTER_GAP * spacing)?)
        }
        Err(e) => return Err(e),
    };
    let uk = |e: f64| e / (BOLTZMANN * MICROKELVIN);
    let mut t = Table::new(&[
        "index",
        "energy_uk",
        "residual",
        "mirror_residual",
        "cluster_start",
        "cluster_size",
    ]);
    for (k, r) in mirror.iter().enumerate() {
        t.push(vec![
            k.into(),
            uk(m.eigenvalues[k]).into(),
            m.residuals[k].into(),
            r.residual.into(),
            r.cluster_start.into(),
            r.cluster_size.into(),
        ]);
    }
    let summary = ModesSummary {
        slice_x_um: p.slice_x_um,
        symmetric_slice: symmetric,
        max_mirror_residual: mirror.iter().map(|r| r.residual).fold(0.0, f64::max),
        max_residual: m.residuals.iter().copied().fold(0.0, f64::max),
        orthonormality_error: m.orthonormality_error,
        ground_width_spacings: m.ground_width,
        boundary_margin: m.boundary_margin,
        basis_size: m.basis_size,
    };
    write_text(&out.join("eigenvalues.csv"), &t.to_csv_string())?;
    GridFile::for_slice(&g, vec![g.potential.clone()]).write(&out.join("potential.bin"))?;
    GridFile::for_slice(&g, m.modes).write(&out.join("modes.bin"))?;
    write_json(&out.join("modes_summary.json"), &summary)?;
    Ok([
        "eigenvalues.csv",
        "potential.bin",
        "modes.bin",
        "modes_summary.json",
    ]
    .map(String::from)
    .to_vec())
}

fn y_build(p: &YBuildParams) -> Result<String> {
    let c = build_y_splitter(&p.y_params())?;
    Ok(to_json_string(&LayoutFile::from_circuit(&c)))
}
