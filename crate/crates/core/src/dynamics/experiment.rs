use serde::{Deserialize, Serialize};

use super::{
    input_window, propagate, sample_ensemble, AtomState, EnsembleSpec, Fate, Integrator, Region,
    TrajectoryOutcome,
};
use crate::error::{Error, Result};
use crate::geometry::{build_y_splitter, Circuit, YSplitterParams};
use crate::parallel::map_indexed;
use crate::potential::{side_guide_height, AtomSpecies};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FateCounts {
    pub left: u64,
    pub right: u64,
    pub back: u64,
    pub lost_surface: u64,
    pub lost_escape: u64,
    pub timeout: u64,
}

impl FateCounts {
    pub fn add(&mut self, f: Fate) {
        *self.get_mut(f) += 1;
    }

    pub fn get(&self, f: Fate) -> u64 {
        match f {
            Fate::Left => self.left,
            Fate::Right => self.right,
            Fate::Back => self.back,
            Fate::LostSurface => self.lost_surface,
            Fate::LostEscape => self.lost_escape,
            Fate::Timeout => self.timeout,
        }
    }

    fn get_mut(&mut self, f: Fate) -> &mut u64 {
        match f {
            Fate::Left => &mut self.left,
            Fate::Right => &mut self.right,
            Fate::Back => &mut self.back,
            Fate::LostSurface => &mut self.lost_surface,
            Fate::LostEscape => &mut self.lost_escape,
            Fate::Timeout => &mut self.timeout,
        }
    }

    pub fn total(&self) -> u64 {
        Fate::ALL.iter().map(|&f| self.get(f)).sum()
    }

    pub fn lost(&self) -> u64 {
        self.lost_surface + self.lost_escape + self.timeout
    }
}

/// Binomial estimate `k/n` with standard error `sqrt(p(1-p)/n)`.
fn binomial(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = k as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub counts: FateCounts,
}

impl SplitStats {
    pub fn from_outcomes(outcomes: &[TrajectoryOutcome]) -> Self {
        let mut counts = FateCounts::default();
        for o in outcomes {
            counts.add(o.fate);
        }
        SplitStats { counts }
    }

    pub fn n_atoms(&self) -> u64 {
        self.counts.total()
    }

    /// Share of all atoms with fate `f`, with standard error.
    pub fn fraction(&self, f: Fate) -> (f64, f64) {
        binomial(self.counts.get(f), self.n_atoms())
    }

    /// `Left / (Left + Right)` with standard error; NaN if no atom arrived.
    pub fn left_share(&self) -> (f64, f64) {
        binomial(self.counts.left, self.counts.left + self.counts.right)
    }
}

/// Propagates every state; output order follows input order.
pub fn run_batch(
    states: &[AtomState],
    c: &Circuit,
    s: &AtomSpecies,
    integ: &Integrator,
    region: &Region,
) -> Vec<TrajectoryOutcome> {
    map_indexed(states.len(), |i| propagate(&states[i], c, s, integ, region))
}

/// Box margin around the splitter wires, in input-guide heights.
const BOX_MARGIN: f64 = 5.0;

fn y_setup(p: &YSplitterParams, start_x: f64) -> Result<(Circuit, Region)> {
    let c = build_y_splitter(p)?;
    let r0 = side_guide_height(p.total_current.abs(), p.bias.y.abs())
        .map_err(|e| Error::Setup(format!("no input guide: {e}")))?;
    let region = Region::for_y_splitter(p, start_x, BOX_MARGIN * r0);
    Ok((c, region))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPoint {
    /// Left-arm current fraction.
    pub fraction: f64,
    pub stats: SplitStats,
}

/// One Monte Carlo batch per left-arm current fraction, same ensemble seeds
/// and bias throughout.
pub fn run_split_experiment(
    spec: &EnsembleSpec,
    params: &YSplitterParams,
    fractions: &[f64],
    integ: &Integrator,
) -> Result<Vec<SplitPoint>> {
    integ.validate()?;
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::param(format!("current fraction {f} outside [0, 1]")));
    }
    fractions
        .iter()
        .map(|&f| {
            let out = run_y_batch(spec, &params.with_fraction(f), integ)?;
            Ok(SplitPoint {
                fraction: f,
                stats: SplitStats::from_outcomes(&out),
            })
        })
        .collect()
}

/// Samples the ensemble in the input guide of the Y described by `params`
/// and propagates it; outcomes follow atom order.
pub fn run_y_batch(
    spec: &EnsembleSpec,
    params: &YSplitterParams,
    integ: &Integrator,
) -> Result<Vec<TrajectoryOutcome>> {
    integ.validate()?;
    let (c, region) = y_setup(params, spec.start_x)?;
    let w = input_window(&c, params.total_current)?;
    let states = sample_ensemble(spec, &c, &w)?;
    Ok(run_batch(&states, &c, &spec.species, integ, &region))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackReflection {
    /// Back among atoms that reached the junction (`x >= 0`).
    pub fraction: f64,
    pub error: f64,
    pub reached_junction: u64,
    pub stats: SplitStats,
}

/// Reflection at the junction for an equal split.
pub fn back_reflection_estimate(
    spec: &EnsembleSpec,
    params: &YSplitterParams,
    integ: &Integrator,
) -> Result<BackReflection> {
    let out = run_y_batch(spec, &params.with_fraction(0.5), integ)?;
    Ok(back_fraction(&out))
}

/// Back share among trajectories that reached `x >= 0`.
pub fn back_fraction(out: &[TrajectoryOutcome]) -> BackReflection {
    let reached: Vec<&TrajectoryOutcome> = out.iter().filter(|o| o.max_x >= 0.0).collect();
    let back = reached.iter().filter(|o| o.fate == Fate::Back).count() as u64;
    let (fraction, error) = binomial(back, reached.len() as u64);
    BackReflection {
        fraction,
        error,
        reached_junction: reached.len() as u64,
        stats: SplitStats::from_outcomes(out),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinFieldHistogram {
    /// Bin edges, T; `counts.len() + 1` entries.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// T
    pub threshold: f64,
    pub fraction_below: f64,
}

/// Histogram of the smallest `|B|` along each trajectory over
/// `[0, max]` and the share of atoms that dipped below `threshold`, where
/// spin flips become likely.
pub fn min_field_diagnostic(
    outcomes: &[TrajectoryOutcome],
    threshold: f64,
    bins: usize,
) -> MinFieldHistogram {
    let bins = bins.max(1);
    let top = outcomes.iter().map(|o| o.min_field).fold(0.0_f64, f64::max);
    let top = if top > 0.0 { top } else { 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|k| top * k as f64 / bins as f64).collect();
    let mut counts = vec![0u64; bins];
    for o in outcomes {
        let k = ((o.min_field / top) * bins as f64) as usize;
        counts[k.min(bins - 1)] += 1;
    }
    let below = outcomes.iter().filter(|o| o.min_field < threshold).count();
    MinFieldHistogram {
        edges,
        counts,
        threshold,
        fraction_below: if outcomes.is_empty() {
            0.0
        } else {
            below as f64 / outcomes.len() as f64
        },
    }
}
