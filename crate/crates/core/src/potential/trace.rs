//! Slice-by-slice minima tracing along the guide axis with continuity-based
//! track linking.

use serde::{Deserialize, Serialize};

use super::minima::{find_transverse_minima, MinimumPoint, SearchOptions, SearchWindow, Z_FLOOR};
use super::saddle::barrier_height;
use super::AtomSpecies;
use crate::error::{Error, Result};
use crate::geometry::Circuit;
use crate::parallel::map_indexed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub window: SearchWindow,
    pub search: SearchOptions,
    /// Compute saddle barriers between neighbouring minima of each slice.
    pub barriers: bool,
}

impl TraceOptions {
    pub fn new(window: SearchWindow) -> Self {
        TraceOptions {
            window,
            search: SearchOptions::default(),
            barriers: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSlice {
    pub x: f64,
    /// Sorted by `y`, then `z`.
    pub minima: Vec<MinimumPoint>,
    /// Track id of each minimum.
    pub track_ids: Vec<usize>,
    /// `barriers[k]` is the barrier between `minima[k]` and `minima[k + 1]`, J.
    pub barriers: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: usize,
    /// Tracks this one continues when the link was ambiguous (a merge or a
    /// branch). Empty for a fresh birth.
    pub parents: Vec<usize>,
    /// `(slice index, minimum index)` pairs in slice order.
    pub points: Vec<(usize, usize)>,
    /// The track ended because its continuation was ambiguous.
    pub ambiguous_end: bool,
}

impl Track {
    pub fn first_slice(&self) -> usize {
        self.points[0].0
    }

    pub fn last_slice(&self) -> usize {
        self.points[self.points.len() - 1].0
    }
}

/// The extra minimum below the main guide between the geometric wire split
/// and the potential split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourthPort {
    pub track_id: usize,
    pub birth_x: f64,
    pub death_x: f64,
    /// Height at the birth end, m.
    pub birth_z: f64,
    /// The track emerges from the surface-side search boundary.
    pub from_surface: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaTrace {
    pub slices: Vec<TraceSlice>,
    pub tracks: Vec<Track>,
    /// First bifurcation of the input guide: where a lower (fourth-port)
    /// minimum fuses with it, or else where it splits sideways.
    pub split_x: Option<f64>,
    /// First slice at which the input guide is represented by other than
    /// exactly one minimum. With a finite opening angle this lies somewhat
    /// past the fusion.
    pub lateral_split_x: Option<f64>,
    pub fourth_port: Option<FourthPort>,
    /// Ids of the tracks reaching the last slice, sorted by `y`.
    pub output_tracks: Vec<usize>,
}

impl MinimaTrace {
    pub fn slice_spacing(&self) -> f64 {
        if self.slices.len() < 2 {
            0.0
        } else {
            self.slices[1].x - self.slices[0].x
        }
    }

    /// Number of tracks alive at each slice.
    pub fn track_counts(&self) -> Vec<usize> {
        self.slices.iter().map(|s| s.minima.len()).collect()
    }

    pub fn track(&self, id: usize) -> &Track {
        &self.tracks[id]
    }

    pub fn point(&self, slice: usize, index: usize) -> &MinimumPoint {
        &self.slices[slice].minima[index]
    }
}

/// Minima on `n_slices` equally spaced slices over `x_range`, linked into
/// tracks.
pub fn trace_minima(
    c: &Circuit,
    s: &AtomSpecies,
    x_range: (f64, f64),
    n_slices: usize,
    opts: &TraceOptions,
) -> Result<MinimaTrace> {
    if n_slices < 2 {
        return Err(Error::param("trace needs at least two slices"));
    }
    if !(x_range.1 > x_range.0) {
        return Err(Error::param("empty x range"));
    }
    opts.window.validate()?;
    let dx = (x_range.1 - x_range.0) / (n_slices - 1) as f64;
    let per_slice = map_indexed(n_slices, |k| -> Result<TraceSlice> {
        let x = x_range.0 + dx * k as f64;
        let minima = find_transverse_minima(c, s, x, &opts.window, &opts.search)?;
        let barriers = if opts.barriers {
            minima
                .windows(2)
                .map(|p| barrier_height(c, s, &p[0], &p[1]).ok())
                .collect()
        } else {
            vec![None; minima.len().saturating_sub(1)]
        };
        Ok(TraceSlice {
            x,
            track_ids: vec![usize::MAX; minima.len()],
            minima,
            barriers,
        })
    });
    let mut slices = per_slice.into_iter().collect::<Result<Vec<_>>>()?;
    let tracks = link_tracks(&mut slices, dx);

    let (split_x, lateral_split_x) = find_split(&slices, &tracks);
    let fourth_port = find_fourth_port(&slices, &tracks, split_x, &opts.window, dx);
    let last = slices.len() - 1;
    let output_tracks = slices[last].track_ids.clone();

    Ok(MinimaTrace {
        slices,
        tracks,
        split_x,
        lateral_split_x,
        fourth_port,
        output_tracks,
    })
}

fn pos2(m: &MinimumPoint) -> (f64, f64) {
    (m.position.y, m.position.z)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// A link needs the track prediction and the minimum to be mutual nearest
/// neighbours, at least twice as close as any competitor on either side.
const AMBIGUITY_RATIO: f64 = 0.5;

/// Links minima to tracks predicted by linear extrapolation, with a jump
/// limit of twice the slice spacing times the local track slope (at least
/// slope one). Contested continuations are not guessed: the old tracks end
/// and new tracks start, listing every old track within reach as a parent.
fn link_tracks(slices: &mut [TraceSlice], dx: f64) -> Vec<Track> {
    let mut tracks: Vec<Track> = Vec::new();
    let mut alive: Vec<usize> = Vec::new();

    for k in 0..slices.len() {
        let n = slices[k].minima.len();
        let mut assigned = vec![None::<usize>; n];
        let mut parents_of = vec![Vec::<usize>::new(); n];
        if k > 0 {
            // Predicted position and reach of each alive track.
            let pred: Vec<((f64, f64), f64)> = alive
                .iter()
                .map(|&t| {
                    let tr = &tracks[t];
                    let (s1, i1) = tr.points[tr.points.len() - 1];
                    let p1 = pos2(&slices[s1].minima[i1]);
                    if tr.points.len() >= 2 {
                        let (s0, i0) = tr.points[tr.points.len() - 2];
                        let p0 = pos2(&slices[s0].minima[i0]);
                        let steps = (s1 - s0) as f64;
                        let v = ((p1.0 - p0.0) / steps, (p1.1 - p0.1) / steps);
                        let slope = v.0.hypot(v.1) / dx;
                        ((p1.0 + v.0, p1.1 + v.1), 2.0 * dx * slope.max(1.0))
                    } else {
                        (p1, 2.0 * dx)
                    }
                })
                .collect();
            let d: Vec<Vec<f64>> = slices[k]
                .minima
                .iter()
                .map(|m| pred.iter().map(|(q, _)| dist(pos2(m), *q)).collect())
                .collect();
            // Nearest and second-nearest distance along a row or column.
            let best2 = |it: &mut dyn Iterator<Item = (usize, f64)>| {
                let mut b = (usize::MAX, f64::INFINITY, f64::INFINITY);
                for (i, v) in it {
                    if v < b.1 {
                        b = (i, v, b.1);
                    } else if v < b.2 {
                        b.2 = v;
                    }
                }
                b
            };
            for j in 0..n {
                let (a, dj, dj2) = best2(&mut d[j].iter().copied().enumerate());
                if a == usize::MAX {
                    continue;
                }
                let (jj, da, da2) = best2(&mut (0..n).map(|i| (i, d[i][a])));
                let clean = jj == j
                    && dj <= pred[a].1
                    && dj < AMBIGUITY_RATIO * dj2
                    && da < AMBIGUITY_RATIO * da2;
                if clean {
                    assigned[j] = Some(alive[a]);
                }
            }
            for j in 0..n {
                if assigned[j].is_none() {
                    parents_of[j] = (0..alive.len())
                        .filter(|&a| d[j][a] <= pred[a].1)
                        .map(|a| alive[a])
                        .collect();
                    for &t in &parents_of[j] {
                        tracks[t].ambiguous_end = true;
                    }
                }
            }
        }
        let mut next_alive = Vec::new();
        for j in 0..n {
            let t = match assigned[j] {
                Some(t) => t,
                None => {
                    let id = tracks.len();
                    tracks.push(Track {
                        id,
                        parents: std::mem::take(&mut parents_of[j]),
                        points: Vec::new(),
                        ambiguous_end: false,
                    });
                    id
                }
            };
            tracks[t].points.push((k, j));
            slices[k].track_ids[j] = t;
            next_alive.push(t);
        }
        alive = next_alive;
    }
    tracks
}

/// Bifurcations of the input guide, whose track is the highest minimum of
/// the first slice. Its lineage follows ambiguous links (merges and
/// branches). Returns `(first event, lateral split)`: the first event is the
/// earlier of a merge with another track and the lateral split, the first
/// slice at which the lineage is not represented by exactly one minimum.
fn find_split(slices: &[TraceSlice], tracks: &[Track]) -> (Option<f64>, Option<f64>) {
    let first = &slices[0];
    let Some((idx, _)) = first
        .minima
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.position.z.total_cmp(&b.1.position.z))
    else {
        return (None, None);
    };
    let mut in_lineage = vec![false; tracks.len()];
    in_lineage[first.track_ids[idx]] = true;
    // Track ids increase with birth slice, so parents precede children.
    for t in tracks {
        if t.parents.iter().any(|&p| in_lineage[p]) {
            in_lineage[t.id] = true;
        }
    }
    let lateral = slices.iter().skip(1).find_map(|sl| {
        let count = sl.track_ids.iter().filter(|&&t| in_lineage[t]).count();
        (count != 1).then_some(sl.x)
    });
    let merge = tracks
        .iter()
        .filter(|t| in_lineage[t.id] && t.parents.len() >= 2)
        .map(|t| slices[t.first_slice()].x)
        .min_by(f64::total_cmp);
    let first_event = match (merge, lateral) {
        (Some(m), Some(l)) => Some(m.min(l)),
        (m, l) => m.or(l),
    };
    (first_event, lateral)
}

/// A parentless track born after the first slice and before the split,
/// lying below a coexisting minimum.
fn find_fourth_port(
    slices: &[TraceSlice],
    tracks: &[Track],
    split_x: Option<f64>,
    window: &SearchWindow,
    dx: f64,
) -> Option<FourthPort> {
    let split_x = split_x?;
    let (_, dz) = window.spacing();
    tracks
        .iter()
        .filter(|t| t.parents.is_empty() && t.first_slice() > 0 && t.points.len() >= 2)
        .filter(|t| slices[t.first_slice()].x < split_x)
        .filter(|t| {
            t.points.iter().all(|&(s, i)| {
                let z = slices[s].minima[i].position.z;
                slices[s].minima.iter().any(|o| o.position.z > z + 1e-9)
            })
        })
        .map(|t| {
            let (s0, i0) = t.points[0];
            let (s1, i1) = t.points[1];
            let z0 = slices[s0].minima[i0].position.z;
            let z1 = slices[s1].minima[i1].position.z;
            let rise = (z1 - z0).max(0.0);
            // Extrapolating one slice back towards the junction must reach
            // the floor (within one coarse grid cell) for a surface birth.
            let from_surface = z0 - rise <= window.z_min.max(Z_FLOOR) + dz;
            let (sl, _) = t.points[t.points.len() - 1];
            FourthPort {
                track_id: t.id,
                birth_x: slices[s0].x,
                death_x: slices[sl].x + dx,
                birth_z: z0,
                from_surface,
            }
        })
        .max_by(|a, b| (a.death_x - a.birth_x).total_cmp(&(b.death_x - b.birth_x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_y_splitter, Vec3, WireSegment, YSplitterParams};
    use crate::potential::side_guide_height;
    use crate::units::GAUSS;

    const I: f64 = 0.8;
    const B: f64 = 12.0 * GAUSS;

    fn r0() -> f64 {
        side_guide_height(I, B).unwrap()
    }

    fn window(n: usize) -> SearchWindow {
        let r0 = r0();
        SearchWindow::new((-1.5 * r0, 1.5 * r0), (Z_FLOOR, 1.5 * r0), n, n).unwrap()
    }

    fn y_circuit(deg: f64) -> (YSplitterParams, Circuit) {
        let r0 = r0();
        let p = YSplitterParams::new(I, Vec3::new(0.0, B, 0.0)).with_half_angle(deg.to_radians());
        let xs = p.x_at_arm_separation(r0);
        let p = p.with_lengths(10.0 * r0, 4.0 * xs + 10.0 * r0);
        let c = build_y_splitter(&p).unwrap();
        (p, c)
    }

    #[test]
    fn straight_guide_is_one_track_at_constant_height() {
        let w = WireSegment::new(Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), I).unwrap();
        let c = Circuit::new(vec![w], Vec3::new(0.0, B, 0.0)).unwrap();
        let r0 = r0();
        let t = trace_minima(
            &c,
            &AtomSpecies::lithium7(),
            (-r0, r0),
            9,
            &TraceOptions::new(window(41)),
        )
        .unwrap();
        assert_eq!(t.tracks.len(), 1);
        assert_eq!(t.track(0).points.len(), 9);
        assert!(t.split_x.is_none() && t.fourth_port.is_none());
        for sl in &t.slices {
            assert!((sl.minima[0].position.z - r0).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_ranges() {
        let c = y_circuit(10.0).1;
        let s = AtomSpecies::lithium7();
        let o = TraceOptions::new(window(21));
        assert!(trace_minima(&c, &s, (0.0, 1e-4), 1, &o).is_err());
        assert!(trace_minima(&c, &s, (1e-4, 0.0), 5, &o).is_err());
    }

    #[test]
    fn y_splits_at_d_split_with_fourth_port() {
        let r0 = r0();
        let (p, c) = y_circuit(10.0);
        let xs = p.x_at_arm_separation(r0);
        let t = trace_minima(
            &c,
            &AtomSpecies::lithium7(),
            (-r0, 2.0 * xs),
            200,
            &TraceOptions::new(window(81)),
        )
        .unwrap();
        let dd = p.arm_separation_at(t.slice_spacing());
        let d = p.arm_separation_at(t.split_x.unwrap());
        assert!((d - r0).abs() <= dd, "split at d = {} d_split", d / r0);
        assert!(t.lateral_split_x.unwrap() >= t.split_x.unwrap());

        let fp = t.fourth_port.expect("fourth port");
        assert!(fp.from_surface);
        assert!(fp.birth_x > 0.0 && fp.birth_x < t.split_x.unwrap());

        // Two output guides, mirror images, at about half the input height.
        let last = t.slices.last().unwrap();
        assert_eq!(last.minima.len(), 2);
        let (a, b) = (last.minima[0].position, last.minima[1].position);
        assert!((a.y + b.y).abs() < 1e-8 && (a.z - b.z).abs() < 1e-8);
        assert!((a.z / r0 - 0.5).abs() < 0.05, "output height {}", a.z / r0);
        assert_eq!(t.output_tracks.len(), 2);
    }

    #[test]
    fn symmetric_y_slices_are_mirror_invariant() {
        let r0 = r0();
        let (p, c) = y_circuit(10.0);
        let xs = p.x_at_arm_separation(r0);
        let t = trace_minima(
            &c,
            &AtomSpecies::lithium7(),
            (0.2 * xs, 1.6 * xs),
            15,
            &TraceOptions::new(window(61)),
        )
        .unwrap();
        for sl in &t.slices {
            for m in &sl.minima {
                let mirrored = Vec3::new(m.position.x, -m.position.y, m.position.z);
                assert!(
                    sl.minima
                        .iter()
                        .any(|q| (q.position - mirrored).norm() < 1e-8),
                    "x = {}: {:?}",
                    sl.x,
                    m.position
                );
            }
        }
    }
}
