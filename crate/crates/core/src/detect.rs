//! Separatrix point detection by bisection along boundary seed segments.
//!
//! Seeds are pairs of points on opposite edges (2D) or faces (3D) of the box
//! `[0, gamma]^s`. Each pair whose endpoints settle on different attractors
//! is bisected until the bracket is no wider than `delta_bis`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::{DynSystem, EqId, Equilibrium, StateVector};
use crate::error::{Error, Result};
use crate::integrate::{classify_basin, BasinLabel, IntegratorConfig};

/// Two opposite boundary points differing only along `axis`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedPair {
    pub start: StateVector,
    pub end: StateVector,
    pub axis: usize,
}

impl SeedPair {
    /// Point at parameter `t` in `[0, 1]` along the segment.
    pub fn point_at(&self, t: f64) -> StateVector {
        let mut p = self.start.clone();
        p[self.axis] = self.start[self.axis] + t * (self.end[self.axis] - self.start[self.axis]);
        p
    }

    pub fn length(&self) -> f64 {
        (self.end[self.axis] - self.start[self.axis]).abs()
    }
}

/// `n` equispaced values on `[0, gamma]`, both ends included.
fn grid(n: usize, gamma: f64) -> Vec<f64> {
    (0..n).map(|i| gamma * i as f64 / (n - 1) as f64).collect()
}

/// Seed pairs joining opposite edges of the square or faces of the cube.
///
/// In 2D there are `2n` pairs: `(x_i, 0)`–`(x_i, gamma)` followed by
/// `(0, y_i)`–`(gamma, y_i)`. In 3D there are `3n²` pairs, one family per
/// axis: segments along `z` over the `(x, y)` grid, along `y` over `(x, z)`
/// and along `x` over `(y, z)`.
pub fn boundary_seeds(dim: usize, n: usize, gamma: f64) -> Result<Vec<SeedPair>> {
    if n < 2 {
        return Err(Error::Config(format!(
            "seed count n = {n} must be at least 2"
        )));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::Config(format!(
            "domain size gamma = {gamma} must be positive"
        )));
    }
    let g = grid(n, gamma);
    let mut out = Vec::new();
    match dim {
        2 => {
            for &x in &g {
                out.push(SeedPair {
                    start: [x, 0.0].into(),
                    end: [x, gamma].into(),
                    axis: 1,
                });
            }
            for &y in &g {
                out.push(SeedPair {
                    start: [0.0, y].into(),
                    end: [gamma, y].into(),
                    axis: 0,
                });
            }
        }
        3 => {
            for &x in &g {
                for &y in &g {
                    out.push(SeedPair {
                        start: [x, y, 0.0].into(),
                        end: [x, y, gamma].into(),
                        axis: 2,
                    });
                }
            }
            for &x in &g {
                for &z in &g {
                    out.push(SeedPair {
                        start: [x, 0.0, z].into(),
                        end: [x, gamma, z].into(),
                        axis: 1,
                    });
                }
            }
            for &y in &g {
                for &z in &g {
                    out.push(SeedPair {
                        start: [0.0, y, z].into(),
                        end: [gamma, y, z].into(),
                        axis: 0,
                    });
                }
            }
        }
        _ => {
            return Err(Error::Config(format!(
                "boundary seeding supports dimension 2 or 3, got {dim}"
            )))
        }
    }
    Ok(out)
}

/// A separatrix point with the attractors on either side of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub location: StateVector,
    /// Unordered pair, stored sorted.
    pub separates: (EqId, EqId),
    pub bracket_width: f64,
    /// Final bracket ends, on the seed segment.
    pub lower: StateVector,
    pub upper: StateVector,
    pub lower_label: EqId,
    pub upper_label: EqId,
    /// Axis of the seed segment the point was found on.
    pub axis: usize,
}

impl LabeledPoint {
    pub fn involves(&self, id: EqId) -> bool {
        self.separates.0 == id || self.separates.1 == id
    }

    /// Unit direction of the seed segment (pointing from `lower` to `upper`).
    pub fn direction(&self) -> StateVector {
        let mut d = StateVector::zeros(self.location.dim());
        d[self.axis] = if self.upper[self.axis] >= self.lower[self.axis] {
            1.0
        } else {
            -1.0
        };
        d
    }
}

fn sorted_pair(a: EqId, b: EqId) -> (EqId, EqId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// One open bracket: parameters along the seed segment plus their labels.
struct Bracket {
    lo: f64,
    lo_label: EqId,
    hi: f64,
    hi_label: EqId,
}

/// Bisects one seed pair.
///
/// Returns nothing when the endpoints share an attractor or either is
/// undecided. A midpoint that lands on a third attractor splits the bracket:
/// bisection continues on the left part while the right part is pushed on a
/// work stack and handled afterwards, so one segment can yield several
/// points separating different attractor pairs. An undecided midpoint is
/// retried once at the point halfway toward the left end; a second undecided
/// probe abandons the bracket.
pub fn bisect<S: DynSystem + ?Sized>(
    system: &S,
    pair: &SeedPair,
    attractors: &[Equilibrium],
    cfg: &IntegratorConfig,
    delta_bis: f64,
) -> Vec<LabeledPoint> {
    let classify = |t: f64| classify_basin(system, &pair.point_at(t), attractors, cfg);
    let (Some(l0), Some(l1)) = (classify(0.0).attractor(), classify(1.0).attractor()) else {
        return Vec::new();
    };
    bisect_labeled(pair, l0, l1, delta_bis, classify)
}

fn bisect_labeled(
    pair: &SeedPair,
    start_label: EqId,
    end_label: EqId,
    delta_bis: f64,
    classify: impl Fn(f64) -> BasinLabel,
) -> Vec<LabeledPoint> {
    if start_label == end_label {
        return Vec::new();
    }
    let len = pair.length();
    let dt = if len > 0.0 { delta_bis / len } else { 1.0 };

    let mut found = Vec::new();
    let mut stack = vec![Bracket {
        lo: 0.0,
        lo_label: start_label,
        hi: 1.0,
        hi_label: end_label,
    }];

    'brackets: while let Some(mut b) = stack.pop() {
        while b.hi - b.lo > dt {
            let mid = 0.5 * (b.lo + b.hi);
            let (probe, label) = match classify(mid) {
                BasinLabel::Converged(id) => (mid, id),
                BasinLabel::Undecided(_) => {
                    let retry = 0.5 * (b.lo + mid);
                    match classify(retry) {
                        BasinLabel::Converged(id) => (retry, id),
                        BasinLabel::Undecided(why) => {
                            log::debug!(
                                "abandoning bracket [{}, {}] on {:?}: {why:?}",
                                b.lo,
                                b.hi,
                                pair.start
                            );
                            continue 'brackets;
                        }
                    }
                }
            };
            if label == b.lo_label {
                b.lo = probe;
            } else if label == b.hi_label {
                b.hi = probe;
            } else {
                stack.push(Bracket {
                    lo: probe,
                    lo_label: label,
                    hi: b.hi,
                    hi_label: b.hi_label,
                });
                b.hi = probe;
                b.hi_label = label;
            }
        }
        let lower = pair.point_at(b.lo);
        let upper = pair.point_at(b.hi);
        found.push(LabeledPoint {
            location: pair.point_at(0.5 * (b.lo + b.hi)),
            separates: sorted_pair(b.lo_label, b.hi_label),
            bracket_width: (upper[pair.axis] - lower[pair.axis]).abs(),
            lower,
            upper,
            lower_label: b.lo_label,
            upper_label: b.hi_label,
            axis: pair.axis,
        });
    }
    found
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub n: usize,
    pub gamma: f64,
    /// Bracket width at which bisection stops; `None` means `1e-4 * gamma`.
    pub delta_bis: Option<f64>,
    pub integrator: IntegratorConfig,
    /// Worker threads for the classification fan-out; `None` uses all cores.
    pub workers: Option<usize>,
    /// Attractor whose basin boundary forms the primary subset `A'`.
    pub split_target: Option<EqId>,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            n: 20,
            gamma: 10.0,
            delta_bis: None,
            integrator: IntegratorConfig::default(),
            workers: None,
            split_target: None,
        }
    }
}

impl DetectConfig {
    pub fn delta_bis(&self) -> f64 {
        self.delta_bis.unwrap_or(1e-4 * self.gamma)
    }
}

/// Detected separatrix points in canonical order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointMatrix {
    pub points: Vec<LabeledPoint>,
    pub split_target: Option<EqId>,
}

impl PointMatrix {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points on the boundary of the split target's basin (`A'`). Without a
    /// split target this is every point.
    pub fn primary(&self) -> Vec<&LabeledPoint> {
        match self.split_target {
            Some(t) => self.points.iter().filter(|p| p.involves(t)).collect(),
            None => self.points.iter().collect(),
        }
    }

    /// The remaining points (`A''`); empty without a split target.
    pub fn secondary(&self) -> Vec<&LabeledPoint> {
        match self.split_target {
            Some(t) => self.points.iter().filter(|p| !p.involves(t)).collect(),
            None => Vec::new(),
        }
    }

    pub fn locations(points: &[&LabeledPoint]) -> Vec<StateVector> {
        points.iter().map(|p| p.location.clone()).collect()
    }

    /// CSV rows: coordinates, the separated pair, bracket width.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.points.first().map_or(0, |p| p.location.dim());
        let mut header: Vec<String> = AXIS_NAMES[..dim].iter().map(|s| s.to_string()).collect();
        header.extend(["attractor_a", "attractor_b", "bracket_width"].map(String::from));
        w.write_record(&header)?;
        for p in &self.points {
            let mut row: Vec<String> = p.location.iter().map(|v| v.to_string()).collect();
            row.push(p.separates.0.to_string());
            row.push(p.separates.1.to_string());
            row.push(p.bracket_width.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a file written by [`PointMatrix::write_csv`]. Bracket ends are
    /// not stored, so they are reconstructed as the location itself.
    pub fn read_csv<R: std::io::Read>(input: R, split_target: Option<EqId>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let dim = r.headers()?.len().saturating_sub(3);
        if !(2..=3).contains(&dim) {
            return Err(Error::Config(format!(
                "point CSV must have 2 or 3 coordinates, found {dim}"
            )));
        }
        let mut points = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let coords: Vec<f64> = (0..dim)
                .map(|i| parse_f64(&rec[i]))
                .collect::<Result<_>>()?;
            let a: EqId = rec[dim].parse()?;
            let b: EqId = rec[dim + 1].parse()?;
            let width = parse_f64(&rec[dim + 2])?;
            let loc = StateVector::new(coords);
            points.push(LabeledPoint {
                lower: loc.clone(),
                upper: loc.clone(),
                location: loc,
                separates: sorted_pair(a, b),
                bracket_width: width,
                lower_label: a,
                upper_label: b,
                axis: 0,
            });
        }
        Ok(PointMatrix {
            points,
            split_target,
        })
    }
}

pub(crate) const AXIS_NAMES: [&str; 3] = ["x", "y", "z"];

pub(crate) fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("not a number: `{s}`")))
}

fn canonical_order(a: &LabeledPoint, b: &LabeledPoint) -> Ordering {
    a.location
        .iter()
        .zip(b.location.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
        .then(a.separates.cmp(&b.separates))
        .then(a.axis.cmp(&b.axis))
}

/// Runs [`bisect`] over every boundary seed pair.
pub fn detect_points<S: DynSystem + ?Sized>(
    system: &S,
    attractors: &[Equilibrium],
    cfg: &DetectConfig,
) -> Result<PointMatrix> {
    cfg.integrator.validate()?;
    let stable: Vec<Equilibrium> = attractors
        .iter()
        .filter(|e| e.is_attractor())
        .cloned()
        .collect();
    if stable.len() < 2 {
        return Err(Error::NoSeparatrix(format!(
            "need at least two stable attractors, found {}",
            stable.len()
        )));
    }
    let delta = cfg.delta_bis();
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Config(format!(
            "delta_bis = {delta} must be positive"
        )));
    }
    let seeds = boundary_seeds(system.dim(), cfg.n, cfg.gamma)?;

    let work = || -> Vec<LabeledPoint> {
        seeds
            .par_iter()
            .flat_map_iter(|pair| bisect(system, pair, &stable, &cfg.integrator, delta))
            .collect()
    };
    let mut points = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(work),
        None => work(),
    };
    points.sort_by(canonical_order);

    if points.is_empty() {
        return Err(Error::NoSeparatrix(format!(
            "no seed pair on [0, {}]^{} straddles two basins",
            cfg.gamma,
            system.dim()
        )));
    }
    Ok(PointMatrix {
        points,
        split_target: cfg.split_target,
    })
}
