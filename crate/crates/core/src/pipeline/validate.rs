//! Checks that a fitted separatrix actually separates the basins.
//!
//! Random probes are drawn with their projection inside the interpolant's
//! domain and their dependent coordinate in `(0, gamma)`. Each probe is
//! classified by direct integration, and the side of the graph it lies on is
//! compared with its basin. Which side belongs to which basin group is fixed
//! by a separate calibration draw, so the scored probes never vote on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::{DynSystem, EqId, Equilibrium};
use crate::error::{Error, Result};
use crate::integrate::{classify_basin, IntegratorConfig};
use crate::puinterp::PUInterpolant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    /// Probes to score.
    pub probes: usize,
    pub seed: u64,
    /// Probes closer than this to the graph (along the dependent axis) are
    /// skipped.
    pub exclusion: f64,
    pub gamma: f64,
    /// Give up after this many draws per scored probe.
    pub max_draw_factor: usize,
}

/// Outcome for one interpolated separatrix component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub side_a: Vec<EqId>,
    pub side_b: Vec<EqId>,
    pub drawn: usize,
    pub near_surface: usize,
    /// Undecided, or converged to an attractor outside both groups.
    pub unlabeled: usize,
    pub scored: usize,
    pub agreed: usize,
    /// `true` when `side_a` lies where `dependent - s(...)` is positive.
    pub a_above: bool,
}

impl ValidationReport {
    pub fn agreement(&self) -> f64 {
        if self.scored == 0 {
            0.0
        } else {
            self.agreed as f64 / self.scored as f64
        }
    }
}

struct Probe {
    offset: f64,
    side_a: bool,
}

struct Setup<'a, S: ?Sized> {
    system: &'a S,
    surface: &'a PUInterpolant,
    attractors: &'a [Equilibrium],
    side_a: &'a [EqId],
    side_b: &'a [EqId],
    icfg: &'a IntegratorConfig,
    cfg: &'a ValidationConfig,
}

/// Draws probes until `target` of them have a usable label or the draw
/// budget runs out.
fn draw<S: DynSystem + ?Sized>(
    setup: &Setup<'_, S>,
    seed: u64,
    target: usize,
    counts: &mut ValidationReport,
) -> Result<Vec<Probe>> {
    let Setup {
        system,
        surface,
        attractors,
        side_a,
        side_b,
        icfg,
        cfg,
    } = *setup;
    let axes = surface
        .axes
        .as_ref()
        .ok_or_else(|| Error::Config("validation needs a phase-space graph".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let budget = target.saturating_mul(cfg.max_draw_factor.max(1));
    let mut drawn = 0;
    while out.len() < target && drawn < budget {
        // Draw in batches so classifications can run in parallel while the
        // random stream stays sequential.
        let batch = (2 * (target - out.len())).max(8).min(budget - drawn);
        let mut candidates = Vec::with_capacity(batch);
        for _ in 0..batch {
            drawn += 1;
            let args: Vec<f64> = (0..surface.dim())
                .map(|k| rng.gen_range(surface.bbox.lo[k]..=surface.bbox.hi[k]))
                .collect();
            let dep: f64 = rng.gen_range(0.0..cfg.gamma);
            if !surface.domain.contains(&args) {
                continue;
            }
            let offset = dep - surface.evaluate(&args)?;
            let state = (offset.abs() >= cfg.exclusion).then(|| axes.lift(&args, dep));
            candidates.push((state, offset, drawn));
        }
        let labels: Vec<Option<Option<EqId>>> = candidates
            .par_iter()
            .map(|(state, _, _)| {
                state
                    .as_ref()
                    .map(|s| classify_basin(system, s, attractors, icfg).attractor())
            })
            .collect();
        for ((_, offset, index), label) in candidates.into_iter().zip(labels) {
            if out.len() == target {
                break;
            }
            counts.drawn = index;
            match label {
                None => counts.near_surface += 1,
                Some(Some(id)) if side_a.contains(&id) => out.push(Probe {
                    offset,
                    side_a: true,
                }),
                Some(Some(id)) if side_b.contains(&id) => out.push(Probe {
                    offset,
                    side_a: false,
                }),
                Some(_) => counts.unlabeled += 1,
            }
        }
    }
    Ok(out)
}

/// Scores how often the side of `surface` a probe lies on predicts its basin.
pub fn sign_agreement<S: DynSystem + ?Sized>(
    system: &S,
    surface: &PUInterpolant,
    attractors: &[Equilibrium],
    side_a: &[EqId],
    side_b: &[EqId],
    icfg: &IntegratorConfig,
    cfg: &ValidationConfig,
) -> Result<ValidationReport> {
    if cfg.probes == 0 {
        return Err(Error::Config("validation needs at least one probe".into()));
    }
    let setup = Setup {
        system,
        surface,
        attractors,
        side_a,
        side_b,
        icfg,
        cfg,
    };
    let mut scratch = blank(side_a, side_b);
    let calibration = draw(
        &setup,
        cfg.seed ^ 0x9e37_79b9_7f4a_7c15,
        cfg.probes,
        &mut scratch,
    )?;
    let votes_above = calibration
        .iter()
        .filter(|p| (p.offset > 0.0) == p.side_a)
        .count();
    let a_above = 2 * votes_above >= calibration.len();

    let mut report = blank(side_a, side_b);
    report.a_above = a_above;
    let probes = draw(&setup, cfg.seed, cfg.probes, &mut report)?;
    report.scored = probes.len();
    report.agreed = probes
        .iter()
        .filter(|p| ((p.offset > 0.0) == a_above) == p.side_a)
        .count();
    Ok(report)
}

fn blank(side_a: &[EqId], side_b: &[EqId]) -> ValidationReport {
    ValidationReport {
        side_a: side_a.to_vec(),
        side_b: side_b.to_vec(),
        drawn: 0,
        near_surface: 0,
        unlabeled: 0,
        scored: 0,
        agreed: 0,
        a_above: true,
    }
}
