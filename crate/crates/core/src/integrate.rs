//! Adaptive Dormand–Prince 5(4) integration and basin classification.

use serde::{Deserialize, Serialize};

use crate::dynsys::{DynSystem, EqId, Equilibrium, StateVector};
use crate::error::{Error, Result};

/// States with a larger norm count as diverged.
pub const DIVERGENCE_NORM: f64 = 1e6;
/// Steps are at most `t_max / MAX_STEP_DIVISOR` long.
const MAX_STEP_DIVISOR: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub atol: f64,
    pub rtol: f64,
    pub t_max: f64,
    /// Radius of the capture ball around each attractor.
    pub eps_attr: f64,
    pub max_steps: usize,
    /// Consecutive accepted steps inside a capture ball required to declare
    /// convergence.
    pub dwell: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            atol: 1e-10,
            rtol: 1e-8,
            t_max: 1000.0,
            eps_attr: 1e-3,
            max_steps: 1_000_000,
            dwell: 10,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.atol, self.rtol, self.t_max, self.eps_attr];
        if !positive.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::Config(format!(
                "integrator tolerances, t_max and eps_attr must be positive: {self:?}"
            )));
        }
        if self.max_steps == 0 || self.dwell == 0 {
            return Err(Error::Config(
                "max_steps and dwell must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Same config with both tolerances divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        IntegratorConfig {
            atol: self.atol / factor,
            rtol: self.rtol / factor,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    TimeLimit,
    Captured,
    Diverged,
    StepLimit,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn last_state(&self) -> &StateVector {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    /// CSV with header `t,x0,x1,...`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.states.first().map_or(0, |s| s.dim());
        let mut header = vec!["t".to_string()];
        header.extend((0..dim).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut row = vec![t.to_string()];
            row.extend(s.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Undecided {
    TimeLimit,
    Diverged,
    StepLimit,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasinLabel {
    Converged(EqId),
    Undecided(Undecided),
}

impl BasinLabel {
    pub fn attractor(self) -> Option<EqId> {
        match self {
            BasinLabel::Converged(id) => Some(id),
            BasinLabel::Undecided(_) => None,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b*, the embedded error weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

enum Control {
    Continue,
    Stop,
}

struct Outcome {
    termination: Termination,
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], cfg: &IntegratorConfig) -> f64 {
    let n = err.len() as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = cfg.atol + cfg.rtol * a.abs().max(b.abs());
            (e / sc) * (e / sc)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<S: DynSystem + ?Sized>(
    system: &S,
    y0: &[f64],
    f0: &[f64],
    cfg: &IntegratorConfig,
) -> f64 {
    let n = y0.len();
    let scale: Vec<f64> = y0.iter().map(|v| cfg.atol + cfg.rtol * v.abs()).collect();
    let rms = |v: &[f64]| -> f64 {
        (v.iter()
            .zip(&scale)
            .map(|(x, s)| (x / s) * (x / s))
            .sum::<f64>()
            / n as f64)
            .sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; n];
    system.rhs_into(&y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1).min(cfg.t_max)
}

/// Core stepping loop. `observe` sees every accepted `(t, state)` including
/// the initial one and may stop the integration.
fn drive<S, F>(system: &S, ic: &[f64], cfg: &IntegratorConfig, mut observe: F) -> Result<Outcome>
where
    S: DynSystem + ?Sized,
    F: FnMut(f64, &[f64]) -> Control,
{
    let n = system.dim();
    if ic.len() != n {
        return Err(Error::InvalidParams(format!(
            "initial condition has {} components, system expects {n}",
            ic.len()
        )));
    }
    if !ic.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(ic.to_vec()));
    }
    let check_orthant = system.orthant_invariant();
    let undershoot = 10.0 * cfg.atol;
    if check_orthant && ic.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidParams(format!(
            "initial condition {ic:?} leaves the nonnegative orthant"
        )));
    }

    let mut y = ic.to_vec();
    let mut t = 0.0;
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];

    system.rhs_into(&y, &mut k1);
    if let Control::Stop = observe(t, &y) {
        return Ok(Outcome {
            termination: Termination::Captured,
        });
    }
    let mut h = initial_step(system, &y, &k1, cfg);
    let mut steps = 0usize;

    loop {
        if t >= cfg.t_max {
            return Ok(Outcome {
                termination: Termination::TimeLimit,
            });
        }
        if steps >= cfg.max_steps {
            return Ok(Outcome {
                termination: Termination::StepLimit,
            });
        }
        // The cap leaves room for the dwell window even when the vector field
        // vanishes and the controller would otherwise jump straight to t_max.
        h = h.min(cfg.t_max / MAX_STEP_DIVISOR).min(cfg.t_max - t);
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::Integration {
                t,
                reason: format!("step size underflow (h = {h:e})"),
                last_state: y,
            });
        }

        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        system.rhs_into(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        system.rhs_into(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        system.rhs_into(&tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        system.rhs_into(&tmp, &mut k5);
        for i in 0..n {
            tmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        system.rhs_into(&tmp, &mut k6);
        for i in 0..n {
            y_new[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        system.rhs_into(&y_new, &mut k7);
        for i in 0..n {
            err[i] =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }

        let en = error_norm(&err, &y, &y_new, cfg);
        if !en.is_finite() {
            h *= MIN_FACTOR;
            continue;
        }
        if en <= 1.0 {
            t += h;
            steps += 1;
            if check_orthant {
                for v in y_new.iter_mut() {
                    if *v < 0.0 {
                        if *v >= -undershoot {
                            *v = 0.0;
                        } else {
                            return Err(Error::Integration {
                                t,
                                reason: format!(
                                    "state component {v:e} left the nonnegative orthant"
                                ),
                                last_state: y_new.clone(),
                            });
                        }
                    }
                }
                system.rhs_into(&y_new, &mut k7);
            }
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);

            if let Control::Stop = observe(t, &y) {
                return Ok(Outcome {
                    termination: Termination::Captured,
                });
            }
            if y.iter().map(|v| v * v).sum::<f64>().sqrt() > DIVERGENCE_NORM {
                return Ok(Outcome {
                    termination: Termination::Diverged,
                });
            }
            let factor = if en == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * en.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            h *= factor;
        } else {
            h *= (SAFETY * en.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
        }
    }
}

/// Integrates from `ic` until `t_max`, divergence or the step limit, recording
/// every accepted step.
pub fn integrate<S: DynSystem + ?Sized>(
    system: &S,
    ic: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let mut times = Vec::new();
    let mut states = Vec::new();
    let outcome = drive(system, ic, cfg, |t, y| {
        times.push(t);
        states.push(StateVector::from(y));
        Control::Continue
    })?;
    Ok(Trajectory {
        times,
        states,
        termination: outcome.termination,
    })
}

/// Tracks which capture ball the trajectory currently sits in and for how
/// many consecutive accepted steps.
struct Capture<'a> {
    centers: Vec<(EqId, &'a [f64])>,
    radius: f64,
    dwell: usize,
    current: Option<EqId>,
    count: usize,
}

impl<'a> Capture<'a> {
    fn new(attractors: &'a [Equilibrium], cfg: &IntegratorConfig) -> Self {
        let centers = attractors
            .iter()
            .filter_map(|e| e.location.as_deref().map(|l| (e.id, l)))
            .collect();
        Capture {
            centers,
            radius: cfg.eps_attr,
            dwell: cfg.dwell,
            current: None,
            count: 0,
        }
    }

    fn observe(&mut self, y: &[f64]) -> Control {
        let mut inside = self
            .centers
            .iter()
            .filter(|(_, c)| crate::dynsys::distance(c, y) < self.radius);
        let hit = match (inside.next(), inside.next()) {
            (Some((id, _)), None) => Some(*id),
            _ => None,
        };
        if hit.is_some() && hit == self.current {
            self.count += 1;
        } else {
            self.current = hit;
            self.count = usize::from(hit.is_some());
        }
        if self.current.is_some() && self.count > self.dwell {
            Control::Stop
        } else {
            Control::Continue
        }
    }
}

/// Like [`classify_basin`] but keeps the reason for an undecided outcome.
pub fn classify_basin_detailed<S: DynSystem + ?Sized>(
    system: &S,
    ic: &[f64],
    attractors: &[Equilibrium],
    cfg: &IntegratorConfig,
) -> (BasinLabel, Option<String>) {
    let mut capture = Capture::new(attractors, cfg);
    match drive(system, ic, cfg, |_, y| capture.observe(y)) {
        Ok(out) => match out.termination {
            Termination::Captured => (
                BasinLabel::Converged(capture.current.expect("capture set on stop")),
                None,
            ),
            Termination::TimeLimit => (BasinLabel::Undecided(Undecided::TimeLimit), None),
            Termination::Diverged => (BasinLabel::Undecided(Undecided::Diverged), None),
            Termination::StepLimit => (BasinLabel::Undecided(Undecided::StepLimit), None),
        },
        Err(e) => (
            BasinLabel::Undecided(Undecided::Failed),
            Some(e.to_string()),
        ),
    }
}

/// Which attractor the trajectory from `ic` settles on.
///
/// Convergence requires the state to stay within `eps_attr` of exactly one
/// attractor for `dwell` consecutive accepted steps (the capture-ball entry
/// step is not counted). Integration failures map to
/// [`Undecided::Failed`].
pub fn classify_basin<S: DynSystem + ?Sized>(
    system: &S,
    ic: &[f64],
    attractors: &[Equilibrium],
    cfg: &IntegratorConfig,
) -> BasinLabel {
    let (label, diag) = classify_basin_detailed(system, ic, attractors, cfg);
    if let Some(msg) = diag {
        log::debug!("classification of {ic:?} undecided: {msg}");
    }
    label
}
