//! Dynamical systems: the extension trait, equilibrium bookkeeping and
//! eigenvalue-based stability classification.
//!
//! Two reference models ship with the crate: [`Hilker`], a planar
//! epidemic model with an Allee effect, and [`Competition`], a three-species
//! Lotka–Volterra competition model. User models plug in by implementing
//! [`DynSystem`].

mod competition;
mod hilker;

use std::fmt;
use std::ops::{Deref, DerefMut};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use competition::{
    competition_equilibria, competition_jacobian, competition_rhs, stability_report, Competition,
    CompetitionParams, StabilityReport,
};
pub use hilker::{hilker_equilibria, hilker_jacobian, hilker_rhs, Hilker, HilkerParams};

/// Zero-real-part tolerance used when tagging eigenvalues.
pub const EPS_EIG: f64 = 1e-8;

/// Relative tolerance below which a quotient denominator counts as singular.
pub const EPS_DEN: f64 = 1e-12;

/// A point in phase space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(components: Vec<f64>) -> Self {
        StateVector(components)
    }

    pub fn zeros(dim: usize) -> Self {
        StateVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        distance(&self.0, other)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for StateVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for StateVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl<'a> IntoIterator for &'a StateVector {
    type Item = &'a f64;
    type IntoIter = std::slice::Iter<'a, f64>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        StateVector(v)
    }
}

impl From<&[f64]> for StateVector {
    fn from(v: &[f64]) -> Self {
        StateVector(v.to_vec())
    }
}

impl<const N: usize> From<[f64; N]> for StateVector {
    fn from(v: [f64; N]) -> Self {
        StateVector(v.to_vec())
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Identity tag of an equilibrium (`E0`, `E1`, ...).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EqId(pub u8);

impl fmt::Display for EqId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "E{}", self.0)
    }
}

impl std::str::FromStr for EqId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .trim()
            .strip_prefix(['E', 'e'])
            .ok_or_else(|| Error::Config(format!("bad equilibrium id `{s}`")))?;
        digits
            .parse::<u8>()
            .map(EqId)
            .map_err(|_| Error::Config(format!("bad equilibrium id `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Saddle,
    Marginal,
}

impl Stability {
    /// True for sources and saddles alike.
    pub fn is_unstable(self) -> bool {
        matches!(self, Stability::Unstable | Stability::Saddle)
    }

    pub fn from_eigenvalues(eigs: &[Complex64]) -> Self {
        if eigs.iter().any(|l| l.re.abs() <= EPS_EIG) {
            Stability::Marginal
        } else if eigs.iter().all(|l| l.re < -EPS_EIG) {
            Stability::Stable
        } else if eigs.iter().all(|l| l.re > EPS_EIG) {
            Stability::Unstable
        } else {
            Stability::Saddle
        }
    }
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Saddle => "saddle",
            Stability::Marginal => "marginal",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium {
    pub id: EqId,
    /// `None` when the closed form is degenerate (singular denominator).
    pub location: Option<StateVector>,
    pub feasible: bool,
    pub degenerate: bool,
    pub stability: Option<Stability>,
    pub eigenvalues: Vec<Complex64>,
    pub diagnostic: Option<String>,
}

impl Equilibrium {
    /// An equilibrium at a known location; feasibility is the nonnegativity
    /// (and finiteness) of its coordinates.
    pub fn at(id: EqId, location: StateVector) -> Self {
        let feasible = location.is_finite() && location.iter().all(|&v| v >= 0.0);
        Equilibrium {
            id,
            location: Some(location),
            feasible,
            degenerate: false,
            stability: None,
            eigenvalues: Vec::new(),
            diagnostic: None,
        }
    }

    pub fn degenerate(id: EqId, why: impl Into<String>) -> Self {
        Equilibrium {
            id,
            location: None,
            feasible: false,
            degenerate: true,
            stability: None,
            eigenvalues: Vec::new(),
            diagnostic: Some(why.into()),
        }
    }

    pub fn is_stable(&self) -> bool {
        self.stability == Some(Stability::Stable)
    }

    /// Feasible and eigenvalue-stable: usable as a basin target.
    pub fn is_attractor(&self) -> bool {
        self.feasible && self.is_stable()
    }
}

/// A vector field on ℝ^dim.
///
/// Only [`DynSystem::rhs_into`] is mandatory. Without an analytic Jacobian a
/// central-difference approximation is used; without closed-form equilibria
/// the pipeline has no attractors to classify against.
pub trait DynSystem: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// Writes the vector field at `state` into `out`. Both slices have length
    /// [`DynSystem::dim`]; the state is assumed finite.
    fn rhs_into(&self, state: &[f64], out: &mut [f64]);

    fn jacobian(&self, state: &[f64]) -> DMatrix<f64> {
        finite_difference_jacobian(self, state)
    }

    /// Equilibria with locations and feasibility flags; unclassified.
    fn equilibria(&self) -> Vec<Equilibrium> {
        Vec::new()
    }

    /// Whether the nonnegative orthant is forward invariant. When true the
    /// integrator treats noticeable negative excursions as errors.
    fn orthant_invariant(&self) -> bool {
        true
    }

    fn rhs(&self, state: &[f64]) -> Result<StateVector> {
        if state.len() != self.dim() {
            return Err(Error::InvalidParams(format!(
                "state has {} components, system `{}` expects {}",
                state.len(),
                self.name(),
                self.dim()
            )));
        }
        if !state.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(state.to_vec()));
        }
        let mut out = vec![0.0; self.dim()];
        self.rhs_into(state, &mut out);
        Ok(StateVector(out))
    }
}

pub fn finite_difference_jacobian<S: DynSystem + ?Sized>(
    system: &S,
    state: &[f64],
) -> DMatrix<f64> {
    let n = system.dim();
    let mut jac = DMatrix::zeros(n, n);
    let mut plus = state.to_vec();
    let mut minus = state.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        let h = 1e-6 * state[j].abs().max(1.0);
        plus[j] = state[j] + h;
        minus[j] = state[j] - h;
        system.rhs_into(&plus, &mut fp);
        system.rhs_into(&minus, &mut fm);
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
        plus[j] = state[j];
        minus[j] = state[j];
    }
    jac
}

/// Fills eigenvalues of the Jacobian at the equilibrium and its stability tag.
pub fn classify<S: DynSystem + ?Sized>(eq: &Equilibrium, system: &S) -> Equilibrium {
    let mut out = eq.clone();
    let Some(loc) = &eq.location else {
        out.stability = None;
        return out;
    };
    let jac = system.jacobian(loc);
    match nalgebra::linalg::Schur::try_new(jac, f64::EPSILON, 10_000) {
        Some(schur) => {
            let eigs: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
            out.stability = Some(Stability::from_eigenvalues(&eigs));
            out.eigenvalues = eigs;
        }
        None => {
            out.stability = Some(Stability::Marginal);
            out.eigenvalues.clear();
            out.diagnostic = Some("eigenvalue iteration did not converge".into());
        }
    }
    out
}

/// All equilibria of `system`, classified.
pub fn classified_equilibria<S: DynSystem + ?Sized>(system: &S) -> Vec<Equilibrium> {
    system
        .equilibria()
        .iter()
        .map(|e| classify(e, system))
        .collect()
}

/// Feasible, eigenvalue-stable equilibria: the basin targets.
pub fn attractors<S: DynSystem + ?Sized>(system: &S) -> Vec<Equilibrium> {
    classified_equilibria(system)
        .into_iter()
        .filter(Equilibrium::is_attractor)
        .collect()
}

/// The two reference models behind one type, so configs can pick either.
#[derive(Clone, Debug)]
pub enum Model {
    Hilker(Hilker),
    Competition(Competition),
}

impl DynSystem for Model {
    fn name(&self) -> &str {
        match self {
            Model::Hilker(m) => m.name(),
            Model::Competition(m) => m.name(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Model::Hilker(m) => m.dim(),
            Model::Competition(m) => m.dim(),
        }
    }

    fn rhs_into(&self, state: &[f64], out: &mut [f64]) {
        match self {
            Model::Hilker(m) => m.rhs_into(state, out),
            Model::Competition(m) => m.rhs_into(state, out),
        }
    }

    fn jacobian(&self, state: &[f64]) -> DMatrix<f64> {
        match self {
            Model::Hilker(m) => m.jacobian(state),
            Model::Competition(m) => m.jacobian(state),
        }
    }

    fn equilibria(&self) -> Vec<Equilibrium> {
        match self {
            Model::Hilker(m) => m.equilibria(),
            Model::Competition(m) => m.equilibria(),
        }
    }

    fn orthant_invariant(&self) -> bool {
        match self {
            Model::Hilker(m) => m.orthant_invariant(),
            Model::Competition(m) => m.orthant_invariant(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stability_tags() {
        let c = |re: f64| Complex64::new(re, 0.0);
        assert_eq!(
            Stability::from_eigenvalues(&[c(-1.0), c(-2.0)]),
            Stability::Stable
        );
        assert_eq!(
            Stability::from_eigenvalues(&[c(1.0), c(2.0)]),
            Stability::Unstable
        );
        assert_eq!(
            Stability::from_eigenvalues(&[c(1.0), c(-2.0)]),
            Stability::Saddle
        );
        assert_eq!(
            Stability::from_eigenvalues(&[c(1e-9), c(-2.0)]),
            Stability::Marginal
        );
        assert!(Stability::Saddle.is_unstable());
    }

    #[test]
    fn eq_id_roundtrip() {
        let id: EqId = "E7".parse().unwrap();
        assert_eq!(id, EqId(7));
        assert_eq!(id.to_string(), "E7");
        assert!("X1".parse::<EqId>().is_err());
    }

    #[test]
    fn rhs_rejects_non_finite_and_wrong_dim() {
        let m = Hilker::new(HilkerParams::reference()).unwrap();
        assert!(matches!(m.rhs(&[f64::NAN, 0.0]), Err(Error::NonFinite(_))));
        assert!(m.rhs(&[0.0, 0.0, 0.0]).is_err());
    }
}
