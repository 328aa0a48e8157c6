//! Planar epidemic model with a strong Allee effect.
//!
//! State is `(P, I)`: total population and infecteds, both scaled to the
//! carrying capacity.
//!
//! ```text
//! P' = r (1 - P)(P - u) P - alpha I
//! I' = [-alpha - d - r u + (sigma - 1) P - sigma I] I
//! ```

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use super::{DynSystem, EqId, Equilibrium, StateVector};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HilkerParams {
    pub r: f64,
    pub u: f64,
    pub d: f64,
    pub alpha: f64,
    pub sigma: f64,
}

impl HilkerParams {
    /// `r = 0.2, u = 0.1, d = 0.25, alpha = 0.1, sigma = 2.5`.
    pub fn reference() -> Self {
        HilkerParams {
            r: 0.2,
            u: 0.1,
            d: 0.25,
            alpha: 0.1,
            sigma: 2.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.r, self.u, self.d, self.alpha, self.sigma];
        if !all.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "non-finite Hilker parameter in {self:?}"
            )));
        }
        if !(self.u > 0.0 && self.u < 1.0) {
            return Err(Error::InvalidParams(format!(
                "Allee threshold u = {} must lie in (0, 1)",
                self.u
            )));
        }
        Ok(())
    }

    /// Per-capita loss of infecteds in the absence of growth terms.
    fn infected_loss(&self) -> f64 {
        self.alpha + self.d + self.r * self.u
    }
}

#[inline]
fn rhs_unchecked(s: &[f64], p: &HilkerParams, out: &mut [f64]) {
    let (pop, inf) = (s[0], s[1]);
    out[0] = p.r * (1.0 - pop) * (pop - p.u) * pop - p.alpha * inf;
    out[1] = (-p.infected_loss() + (p.sigma - 1.0) * pop - p.sigma * inf) * inf;
}

pub fn hilker_rhs(state: &[f64], params: &HilkerParams) -> Result<StateVector> {
    if state.len() != 2 {
        return Err(Error::InvalidParams(format!(
            "Hilker state needs 2 components, got {}",
            state.len()
        )));
    }
    if !state.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(state.to_vec()));
    }
    let mut out = vec![0.0; 2];
    rhs_unchecked(state, params, &mut out);
    Ok(StateVector::new(out))
}

pub fn hilker_jacobian(state: &[f64], p: &HilkerParams) -> Matrix2<f64> {
    let (pop, inf) = (state[0], state[1]);
    // d/dP of (1-P)(P-u)P = -3P^2 + 2(1+u)P - u
    let dgrowth = -3.0 * pop * pop + 2.0 * (1.0 + p.u) * pop - p.u;
    Matrix2::new(
        p.r * dgrowth,
        -p.alpha,
        (p.sigma - 1.0) * inf,
        -p.infected_loss() + (p.sigma - 1.0) * pop - 2.0 * p.sigma * inf,
    )
}

/// Disease-free equilibria `E0 = (0,0)`, `E1 = (1,0)`, `E2 = (u,0)` plus the
/// endemic states.
///
/// Endemic states come from substituting the infected nullcline
/// `I = ((sigma-1) P - (alpha + d + r u)) / sigma` into the population
/// equation, which leaves a cubic in `P`. Real roots with `P` in `(0, 1]` and
/// `I > 0` are kept, ordered by `P`. A single endemic state is tagged `E4`;
/// two are tagged `E3` (lower) and `E4` (upper).
pub fn hilker_equilibria(params: &HilkerParams) -> Vec<Equilibrium> {
    let mut out = vec![
        Equilibrium::at(EqId(0), StateVector::from([0.0, 0.0])),
        Equilibrium::at(EqId(1), StateVector::from([1.0, 0.0])),
        Equilibrium::at(EqId(2), StateVector::from([params.u, 0.0])),
    ];

    let endemic = endemic_states(params);
    let ids: &[u8] = match endemic.len() {
        0 => &[],
        1 => &[4],
        2 => &[3, 4],
        _ => &[3, 4, 5],
    };
    for (loc, &id) in endemic.iter().zip(ids) {
        out.push(Equilibrium::at(EqId(id), StateVector::from(*loc)));
    }
    out
}

fn endemic_states(p: &HilkerParams) -> Vec<[f64; 2]> {
    let k = p.infected_loss();
    let mut cands: Vec<[f64; 2]> = Vec::new();

    if p.sigma == 0.0 {
        // Infected nullcline degenerates to a vertical line P = -k.
        if p.alpha != 0.0 {
            let pop = -k;
            let inf = p.r * (1.0 - pop) * (pop - p.u) * pop / p.alpha;
            cands.push([pop, inf]);
        }
    } else {
        let s = p.sigma;
        // r(-P^3 + (1+u)P^2 - uP) - alpha((s-1)P - k)/s, ascending powers
        let coeffs = [
            p.alpha * k / s,
            -p.r * p.u - p.alpha * (s - 1.0) / s,
            p.r * (1.0 + p.u),
            -p.r,
        ];
        for pop in real_roots(&coeffs) {
            cands.push([pop, ((s - 1.0) * pop - k) / s]);
        }
    }

    let mut kept: Vec<[f64; 2]> = cands
        .into_iter()
        .filter(|[pop, inf]| pop.is_finite() && inf.is_finite())
        .filter(|[pop, inf]| *pop > 0.0 && *pop <= 1.0 && *inf > 0.0)
        .collect();
    kept.sort_by(|a, b| a[0].total_cmp(&b[0]));
    kept.dedup_by(|a, b| (a[0] - b[0]).abs() < 1e-10);
    kept
}

/// Real roots of `sum c_i x^i` (coefficients ascending), via companion-matrix
/// eigenvalues polished with Newton steps.
pub(crate) fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.len() > 1 && c.last().is_some_and(|v| v.abs() < 1e-300) {
        c.pop();
    }
    let degree = c.len() - 1;
    if degree == 0 {
        return Vec::new();
    }
    let lead = c[degree];
    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -c[i] / lead;
    }
    let eigs = companion.complex_eigenvalues();
    let scale = eigs.iter().map(|z| z.norm()).fold(1.0, f64::max);

    let eval = |x: f64| -> (f64, f64) {
        let mut v = 0.0;
        let mut dv = 0.0;
        for &ci in c.iter().rev() {
            dv = dv * x + v;
            v = v * x + ci;
        }
        (v, dv)
    };

    eigs.iter()
        .filter(|z| z.im.abs() <= 1e-7 * scale)
        .map(|z| {
            let mut x = z.re;
            for _ in 0..8 {
                let (v, dv) = eval(x);
                if dv == 0.0 {
                    break;
                }
                let step = v / dv;
                x -= step;
                if step.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            x
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Hilker {
    params: HilkerParams,
}

impl Hilker {
    pub fn new(params: HilkerParams) -> Result<Self> {
        params.validate()?;
        Ok(Hilker { params })
    }

    pub fn params(&self) -> &HilkerParams {
        &self.params
    }
}

impl DynSystem for Hilker {
    fn name(&self) -> &str {
        "hilker"
    }

    fn dim(&self) -> usize {
        2
    }

    fn rhs_into(&self, state: &[f64], out: &mut [f64]) {
        rhs_unchecked(state, &self.params, out);
    }

    fn jacobian(&self, state: &[f64]) -> DMatrix<f64> {
        let j = hilker_jacobian(state, &self.params);
        DMatrix::from_iterator(2, 2, j.iter().copied())
    }

    fn equilibria(&self) -> Vec<Equilibrium> {
        hilker_equilibria(&self.params)
    }

    /// The `P = 0` axis is not invariant (`P' = -alpha I` there), so states
    /// with more infecteds than population can leave the orthant.
    fn orthant_invariant(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{classify, finite_difference_jacobian, Stability};

    fn reference() -> Hilker {
        Hilker::new(HilkerParams::reference()).unwrap()
    }

    #[test]
    fn trivial_equilibria_are_zeros_of_rhs() {
        let p = HilkerParams::reference();
        assert_eq!(&*hilker_rhs(&[0.0, 0.0], &p).unwrap(), &[0.0, 0.0]);
        assert_eq!(&*hilker_rhs(&[1.0, 0.0], &p).unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn published_endemic_state_is_near_zero() {
        let p = HilkerParams::reference();
        let f = hilker_rhs(&[0.6663, 0.2518], &p).unwrap();
        assert!(f.max_abs() < 1e-3, "{f:?}");
    }

    #[test]
    fn reference_equilibria() {
        let eqs = hilker_equilibria(&HilkerParams::reference());
        let ids: Vec<_> = eqs.iter().map(|e| e.id).collect();
        assert_eq!(ids, vec![EqId(0), EqId(1), EqId(2), EqId(4)]);
        let e2 = eqs[2].location.as_ref().unwrap();
        assert_eq!(&**e2, &[0.1, 0.0]);
        let e4 = eqs[3].location.as_ref().unwrap();
        assert!(e4.distance(&[0.6663, 0.2518]) < 1e-3, "{e4:?}");
        let res = hilker_rhs(e4, &HilkerParams::reference()).unwrap();
        assert!(res.max_abs() < 1e-10);
    }

    #[test]
    fn reference_stability() {
        let m = reference();
        let eqs: Vec<_> = m.equilibria().iter().map(|e| classify(e, &m)).collect();
        assert_eq!(eqs[0].stability, Some(Stability::Stable));
        // E1 is a saddle numerically (one eigenvalue along the invariant
        // P axis is negative); it is unstable either way.
        assert!(eqs[1].stability.unwrap().is_unstable());
        assert_eq!(eqs[2].stability, Some(Stability::Saddle));
        assert_eq!(eqs[3].stability, Some(Stability::Stable));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = reference();
        for s in [[0.3, 0.2], [1.5, 0.7], [0.05, 2.0]] {
            let a = m.jacobian(&s);
            let fd = finite_difference_jacobian(&m, &s);
            for (x, y) in a.iter().zip(fd.iter()) {
                assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0), "{a} vs {fd}");
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = HilkerParams::reference();
        p.u = 1.2;
        assert!(Hilker::new(p).is_err());
        p.u = 0.1;
        p.sigma = f64::INFINITY;
        assert!(Hilker::new(p).is_err());
    }

    #[test]
    fn cubic_roots() {
        // (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6
        let mut r = real_roots(&[-6.0, 11.0, -6.0, 1.0]);
        r.sort_by(f64::total_cmp);
        for (a, b) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        // x^2 + 1 has none
        assert!(real_roots(&[1.0, 0.0, 1.0]).is_empty());
    }

    #[test]
    fn no_endemic_state_when_disease_cannot_invade() {
        let p = HilkerParams {
            sigma: 1.0,
            ..HilkerParams::reference()
        };
        let eqs = hilker_equilibria(&p);
        assert_eq!(eqs.len(), 3);
    }
}
