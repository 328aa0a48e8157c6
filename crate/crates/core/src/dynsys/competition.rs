//! Three-species Lotka–Volterra competition.
//!
//! ```text
//! x' = p (1 - x/u) x - a x y - b x z
//! y' = q (1 - y/v) y - c x y - e y z
//! z' = r (1 - z/w) z - f x z - g y z
//! ```

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use super::{DynSystem, EqId, Equilibrium, StateVector, EPS_DEN};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompetitionParams {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl CompetitionParams {
    /// Parameter set with exactly two stable equilibria, `E3` and `E4`.
    pub fn two_attractors() -> Self {
        CompetitionParams {
            p: 1.0,
            q: 1.0,
            r: 2.0,
            a: 1.0,
            b: 2.0,
            c: 0.3,
            e: 1.0,
            f: 3.0,
            g: 2.0,
            u: 1.0,
            v: 0.2,
            w: 9.5,
        }
    }

    /// Parameter set with three stable equilibria, `E1`, `E2` and `E3`.
    pub fn three_attractors() -> Self {
        CompetitionParams {
            p: 1.0,
            q: 2.0,
            r: 2.0,
            a: 2.0,
            b: 5.0,
            c: 3.0,
            e: 7.0,
            f: 3.0,
            g: 5.0,
            u: 3.0,
            v: 2.0,
            w: 2.0,
        }
    }

    pub fn all_ones() -> Self {
        CompetitionParams {
            p: 1.0,
            q: 1.0,
            r: 1.0,
            a: 1.0,
            b: 1.0,
            c: 1.0,
            e: 1.0,
            f: 1.0,
            g: 1.0,
            u: 1.0,
            v: 1.0,
            w: 1.0,
        }
    }

    pub fn as_array(&self) -> [f64; 12] {
        [
            self.p, self.q, self.r, self.a, self.b, self.c, self.e, self.f, self.g, self.u, self.v,
            self.w,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.as_array();
        if !all.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "competition parameters must be finite and nonnegative: {self:?}"
            )));
        }
        if !(self.u > 0.0 && self.v > 0.0 && self.w > 0.0) {
            return Err(Error::InvalidParams(
                "carrying capacities u, v, w must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[inline]
fn rhs_unchecked(s: &[f64], k: &CompetitionParams, out: &mut [f64]) {
    let (x, y, z) = (s[0], s[1], s[2]);
    out[0] = k.p * (1.0 - x / k.u) * x - k.a * x * y - k.b * x * z;
    out[1] = k.q * (1.0 - y / k.v) * y - k.c * x * y - k.e * y * z;
    out[2] = k.r * (1.0 - z / k.w) * z - k.f * x * z - k.g * y * z;
}

pub fn competition_rhs(state: &[f64], params: &CompetitionParams) -> Result<StateVector> {
    if state.len() != 3 {
        return Err(Error::InvalidParams(format!(
            "competition state needs 3 components, got {}",
            state.len()
        )));
    }
    if !state.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(state.to_vec()));
    }
    let mut out = vec![0.0; 3];
    rhs_unchecked(state, params, &mut out);
    Ok(StateVector::new(out))
}

pub fn competition_jacobian(state: &[f64], k: &CompetitionParams) -> Result<Matrix3<f64>> {
    if state.len() != 3 || !state.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(state.to_vec()));
    }
    Ok(jacobian_unchecked(state, k))
}

fn jacobian_unchecked(s: &[f64], k: &CompetitionParams) -> Matrix3<f64> {
    let (x, y, z) = (s[0], s[1], s[2]);
    let da = k.p * (1.0 - 2.0 * x / k.u) - k.a * y - k.b * z;
    let db = k.q * (1.0 - 2.0 * y / k.v) - k.c * x - k.e * z;
    let dc = k.r * (1.0 - 2.0 * z / k.w) - k.f * x - k.g * y;
    Matrix3::new(
        da,
        -k.a * x,
        -k.b * x,
        -k.c * y,
        db,
        -k.e * y,
        -k.f * z,
        -k.g * z,
        dc,
    )
}

/// `num / den` unless the denominator is negligible relative to the size of
/// the terms it was formed from.
fn quotient(num: f64, den: f64, den_scale: f64) -> Option<f64> {
    if den.abs() <= EPS_DEN * den_scale || den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

fn two_species(
    id: EqId,
    nums: [f64; 2],
    den: f64,
    den_scale: f64,
    place: impl Fn(f64, f64) -> [f64; 3],
) -> Equilibrium {
    match (
        quotient(nums[0], den, den_scale),
        quotient(nums[1], den, den_scale),
    ) {
        (Some(s), Some(t)) => Equilibrium::at(id, StateVector::from(place(s, t))),
        _ => Equilibrium::degenerate(id, format!("{id}: denominator {den:e} is singular")),
    }
}

/// All eight equilibria `E0..E7` with feasibility flags.
///
/// Boundary and two-species states use their closed forms. The coexistence
/// state `E7` uses the closed form obtained by Cramer's rule on the interior
/// linear system; its `z` component carries the factor `w` (the symmetric
/// counterpart of the `x` and `y` components).
pub fn competition_equilibria(k: &CompetitionParams) -> Vec<Equilibrium> {
    let &CompetitionParams {
        p,
        q,
        r,
        a,
        b,
        c,
        e,
        f,
        g,
        u,
        v,
        w,
    } = k;

    let mut out = vec![
        Equilibrium::at(EqId(0), StateVector::from([0.0, 0.0, 0.0])),
        Equilibrium::at(EqId(1), StateVector::from([u, 0.0, 0.0])),
        Equilibrium::at(EqId(2), StateVector::from([0.0, v, 0.0])),
        Equilibrium::at(EqId(3), StateVector::from([0.0, 0.0, w])),
    ];

    let d4 = c * u * v * a - p * q;
    out.push(two_species(
        EqId(4),
        [u * q * (a * v - p), p * v * (c * u - q)],
        d4,
        (c * u * v * a).abs() + (p * q).abs(),
        |s, t| [s, t, 0.0],
    ));

    let d5 = f * u * w * b - r * p;
    out.push(two_species(
        EqId(5),
        [u * r * (b * w - p), w * p * (f * u - r)],
        d5,
        (f * u * w * b).abs() + (r * p).abs(),
        |s, t| [s, 0.0, t],
    ));

    let d6 = g * v * w * e - q * r;
    out.push(two_species(
        EqId(6),
        [v * r * (w * e - q), w * q * (v * g - r)],
        d6,
        (g * v * w * e).abs() + (q * r).abs(),
        |s, t| [0.0, s, t],
    ));

    let terms_scale = |ts: &[f64]| ts.iter().map(|t| t.abs()).sum::<f64>();

    let dx_terms = [
        p * g * v * w * e,
        -p * q * r,
        u * v * a * r * c,
        -u * v * a * f * w * e,
        u * w * b * f * q,
        -u * w * b * g * c * v,
    ];
    let dy_terms = [
        q * f * u * w * b,
        -q * p * r,
        c * u * v * r * a,
        -c * u * v * g * w * b,
        e * v * w * g * p,
        -e * v * w * a * f * u,
    ];
    let dz_terms = [
        r * c * u * v * a,
        -r * p * q,
        b * w * u * f * q,
        -b * w * u * v * c * g,
        e * v * w * g * p,
        -e * v * w * f * u * a,
    ];
    let nx = u * (p * (g * v * w * e - q * r) - a * v * r * (w * e - q) - b * w * q * (v * g - r));
    let ny = v * (q * (f * u * w * b - p * r) - r * c * u * (w * b - p) - p * e * w * (f * u - r));
    let nz = w * (r * (c * u * v * a - p * q) - g * p * v * (c * u - q) - u * f * q * (v * a - p));
    let coords = [
        quotient(nx, dx_terms.iter().sum(), terms_scale(&dx_terms)),
        quotient(ny, dy_terms.iter().sum(), terms_scale(&dy_terms)),
        quotient(nz, dz_terms.iter().sum(), terms_scale(&dz_terms)),
    ];
    match coords {
        [Some(x), Some(y), Some(z)] => {
            out.push(Equilibrium::at(EqId(7), StateVector::from([x, y, z])))
        }
        _ => out.push(Equilibrium::degenerate(
            EqId(7),
            "E7: coexistence denominator is singular",
        )),
    }

    out
}

/// Literal evaluation of the tabulated stability inequalities and the
/// feasibility disjunctions for `E4`, `E5`, `E6`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StabilityReport {
    /// Indexed by equilibrium number `0..=6`; `E0` is always unstable.
    pub stable: [bool; 7],
    pub e4_feasible: bool,
    pub e5_feasible: bool,
    pub e6_feasible: bool,
}

impl StabilityReport {
    /// `None` for `E7`, whose stability has no closed-form criterion.
    pub fn verdict(&self, id: EqId) -> Option<bool> {
        self.stable.get(id.0 as usize).copied()
    }

    pub fn feasibility(&self, id: EqId) -> Option<bool> {
        match id.0 {
            0..=3 => Some(true),
            4 => Some(self.e4_feasible),
            5 => Some(self.e5_feasible),
            6 => Some(self.e6_feasible),
            _ => None,
        }
    }

    pub fn stable_ids(&self) -> Vec<EqId> {
        (0..7u8)
            .filter(|&i| self.stable[i as usize])
            .map(EqId)
            .collect()
    }
}

pub fn stability_report(k: &CompetitionParams) -> StabilityReport {
    let &CompetitionParams {
        p,
        q,
        r,
        a,
        b,
        c,
        e,
        f,
        g,
        u,
        v,
        w,
    } = k;
    let stable = [
        false,
        r < f * u && q < c * u,
        r < v * g && p < a * v,
        q < e * w && p < b * w,
        q > c * u
            && p > a * v
            && r * (c * u * v * a - p * q) > p * v * g * (c * u - q) + u * f * q * (v * a - p),
        p > b * w
            && r > f * u
            && q * (f * u * w * b - p * r) > w * p * e * (f * u - r) + r * c * u * (w * b - p),
        q > w * e
            && r > v * g
            && p * (g * v * w * e - r * q) > b * w * q * (v * g - r) + a * v * r * (w * e - q),
    ];
    StabilityReport {
        stable,
        e4_feasible: (q < c * u && p < a * v) || (q > c * u && p > a * v),
        e5_feasible: (p < b * w && r < f * u) || (p > b * w && r > f * u),
        e6_feasible: (q < w * e && r < v * g) || (q > w * e && r > v * g),
    }
}

#[derive(Clone, Debug)]
pub struct Competition {
    params: CompetitionParams,
}

impl Competition {
    pub fn new(params: CompetitionParams) -> Result<Self> {
        params.validate()?;
        Ok(Competition { params })
    }

    pub fn params(&self) -> &CompetitionParams {
        &self.params
    }
}

impl DynSystem for Competition {
    fn name(&self) -> &str {
        "competition"
    }

    fn dim(&self) -> usize {
        3
    }

    fn rhs_into(&self, state: &[f64], out: &mut [f64]) {
        rhs_unchecked(state, &self.params, out);
    }

    fn jacobian(&self, state: &[f64]) -> DMatrix<f64> {
        let j = jacobian_unchecked(state, &self.params);
        DMatrix::from_iterator(3, 3, j.iter().copied())
    }

    fn equilibria(&self) -> Vec<Equilibrium> {
        competition_equilibria(&self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{classify, Stability};

    fn loc(eqs: &[Equilibrium], id: u8) -> Vec<f64> {
        eqs.iter()
            .find(|e| e.id == EqId(id))
            .and_then(|e| e.location.clone())
            .unwrap()
            .into_inner()
    }

    #[test]
    fn rhs_examples() {
        let two = CompetitionParams::two_attractors();
        assert_eq!(&*competition_rhs(&[0.0; 3], &two).unwrap(), &[0.0; 3]);
        assert_eq!(
            &*competition_rhs(&[0.0, 0.0, 9.5], &two).unwrap(),
            &[0.0; 3]
        );
        let ones = CompetitionParams::all_ones();
        assert_eq!(&*competition_rhs(&[1.0; 3], &ones).unwrap(), &[-2.0; 3]);
        assert!(competition_rhs(&[f64::NAN, 0.0, 0.0], &ones).is_err());
    }

    #[test]
    fn jacobian_examples() {
        let two = CompetitionParams::two_attractors();
        let j0 = competition_jacobian(&[0.0; 3], &two).unwrap();
        assert_eq!(
            j0,
            Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, 2.0))
        );
        let j3 = competition_jacobian(&[0.0, 0.0, 9.5], &two).unwrap();
        assert_eq!(j3[(0, 0)], -18.0);
    }

    #[test]
    fn two_attractor_equilibria() {
        let eqs = competition_equilibria(&CompetitionParams::two_attractors());
        assert_eq!(eqs.len(), 8);
        let e4 = loc(&eqs, 4);
        assert!((e4[0] - 0.8511).abs() < 1e-4 && (e4[1] - 0.1489).abs() < 1e-4 && e4[2] == 0.0);
        assert_eq!(loc(&eqs, 3), vec![0.0, 0.0, 9.5]);
    }

    #[test]
    fn three_attractor_boundary_equilibria() {
        let eqs = competition_equilibria(&CompetitionParams::three_attractors());
        assert_eq!(loc(&eqs, 1), vec![3.0, 0.0, 0.0]);
        assert_eq!(loc(&eqs, 2), vec![0.0, 2.0, 0.0]);
        assert_eq!(loc(&eqs, 3), vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn singular_denominator_is_degenerate() {
        let eqs = competition_equilibria(&CompetitionParams::all_ones());
        let e4 = eqs.iter().find(|e| e.id == EqId(4)).unwrap();
        assert!(e4.degenerate && !e4.feasible && e4.location.is_none());
    }

    #[test]
    fn feasible_equilibria_have_zero_residual() {
        for k in [
            CompetitionParams::two_attractors(),
            CompetitionParams::three_attractors(),
        ] {
            for e in competition_equilibria(&k).iter().filter(|e| e.feasible) {
                let f = competition_rhs(e.location.as_ref().unwrap(), &k).unwrap();
                assert!(f.max_abs() < 1e-9, "{} residual {f:?}", e.id);
            }
        }
    }

    #[test]
    fn table_verdicts_for_reference_sets() {
        let two = stability_report(&CompetitionParams::two_attractors());
        assert_eq!(two.stable_ids(), vec![EqId(3), EqId(4)]);
        let three = stability_report(&CompetitionParams::three_attractors());
        assert_eq!(three.stable_ids(), vec![EqId(1), EqId(2), EqId(3)]);
    }

    #[test]
    fn coexistence_state_is_a_saddle_for_reference_sets() {
        for k in [
            CompetitionParams::two_attractors(),
            CompetitionParams::three_attractors(),
        ] {
            let m = Competition::new(k).unwrap();
            let e7 = m
                .equilibria()
                .into_iter()
                .find(|e| e.id == EqId(7))
                .unwrap();
            assert!(e7.feasible);
            assert_eq!(classify(&e7, &m).stability, Some(Stability::Saddle));
        }
    }

    #[test]
    fn rejects_negative_params() {
        let mut k = CompetitionParams::two_attractors();
        k.a = -1.0;
        assert!(Competition::new(k).is_err());
        let mut k = CompetitionParams::two_attractors();
        k.w = 0.0;
        assert!(Competition::new(k).is_err());
    }
}
