//! Partition-of-unity interpolation with compactly supported RBFs.
//!
//! The domain is covered by overlapping balls ([`Patch`]). Each patch
//! carries a local RBF interpolant `R_j` of the nodes it contains, and the
//! global interpolant blends them with Shepard-normalized Wendland bumps:
//!
//! ```text
//! I(p) = sum_j R_j(p) W_j(p),   W_j = w_j / sum_k w_k
//! ```
//!
//! Separatrices are fitted as function graphs: one ambient coordinate is the
//! dependent value and the others are the independent variables
//! ([`PUInterpolant::fit_graph`]).

mod cover;
mod kernel;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynsys::{distance, StateVector};
use crate::error::{Error, Result};

pub use cover::{
    build_cover, convex_hull, fill_distance, hull_contains, BBox, CoverConfig, CoverMode, Domain,
    Patch,
};
pub use kernel::{Kernel, KernelFamily};

/// Evaluates `sum_k coeffs[k] * phi(|p - node_k|)` over the patch members.
fn local_value(kernel: &Kernel, patch: &Patch, nodes: &[Vec<f64>], p: &[f64]) -> f64 {
    patch
        .members
        .iter()
        .zip(&patch.coeffs)
        .map(|(&m, a)| a * kernel.eval(distance(&nodes[m], p)))
        .sum()
}

fn interpolation_matrix(kernel: &Kernel, nodes: &[Vec<f64>], members: &[usize]) -> DMatrix<f64> {
    let m = members.len();
    DMatrix::from_fn(m, m, |i, k| {
        kernel.eval(distance(&nodes[members[i]], &nodes[members[k]]))
    })
}

/// Solves every patch's local system `Phi alpha = f` by Cholesky.
///
/// A patch whose matrix is numerically not positive definite is retried with
/// `1e-12 * trace / n` added to the diagonal; a second failure is an error.
/// Coincident nodes inside a patch are rejected up front.
pub fn solve_patches(
    mut patches: Vec<Patch>,
    nodes: &[Vec<f64>],
    values: &[f64],
    kernel: &Kernel,
) -> Result<Vec<Patch>> {
    if nodes.len() != values.len() {
        return Err(Error::Config(format!(
            "{} nodes but {} values",
            nodes.len(),
            values.len()
        )));
    }
    for (j, patch) in patches.iter_mut().enumerate() {
        let members = &patch.members;
        for (a, &i) in members.iter().enumerate() {
            for &k in &members[a + 1..] {
                if distance(&nodes[i], &nodes[k]) == 0.0 {
                    return Err(Error::Factorization {
                        patch: j,
                        reason: format!("nodes {i} and {k} coincide; the system is singular"),
                    });
                }
            }
        }
        let phi = interpolation_matrix(kernel, nodes, members);
        let rhs = DVector::from_iterator(members.len(), members.iter().map(|&i| values[i]));

        let (chol, regularized) = match phi.clone().cholesky() {
            Some(c) => (c, false),
            None => {
                let n = members.len() as f64;
                let shift = 1e-12 * phi.trace() / n;
                let shifted = &phi + DMatrix::identity(members.len(), members.len()) * shift;
                match shifted.cholesky() {
                    Some(c) => (c, true),
                    None => {
                        return Err(Error::Factorization {
                            patch: j,
                            reason: format!(
                                "interpolation matrix of {} nodes is not positive definite",
                                members.len()
                            ),
                        })
                    }
                }
            }
        };
        let mut alpha = chol.solve(&rhs);
        // One step of iterative refinement against the unshifted matrix.
        let r = &rhs - &phi * &alpha;
        alpha += chol.solve(&r);
        let residual = (&phi * &alpha - &rhs).amax();
        patch.coeffs = alpha.iter().copied().collect();
        patch.residual = residual;
        patch.regularized = regularized;
    }
    Ok(patches)
}

/// Which ambient coordinate is the value and which are the arguments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphAxes {
    pub ambient_dim: usize,
    pub dependent: usize,
    pub independent: Vec<usize>,
}

impl GraphAxes {
    pub fn new(ambient_dim: usize, dependent: usize) -> Result<Self> {
        if dependent >= ambient_dim {
            return Err(Error::Config(format!(
                "dependent axis {dependent} out of range for dimension {ambient_dim}"
            )));
        }
        Ok(GraphAxes {
            ambient_dim,
            dependent,
            independent: (0..ambient_dim).filter(|&k| k != dependent).collect(),
        })
    }

    pub fn project(&self, state: &[f64]) -> Vec<f64> {
        self.independent.iter().map(|&k| state[k]).collect()
    }

    /// Rebuilds the ambient point from arguments and value.
    pub fn lift(&self, args: &[f64], value: f64) -> StateVector {
        let mut s = StateVector::zeros(self.ambient_dim);
        for (&k, v) in self.independent.iter().zip(args) {
            s[k] = *v;
        }
        s[self.dependent] = value;
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    /// Bounding box of the projected nodes.
    Box,
    /// Convex hull of the projected nodes (two arguments only).
    Hull,
}

/// A solved partition-of-unity interpolant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PUInterpolant {
    pub kernel: Kernel,
    /// Node positions in the independent variables.
    pub nodes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub patches: Vec<Patch>,
    pub bbox: BBox,
    pub domain: Domain,
    /// Present when the interpolant represents a graph in phase space.
    pub axes: Option<GraphAxes>,
}

impl PUInterpolant {
    /// Interpolates scattered `values` at `nodes` over their bounding box.
    pub fn new(
        nodes: Vec<Vec<f64>>,
        values: Vec<f64>,
        kernel: Kernel,
        cover: &CoverConfig,
    ) -> Result<Self> {
        let bbox = BBox::from_points(&nodes)?;
        Self::with_box(nodes, values, kernel, cover, bbox)
    }

    pub fn with_box(
        nodes: Vec<Vec<f64>>,
        values: Vec<f64>,
        kernel: Kernel,
        cover: &CoverConfig,
        bbox: BBox,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::EmptyInput("interpolation nodes"));
        }
        let dim = bbox.dim();
        if nodes
            .iter()
            .any(|n| n.len() != dim || n.iter().any(|v| !v.is_finite()))
            || values.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Config(
                "interpolation nodes and values must be finite and match the box dimension".into(),
            ));
        }
        kernel.check_dimension(dim)?;
        let skeleton = build_cover(&nodes, &bbox, cover)?;
        let patches = solve_patches(skeleton, &nodes, &values, &kernel)?;
        Ok(PUInterpolant {
            kernel,
            nodes,
            values,
            patches,
            domain: Domain::Box(bbox.clone()),
            bbox,
            axes: None,
        })
    }

    /// Fits phase-space points as the graph `x_dependent = s(other coords)`.
    pub fn fit_graph(
        points: &[StateVector],
        dependent: usize,
        kernel: Kernel,
        cover: &CoverConfig,
        domain: DomainKind,
    ) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyInput("graph points"))?;
        let axes = GraphAxes::new(first.dim(), dependent)?;
        let nodes: Vec<Vec<f64>> = points.iter().map(|p| axes.project(p)).collect();
        let values: Vec<f64> = points.iter().map(|p| p[dependent]).collect();
        let mut interp = Self::new(nodes, values, kernel, cover)?;
        if domain == DomainKind::Hull {
            if axes.independent.len() != 2 {
                return Err(Error::Config(
                    "hull domains need exactly two arguments".into(),
                ));
            }
            let pts: Vec<[f64; 2]> = interp.nodes.iter().map(|n| [n[0], n[1]]).collect();
            let hull = convex_hull(&pts);
            if hull.len() >= 3 {
                interp.domain = Domain::Hull(hull);
            }
        }
        interp.axes = Some(axes);
        Ok(interp)
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    /// Normalized weights `(patch index, W_j(p))` of the patches containing `p`.
    pub fn weights(&self, p: &[f64]) -> Vec<(usize, f64)> {
        let raw: Vec<(usize, f64)> = self
            .patches
            .iter()
            .enumerate()
            .map(|(j, pt)| (j, pt.bump(p)))
            .filter(|(_, w)| *w > 0.0)
            .collect();
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        raw.into_iter().map(|(j, w)| (j, w / total)).collect()
    }

    /// `I(p)` at a point of the independent variables.
    pub fn evaluate(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.dim() {
            return Err(Error::Config(format!(
                "evaluation point has {} coordinates, interpolant expects {}",
                p.len(),
                self.dim()
            )));
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for pt in &self.patches {
            let w = pt.bump(p);
            if w > 0.0 {
                num += w * local_value(&self.kernel, pt, &self.nodes, p);
                den += w;
            }
        }
        if den == 0.0 {
            return Err(Error::OutsideCover(p.to_vec()));
        }
        Ok(num / den)
    }

    /// Evaluates at the projection of a phase-space state.
    pub fn evaluate_state(&self, state: &[f64]) -> Result<f64> {
        let axes = self
            .axes
            .as_ref()
            .ok_or_else(|| Error::Config("interpolant is not a phase-space graph".into()))?;
        self.evaluate(&axes.project(state))
    }

    /// Signed offset of `state` from the graph along the dependent axis.
    pub fn offset(&self, state: &[f64]) -> Result<f64> {
        let axes = self
            .axes
            .as_ref()
            .ok_or_else(|| Error::Config("interpolant is not a phase-space graph".into()))?;
        Ok(state[axes.dependent] - self.evaluate(&axes.project(state))?)
    }

    /// `max_i |I(p_i) - f_i|` over all nodes.
    pub fn node_error(&self) -> Result<f64> {
        self.nodes
            .iter()
            .zip(&self.values)
            .try_fold(0.0f64, |m, (n, f)| Ok(m.max((self.evaluate(n)? - f).abs())))
    }

    /// Worst local solve residual.
    pub fn max_residual(&self) -> f64 {
        self.patches.iter().map(|p| p.residual).fold(0.0, f64::max)
    }

    pub fn fill_distance(&self, density: usize) -> Result<f64> {
        fill_distance(&self.nodes, &self.bbox, density)
    }

    /// Writes the solved interpolant as JSON.
    pub fn save<W: std::io::Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    /// Reads an interpolant written by [`PUInterpolant::save`].
    pub fn load<R: std::io::Read>(input: R) -> Result<Self> {
        let pu: PUInterpolant = serde_json::from_reader(input)?;
        let dim = pu.bbox.dim();
        let consistent = pu.nodes.len() == pu.values.len()
            && pu.nodes.iter().all(|n| n.len() == dim)
            && pu.patches.iter().all(|p| {
                p.center.len() == dim
                    && p.coeffs.len() == p.members.len()
                    && p.members.iter().all(|&m| m < pu.nodes.len())
            })
            && pu.axes.as_ref().is_none_or(|a| a.independent.len() == dim);
        if !consistent {
            return Err(Error::Config("interpolant file is inconsistent".into()));
        }
        Ok(pu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wendland(c: f64) -> Kernel {
        Kernel::new(KernelFamily::WendlandC2, c).unwrap()
    }

    #[test]
    fn single_node_patch() {
        let k = Kernel::new(KernelFamily::WuC2, 0.2).unwrap();
        let patches = vec![Patch {
            center: vec![0.0],
            radius: 1.0,
            members: vec![0],
            coeffs: vec![],
            residual: 0.0,
            regularized: false,
        }];
        let solved = solve_patches(patches, &[vec![0.0]], &[4.0], &k).unwrap();
        assert!((solved[0].coeffs[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn duplicate_nodes_are_rejected() {
        let nodes = vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![0.0, 1.0]];
        let err = PUInterpolant::new(
            nodes,
            vec![1.0, 2.0, 3.0],
            wendland(0.5),
            &CoverConfig {
                d: 1,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(
            matches!(err, Error::Factorization { patch: 0, .. }),
            "{err}"
        );
    }

    #[test]
    fn single_patch_matches_global_rbf() {
        let nodes: Vec<Vec<f64>> = (0..6)
            .map(|i| vec![i as f64 * 0.7, (i * i) as f64 * 0.1])
            .collect();
        let values: Vec<f64> = nodes.iter().map(|n| n[0].sin() + n[1]).collect();
        let k = wendland(0.2);
        let cover = CoverConfig {
            d: 1,
            ..Default::default()
        };
        let pu = PUInterpolant::new(nodes.clone(), values.clone(), k, &cover).unwrap();

        let members: Vec<usize> = (0..nodes.len()).collect();
        let phi = interpolation_matrix(&k, &nodes, &members);
        let alpha = phi.lu().solve(&DVector::from_vec(values)).unwrap();
        for p in pu.bbox.grid(9) {
            let direct: f64 = (0..nodes.len())
                .map(|i| alpha[i] * k.eval(distance(&nodes[i], &p)))
                .sum();
            assert!((pu.evaluate(&p).unwrap() - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn reproduces_nodes_and_partitions_unity() {
        let nodes: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64 / 39.0;
                vec![t * 3.0, (7.0 * t).sin() + 1.5 * t]
            })
            .collect();
        let values: Vec<f64> = nodes.iter().map(|n| n[0] * n[1]).collect();
        let pu = PUInterpolant::new(nodes, values, wendland(0.3), &CoverConfig::default()).unwrap();
        assert!(pu.node_error().unwrap() < 1e-6);
        for p in pu.bbox.grid(50) {
            let s: f64 = pu.weights(&p).iter().map(|(_, w)| w).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn outside_cover_is_an_error() {
        let pu = PUInterpolant::new(
            vec![vec![0.0], vec![1.0]],
            vec![0.0, 1.0],
            wendland(0.5),
            &CoverConfig::default(),
        )
        .unwrap();
        assert!(matches!(pu.evaluate(&[50.0]), Err(Error::OutsideCover(_))));
    }

    #[test]
    fn graph_axes_roundtrip() {
        let axes = GraphAxes::new(3, 0).unwrap();
        assert_eq!(axes.independent, vec![1, 2]);
        let s = axes.lift(&[2.0, 3.0], 1.0);
        assert_eq!(&*s, &[1.0, 2.0, 3.0]);
        assert_eq!(axes.project(&s), vec![2.0, 3.0]);
        assert!(GraphAxes::new(2, 2).is_err());
    }

    #[test]
    fn gneiting_rejected_in_three_arguments() {
        let nodes = vec![vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]];
        let k = Kernel::new(KernelFamily::GneitingC2B, 0.1).unwrap();
        assert!(matches!(
            PUInterpolant::new(nodes, vec![0.0, 1.0], k, &CoverConfig::default()),
            Err(Error::Kernel(_))
        ));
    }
}
