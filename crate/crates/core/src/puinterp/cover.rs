use serde::{Deserialize, Serialize};

use super::kernel::weight_bump;
use crate::dynsys::distance;
use crate::error::{Error, Result};

/// Axis-aligned box in the independent variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len()
            || lo
                .iter()
                .zip(&hi)
                .any(|(a, b)| a.is_nan() || b.is_nan() || a > b)
        {
            return Err(Error::Config(format!("invalid box {lo:?} .. {hi:?}")));
        }
        Ok(BBox { lo, hi })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let first = points
            .first()
            .ok_or(Error::EmptyInput("bounding box of no points"))?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in points {
            for k in 0..lo.len() {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Ok(BBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn extent(&self, k: usize) -> f64 {
        self.hi[k] - self.lo[k]
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// `density` points per axis, endpoints included, first axis slowest.
    pub fn grid(&self, density: usize) -> Vec<Vec<f64>> {
        let density = density.max(1);
        let axis = |k: usize, i: usize| -> f64 {
            if density == 1 {
                0.5 * (self.lo[k] + self.hi[k])
            } else {
                self.lo[k] + self.extent(k) * i as f64 / (density - 1) as f64
            }
        };
        let dim = self.dim();
        let total = density.pow(dim as u32);
        (0..total)
            .map(|mut flat| {
                let mut p = vec![0.0; dim];
                for k in (0..dim).rev() {
                    p[k] = axis(k, flat % density);
                    flat /= density;
                }
                p
            })
            .collect()
    }
}

/// Where an interpolant is meant to be evaluated and exported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Box(BBox),
    /// Convex polygon, counter-clockwise, in two independent variables.
    Hull(Vec<[f64; 2]>),
}

impl Domain {
    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            Domain::Box(b) => b.contains(p),
            Domain::Hull(poly) => hull_contains(poly, [p[0], p[1]]),
        }
    }
}

/// Counter-clockwise convex hull (Andrew's monotone chain). Collinear points
/// are dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

pub fn hull_contains(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    if poly.len() < 3 {
        return false;
    }
    let scale = poly
        .iter()
        .flat_map(|v| v.iter())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale * scale;
    (0..poly.len()).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= -tol
    })
}

/// How the patch count `d` is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverMode {
    /// `d` patch centers along each independent axis.
    PerAxis,
    /// `d` patches in total, factored across the axes.
    Total,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverConfig {
    pub d: usize,
    pub mode: CoverMode,
    /// Patch radius as a multiple of the half cell diagonal.
    pub overlap: f64,
    /// Points per axis of the grid used to verify coverage.
    pub probe_density: usize,
}

impl Default for CoverConfig {
    fn default() -> Self {
        CoverConfig {
            d: 4,
            mode: CoverMode::PerAxis,
            overlap: 1.5,
            probe_density: 50,
        }
    }
}

impl CoverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("patch count d must be at least 1".into()));
        }
        if !(self.overlap.is_finite() && self.overlap >= 1.0) {
            return Err(Error::Config(format!(
                "overlap factor {} must be at least 1",
                self.overlap
            )));
        }
        Ok(())
    }

    /// Patch centers per axis for a box of the given extents.
    pub fn counts(&self, extents: &[f64]) -> Vec<usize> {
        let k = extents.len();
        match (self.mode, k) {
            (CoverMode::PerAxis, _) | (_, 0 | 1) => vec![self.d; k],
            (CoverMode::Total, 2) => {
                let small = (1..=self.d)
                    .filter(|a| self.d.is_multiple_of(*a) && a * a <= self.d)
                    .max()
                    .unwrap_or(1);
                let large = self.d / small;
                if extents[0] >= extents[1] {
                    vec![large, small]
                } else {
                    vec![small, large]
                }
            }
            (CoverMode::Total, _) => {
                let per = (self.d as f64).powf(1.0 / k as f64).round().max(1.0) as usize;
                vec![per; k]
            }
        }
    }
}

/// One subdomain of the cover with its local interpolation data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Indices of the nodes inside the patch.
    pub members: Vec<usize>,
    /// Local RBF coefficients, one per member; empty until solved.
    pub coeffs: Vec<f64>,
    /// `max |Phi alpha - f|` over the members.
    pub residual: f64,
    pub regularized: bool,
}

impl Patch {
    pub fn contains(&self, p: &[f64]) -> bool {
        distance(&self.center, p) < self.radius
    }

    /// Unnormalized partition-of-unity weight.
    #[inline]
    pub fn bump(&self, p: &[f64]) -> f64 {
        weight_bump(distance(&self.center, p) / self.radius)
    }
}

const INFLATE: f64 = 1.1;
const MAX_INFLATIONS: usize = 400;

/// Lays patch centers on a regular grid over `bbox` and assigns nodes.
///
/// Radii start at `overlap` times the half cell diagonal. While the coverage
/// grid has an uncovered point every radius grows by 10%; a patch without
/// nodes grows by 10% on its own until it captures one.
pub fn build_cover(nodes: &[Vec<f64>], bbox: &BBox, cfg: &CoverConfig) -> Result<Vec<Patch>> {
    cfg.validate()?;
    if nodes.is_empty() {
        return Err(Error::EmptyInput("cover nodes"));
    }
    let dim = bbox.dim();
    // Degenerate extents still need a positive patch size.
    let floor = 1e-9 * (0..dim).map(|k| bbox.extent(k)).fold(1.0, f64::max);
    let extents: Vec<f64> = (0..dim).map(|k| bbox.extent(k).max(floor)).collect();
    let counts = cfg.counts(&extents);
    let spacing: Vec<f64> = extents
        .iter()
        .zip(&counts)
        .map(|(e, &c)| e / c as f64)
        .collect();
    let half_diag = 0.5 * spacing.iter().map(|h| h * h).sum::<f64>().sqrt();
    let radius = cfg.overlap * half_diag;

    let total: usize = counts.iter().product();
    let mut patches: Vec<Patch> = (0..total)
        .map(|mut flat| {
            let mut center = vec![0.0; dim];
            for k in (0..dim).rev() {
                let i = flat % counts[k];
                flat /= counts[k];
                let mid = 0.5 * (bbox.lo[k] + bbox.hi[k]);
                let start = mid - 0.5 * extents[k];
                center[k] = start + (i as f64 + 0.5) * spacing[k];
            }
            Patch {
                center,
                radius,
                members: Vec::new(),
                coeffs: Vec::new(),
                residual: 0.0,
                regularized: false,
            }
        })
        .collect();

    let probes = bbox.grid(cfg.probe_density);
    for _ in 0..MAX_INFLATIONS {
        let uncovered = probes
            .iter()
            .any(|p| !patches.iter().any(|pt| pt.bump(p) > 0.0));
        if uncovered {
            for pt in &mut patches {
                pt.radius *= INFLATE;
            }
            continue;
        }
        for pt in &mut patches {
            pt.members = (0..nodes.len())
                .filter(|&i| pt.contains(&nodes[i]))
                .collect();
        }
        let mut grew = false;
        for pt in patches.iter_mut().filter(|pt| pt.members.is_empty()) {
            pt.radius *= INFLATE;
            grew = true;
        }
        if !grew {
            return Ok(patches);
        }
    }
    Err(Error::Config(format!(
        "patch cover did not settle after {MAX_INFLATIONS} inflations"
    )))
}

/// Largest distance from a probe-grid point of `bbox` to its nearest node.
pub fn fill_distance(nodes: &[Vec<f64>], bbox: &BBox, density: usize) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::EmptyInput("fill distance nodes"));
    }
    Ok(bbox
        .grid(density)
        .iter()
        .map(|p| {
            nodes
                .iter()
                .map(|n| distance(n, p))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> BBox {
        BBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn grid_includes_corners() {
        let g = unit_square().grid(2);
        assert_eq!(
            g,
            vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0]
            ]
        );
    }

    #[test]
    fn single_patch_cover() {
        let nodes = vec![vec![0.2, 0.3], vec![0.8, 0.9]];
        let cfg = CoverConfig {
            d: 1,
            ..Default::default()
        };
        let patches = build_cover(&nodes, &unit_square(), &cfg).unwrap();
        assert_eq!(patches.len(), 1);
        assert_eq!(patches[0].members, vec![0, 1]);
        assert_eq!(patches[0].center, vec![0.5, 0.5]);
    }

    #[test]
    fn per_axis_and_total_counts() {
        let per = CoverConfig::default();
        assert_eq!(per.counts(&[1.0, 2.0]), vec![4, 4]);
        let total = CoverConfig {
            mode: CoverMode::Total,
            ..Default::default()
        };
        assert_eq!(total.counts(&[1.0, 2.0]), vec![2, 2]);
        let three = CoverConfig {
            d: 3,
            mode: CoverMode::Total,
            ..Default::default()
        };
        assert_eq!(three.counts(&[5.0, 2.0]), vec![3, 1]);
        assert_eq!(three.counts(&[7.0]), vec![3]);
    }

    #[test]
    fn empty_patches_are_inflated() {
        // All nodes in one corner; every patch must still own a node.
        let nodes = vec![vec![0.0, 0.0], vec![0.05, 0.02], vec![1.0, 1.0]];
        let patches = build_cover(&nodes, &unit_square(), &CoverConfig::default()).unwrap();
        assert_eq!(patches.len(), 16);
        assert!(patches.iter().all(|p| !p.members.is_empty()));
        for p in &patches {
            for &m in &p.members {
                assert!(distance(&p.center, &nodes[m]) < p.radius);
            }
        }
    }

    #[test]
    fn hull_of_square_with_interior_point() {
        let pts = [
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [0.5, 0.5],
            [0.5, 0.0],
        ];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!(hull_contains(&h, [0.5, 0.5]));
        assert!(hull_contains(&h, [1.0, 0.5]));
        assert!(!hull_contains(&h, [1.01, 0.5]));
    }

    #[test]
    fn fill_distance_examples() {
        let b = unit_square();
        let center = vec![vec![0.5, 0.5]];
        let h = fill_distance(&center, &b, 2).unwrap();
        assert!((h - 0.5f64.sqrt()).abs() < 1e-15);
        let nodes = b.grid(7);
        assert_eq!(fill_distance(&nodes, &b, 7).unwrap(), 0.0);
    }
}
