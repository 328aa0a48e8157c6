//! Grid-averaging reduction of a separatrix point cloud.
//!
//! The bounding box `[0, M_x] x [0, M_y] (x [0, M_z])`, with `M_*` the
//! componentwise maxima, is cut into `L` equal intervals per axis. Each
//! nonempty cell contributes the mean of its members. A point on an edge
//! shared by two cells belongs to the lower-index one (the first interval is
//! closed at 0), so every point lands in exactly one cell.

use serde::{Deserialize, Serialize};

use crate::dynsys::StateVector;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub l: usize,
}

impl RefineConfig {
    pub fn new(l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::Config("refinement needs L >= 1".into()));
        }
        Ok(RefineConfig { l })
    }
}

/// One nonempty cell and the node it produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// `(l, h[, p])` cell index.
    pub index: Vec<usize>,
    pub members: Vec<usize>,
    pub node: StateVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Refinement {
    /// Componentwise maxima `M_x, M_y[, M_z]`.
    pub maxima: Vec<f64>,
    /// Nonempty cells in lexicographic index order.
    pub cells: Vec<Cell>,
}

impl Refinement {
    pub fn nodes(&self) -> Vec<StateVector> {
        self.cells.iter().map(|c| c.node.clone()).collect()
    }
}

fn cell_coordinate(v: f64, max: f64, l: usize) -> usize {
    if max <= 0.0 || v <= 0.0 {
        return 0;
    }
    let k = (v / max * l as f64).ceil() as usize;
    k.clamp(1, l) - 1
}

/// Full refinement record, including cell membership.
pub fn refine_cells(points: &[StateVector], l: usize) -> Result<Refinement> {
    RefineConfig::new(l)?;
    let first = points
        .first()
        .ok_or(Error::EmptyInput("refinement input"))?;
    let dim = first.dim();
    if points.iter().any(|p| p.dim() != dim || !p.is_finite()) {
        return Err(Error::Config(
            "refinement input must be finite points of equal dimension".into(),
        ));
    }
    let maxima: Vec<f64> = (0..dim)
        .map(|k| {
            points
                .iter()
                .map(|p| p[k])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();

    let mut keyed: Vec<(Vec<usize>, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let idx = (0..dim)
                .map(|k| cell_coordinate(p[k], maxima[k], l))
                .collect();
            (idx, i)
        })
        .collect();
    keyed.sort();

    let mut cells: Vec<Cell> = Vec::new();
    for (idx, i) in keyed {
        match cells.last_mut() {
            Some(c) if c.index == idx => c.members.push(i),
            _ => cells.push(Cell {
                index: idx,
                members: vec![i],
                node: StateVector::zeros(dim),
            }),
        }
    }
    for c in &mut cells {
        let count = c.members.len() as f64;
        for (k, v) in c.node.iter_mut().enumerate() {
            *v = c.members.iter().map(|&i| points[i][k]).sum::<f64>() / count;
        }
    }
    Ok(Refinement { maxima, cells })
}

/// Refined node set: one averaged point per nonempty cell.
pub fn refine(points: &[StateVector], l: usize) -> Result<Vec<StateVector>> {
    Ok(refine_cells(points, l)?.nodes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_is_unchanged() {
        let p = StateVector::from([0.3, 0.7, 2.0]);
        assert_eq!(refine(std::slice::from_ref(&p), 13).unwrap(), vec![p]);
    }

    #[test]
    fn empty_and_zero_l_are_errors() {
        assert!(matches!(refine(&[], 3), Err(Error::EmptyInput(_))));
        assert!(refine(&[StateVector::from([1.0, 1.0])], 0).is_err());
    }

    #[test]
    fn averages_within_cells() {
        // M = (4, 4), L = 2: cells split at 2.
        let pts: Vec<StateVector> = vec![
            [0.0, 0.0].into(),
            [1.0, 1.0].into(),
            [4.0, 4.0].into(),
            [3.0, 1.0].into(),
        ];
        let r = refine_cells(&pts, 2).unwrap();
        let idx: Vec<_> = r.cells.iter().map(|c| c.index.clone()).collect();
        assert_eq!(idx, vec![vec![0, 0], vec![1, 0], vec![1, 1]]);
        assert_eq!(&*r.cells[0].node, &[0.5, 0.5]);
        assert_eq!(&*r.cells[1].node, &[3.0, 1.0]);
        assert_eq!(&*r.cells[2].node, &[4.0, 4.0]);
    }

    #[test]
    fn edge_points_go_to_one_cell() {
        // 2.0 sits on the shared edge of the two cells.
        let pts: Vec<StateVector> = vec![[2.0, 1.0].into(), [4.0, 1.0].into()];
        let r = refine_cells(&pts, 2).unwrap();
        let total: usize = r.cells.iter().map(|c| c.members.len()).sum();
        assert_eq!(total, 2);
        assert_eq!(r.cells[0].index[0], 0);
        assert_eq!(r.cells[1].index[0], 1);
    }

    #[test]
    fn zero_extent_axis() {
        let pts: Vec<StateVector> = vec![[1.0, 0.0].into(), [2.0, 0.0].into()];
        assert_eq!(refine(&pts, 4).unwrap().len(), 2);
    }
}
