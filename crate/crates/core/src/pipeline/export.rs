//! Sampling an interpolant on a regular grid and writing the results.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{axis_name, Formats};
use crate::error::{Error, Result};
use crate::puinterp::{BBox, PUInterpolant};

/// Interpolant values on a regular grid, restricted to its domain.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleGrid {
    /// Points per independent axis.
    pub resolution: usize,
    /// Ambient coordinates of each in-domain sample (arguments then value
    /// when the interpolant is not a phase-space graph).
    pub rows: Vec<Vec<f64>>,
    /// Flat grid index of each row, first axis slowest.
    pub grid_index: Vec<usize>,
    pub columns: Vec<String>,
    /// Number of independent variables.
    pub args: usize,
}

impl SampleGrid {
    pub fn nonfinite(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.iter().any(|v| !v.is_finite()))
            .count()
    }
}

/// Evaluates `interp` at `resolution` points per axis over its bounding box.
/// Grid points outside the evaluation domain are skipped.
pub fn sample(interp: &PUInterpolant, resolution: usize) -> Result<SampleGrid> {
    if resolution < 2 {
        return Err(Error::Config("export resolution must be at least 2".into()));
    }
    let args = interp.dim();
    if args > 2 {
        return Err(Error::Config(format!(
            "cannot export an interpolant of {args} arguments"
        )));
    }
    let columns: Vec<String> = match &interp.axes {
        Some(a) => (0..a.ambient_dim)
            .map(|k| axis_name(k).to_string())
            .collect(),
        None => (0..args)
            .map(|k| format!("arg{k}"))
            .chain(std::iter::once("value".to_string()))
            .collect(),
    };
    let grid = grid_points(&interp.bbox, resolution);
    let mut rows = Vec::new();
    let mut grid_index = Vec::new();
    for (i, p) in grid.iter().enumerate() {
        if !interp.domain.contains(p) {
            continue;
        }
        let v = interp.evaluate(p)?;
        rows.push(match &interp.axes {
            Some(a) => a.lift(p, v).into_inner(),
            None => p.iter().copied().chain(std::iter::once(v)).collect(),
        });
        grid_index.push(i);
    }
    Ok(SampleGrid {
        resolution,
        rows,
        grid_index,
        columns,
        args,
    })
}

/// Regular grid with both endpoints of every axis, first axis slowest.
/// Collapsed axes produce `resolution` copies of their single value.
fn grid_points(bbox: &BBox, resolution: usize) -> Vec<Vec<f64>> {
    let axis = |k: usize| -> Vec<f64> {
        let (lo, hi) = (bbox.lo[k], bbox.hi[k]);
        (0..resolution)
            .map(|i| {
                if i + 1 == resolution {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (resolution - 1) as f64
                }
            })
            .collect()
    };
    match bbox.dim() {
        1 => axis(0).into_iter().map(|x| vec![x]).collect(),
        _ => {
            let (a, b) = (axis(0), axis(1));
            a.iter()
                .flat_map(|&x| b.iter().map(move |&y| vec![x, y]))
                .collect()
        }
    }
}

pub fn write_samples_csv<W: Write>(grid: &SampleGrid, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&grid.columns)?;
    for row in &grid.rows {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshStats {
    pub vertices: usize,
    /// Triangles for surfaces, segments for curves.
    pub elements: usize,
}

/// Writes a Wavefront OBJ file: a triangulated grid for surfaces, a single
/// polyline for curves. Grid cells with a corner outside the domain are
/// left out.
pub fn write_mesh<W: Write>(grid: &SampleGrid, mut out: W) -> Result<MeshStats> {
    for row in &grid.rows {
        let z = row.get(2).copied().unwrap_or(0.0);
        writeln!(out, "v {} {} {}", row[0], row[1], z)?;
    }
    let mut stats = MeshStats {
        vertices: grid.rows.len(),
        elements: 0,
    };
    if grid.args == 1 {
        if grid.rows.len() >= 2 {
            let ids: Vec<String> = (1..=grid.rows.len()).map(|i| i.to_string()).collect();
            writeln!(out, "l {}", ids.join(" "))?;
            stats.elements = grid.rows.len() - 1;
        }
        return Ok(stats);
    }
    let r = grid.resolution;
    let mut vertex_of = vec![0usize; r * r];
    for (v, &g) in grid.grid_index.iter().enumerate() {
        vertex_of[g] = v + 1;
    }
    for i in 0..r - 1 {
        for j in 0..r - 1 {
            let a = vertex_of[i * r + j];
            let b = vertex_of[i * r + j + 1];
            let c = vertex_of[(i + 1) * r + j];
            let d = vertex_of[(i + 1) * r + j + 1];
            if a == 0 || b == 0 || c == 0 || d == 0 {
                continue;
            }
            writeln!(out, "f {a} {b} {d}")?;
            writeln!(out, "f {a} {d} {c}")?;
            stats.elements += 2;
        }
    }
    Ok(stats)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub samples: usize,
    pub nonfinite: usize,
    pub mesh: Option<MeshStats>,
    pub files: Vec<PathBuf>,
}

/// Samples `interp` and writes `<name>_samples.csv` and `<name>.obj` into `dir`.
pub fn export(
    interp: &PUInterpolant,
    name: &str,
    resolution: usize,
    formats: Formats,
    dir: &Path,
) -> Result<ExportSummary> {
    fs::create_dir_all(dir)?;
    let grid = sample(interp, resolution)?;
    let mut files = Vec::new();
    if formats.csv {
        let path = dir.join(format!("{name}_samples.csv"));
        write_samples_csv(&grid, BufWriter::new(fs::File::create(&path)?))?;
        files.push(path);
    }
    let mut mesh = None;
    if formats.mesh {
        let path = dir.join(format!("{name}.obj"));
        let mut w = BufWriter::new(fs::File::create(&path)?);
        mesh = Some(write_mesh(&grid, &mut w)?);
        w.flush()?;
        files.push(path);
    }
    Ok(ExportSummary {
        samples: grid.rows.len(),
        nonfinite: grid.nonfinite(),
        mesh,
        files,
    })
}

/// A matplotlib script drawing the detected points, refined nodes and the
/// sampled curves or surfaces found next to it.
pub fn plot_script(
    dim: usize,
    points_csv: &str,
    nodes_csv: &[String],
    samples_csv: &[String],
) -> String {
    let list = |v: &[String]| {
        v.iter()
            .map(|s| format!("\"{s}\""))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut s = String::new();
    s.push_str("#!/usr/bin/env python3\n");
    s.push_str("import csv\nimport os\n\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n");
    s.push_str("HERE = os.path.dirname(os.path.abspath(__file__))\n");
    s.push_str(&format!("DIM = {dim}\nPOINTS = \"{points_csv}\"\n"));
    s.push_str(&format!(
        "NODES = [{}]\nSAMPLES = [{}]\n\n",
        list(nodes_csv),
        list(samples_csv)
    ));
    s.push_str(
        r#"
def load(name, cols):
    with open(os.path.join(HERE, name), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [[float(r[c]) for r in rows] for c in cols]


axes = ["x", "y", "z"][:DIM]
fig = plt.figure(figsize=(7, 6))
ax = fig.add_subplot(111, projection="3d" if DIM == 3 else None)
ax.scatter(*load(POINTS, axes), s=6, c="0.6", label="separatrix points")
for name in NODES:
    ax.scatter(*load(name, axes), s=14, c="k", label="refined nodes")
for name in SAMPLES:
    cols = load(name, axes)
    if DIM == 2:
        ax.plot(*cols, lw=1.5, label=name)
    else:
        ax.plot_trisurf(*cols, alpha=0.6, linewidth=0)
for name, lim in zip(axes, [ax.set_xlim, ax.set_ylim] + ([ax.set_zlim] if DIM == 3 else [])):
    lim(0, None)
    getattr(ax, "set_" + name + "label")(name)
ax.legend(loc="best", fontsize="small")
fig.tight_layout()
fig.savefig(os.path.join(HERE, "separatrix.png"), dpi=150)
"#,
    );
    s
}
