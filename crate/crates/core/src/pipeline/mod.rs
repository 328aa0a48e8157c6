//! End-to-end runs: equilibria, detection, refinement, fitting, export and
//! an optional basin-agreement check.
//!
//! Every stage writes its artifacts as soon as it finishes, so a failure
//! later on leaves the earlier outputs in place. Errors carry the stage they
//! came from ([`StageError`]).

pub mod config;
pub mod export;
pub mod report;
pub mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::detect::{detect_points, LabeledPoint, PointMatrix};
use crate::dynsys::{attractors, classified_equilibria, EqId, Equilibrium, Model, StateVector};
use crate::error::{Error, Result};
use crate::integrate::integrate;
use crate::puinterp::PUInterpolant;
use crate::refine::refine;

pub use config::{FitSettings, Formats, ModelParams, Preset, RunConfig};
pub use export::{export, ExportSummary};
pub use report::report_equilibria;
pub use validate::{sign_agreement, ValidationConfig, ValidationReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Equilibria,
    Detect,
    Refine,
    Fit,
    Export,
    Validate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Equilibria => "equilibria",
            Stage::Detect => "detect",
            Stage::Refine => "refine",
            Stage::Fit => "fit",
            Stage::Export => "export",
            Stage::Validate => "validate",
        }
    }

    /// Process exit code for a failure in this stage.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Equilibria => 3,
            Stage::Detect => 4,
            Stage::Refine => 5,
            Stage::Fit => 6,
            Stage::Export => 7,
            Stage::Validate => 8,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

pub trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T, E: Into<Error>> AtStage<T> for std::result::Result<T, E> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|e| StageError {
            stage,
            source: e.into(),
        })
    }
}

/// Refined nodes of one separatrix component with the settings to fit them.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeGroup {
    /// File stem: `curve`, `surface`, `surface_primary` or `surface_secondary`.
    pub name: String,
    /// Raw points that went into refinement.
    pub raw: usize,
    /// Refined nodes, followed by the appended saddle if any.
    pub nodes: Vec<StateVector>,
    pub appended: Option<EqId>,
    pub fit: FitSettings,
    /// Attractors on either side of this component.
    pub side_a: Vec<EqId>,
    pub side_b: Vec<EqId>,
}

impl NodeGroup {
    /// Refined nodes, not counting the appended saddle.
    pub fn refined(&self) -> usize {
        self.nodes.len() - usize::from(self.appended.is_some())
    }
}

fn most_common_pair(points: &[&LabeledPoint]) -> Option<(EqId, EqId)> {
    let mut counts: BTreeMap<(EqId, EqId), usize> = BTreeMap::new();
    for p in points {
        *counts.entry(p.separates).or_default() += 1;
    }
    // Ties go to the smallest pair, so the choice is deterministic.
    counts
        .into_iter()
        .fold(
            None,
            |best: Option<((EqId, EqId), usize)>, (k, c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((k, c)),
            },
        )
        .map(|(k, _)| k)
}

/// Name, members, fit settings and the attractors on either side.
type Part<'a> = (
    String,
    Vec<&'a LabeledPoint>,
    FitSettings,
    Vec<EqId>,
    Vec<EqId>,
);

/// Splits the detected points as configured and refines each part.
pub fn refine_groups(
    cfg: &RunConfig,
    points: &PointMatrix,
    equilibria: &[Equilibrium],
) -> Result<Vec<NodeGroup>> {
    let attractor_ids: Vec<EqId> = equilibria
        .iter()
        .filter(|e| e.is_attractor())
        .map(|e| e.id)
        .collect();
    let mut parts: Vec<Part> = Vec::new();
    match points.split_target {
        Some(target) => {
            let others: Vec<EqId> = attractor_ids
                .iter()
                .copied()
                .filter(|&e| e != target)
                .collect();
            parts.push((
                "surface_primary".into(),
                points.primary(),
                cfg.fit.clone(),
                vec![target],
                others,
            ));
            let secondary = points.secondary();
            let (a, b) = most_common_pair(&secondary)
                .ok_or(Error::EmptyInput("secondary separatrix points"))?;
            parts.push((
                "surface_secondary".into(),
                secondary,
                cfg.wall.clone(),
                vec![a],
                vec![b],
            ));
        }
        None => {
            let all: Vec<&LabeledPoint> = points.points.iter().collect();
            let (a, b) = most_common_pair(&all).ok_or(Error::EmptyInput("separatrix points"))?;
            let name = if cfg.dim() == 2 { "curve" } else { "surface" };
            parts.push((name.into(), all, cfg.fit.clone(), vec![a], vec![b]));
        }
    }

    let mut groups = Vec::new();
    for (name, pts, fit, side_a, side_b) in parts {
        if pts.is_empty() {
            return Err(Error::EmptyInput("separatrix points for a component"));
        }
        let mut nodes = refine(&PointMatrix::locations(&pts), cfg.l)?;
        let mut appended = None;
        if let (Some(id), None) = (cfg.append_saddle, points.split_target) {
            let eq = equilibria
                .iter()
                .find(|e| e.id == id && e.feasible)
                .and_then(|e| e.location.clone())
                .ok_or_else(|| {
                    Error::Config(format!("append_saddle: {id} is not a feasible equilibrium"))
                })?;
            nodes.push(eq);
            appended = Some(id);
        }
        groups.push(NodeGroup {
            name,
            raw: pts.len(),
            nodes,
            appended,
            fit,
            side_a,
            side_b,
        });
    }
    Ok(groups)
}

/// Fits one node group as a graph over its independent axes.
pub fn fit_nodes(
    nodes: &[StateVector],
    fit: &FitSettings,
    resolution: usize,
) -> Result<PUInterpolant> {
    PUInterpolant::fit_graph(
        nodes,
        fit.dependent_axis,
        fit.kernel()?,
        &fit.cover(resolution.max(50)),
        fit.domain,
    )
}

/// Header `x,y[,z]`, one node per row.
pub fn write_nodes_csv<W: Write>(nodes: &[StateVector], out: W) -> Result<()> {
    let dim = nodes.first().map_or(0, |n| n.dim());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&["x", "y", "z"][..dim])?;
    for n in nodes {
        w.write_record(n.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads nodes from the leading `x,y[,z]` columns; other columns are ignored.
pub fn read_nodes_csv<R: std::io::Read>(input: R) -> Result<Vec<StateVector>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let cols: Vec<usize> = ["x", "y", "z"]
        .iter()
        .filter_map(|a| headers.iter().position(|h| h == *a))
        .collect();
    if cols.len() < 2 {
        return Err(Error::Config(
            "node file needs at least x and y columns".into(),
        ));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v: Vec<f64> = cols
            .iter()
            .map(|&c| {
                rec.get(c)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Config(format!("bad node value in row {:?}", rec)))
            })
            .collect::<Result<_>>()?;
        out.push(StateVector::from(v));
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("node file"));
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    /// Detected points `N`.
    pub n: usize,
    /// `N'` and `N''` when a split target is set.
    pub n_primary: Option<usize>,
    pub n_secondary: Option<usize>,
    /// Refined nodes `K` over all components (appended saddles excluded).
    pub k: usize,
    pub k_primary: Option<usize>,
    pub k_secondary: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceReport {
    pub name: String,
    pub raw_points: usize,
    pub refined_nodes: usize,
    pub appended: Option<EqId>,
    pub dependent_axis: String,
    pub kernel: String,
    pub shape_c: f64,
    pub patches_d: usize,
    pub patches: usize,
    pub regularized_patches: usize,
    pub max_residual: f64,
    pub node_error: f64,
    pub fill_distance: f64,
    pub export: Option<ExportSummary>,
    pub validation: Option<ValidationReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub preset: Preset,
    pub model: String,
    pub attractors: Vec<EqId>,
    pub counts: Counts,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<Stage, f64>,
    pub surfaces: Vec<SurfaceReport>,
    pub files: Vec<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Runs the whole pipeline and writes `report.json` next to the exports.
pub fn run(cfg: &RunConfig) -> std::result::Result<RunReport, StageError> {
    let mut timings = BTreeMap::new();
    let mut files: Vec<PathBuf> = Vec::new();
    let dir = cfg.output_dir.clone();

    let t = Instant::now();
    cfg.validate().at(Stage::Config)?;
    fs::create_dir_all(&dir).at(Stage::Config)?;
    let path = dir.join("config.txt");
    fs::write(&path, cfg.to_text()).at(Stage::Config)?;
    files.push(path);
    timings.insert(Stage::Config, t.elapsed().as_secs_f64());

    let t = Instant::now();
    let model: Model = cfg.params.build().at(Stage::Equilibria)?;
    let equilibria = classified_equilibria(&model);
    let attr = attractors(&model);
    let path = dir.join("equilibria.txt");
    fs::write(&path, report_equilibria(&cfg.params).at(Stage::Equilibria)?)
        .at(Stage::Equilibria)?;
    files.push(path);
    if let Some(ic) = &cfg.debug_trajectory {
        let traj = integrate(&model, ic, &cfg.integrator).at(Stage::Equilibria)?;
        let path = dir.join("trajectory.csv");
        let mut w = create(&path).at(Stage::Equilibria)?;
        traj.write_csv(&mut w).at(Stage::Equilibria)?;
        w.flush().at(Stage::Equilibria)?;
        files.push(path);
    }
    timings.insert(Stage::Equilibria, t.elapsed().as_secs_f64());

    let t = Instant::now();
    let points = detect_points(&model, &attr, &cfg.detect_config()).at(Stage::Detect)?;
    let path = dir.join("points.csv");
    let mut w = create(&path).at(Stage::Detect)?;
    points.write_csv(&mut w).at(Stage::Detect)?;
    w.flush().at(Stage::Detect)?;
    files.push(path);
    timings.insert(Stage::Detect, t.elapsed().as_secs_f64());
    log::info!("detected {} separatrix points", points.len());

    let t = Instant::now();
    let groups = refine_groups(cfg, &points, &equilibria).at(Stage::Refine)?;
    let mut node_files = Vec::new();
    for g in &groups {
        let name = format!("nodes_{}.csv", g.name);
        let path = dir.join(&name);
        let mut w = create(&path).at(Stage::Refine)?;
        write_nodes_csv(&g.nodes, &mut w).at(Stage::Refine)?;
        w.flush().at(Stage::Refine)?;
        files.push(path);
        node_files.push(name);
    }
    timings.insert(Stage::Refine, t.elapsed().as_secs_f64());

    let t = Instant::now();
    let mut fitted = Vec::new();
    for g in &groups {
        let pu = fit_nodes(&g.nodes, &g.fit, cfg.resolution).at(Stage::Fit)?;
        let path = dir.join(format!("{}.json", g.name));
        let mut w = create(&path).at(Stage::Fit)?;
        pu.save(&mut w).at(Stage::Fit)?;
        w.flush().at(Stage::Fit)?;
        files.push(path);
        fitted.push(pu);
    }
    timings.insert(Stage::Fit, t.elapsed().as_secs_f64());

    let t = Instant::now();
    let mut surfaces = Vec::new();
    let mut sample_files = Vec::new();
    for (g, pu) in groups.iter().zip(&fitted) {
        let summary = export(pu, &g.name, cfg.resolution, cfg.formats, &dir).at(Stage::Export)?;
        if cfg.formats.csv {
            sample_files.push(format!("{}_samples.csv", g.name));
        }
        files.extend(summary.files.iter().cloned());
        surfaces.push(SurfaceReport {
            name: g.name.clone(),
            raw_points: g.raw,
            refined_nodes: g.refined(),
            appended: g.appended,
            dependent_axis: config::axis_name(g.fit.dependent_axis).into(),
            kernel: g.fit.kernel.to_string(),
            shape_c: g.fit.shape_c,
            patches_d: g.fit.patches_d,
            patches: pu.patches.len(),
            regularized_patches: pu.patches.iter().filter(|p| p.regularized).count(),
            max_residual: pu.max_residual(),
            node_error: pu.node_error().at(Stage::Export)?,
            fill_distance: pu.fill_distance(100).at(Stage::Export)?,
            export: Some(summary),
            validation: None,
        });
    }
    if cfg.formats.script {
        let path = dir.join("plot.py");
        fs::write(
            &path,
            export::plot_script(cfg.dim(), "points.csv", &node_files, &sample_files),
        )
        .at(Stage::Export)?;
        files.push(path);
    }
    timings.insert(Stage::Export, t.elapsed().as_secs_f64());

    if cfg.probes > 0 {
        let t = Instant::now();
        let vcfg = ValidationConfig {
            probes: cfg.probes,
            seed: cfg.seed,
            exclusion: 10.0 * cfg.delta_bis(),
            gamma: cfg.gamma,
            max_draw_factor: 50,
        };
        for ((g, pu), s) in groups.iter().zip(&fitted).zip(&mut surfaces) {
            let rep = sign_agreement(
                &model,
                pu,
                &attr,
                &g.side_a,
                &g.side_b,
                &cfg.integrator,
                &vcfg,
            )
            .at(Stage::Validate)?;
            log::info!(
                "{}: {}/{} probes on the expected side",
                g.name,
                rep.agreed,
                rep.scored
            );
            s.validation = Some(rep);
        }
        timings.insert(Stage::Validate, t.elapsed().as_secs_f64());
    }

    let counts = Counts {
        n: points.len(),
        n_primary: points.split_target.map(|_| points.primary().len()),
        n_secondary: points.split_target.map(|_| points.secondary().len()),
        k: groups.iter().map(NodeGroup::refined).sum(),
        k_primary: points.split_target.map(|_| groups[0].refined()),
        k_secondary: points.split_target.map(|_| groups[1].refined()),
    };
    let path = dir.join("report.json");
    files.push(path.clone());
    let report = RunReport {
        preset: cfg.preset,
        model: model_label(&model),
        attractors: attr.iter().map(|e| e.id).collect(),
        counts,
        timings,
        surfaces,
        files,
    };
    let mut w = create(&path).at(Stage::Export)?;
    serde_json::to_writer_pretty(&mut w, &report).at(Stage::Export)?;
    w.flush().at(Stage::Export)?;
    Ok(report)
}

fn model_label(model: &Model) -> String {
    use crate::dynsys::DynSystem;
    model.name().to_string()
}
