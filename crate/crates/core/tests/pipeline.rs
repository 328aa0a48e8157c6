use std::fs;
use std::path::Path;

use separatrix::dynsys::EqId;
use separatrix::pipeline::config::parse_pairs;
use separatrix::pipeline::*;
use separatrix::puinterp::PUInterpolant;

fn hilker(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::preset(Preset::HilkerRef);
    cfg.output_dir = dir.to_path_buf();
    cfg
}

#[test]
fn repeated_runs_write_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut first = hilker(a.path());
    first.workers = Some(1);
    let mut second = hilker(b.path());
    second.workers = Some(3);
    run(&first).unwrap();
    run(&second).unwrap();
    for name in [
        "points.csv",
        "nodes_curve.csv",
        "curve_samples.csv",
        "curve.obj",
        "curve.json",
    ] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty(), "{name} is empty");
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn curve_run_report_is_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = hilker(dir.path());
    cfg.probes = 20;
    let report = run(&cfg).unwrap();

    assert_eq!(report.attractors, vec![EqId(0), EqId(4)]);
    assert!(report.counts.n_primary.is_none());
    let curve = &report.surfaces[0];
    assert_eq!(curve.name, "curve");
    assert_eq!(curve.appended, Some(EqId(2)));
    // The saddle is added after refinement.
    assert_eq!(curve.refined_nodes, report.counts.k);
    assert!(report.counts.k <= report.counts.n.min(cfg.l * cfg.l) + 1);
    assert!(curve.node_error < 1e-6);
    let export = curve.export.as_ref().unwrap();
    assert_eq!(export.nonfinite, 0);
    assert!(export.samples > 0);
    let v = curve.validation.as_ref().unwrap();
    assert!(v.scored > 0 && v.agreed <= v.scored);

    for f in &report.files {
        let meta = fs::metadata(f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        assert!(meta.len() > 0, "{} is empty", f.display());
    }
    let json = fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(json.contains("\"preset\": \"hilker-ref\""));

    // The saved interpolant evaluates like the refined nodes say it should.
    let pu = PUInterpolant::load(fs::File::open(dir.path().join("curve.json")).unwrap()).unwrap();
    let nodes =
        read_nodes_csv(fs::File::open(dir.path().join("nodes_curve.csv")).unwrap()).unwrap();
    assert_eq!(nodes.len(), curve.refined_nodes + 1);
    assert_eq!(&*nodes[nodes.len() - 1], &[0.1, 0.0]);
    for n in &nodes {
        assert!(pu.offset(n).unwrap().abs() < 1e-6);
    }
}

#[test]
fn split_run_counts_add_up() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::preset(Preset::Competition3Eq);
    cfg.output_dir = dir.path().to_path_buf();
    cfg.n = 4;
    cfg.resolution = 20;
    let report = run(&cfg).unwrap();
    let c = &report.counts;
    assert_eq!(c.n_primary.unwrap() + c.n_secondary.unwrap(), c.n);
    assert_eq!(c.k_primary.unwrap() + c.k_secondary.unwrap(), c.k);
    assert!(c.k_primary.unwrap() <= c.n_primary.unwrap());
    assert!(c.k_secondary.unwrap() <= c.n_secondary.unwrap());
    let names: Vec<&str> = report.surfaces.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["surface_primary", "surface_secondary"]);
    assert!(report.surfaces.iter().all(|s| s.appended.is_none()));
    assert_eq!(report.surfaces[1].dependent_axis, "x");
    for s in &report.surfaces {
        assert!(s.node_error < 1e-6, "{}: {}", s.name, s.node_error);
        assert_eq!(s.export.as_ref().unwrap().nonfinite, 0);
    }
    assert!(dir.path().join("plot.py").exists());
}

#[test]
fn failed_stage_keeps_earlier_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = hilker(dir.path());
    cfg.append_saddle = Some(EqId(5));
    let err = run(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Refine);
    assert_eq!(err.stage.exit_code(), Stage::Refine.exit_code());
    for name in ["config.txt", "equilibria.txt", "points.csv"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn invalid_config_fails_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = hilker(&dir.path().join("out"));
    cfg.l = 0;
    let err = run(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Config);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn config_text_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = hilker(dir.path());
    run(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("config.txt")).unwrap();
    let pairs = parse_pairs(&text).unwrap();
    let again = RunConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))).unwrap();
    assert_eq!(again.to_text(), cfg.to_text());
}

fn preset_counts(preset: Preset) -> Counts {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::preset(preset);
    cfg.output_dir = dir.path().to_path_buf();
    cfg.resolution = 20;
    run(&cfg).unwrap().counts
}

fn assert_near(what: &str, got: usize, target: f64, rel: f64) {
    let (lo, hi) = (target * (1.0 - rel), target * (1.0 + rel));
    let g = got as f64;
    assert!(
        g >= lo && g <= hi,
        "{what} = {got}, expected {target} within [{lo:.1}, {hi:.1}]"
    );
}

#[test]
fn two_attractor_node_count() {
    let c = preset_counts(Preset::Competition2Eq);
    assert!(c.k <= c.n);
    assert_near("K", c.k, 127.0, 0.2);
}

#[test]
fn three_attractor_node_counts() {
    let c = preset_counts(Preset::Competition3Eq);
    assert_near("K'", c.k_primary.unwrap(), 61.0, 0.3);
    assert_near("K''", c.k_secondary.unwrap(), 16.0, 0.3);
}
