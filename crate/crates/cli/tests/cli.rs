use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn separatrix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_separatrix"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn equilibria_lists_the_stable_set() {
    let o = separatrix(&["equilibria", "--preset", "competition-3eq"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(
        text.lines().last().unwrap().contains("E1, E2, E3"),
        "{text}"
    );

    let o = separatrix(&["equilibria", "--preset", "hilker-ref"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("E0, E4"));
}

#[test]
fn parameter_overrides_reach_the_model() {
    // The third growth rate sets the position of E3.
    let base = stdout(&separatrix(&["equilibria", "--preset", "competition-2eq"]));
    let moved = stdout(&separatrix(&[
        "equilibria",
        "--preset",
        "competition-2eq",
        "--set",
        "param.r=12",
    ]));
    assert_ne!(base, moved);
}

#[test]
fn config_errors_exit_with_the_config_code() {
    let o = separatrix(&["equilibria", "--set", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_such_key"), "{}", stderr(&o));

    let o = separatrix(&["equilibria", "--l", "0"]);
    assert_eq!(o.status.code(), Some(2));

    let o = separatrix(&["equilibria", "--config", "/nonexistent/run.conf"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_input_reports_the_failing_stage() {
    let o = separatrix(&[
        "refine",
        "--preset",
        "hilker-ref",
        "--points",
        "/nonexistent/points.csv",
    ]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).contains("/nonexistent/points.csv"));
}

#[test]
fn stages_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    let common = ["--preset", "hilker-ref", "--output-dir", d];

    let o = separatrix(&[&["detect"][..], &common].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let points = dir.path().join("points.csv");
    assert!(stdout(&o).starts_with("N = "));

    let o = separatrix(&[&["refine"][..], &common, &["--points", path(&points)]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let nodes = dir.path().join("nodes_curve.csv");
    assert!(nodes.exists());

    let o = separatrix(&[&["fit"][..], &common, &["--nodes", path(&nodes)]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let interp = dir.path().join("curve.json");
    assert!(interp.exists());

    let out = dir.path().join("exported");
    let o = separatrix(&[
        "export",
        "--interpolant",
        path(&interp),
        "--resolution",
        "40",
        "--output-dir",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let samples = fs::read_to_string(out.join("curve_samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 41);
    assert!(out.join("curve.obj").exists());
}

#[test]
fn chained_stages_match_a_full_run() {
    let staged = tempfile::tempdir().unwrap();
    let full = tempfile::tempdir().unwrap();
    let s = path(staged.path());
    let common = ["--preset", "hilker-ref", "--output-dir", s];
    assert!(separatrix(&[&["detect"][..], &common].concat())
        .status
        .success());
    let points = staged.path().join("points.csv");
    assert!(
        separatrix(&[&["refine"][..], &common, &["--points", path(&points)]].concat())
            .status
            .success()
    );

    let o = separatrix(&[
        "run",
        "--preset",
        "hilker-ref",
        "--output-dir",
        path(full.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("preset hilker-ref"));
    for name in ["points.csv", "nodes_curve.csv"] {
        let a = fs::read(staged.path().join(name)).unwrap();
        let b = fs::read(full.path().join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
    assert!(full.path().join("report.json").exists());
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(
        &conf,
        "# Hilker with a coarser grid\npreset = hilker-ref\nn = 8\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = separatrix(&[
        "detect",
        "--config",
        path(&conf),
        "--n",
        "10",
        "--output-dir",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let written = fs::read_to_string(out.join("points.csv")).unwrap();
    assert!(written.starts_with("x,y,"));
}
