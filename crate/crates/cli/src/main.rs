use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use separatrix::detect::{detect_points, PointMatrix};
use separatrix::dynsys::{attractors, classified_equilibria};
use separatrix::pipeline::{
    self, config::parse_override, export, fit_nodes, read_nodes_csv, refine_groups,
    report_equilibria, write_nodes_csv, AtStage, RunConfig, Stage, StageError,
};
use separatrix::puinterp::PUInterpolant;

/// Detect, refine and interpolate separatrices between basins of attraction.
#[derive(Parser)]
#[command(name = "separatrix", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the equilibria with feasibility and stability.
    Equilibria(Common),
    /// Locate separatrix points and write them as CSV.
    Detect {
        #[command(flatten)]
        common: Common,
        /// Output file (default: <output_dir>/points.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refine detected points into interpolation nodes.
    Refine {
        #[command(flatten)]
        common: Common,
        /// Points CSV written by `detect`.
        #[arg(long)]
        points: PathBuf,
    },
    /// Fit an interpolant to a node file and save it as JSON.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Nodes CSV written by `refine`.
        #[arg(long)]
        nodes: PathBuf,
        /// Which fit settings to use.
        #[arg(long, value_enum, default_value_t = Component::Primary)]
        component: Component,
        /// Output file (default: <output_dir>/<nodes stem>.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage and write all exports plus report.json.
    Run(Common),
    /// Sample a saved interpolant and write CSV, mesh and plot script.
    Export {
        /// Interpolant JSON written by `fit` or `run`.
        #[arg(long)]
        interpolant: PathBuf,
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        #[arg(long, default_value = "csv,mesh")]
        formats: String,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        /// File stem (default: the interpolant file stem).
        #[arg(long)]
        name: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Component {
    /// The whole separatrix, or the `A'` part when a split target is set.
    Primary,
    /// The `A''` part.
    Wall,
}

/// Config sources, applied in order: preset, file, flags, `--set`.
#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    l: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    shape_c: Option<String>,
    #[arg(long)]
    patches_d: Option<String>,
    #[arg(long)]
    dependent_axis: Option<String>,
    #[arg(long)]
    resolution: Option<String>,
    #[arg(long)]
    output_dir: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    probes: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Any config key, as `key=value`; repeatable.
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, StageError> {
        let mut overrides: Vec<(String, String)> = Vec::new();
        if let Some(p) = &self.preset {
            overrides.push(("preset".into(), p.clone()));
        }
        let flags = [
            ("n", &self.n),
            ("gamma", &self.gamma),
            ("l", &self.l),
            ("kernel", &self.kernel),
            ("shape_c", &self.shape_c),
            ("patches_d", &self.patches_d),
            ("dependent_axis", &self.dependent_axis),
            ("resolution", &self.resolution),
            ("output_dir", &self.output_dir),
            ("workers", &self.workers),
            ("probes", &self.probes),
            ("seed", &self.seed),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                overrides.push((k.into(), v.clone()));
            }
        }
        for s in &self.set {
            overrides.push(parse_override(s).at(Stage::Config)?);
        }
        RunConfig::load(self.config.as_deref(), &overrides).at(Stage::Config)
    }
}

fn write_with<F>(path: &Path, stage: Stage, f: F) -> Result<(), StageError>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> separatrix::Result<()>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).at(stage)?;
    }
    let mut w = BufWriter::new(fs::File::create(path).at(stage)?);
    f(&mut w).at(stage)?;
    w.flush().at(stage)
}

fn open(path: &Path, stage: Stage) -> Result<fs::File, StageError> {
    fs::File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        .at(stage)
}

fn execute(cmd: Command) -> Result<(), StageError> {
    match cmd {
        Command::Equilibria(common) => {
            let cfg = common.load()?;
            print!("{}", report_equilibria(&cfg.params).at(Stage::Equilibria)?);
        }
        Command::Detect { common, out } => {
            let cfg = common.load()?;
            let model = cfg.params.build().at(Stage::Equilibria)?;
            let attr = attractors(&model);
            let pm = detect_points(&model, &attr, &cfg.detect_config()).at(Stage::Detect)?;
            let path = out.unwrap_or_else(|| cfg.output_dir.join("points.csv"));
            write_with(&path, Stage::Detect, |w| pm.write_csv(w))?;
            match cfg.split_target {
                Some(_) => println!(
                    "N = {} (N' = {}, N'' = {}) -> {}",
                    pm.len(),
                    pm.primary().len(),
                    pm.secondary().len(),
                    path.display()
                ),
                None => println!("N = {} -> {}", pm.len(), path.display()),
            }
        }
        Command::Refine { common, points } => {
            let cfg = common.load()?;
            let model = cfg.params.build().at(Stage::Equilibria)?;
            let eqs = classified_equilibria(&model);
            let file = open(&points, Stage::Refine)?;
            let pm = PointMatrix::read_csv(file, cfg.split_target).at(Stage::Refine)?;
            for g in refine_groups(&cfg, &pm, &eqs).at(Stage::Refine)? {
                let path = cfg.output_dir.join(format!("nodes_{}.csv", g.name));
                write_with(&path, Stage::Refine, |w| write_nodes_csv(&g.nodes, w))?;
                println!(
                    "{}: {} points -> K = {} -> {}",
                    g.name,
                    g.raw,
                    g.refined(),
                    path.display()
                );
            }
        }
        Command::Fit {
            common,
            nodes,
            component,
            out,
        } => {
            let cfg = common.load()?;
            let data = read_nodes_csv(open(&nodes, Stage::Fit)?).at(Stage::Fit)?;
            let fit = match component {
                Component::Primary => &cfg.fit,
                Component::Wall => &cfg.wall,
            };
            let pu = fit_nodes(&data, fit, cfg.resolution).at(Stage::Fit)?;
            let stem = nodes
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("interpolant")
                .trim_start_matches("nodes_")
                .to_string();
            let path = out.unwrap_or_else(|| cfg.output_dir.join(format!("{stem}.json")));
            write_with(&path, Stage::Fit, |w| pu.save(w))?;
            println!(
                "{} nodes, {} patches, node error {:.3e} -> {}",
                pu.nodes.len(),
                pu.patches.len(),
                pu.node_error().at(Stage::Fit)?,
                path.display()
            );
        }
        Command::Run(common) => {
            let cfg = common.load()?;
            let report = pipeline::run(&cfg)?;
            let c = &report.counts;
            println!("preset {}: N = {}, K = {}", report.preset, c.n, c.k);
            for s in &report.surfaces {
                print!(
                    "  {}: {} points, K = {}, node error {:.3e}",
                    s.name, s.raw_points, s.refined_nodes, s.node_error
                );
                if let Some(v) = &s.validation {
                    print!(", {}/{} probes agree", v.agreed, v.scored);
                }
                println!();
            }
            println!("report: {}", cfg.output_dir.join("report.json").display());
        }
        Command::Export {
            interpolant,
            resolution,
            formats,
            output_dir,
            name,
        } => {
            let file = open(&interpolant, Stage::Export)?;
            let pu = PUInterpolant::load(std::io::BufReader::new(file)).at(Stage::Export)?;
            let formats = formats.parse().at(Stage::Config)?;
            let name = name.unwrap_or_else(|| {
                interpolant
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("interpolant")
                    .to_string()
            });
            let summary = export(&pu, &name, resolution, formats, &output_dir).at(Stage::Export)?;
            for f in &summary.files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.stage.exit_code() as u8)
        }
    }
}
