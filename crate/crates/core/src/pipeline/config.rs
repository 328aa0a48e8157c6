//! Flat `key = value` run configuration with baked-in presets.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detect::DetectConfig;
use crate::dynsys::{Competition, CompetitionParams, EqId, Hilker, HilkerParams, Model};
use crate::error::{Error, Result};
use crate::integrate::IntegratorConfig;
use crate::puinterp::{CoverConfig, CoverMode, DomainKind, Kernel, KernelFamily};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    /// 2D predator-prey model with Allee effect and disease, reference parameters.
    #[serde(rename = "hilker-ref")]
    HilkerRef,
    /// 3D competition model with stable `E3`, `E4`.
    #[serde(rename = "competition-2eq")]
    Competition2Eq,
    /// 3D competition model with stable `E1`, `E2`, `E3`.
    #[serde(rename = "competition-3eq")]
    Competition3Eq,
}

impl Preset {
    pub const ALL: [Preset; 3] = [
        Preset::HilkerRef,
        Preset::Competition2Eq,
        Preset::Competition3Eq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::HilkerRef => "hilker-ref",
            Preset::Competition2Eq => "competition-2eq",
            Preset::Competition3Eq => "competition-3eq",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset `{s}`; expected one of {}",
                    Preset::ALL.map(|p| p.name()).join(", ")
                ))
            })
    }
}

/// Model parameters after `param.*` overrides.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelParams {
    Hilker(HilkerParams),
    Competition(CompetitionParams),
}

impl ModelParams {
    pub fn build(&self) -> Result<Model> {
        Ok(match *self {
            ModelParams::Hilker(p) => Model::Hilker(Hilker::new(p)?),
            ModelParams::Competition(p) => Model::Competition(Competition::new(p)?),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelParams::Hilker(_) => 2,
            ModelParams::Competition(_) => 3,
        }
    }

    fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match self {
            ModelParams::Hilker(p) => match name {
                "r" => &mut p.r,
                "u" => &mut p.u,
                "d" => &mut p.d,
                "alpha" => &mut p.alpha,
                "sigma" => &mut p.sigma,
                _ => return Err(unknown_param(name, "r, u, d, alpha, sigma")),
            },
            ModelParams::Competition(p) => match name {
                "p" => &mut p.p,
                "q" => &mut p.q,
                "r" => &mut p.r,
                "a" => &mut p.a,
                "b" => &mut p.b,
                "c" => &mut p.c,
                "e" => &mut p.e,
                "f" => &mut p.f,
                "g" => &mut p.g,
                "u" => &mut p.u,
                "v" => &mut p.v,
                "w" => &mut p.w,
                _ => return Err(unknown_param(name, "p, q, r, a, b, c, e, f, g, u, v, w")),
            },
        };
        *slot = value;
        Ok(())
    }
}

fn unknown_param(name: &str, known: &str) -> Error {
    Error::Config(format!(
        "unknown model parameter `{name}`; expected one of {known}"
    ))
}

/// Interpolation settings for one separatrix component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub kernel: KernelFamily,
    pub shape_c: f64,
    pub patches_d: usize,
    pub cover_mode: CoverMode,
    pub overlap: f64,
    pub dependent_axis: usize,
    pub domain: DomainKind,
}

impl FitSettings {
    pub fn kernel(&self) -> Result<Kernel> {
        Kernel::new(self.kernel, self.shape_c)
    }

    pub fn cover(&self, probe_density: usize) -> CoverConfig {
        CoverConfig {
            d: self.patches_d,
            mode: self.cover_mode,
            overlap: self.overlap,
            probe_density,
        }
    }

    fn validate(&self, dim: usize, what: &str) -> Result<()> {
        self.kernel()?;
        self.cover(2).validate()?;
        if self.dependent_axis >= dim {
            return Err(Error::Config(format!(
                "{what}: dependent axis {} does not exist in {dim} dimensions",
                AXES[self.dependent_axis]
            )));
        }
        if self.domain == DomainKind::Hull && dim != 3 {
            return Err(Error::Config(format!(
                "{what}: hull domains need a surface"
            )));
        }
        Ok(())
    }
}

const AXES: [&str; 3] = ["x", "y", "z"];

fn parse_axis(v: &str) -> Result<usize> {
    AXES.iter()
        .position(|a| *a == v)
        .ok_or_else(|| Error::Config(format!("axis must be x, y or z, got `{v}`")))
}

pub fn axis_name(k: usize) -> &'static str {
    AXES[k]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formats {
    pub csv: bool,
    pub mesh: bool,
    pub script: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Formats {
            csv: true,
            mesh: true,
            script: true,
        }
    }
}

impl FromStr for Formats {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut f = Formats {
            csv: false,
            mesh: false,
            script: false,
        };
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match item {
                "csv" => f.csv = true,
                "mesh" => f.mesh = true,
                "script" => f.script = true,
                _ => {
                    return Err(Error::Config(format!(
                        "unknown format `{item}`; expected csv, mesh, script"
                    )))
                }
            }
        }
        if f.script && !f.csv {
            return Err(Error::Config("the plot script needs csv output".into()));
        }
        Ok(f)
    }
}

impl fmt::Display for Formats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.csv, "csv"),
            (self.mesh, "mesh"),
            (self.script, "script"),
        ]
        .into_iter()
        .filter_map(|(on, n)| on.then_some(n))
        .collect();
        f.write_str(&names.join(","))
    }
}

/// Everything needed for one end-to-end run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub preset: Preset,
    pub params: ModelParams,
    pub n: usize,
    pub gamma: f64,
    pub l: usize,
    pub delta_bis: Option<f64>,
    pub integrator: IntegratorConfig,
    pub workers: Option<usize>,
    pub split_target: Option<EqId>,
    /// Equilibrium appended to the refined nodes of a curve.
    pub append_saddle: Option<EqId>,
    /// Fit for the whole cloud, or for `A'` when a split target is set.
    pub fit: FitSettings,
    /// Fit for `A''`.
    pub wall: FitSettings,
    pub resolution: usize,
    pub output_dir: PathBuf,
    pub formats: Formats,
    /// Sign-agreement probes drawn after fitting; 0 disables validation.
    pub probes: usize,
    pub seed: u64,
    /// Initial condition whose trajectory is written as CSV.
    pub debug_trajectory: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let surface = FitSettings {
            kernel: KernelFamily::WendlandC2,
            shape_c: 0.005,
            patches_d: 4,
            cover_mode: CoverMode::PerAxis,
            overlap: 1.5,
            dependent_axis: 2,
            domain: DomainKind::Box,
        };
        let wall = FitSettings {
            patches_d: 3,
            dependent_axis: 0,
            domain: DomainKind::Hull,
            ..surface.clone()
        };
        let base = RunConfig {
            preset,
            params: ModelParams::Competition(CompetitionParams::two_attractors()),
            n: 10,
            gamma: 10.0,
            l: 13,
            delta_bis: None,
            integrator: IntegratorConfig::default(),
            workers: None,
            split_target: None,
            append_saddle: None,
            fit: surface,
            wall,
            resolution: 100,
            output_dir: PathBuf::from(format!("out/{}", preset.name())),
            formats: Formats::default(),
            probes: 0,
            seed: 1,
            debug_trajectory: None,
        };
        match preset {
            Preset::HilkerRef => RunConfig {
                params: ModelParams::Hilker(HilkerParams::reference()),
                n: 20,
                l: 12,
                append_saddle: Some(EqId(2)),
                fit: FitSettings {
                    kernel: KernelFamily::GneitingC2A,
                    shape_c: 0.015,
                    // The curve is steep in the (P, I) plane; P = s(I) is single valued.
                    dependent_axis: 0,
                    ..base.fit.clone()
                },
                ..base
            },
            Preset::Competition2Eq => base,
            Preset::Competition3Eq => RunConfig {
                params: ModelParams::Competition(CompetitionParams::three_attractors()),
                n: 7,
                split_target: Some(EqId(3)),
                ..base
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn detect_config(&self) -> DetectConfig {
        DetectConfig {
            n: self.n,
            gamma: self.gamma,
            delta_bis: self.delta_bis,
            integrator: self.integrator.clone(),
            workers: self.workers,
            split_target: self.split_target,
        }
    }

    pub fn delta_bis(&self) -> f64 {
        self.detect_config().delta_bis()
    }

    /// Applies one `key = value` setting. `preset` is not accepted here
    /// because it resets every other key; see [`RunConfig::from_pairs`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let bad = |what: &str| Error::Config(format!("`{key}`: expected {what}, got `{v}`"));
        let num = || v.parse::<f64>().map_err(|_| bad("a number"));
        let int = || v.parse::<usize>().map_err(|_| bad("a nonnegative integer"));
        let eq_or_none = || -> Result<Option<EqId>> {
            if v == "none" {
                Ok(None)
            } else {
                v.parse::<EqId>().map(Some)
            }
        };

        if let Some(name) = key.strip_prefix("param.") {
            return self.params.set(name, num()?);
        }
        let (fit, field) = match key.strip_prefix("wall.") {
            Some(rest) => (Some(&mut self.wall), rest),
            None => (None, key),
        };
        if let Some(fit) = fit {
            return set_fit(fit, field, v, key);
        }
        match key {
            "n" => self.n = int()?,
            "gamma" => self.gamma = num()?,
            "l" => self.l = int()?,
            "delta_bis" => self.delta_bis = Some(num()?),
            "atol" => self.integrator.atol = num()?,
            "rtol" => self.integrator.rtol = num()?,
            "t_max" => self.integrator.t_max = num()?,
            "eps_attr" => self.integrator.eps_attr = num()?,
            "max_steps" => self.integrator.max_steps = int()?,
            "dwell" => self.integrator.dwell = int()?,
            "workers" => self.workers = if v == "auto" { None } else { Some(int()?) },
            "split_target" => self.split_target = eq_or_none()?,
            "append_saddle" => self.append_saddle = eq_or_none()?,
            "resolution" => self.resolution = int()?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "formats" => self.formats = v.parse()?,
            "probes" => self.probes = int()?,
            "seed" => self.seed = v.parse().map_err(|_| bad("an unsigned integer"))?,
            "debug_trajectory" => {
                self.debug_trajectory = if v == "none" {
                    None
                } else {
                    Some(
                        v.split(',')
                            .map(|t| {
                                t.trim()
                                    .parse::<f64>()
                                    .map_err(|_| bad("comma-separated numbers"))
                            })
                            .collect::<Result<_>>()?,
                    )
                }
            }
            "preset" => {
                return Err(Error::Config(
                    "`preset` must be given before other keys".into(),
                ))
            }
            _ => return set_fit(&mut self.fit, key, v, key),
        }
        Ok(())
    }

    /// Builds a config from ordered pairs: the preset (default
    /// `competition-2eq`) first, then every other pair in order.
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let pairs: Vec<(&str, &str)> = pairs.into_iter().collect();
        let preset = match pairs.iter().rev().find(|(k, _)| *k == "preset") {
            Some((_, v)) => v.parse()?,
            None => Preset::Competition2Eq,
        };
        let mut cfg = RunConfig::preset(preset);
        for (k, v) in pairs.into_iter().filter(|(k, _)| *k != "preset") {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Validates every field against its documented range.
    pub fn validate(&self) -> Result<()> {
        self.params.build()?;
        self.integrator.validate()?;
        let dim = self.dim();
        if self.n < 2 {
            return Err(Error::Config(format!("n = {} must be at least 2", self.n)));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::Config(format!(
                "gamma = {} must be positive",
                self.gamma
            )));
        }
        if self.l == 0 {
            return Err(Error::Config("l must be at least 1".into()));
        }
        if let Some(d) = self.delta_bis {
            if !(d.is_finite() && d > 0.0 && d < self.gamma) {
                return Err(Error::Config(format!(
                    "delta_bis = {d} must lie in (0, gamma)"
                )));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.resolution < 2 {
            return Err(Error::Config("resolution must be at least 2".into()));
        }
        if self.split_target.is_some() && dim != 3 {
            return Err(Error::Config(
                "split_target needs a three-dimensional model".into(),
            ));
        }
        if let Some(ic) = &self.debug_trajectory {
            if ic.len() != dim {
                return Err(Error::Config(format!(
                    "debug_trajectory has {} components, model has {dim}",
                    ic.len()
                )));
            }
        }
        self.fit.validate(dim, "fit")?;
        if self.split_target.is_some() {
            self.wall.validate(dim, "wall")?;
        }
        Ok(())
    }

    /// Reads a config file; `overrides` are applied after the file contents.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)?,
            None => String::new(),
        };
        let mut pairs = parse_pairs(&text)?;
        pairs.extend(overrides.iter().cloned());
        RunConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    /// Canonical text form; `from_pairs` on its lines reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut m: BTreeMap<String, String> = BTreeMap::new();
        let put = |m: &mut BTreeMap<String, String>, k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        match self.params {
            ModelParams::Hilker(p) => {
                for (k, v) in [
                    ("r", p.r),
                    ("u", p.u),
                    ("d", p.d),
                    ("alpha", p.alpha),
                    ("sigma", p.sigma),
                ] {
                    put(&mut m, &format!("param.{k}"), v.to_string());
                }
            }
            ModelParams::Competition(p) => {
                let names = ["p", "q", "r", "a", "b", "c", "e", "f", "g", "u", "v", "w"];
                for (k, v) in names.iter().zip(p.as_array()) {
                    put(&mut m, &format!("param.{k}"), v.to_string());
                }
            }
        }
        put(&mut m, "n", self.n.to_string());
        put(&mut m, "gamma", self.gamma.to_string());
        put(&mut m, "l", self.l.to_string());
        if let Some(d) = self.delta_bis {
            put(&mut m, "delta_bis", d.to_string());
        }
        let ic = &self.integrator;
        put(&mut m, "atol", ic.atol.to_string());
        put(&mut m, "rtol", ic.rtol.to_string());
        put(&mut m, "t_max", ic.t_max.to_string());
        put(&mut m, "eps_attr", ic.eps_attr.to_string());
        put(&mut m, "max_steps", ic.max_steps.to_string());
        put(&mut m, "dwell", ic.dwell.to_string());
        put(
            &mut m,
            "workers",
            self.workers.map_or("auto".into(), |w| w.to_string()),
        );
        let eq = |e: Option<EqId>| e.map_or("none".into(), |e| e.to_string());
        put(&mut m, "split_target", eq(self.split_target));
        put(&mut m, "append_saddle", eq(self.append_saddle));
        for (prefix, f) in [("", &self.fit), ("wall.", &self.wall)] {
            put(&mut m, &format!("{prefix}kernel"), f.kernel.to_string());
            put(&mut m, &format!("{prefix}shape_c"), f.shape_c.to_string());
            put(
                &mut m,
                &format!("{prefix}patches_d"),
                f.patches_d.to_string(),
            );
            let mode = match f.cover_mode {
                CoverMode::PerAxis => "per-axis",
                CoverMode::Total => "total",
            };
            put(&mut m, &format!("{prefix}cover_mode"), mode.into());
            put(&mut m, &format!("{prefix}overlap"), f.overlap.to_string());
            put(
                &mut m,
                &format!("{prefix}dependent_axis"),
                AXES[f.dependent_axis].into(),
            );
            let dom = match f.domain {
                DomainKind::Box => "box",
                DomainKind::Hull => "hull",
            };
            put(&mut m, &format!("{prefix}domain"), dom.into());
        }
        put(&mut m, "resolution", self.resolution.to_string());
        put(&mut m, "output_dir", self.output_dir.display().to_string());
        put(&mut m, "formats", self.formats.to_string());
        put(&mut m, "probes", self.probes.to_string());
        put(&mut m, "seed", self.seed.to_string());
        if let Some(ic) = &self.debug_trajectory {
            let parts: Vec<String> = ic.iter().map(f64::to_string).collect();
            put(&mut m, "debug_trajectory", parts.join(","));
        }

        let mut out = format!("preset = {}\n", self.preset);
        for (k, v) in m {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

fn set_fit(fit: &mut FitSettings, field: &str, v: &str, key: &str) -> Result<()> {
    let bad = |what: &str| Error::Config(format!("`{key}`: expected {what}, got `{v}`"));
    match field {
        "kernel" => fit.kernel = v.parse()?,
        "shape_c" => fit.shape_c = v.parse().map_err(|_| bad("a number"))?,
        "patches_d" => fit.patches_d = v.parse().map_err(|_| bad("a positive integer"))?,
        "cover_mode" => {
            fit.cover_mode = match v {
                "per-axis" => CoverMode::PerAxis,
                "total" => CoverMode::Total,
                _ => return Err(bad("per-axis or total")),
            }
        }
        "overlap" => fit.overlap = v.parse().map_err(|_| bad("a number"))?,
        "dependent_axis" => fit.dependent_axis = parse_axis(v)?,
        "domain" => {
            fit.domain = match v {
                "box" => DomainKind::Box,
                "hull" => DomainKind::Hull,
                _ => return Err(bad("box or hull")),
            }
        }
        _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
    }
    Ok(())
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            ))
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Splits a command-line override `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not of the form key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for p in Preset::ALL {
            RunConfig::preset(p).validate().unwrap();
            assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{p}\""));
        }
    }

    #[test]
    fn text_roundtrip() {
        for p in Preset::ALL {
            let mut cfg = RunConfig::preset(p);
            cfg.delta_bis = Some(2e-3);
            cfg.debug_trajectory = Some(vec![1.0; cfg.dim()]);
            let text = cfg.to_text();
            let pairs = parse_pairs(&text).unwrap();
            let back =
                RunConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_pairs([("colour", "blue")]).is_err());
        assert!(RunConfig::from_pairs([("wall.n", "3")]).is_err());
        assert!(RunConfig::from_pairs([("param.zeta", "3")]).is_err());
        assert!(RunConfig::from_pairs([("preset", "lorenz")]).is_err());
    }

    #[test]
    fn ranges_are_enforced() {
        for (k, v) in [
            ("n", "1"),
            ("gamma", "-1"),
            ("l", "0"),
            ("shape_c", "0"),
            ("patches_d", "0"),
            ("resolution", "1"),
            ("workers", "0"),
            ("atol", "0"),
            ("delta_bis", "20"),
            ("param.w", "-1"),
            ("dependent_axis", "w"),
        ] {
            assert!(RunConfig::from_pairs([(k, v)]).is_err(), "{k} = {v}");
        }
        // Hilker has no z axis.
        assert!(
            RunConfig::from_pairs([("preset", "hilker-ref"), ("dependent_axis", "z")]).is_err()
        );
    }

    #[test]
    fn overrides_apply_after_preset() {
        let cfg =
            RunConfig::from_pairs([("n", "4"), ("preset", "hilker-ref"), ("param.sigma", "3")])
                .unwrap();
        assert_eq!(cfg.preset, Preset::HilkerRef);
        assert_eq!(cfg.n, 4);
        assert_eq!(
            cfg.params,
            ModelParams::Hilker(HilkerParams {
                sigma: 3.0,
                ..HilkerParams::reference()
            })
        );
    }

    #[test]
    fn parses_comments_and_blank_lines() {
        let pairs = parse_pairs("# run\n\nn = 5  # seeds\nkernel=wu-c4\n").unwrap();
        assert_eq!(
            pairs,
            vec![("n".into(), "5".into()), ("kernel".into(), "wu-c4".into())]
        );
        assert!(parse_pairs("just words").is_err());
        assert_eq!(parse_override("l=3").unwrap(), ("l".into(), "3".into()));
    }
}
