//! Run configuration: command-line flags over an optional key=value file.
//!
//! File syntax is one `key = value` per line; `#` starts a comment. Keys
//! (defaults in brackets reproduce the benchmark setup):
//!
//! | key | meaning |
//! |---|---|
//! | `k` | polynomial degree in time [1] |
//! | `l` | pressure degree, vector fields use BDM of order l+1 [1] |
//! | `levels` | number of refinement levels [4] |
//! | `first_level` | first refinement level [0] |
//! | `base_cells` | cells per side of the base mesh [5] |
//! | `diagonal` | `forward` or `backward` [forward] |
//! | `tau0` | step on level 0, halved per level [0.1] |
//! | `end_time` | final time T [1] |
//! | `samples` | sample intervals per slab for the error norms [100] |
//! | `eta` | interior penalty parameter [4 (l+2)^2] |
//! | `rho_bar`, `rho_f`, `rho_w` | densities [0.95, 1, 2] |
//! | `alpha`, `s0` | Biot-Willis coefficient, storage [0.9, 0.01] |
//! | `young`, `poisson` | elastic moduli [100, 0.35] |
//! | `lambda`, `mu` | Lame parameters, instead of `young`/`poisson` |
//! | `permeability` | isotropic permeability K [1] |
//! | `check_pressure_mean` | check the pressure mean after every slab [true] |
//! | `parallel_levels` | solve levels concurrently [false] |
//! | `csv` | path of the CSV report |
//! | `table` | path of the text table (always printed to stdout) |
//! | `level` | level of a single `solve` run [0] |
//! | `export_times` | comma-separated times for VTK output of `solve` |
//! | `export_dir` | directory of the VTK files [.] |
//! | `subdivisions` | visualization subdivisions per cell edge [l+2] |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use biot_core::assembly::lame_from_young;
use biot_core::mesh::Diagonal;
use biot_core::study::StudyConfig;
use clap::Args;

pub const KEYS: &[&str] = &[
    "k",
    "l",
    "levels",
    "first_level",
    "base_cells",
    "diagonal",
    "tau0",
    "end_time",
    "samples",
    "eta",
    "rho_bar",
    "rho_f",
    "rho_w",
    "alpha",
    "s0",
    "young",
    "poisson",
    "lambda",
    "mu",
    "permeability",
    "check_pressure_mean",
    "parallel_levels",
    "csv",
    "table",
    "level",
    "export_times",
    "export_dir",
    "subdivisions",
];

/// Flags shared by all commands. Every flag mirrors a file key; a flag
/// given on the command line wins over the file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// key=value configuration file
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Polynomial degree in time
    #[arg(short, long)]
    pub k: Option<usize>,
    /// Pressure degree (vector fields: BDM of order l+1)
    #[arg(short, long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub first_level: Option<usize>,
    #[arg(long)]
    pub base_cells: Option<usize>,
    /// forward or backward
    #[arg(long)]
    pub diagonal: Option<String>,
    #[arg(long)]
    pub tau0: Option<f64>,
    #[arg(long)]
    pub end_time: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Model parameter override, e.g. `--set s0=0.1`; any file key works
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub parallel_levels: bool,
    #[arg(long)]
    pub no_pressure_mean_check: bool,
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub table: Option<PathBuf>,
    /// Level of a single solve
    #[arg(long)]
    pub level: Option<usize>,
    /// Comma-separated export times
    #[arg(long, value_name = "T1,T2,...")]
    pub export_times: Option<String>,
    #[arg(long, value_name = "DIR")]
    pub export_dir: Option<PathBuf>,
    #[arg(long)]
    pub subdivisions: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub study: StudyConfig,
    pub parallel_levels: bool,
    pub csv: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub level: usize,
    pub export_times: Vec<f64>,
    pub export_dir: PathBuf,
    pub subdivisions: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            study: StudyConfig::default(),
            parallel_levels: false,
            csv: None,
            table: None,
            level: 0,
            export_times: Vec::new(),
            export_dir: PathBuf::from("."),
            subdivisions: None,
        }
    }
}

/// Parses key=value text. Later lines win; unknown keys are errors.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value, got `{raw}`", n + 1))?;
        let key = key.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            bail!("line {}: unknown key `{key}`", n + 1);
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow!("invalid value `{value}` for `{key}`: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("invalid value `{value}` for `{key}`: expected true or false"),
    }
}

fn parse_times(value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse("export_times", s))
        .collect()
}

impl RunConfig {
    /// Applies one key. Elastic moduli are collected in `elastic` and
    /// applied together at the end.
    fn apply(&mut self, key: &str, value: &str, elastic: &mut [Option<f64>; 4]) -> Result<()> {
        let s = &mut self.study;
        let p = &mut s.params;
        match key {
            "k" => s.k = parse(key, value)?,
            "l" => s.l = parse(key, value)?,
            "levels" => s.levels = parse(key, value)?,
            "first_level" => s.first_level = parse(key, value)?,
            "base_cells" => s.base_cells = parse(key, value)?,
            "diagonal" => {
                s.diagonal = match value {
                    "forward" => Diagonal::Forward,
                    "backward" => Diagonal::Backward,
                    _ => bail!("invalid value `{value}` for `diagonal`: expected forward or backward"),
                }
            }
            "tau0" => s.tau0 = parse(key, value)?,
            "end_time" => s.end_time = parse(key, value)?,
            "samples" => s.samples = parse(key, value)?,
            "eta" => p.eta = Some(parse(key, value)?),
            "rho_bar" => p.rho_bar = parse(key, value)?,
            "rho_f" => p.rho_f = parse(key, value)?,
            "rho_w" => p.rho_w = parse(key, value)?,
            "alpha" => p.alpha = parse(key, value)?,
            "s0" => p.s0 = parse(key, value)?,
            "young" => elastic[0] = Some(parse(key, value)?),
            "poisson" => elastic[1] = Some(parse(key, value)?),
            "lambda" => elastic[2] = Some(parse(key, value)?),
            "mu" => elastic[3] = Some(parse(key, value)?),
            "permeability" => {
                let kappa: f64 = parse(key, value)?;
                if !(kappa > 0.0) {
                    bail!("permeability must be positive, got {kappa}");
                }
                p.k_inv = [[1.0 / kappa, 0.0], [0.0, 1.0 / kappa]];
            }
            "check_pressure_mean" => s.check_pressure_mean = parse_bool(key, value)?,
            "parallel_levels" => self.parallel_levels = parse_bool(key, value)?,
            "csv" => self.csv = Some(PathBuf::from(value)),
            "table" => self.table = Some(PathBuf::from(value)),
            "level" => self.level = parse(key, value)?,
            "export_times" => self.export_times = parse_times(value)?,
            "export_dir" => self.export_dir = PathBuf::from(value),
            "subdivisions" => self.subdivisions = Some(parse(key, value)?),
            _ => bail!("unknown key `{key}`"),
        }
        Ok(())
    }

    /// Defaults, then the file, then the flags.
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => read_file(path)?,
            None => BTreeMap::new(),
        };
        let mut pairs: Vec<(String, String)> = file.into_iter().collect();
        let mut flag = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k.to_string(), v));
            }
        };
        flag("k", flags.k.map(|v| v.to_string()));
        flag("l", flags.l.map(|v| v.to_string()));
        flag("levels", flags.levels.map(|v| v.to_string()));
        flag("first_level", flags.first_level.map(|v| v.to_string()));
        flag("base_cells", flags.base_cells.map(|v| v.to_string()));
        flag("diagonal", flags.diagonal.clone());
        flag("tau0", flags.tau0.map(|v| v.to_string()));
        flag("end_time", flags.end_time.map(|v| v.to_string()));
        flag("samples", flags.samples.map(|v| v.to_string()));
        flag("eta", flags.eta.map(|v| v.to_string()));
        flag("csv", flags.csv.as_ref().map(|v| v.display().to_string()));
        flag("table", flags.table.as_ref().map(|v| v.display().to_string()));
        flag("level", flags.level.map(|v| v.to_string()));
        flag("export_times", flags.export_times.clone());
        flag("export_dir", flags.export_dir.as_ref().map(|v| v.display().to_string()));
        flag("subdivisions", flags.subdivisions.map(|v| v.to_string()));
        if flags.parallel_levels {
            flag("parallel_levels", Some("true".into()));
        }
        if flags.no_pressure_mean_check {
            flag("check_pressure_mean", Some("false".into()));
        }
        for kv in &flags.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{kv}`"))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                bail!("--set: unknown key `{k}`");
            }
            pairs.push((k.to_string(), v.trim().to_string()));
        }

        let mut config = RunConfig::default();
        let mut elastic = [None; 4];
        for (k, v) in &pairs {
            config.apply(k, v, &mut elastic)?;
        }
        let p = &mut config.study.params;
        match elastic {
            [None, None, None, None] => {}
            [e, nu, None, None] => {
                let (lambda, mu) = lame_from_young(e.unwrap_or(100.0), nu.unwrap_or(0.35));
                p.lambda = lambda;
                p.mu = mu;
            }
            [None, None, lambda, mu] => {
                p.lambda = lambda.unwrap_or(p.lambda);
                p.mu = mu.unwrap_or(p.mu);
            }
            _ => bail!("give either young/poisson or lambda/mu, not both"),
        }
        config.study.validate()?;
        for &t in &config.export_times {
            if !(0.0..=config.study.end_time).contains(&t) {
                bail!("export time {t} outside [0, {}]", config.study.end_time);
            }
        }
        Ok(config)
    }
}

fn read_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_key_values(&text).with_context(|| format!("in config {}", path.display()))
}
