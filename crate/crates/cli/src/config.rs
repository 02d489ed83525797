//! Resolution of flags, config file, environment and defaults into one
//! [`RunConfig`], plus the small text formats accepted by the flags.

use std::path::{Path, PathBuf};

use cabm::entrance::{InitialData, StepFunction};
use serde::{Deserialize, Serialize};

use crate::args::{Command, Format};
use crate::CliError;

/// Environment variable consulted for the seed when neither a flag nor the
/// config file sets it.
pub const SEED_ENV: &str = "CABM_SEED";
pub const DEFAULT_SEED: u64 = 42;

/// Keys accepted in a config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub theta: Option<f64>,
    pub t: Option<f64>,
    pub dt: Option<f64>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub data: Option<String>,
    pub output: Option<PathBuf>,
    pub format: Option<String>,
    pub z: Option<f64>,
    pub bias: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }
}

/// Fully resolved settings of one invocation, embedded in every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub theta: f64,
    pub t: f64,
    pub dt: f64,
    pub reps: usize,
    pub seed: u64,
    /// Where the seed came from: `flag`, `config`, `env` or `default`.
    pub seed_source: &'static str,
    pub z: f64,
    pub bias: f64,
    pub data: Option<InitialData>,
    pub output: Option<PathBuf>,
    pub format: &'static str,
    /// Subcommand-specific settings.
    pub params: serde_json::Value,
}

impl RunConfig {
    pub fn format(&self) -> Format {
        if self.format == "csv" {
            Format::Csv
        } else {
            Format::Json
        }
    }

    pub fn data(&self) -> Result<&InitialData, CliError> {
        self.data
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("{} needs --data", self.command)))
    }
}

fn default_reps(cmd: &Command) -> usize {
    match cmd {
        Command::Simulate { .. } => 10,
        _ => 100_000,
    }
}

fn default_format(cmd: &Command) -> Format {
    match cmd {
        Command::Simulate { .. } | Command::Kernel { .. } | Command::Approx { .. } => Format::Csv,
        _ => Format::Json,
    }
}

/// Merge flags over the config file over the defaults. `env_seed` is the raw
/// value of [`SEED_ENV`], if set.
pub fn resolve(cmd: &Command, env_seed: Option<String>) -> Result<RunConfig, CliError> {
    let c = cmd.common();
    let file = match &c.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let env_seed = env_seed
        .map(|s| {
            s.trim().parse::<u64>().map_err(|_| {
                CliError::Usage(format!("{SEED_ENV}={s:?} is not an unsigned integer"))
            })
        })
        .transpose()?;
    let (seed, seed_source) = match (c.seed, file.seed, env_seed) {
        (Some(s), _, _) => (s, "flag"),
        (None, Some(s), _) => (s, "config"),
        (None, None, Some(s)) => (s, "env"),
        _ => (DEFAULT_SEED, "default"),
    };
    let format = match (c.format, file.format.as_deref()) {
        (Some(f), _) => f,
        (None, Some("csv")) => Format::Csv,
        (None, Some("json")) => Format::Json,
        (None, Some(other)) => {
            return Err(CliError::Usage(format!(
                "unknown format {other:?} in config"
            )))
        }
        (None, None) => default_format(cmd),
    };
    let data = match c.data.as_ref().or(file.data.as_ref()) {
        Some(d) => Some(parse_data(d)?),
        None => None,
    };
    let rc = RunConfig {
        command: cmd.name().into(),
        theta: c.theta.or(file.theta).unwrap_or(0.0),
        t: c.t.or(file.t).unwrap_or(1.0),
        dt: c.dt.or(file.dt).unwrap_or(1e-3),
        reps: c.reps.or(file.reps).unwrap_or_else(|| default_reps(cmd)),
        seed,
        seed_source,
        z: c.z.or(file.z).unwrap_or(3.0),
        bias: c.bias.or(file.bias).unwrap_or(0.01),
        data,
        output: c.output.clone().or(file.output),
        format: match format {
            Format::Csv => "csv",
            Format::Json => "json",
        },
        params: serde_json::Value::Null,
    };
    validate(&rc)?;
    Ok(rc)
}

fn validate(rc: &RunConfig) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&rc.theta) {
        return Err(CliError::Usage(format!(
            "--theta must lie in [0, 1], got {}",
            rc.theta
        )));
    }
    if !(rc.t > 0.0 && rc.t.is_finite()) {
        return Err(CliError::Usage(format!(
            "--t must be positive, got {}",
            rc.t
        )));
    }
    if !(rc.dt > 0.0 && rc.dt.is_finite()) {
        return Err(CliError::Usage(format!(
            "--dt must be positive, got {}",
            rc.dt
        )));
    }
    if rc.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    if !(rc.z >= 0.0) || !(rc.bias >= 0.0) {
        return Err(CliError::Usage(
            "--z and --bias must be non-negative".into(),
        ));
    }
    Ok(())
}

fn json_or_file(spec: &str) -> Result<String, CliError> {
    let s = spec.trim();
    if s.starts_with('{') || s.starts_with('[') {
        Ok(s.to_string())
    } else {
        std::fs::read_to_string(s).map_err(|e| CliError::Usage(format!("cannot read {s}: {e}")))
    }
}

/// `maximal`, inline JSON, or a path to a JSON file.
pub fn parse_data(spec: &str) -> Result<InitialData, CliError> {
    if spec.trim() == "maximal" {
        return Ok(InitialData::Maximal);
    }
    serde_json::from_str(&json_or_file(spec)?)
        .map_err(|e| CliError::Usage(format!("invalid initial data: {e}")))
}

pub fn parse_step_function(spec: &str) -> Result<StepFunction, CliError> {
    serde_json::from_str(&json_or_file(spec)?)
        .map_err(|e| CliError::Usage(format!("invalid step function: {e}")))
}

/// `a:b:c`, three numbers separated by colons.
pub fn parse_triple(spec: &str, what: &str) -> Result<(f64, f64, f64), CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::Usage(format!("{what} must look like a:b:c, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(bad());
    }
    Ok((v[0], v[1], v[2]))
}

/// Points `lo, lo + step, …` up to `hi` (inclusive up to rounding).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let (lo, hi, step) = parse_triple(spec, "--grid")?;
    if !(step > 0.0) || hi < lo {
        return Err(CliError::Usage(format!(
            "--grid needs lo <= hi and step > 0, got {spec:?}"
        )));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    if n > 100_000 {
        return Err(CliError::Usage("--grid has more than 100000 points".into()));
    }
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

/// `;`-separated groups of `,`-separated numbers.
pub fn parse_groups<T: std::str::FromStr>(spec: &str, what: &str) -> Result<Vec<Vec<T>>, CliError> {
    spec.split(';')
        .filter(|g| !g.trim().is_empty())
        .map(|g| {
            g.split(',')
                .map(|x| x.trim().parse::<T>())
                .collect::<Result<Vec<T>, _>>()
                .map_err(|_| CliError::Usage(format!("cannot parse {what} group {g:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_inclusive() {
        let g = parse_grid("-3:3:0.1").unwrap();
        assert_eq!(g.len(), 61);
        assert!((g[60] - 3.0).abs() < 1e-12);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn groups() {
        let g: Vec<Vec<f64>> = parse_groups("-1,1; -1,0,0.5,2", "points").unwrap();
        assert_eq!(g, vec![vec![-1.0, 1.0], vec![-1.0, 0.0, 0.5, 2.0]]);
        assert!(parse_groups::<usize>("1,x", "pairs").is_err());
    }

    #[test]
    fn config_file_keys() {
        let c = FileConfig::parse("theta = 0.5\nreps = 1000\ndata = \"maximal\"\n").unwrap();
        assert_eq!(c.theta, Some(0.5));
        assert_eq!(c.reps, Some(1000));
        assert!(FileConfig::parse("thetta = 1").is_err());
    }

    #[test]
    fn data_descriptors() {
        assert_eq!(parse_data("maximal").unwrap(), InitialData::Maximal);
        let d = parse_data(r#"{"variant":"finite_spin","atoms":[{"position":0}]}"#).unwrap();
        assert_eq!(d, InitialData::finite_spin(&[0.0]).unwrap());
        assert!(parse_data("/no/such/file.json").is_err());
    }
}
