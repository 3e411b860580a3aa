//! Experiment documents.
//!
//! ```toml
//! schema = 1
//! command = "eig"
//! model = "geometric-beta-minus"   # built-in name or path to a model file
//! grid = "-2:20:0.05"
//! n = 200
//! tol = 1e-12
//!
//! [output]
//! dir = "out/eig"
//! ```
//!
//! `model` may also be an inline table in the model-file format. `z` is a
//! single complex number (`"1+1i"`) or an array of them. Keys:
//!
//! | key       | meaning                                             |
//! |-----------|-----------------------------------------------------|
//! | `command` | classify, jost, poly, asym, eig, mass, identity, carleman-density |
//! | `z`       | evaluation point(s); real points for `mass`         |
//! | `grid`    | `lo:hi:step`; scan window for `eig`, density grid   |
//! | `n`       | stored length / series length / identity cutoff     |
//! | `n_trunc` | Volterra horizon (default: automatic)               |
//! | `tol`     | solver tolerance                                    |
//! | `bits`    | Sturm-bisection precision                           |

use crate::parse::{parse_complex, parse_grid, Grid};
use jacobi_core::model_file::parse_model;
use jacobi_core::CoefficientModel;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Classify,
    Jost,
    Poly,
    Asym,
    Eig,
    Mass,
    Identity,
    CarlemanDensity,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Classify,
        Command::Jost,
        Command::Poly,
        Command::Asym,
        Command::Eig,
        Command::Mass,
        Command::Identity,
        Command::CarlemanDensity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Jost => "jost",
            Command::Poly => "poly",
            Command::Asym => "asym",
            Command::Eig => "eig",
            Command::Mass => "mass",
            Command::Identity => "identity",
            Command::CarlemanDensity => "carleman-density",
        }
    }
}

impl FromStr for Command {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
            ConfigError(format!("unknown command `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Name(String),
    Inline(toml::Table),
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Points {
    One(String),
    Many(Vec<String>),
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema: u32,
    pub command: Option<String>,
    pub model: Option<ModelRef>,
    pub z: Option<Points>,
    pub grid: Option<String>,
    pub n: Option<i64>,
    pub n_trunc: Option<i64>,
    pub tol: Option<f64>,
    pub bits: Option<i64>,
    #[serde(default)]
    pub output: OutputPaths,
}

/// Values given on the command line; they take precedence over the document.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub command: Option<String>,
    pub model: Option<String>,
    pub z: Vec<String>,
    pub grid: Option<String>,
    pub n: Option<i64>,
    pub n_trunc: Option<i64>,
    pub tol: Option<f64>,
    pub bits: Option<i64>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub command: Command,
    pub model: CoefficientModel,
    pub z: Vec<Complex64>,
    pub grid: Option<Grid>,
    pub n: Option<usize>,
    pub n_trunc: Option<usize>,
    pub tol: Option<f64>,
    pub bits: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn parse_config_file(text: &str) -> Result<ConfigFile, ConfigError> {
    let f: ConfigFile = toml::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;
    if f.schema != CONFIG_SCHEMA {
        return Err(ConfigError(format!("config: schema {} is not supported (expected {CONFIG_SCHEMA})", f.schema)));
    }
    Ok(f)
}

fn positive_int(v: Option<i64>, field: &str) -> Result<Option<usize>, ConfigError> {
    match v {
        None => Ok(None),
        Some(x) if x > 0 => Ok(Some(x as usize)),
        Some(x) => Err(ConfigError(format!("field `{field}` must be positive, got {x}"))),
    }
}

/// Looks a model reference up: built-in name, then file path.
pub fn load_model(name: &str, base: Option<&Path>) -> Result<CoefficientModel, ConfigError> {
    if let Some(m) = CoefficientModel::builtin_named(name) {
        return Ok(m);
    }
    let path = match base {
        Some(b) if Path::new(name).is_relative() => b.join(name),
        _ => PathBuf::from(name),
    };
    if !path.is_file() {
        let names: Vec<String> = CoefficientModel::builtin().into_iter().map(|m| m.name).collect();
        return Err(ConfigError(format!(
            "model `{name}` is neither a built-in ({}) nor a readable file",
            names.join(", ")
        )));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

impl ExperimentConfig {
    /// Merges an optional document with overrides and validates the result.
    /// `base` resolves relative model paths.
    pub fn build(file: Option<ConfigFile>, ov: Overrides, base: Option<&Path>) -> Result<Self, ConfigError> {
        let file = file.unwrap_or(ConfigFile {
            schema: CONFIG_SCHEMA,
            command: None,
            model: None,
            z: None,
            grid: None,
            n: None,
            n_trunc: None,
            tol: None,
            bits: None,
            output: OutputPaths::default(),
        });
        let command: Command = ov
            .command
            .or(file.command)
            .ok_or_else(|| ConfigError("no command given".into()))?
            .parse()?;
        let model = match (ov.model, file.model) {
            (Some(name), _) => load_model(&name, None)?,
            (None, Some(ModelRef::Name(name))) => load_model(&name, base)?,
            (None, Some(ModelRef::Inline(t))) => {
                let text = toml::to_string(&t).map_err(|e| ConfigError(format!("model: {e}")))?;
                parse_model(&text).map_err(|e| ConfigError(format!("model: {e}")))?
            }
            (None, None) => return Err(ConfigError("no model given".into())),
        };
        let z_text = if !ov.z.is_empty() {
            ov.z
        } else {
            match file.z {
                None => Vec::new(),
                Some(Points::One(s)) => vec![s],
                Some(Points::Many(v)) => v,
            }
        };
        let z = z_text
            .iter()
            .map(|s| parse_complex(s).map_err(|e| ConfigError(format!("field `z`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let grid = match ov.grid.or(file.grid) {
            None => None,
            Some(g) => Some(parse_grid(&g).map_err(|e| ConfigError(format!("field `grid`: {e}")))?),
        };
        let tol = ov.tol.or(file.tol);
        if let Some(t) = tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(ConfigError(format!("field `tol` must be positive, got {t}")));
            }
        }
        let cfg = ExperimentConfig {
            command,
            model,
            z,
            grid,
            n: positive_int(ov.n.or(file.n), "n")?,
            n_trunc: positive_int(ov.n_trunc.or(file.n_trunc), "n_trunc")?,
            tol,
            bits: positive_int(ov.bits.or(file.bits), "bits")?,
            out: ov.out.or(file.output.dir.map(|d| match base {
                Some(b) if d.is_relative() => b.join(d),
                _ => d,
            })),
        };
        cfg.check_points()?;
        Ok(cfg)
    }

    fn check_points(&self) -> Result<(), ConfigError> {
        match self.command {
            Command::Eig if self.grid.is_none() => Err(ConfigError("command `eig` needs a grid lo:hi:step".into())),
            Command::Mass if self.z.is_empty() => Err(ConfigError("command `mass` needs at least one real z".into())),
            Command::Mass if self.z.iter().any(|z| z.im != 0.0) => {
                Err(ConfigError("command `mass` takes real points only".into()))
            }
            _ => Ok(()),
        }
    }

    /// Evaluation points, with `i` standing in when none were given.
    pub fn points(&self) -> Vec<Complex64> {
        if self.z.is_empty() {
            vec![Complex64::new(0.0, 1.0)]
        } else {
            self.z.clone()
        }
    }
}
