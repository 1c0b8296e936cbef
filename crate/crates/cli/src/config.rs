//! Run configuration files.
//!
//! ```toml
//! [problem]
//! n = 2
//! k = 2
//! r1 = 1.0
//! r2 = 4.0
//! alpha0 = "(0.6 - 0.05*rho)/rho^2"
//! alpha1 = "0.25/rho"
//! phi = "2.5/rho"
//!
//! [grid]
//! ntheta = 32
//! nphi = 64
//!
//! [solver]            # optional, defaults shown by `SolverSettings::default`
//! tol = 1e-10
//!
//! [output]            # optional
//! dir = "out"
//! ```
//!
//! Unknown sections and keys are rejected so that typos do not silently fall
//! back to defaults. A relative output directory is resolved against the
//! directory containing the config file.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;
use toml::{Table, Value};
use weingarten::curvop::CurvOpError;
use weingarten::spheregeom::GeomError;
use weingarten::{ProblemSpec, SolverSettings, SphereGrid};

pub const NTHETA_RANGE: (usize, usize) = (4, 512);
pub const NPHI_RANGE: (usize, usize) = (8, 1024);

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("unknown key `{0}`")]
    Unknown(String),
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error(transparent)]
    Problem(#[from] CurvOpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputOptions {
    pub dir: PathBuf,
    pub mesh: bool,
    pub csv: bool,
    pub report: bool,
    pub seed: u64,
    /// 0 = errors only, 1 = summary, 2 = one line per continuation step.
    pub verbosity: u8,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: ProblemSpec,
    pub output: OutputOptions,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses config text; `base` anchors a relative output directory.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut root: Table = text.parse()?;
        let mut problem = take_section(&mut root, "problem", true)?;
        let mut grid = take_section(&mut root, "grid", true)?;
        let mut solver = take_section(&mut root, "solver", false)?;
        let mut output = take_section(&mut root, "output", false)?;
        if let Some(key) = root.keys().next() {
            return Err(ConfigError::Unknown(key.clone()));
        }

        let n = index(&mut problem, "problem", "n")?;
        let k = index(&mut problem, "problem", "k")?;
        let r1 = real(&mut problem, "problem", "r1")?;
        let r2 = real(&mut problem, "problem", "r2")?;
        let phi = string(&mut problem, "problem", "phi")?;
        let alphas = (0..k)
            .map(|l| string(&mut problem, "problem", &format!("alpha{l}")))
            .collect::<Result<Vec<_>, _>>()?;
        no_leftovers(&problem, "problem")?;

        let ntheta = index(&mut grid, "grid", "ntheta")?;
        let nphi = index(&mut grid, "grid", "nphi")?;
        no_leftovers(&grid, "grid")?;
        for (key, value, (lo, hi)) in [("grid.ntheta", ntheta, NTHETA_RANGE), ("grid.nphi", nphi, NPHI_RANGE)] {
            if !(lo..=hi).contains(&value) {
                return Err(ConfigError::Invalid {
                    key: key.into(),
                    message: format!("{value} outside [{lo}, {hi}]"),
                });
            }
        }
        let grid = SphereGrid::new(ntheta, nphi).map_err(|e: GeomError| ConfigError::Invalid {
            key: "grid".into(),
            message: e.to_string(),
        })?;

        let mut settings = SolverSettings::default();
        let reals: [(&str, &mut f64); 4] = [
            ("tol", &mut settings.tol),
            ("t_step_initial", &mut settings.t_step_initial),
            ("t_step_max", &mut settings.t_step_max),
            ("t_step_min", &mut settings.t_step_min),
        ];
        for (key, slot) in reals {
            if solver.contains_key(key) {
                *slot = real(&mut solver, "solver", key)?;
                if !(*slot > 0.0) {
                    return Err(ConfigError::Invalid {
                        key: format!("solver.{key}"),
                        message: "must be positive".into(),
                    });
                }
            }
        }
        let indices: [(&str, &mut usize); 3] = [
            ("max_iter", &mut settings.max_iter),
            ("max_halvings", &mut settings.max_halvings),
            ("hypothesis_samples", &mut settings.hypothesis_samples),
        ];
        for (key, slot) in indices {
            if solver.contains_key(key) {
                *slot = index(&mut solver, "solver", key)?;
            }
        }
        no_leftovers(&solver, "solver")?;
        if settings.hypothesis_samples < 16 {
            return Err(ConfigError::Invalid {
                key: "solver.hypothesis_samples".into(),
                message: "must be at least 16".into(),
            });
        }
        if settings.t_step_min > settings.t_step_initial || settings.t_step_initial > settings.t_step_max {
            return Err(ConfigError::Invalid {
                key: "solver".into(),
                message: "need t_step_min <= t_step_initial <= t_step_max".into(),
            });
        }

        let alpha_refs: Vec<&str> = alphas.iter().map(String::as_str).collect();
        let spec = ProblemSpec::from_strings(n, k, r1, r2, &alpha_refs, &phi, grid)?.with_solver(settings);

        let mut options = OutputOptions {
            dir: base.join("out"),
            mesh: true,
            csv: true,
            report: true,
            seed: 0,
            verbosity: 1,
        };
        if output.contains_key("dir") {
            options.dir = base.join(string(&mut output, "output", "dir")?);
        }
        for (key, slot) in [
            ("mesh", &mut options.mesh),
            ("csv", &mut options.csv),
            ("report", &mut options.report),
        ] {
            if output.contains_key(key) {
                *slot = boolean(&mut output, "output", key)?;
            }
        }
        if output.contains_key("seed") {
            options.seed = index(&mut output, "output", "seed")? as u64;
        }
        if output.contains_key("verbosity") {
            options.verbosity = index(&mut output, "output", "verbosity")?.min(2) as u8;
        }
        no_leftovers(&output, "output")?;

        Ok(Self { spec, output: options })
    }
}

fn take_section(root: &mut Table, name: &str, required: bool) -> Result<Table, ConfigError> {
    match root.remove(name) {
        Some(Value::Table(t)) => Ok(t),
        Some(_) => Err(ConfigError::Invalid {
            key: name.into(),
            message: "expected a section".into(),
        }),
        None if required => Err(ConfigError::Missing(format!("[{name}]"))),
        None => Ok(Table::new()),
    }
}

fn take(table: &mut Table, section: &str, key: &str) -> Result<(String, Value), ConfigError> {
    let full = format!("{section}.{key}");
    match table.remove(key) {
        Some(v) => Ok((full, v)),
        None => Err(ConfigError::Missing(full)),
    }
}

fn invalid(key: String, expected: &str, found: &Value) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: format!("expected {expected}, found {}", found.type_str()),
    }
}

/// Accepts integers as well as floats.
fn real(table: &mut Table, section: &str, key: &str) -> Result<f64, ConfigError> {
    match take(table, section, key)? {
        (_, Value::Float(x)) => Ok(x),
        (_, Value::Integer(i)) => Ok(i as f64),
        (full, other) => Err(invalid(full, "a number", &other)),
    }
}

fn index(table: &mut Table, section: &str, key: &str) -> Result<usize, ConfigError> {
    match take(table, section, key)? {
        (full, Value::Integer(i)) => usize::try_from(i).map_err(|_| ConfigError::Invalid {
            key: full,
            message: format!("{i} is negative"),
        }),
        (full, other) => Err(invalid(full, "a non-negative integer", &other)),
    }
}

fn string(table: &mut Table, section: &str, key: &str) -> Result<String, ConfigError> {
    match take(table, section, key)? {
        (_, Value::String(s)) => Ok(s),
        (full, other) => Err(invalid(full, "a quoted string", &other)),
    }
}

fn boolean(table: &mut Table, section: &str, key: &str) -> Result<bool, ConfigError> {
    match take(table, section, key)? {
        (_, Value::Boolean(b)) => Ok(b),
        (full, other) => Err(invalid(full, "true or false", &other)),
    }
}

fn no_leftovers(table: &Table, section: &str) -> Result<(), ConfigError> {
    match table.keys().next() {
        Some(key) => Err(ConfigError::Unknown(format!("{section}.{key}"))),
        None => Ok(()),
    }
}
