//! `check`, `solve`, `verify` and `export`.
//!
//! Each command writes human-readable progress to `out` and returns an
//! [`Exit`]; malformed input surfaces as [`CliError`], which maps to exit 2.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;
use weingarten::continuation::{self, ContinuationError};
use weingarten::curvop;
use weingarten::{check_hypotheses, continue_to_one, RadialField};

use crate::config::{ConfigError, RunConfig};
use crate::export::{self, CsvError, Mesh};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    /// Hypotheses or verification failed.
    Failed = 1,
    InputError = 2,
    ContinuationFailed = 3,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: CsvError },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Problem(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit(&self) -> Exit {
        Exit::InputError
    }
}

pub const HYPOTHESES_FILE: &str = "hypotheses.json";
pub const REPORT_FILE: &str = "report.json";
pub const SOLUTION_CSV: &str = "solution.csv";
pub const SOLUTION_OBJ: &str = "solution.obj";
pub const LAST_GOOD_CSV: &str = "last_good.csv";

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Write {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn pretty(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json values always serialize");
    s.push('\n');
    s
}

pub fn check(config: &Path, out: &mut impl Write) -> Result<Exit, CliError> {
    let cfg = RunConfig::from_path(config)?;
    let report = check_hypotheses(&cfg.spec, cfg.spec.solver.hypothesis_samples)
        .map_err(|e| CliError::Problem(e.to_string()))?;
    write!(out, "{}", export::hypothesis_table(&report))?;
    if cfg.output.report {
        let path = write_file(
            &cfg.output.dir,
            HYPOTHESES_FILE,
            &pretty(&export::hypothesis_report_json(&report)),
        )?;
        if cfg.output.verbosity >= 1 {
            writeln!(out, "report: {}", path.display())?;
        }
    }
    Ok(if report.passed() { Exit::Success } else { Exit::Failed })
}

pub fn solve(config: &Path, out: &mut impl Write) -> Result<Exit, CliError> {
    let cfg = RunConfig::from_path(config)?;
    let opts = &cfg.output;
    let spec = &cfg.spec;

    let (rho, report, status) = match continue_to_one(spec) {
        Ok((rho, report)) => (rho, report, "converged"),
        Err(ContinuationError::Hypotheses(report)) => {
            write!(out, "{}", export::hypothesis_table(&report))?;
            if opts.report {
                write_file(
                    &opts.dir,
                    HYPOTHESES_FILE,
                    &pretty(&export::hypothesis_report_json(&report)),
                )?;
            }
            writeln!(out, "structural hypotheses fail; not solving")?;
            return Ok(Exit::Failed);
        }
        Err(ContinuationError::StepUnderflow {
            last_t, rho, report, ..
        }) => {
            if opts.report {
                let json = export::solve_report_json(&report, "continuation_failed", opts.seed);
                write_file(&opts.dir, REPORT_FILE, &pretty(&json))?;
            }
            write_file(
                &opts.dir,
                LAST_GOOD_CSV,
                &export::solution_csv(&spec.grid, rho.values()),
            )?;
            writeln!(
                out,
                "continuation failed: step fell below {} at t = {last_t}",
                spec.solver.t_step_min
            )?;
            if let Some((t, reason)) = report.rejected.last() {
                writeln!(out, "last rejected step t = {t}: {reason}")?;
            }
            return Ok(Exit::ContinuationFailed);
        }
        Err(ContinuationError::Newton(e)) => {
            writeln!(out, "continuation failed: no solution at t = 0: {e}")?;
            return Ok(Exit::ContinuationFailed);
        }
        Err(e @ ContinuationError::Init(_)) => {
            writeln!(out, "{e}")?;
            return Ok(Exit::Failed);
        }
        Err(e) => return Err(CliError::Problem(e.to_string())),
    };

    if opts.verbosity >= 2 {
        for s in &report.steps {
            writeln!(
                out,
                "t = {:<8.6} newton = {:<2} |F| = {:.3e}  rho in [{:.6}, {:.6}]",
                s.t, s.newton_iters, s.residual_inf, s.monitors.rho_min, s.monitors.rho_max
            )?;
        }
    }
    for w in &report.warnings {
        writeln!(out, "warning: {w}")?;
    }
    if opts.csv {
        write_file(&opts.dir, SOLUTION_CSV, &export::solution_csv(&spec.grid, rho.values()))?;
    }
    if opts.mesh {
        write_file(&opts.dir, SOLUTION_OBJ, &Mesh::from_field(&spec.grid, &rho).to_obj())?;
    }
    if opts.report {
        write_file(
            &opts.dir,
            REPORT_FILE,
            &pretty(&export::solve_report_json(&report, status, opts.seed)),
        )?;
    }
    if opts.verbosity >= 1 {
        let last = report.steps.last().expect("a converged run has steps");
        writeln!(
            out,
            "reached t = 1 in {} steps; |F| = {:.3e}; rho in [{:.10}, {:.10}]; output in {}",
            report.steps.len(),
            last.residual_inf,
            rho.min(),
            rho.max(),
            opts.dir.display()
        )?;
    }
    Ok(Exit::Success)
}

fn read_solution(csv: &Path, cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(csv).map_err(|source| CliError::Read {
        path: csv.to_path_buf(),
        source,
    })?;
    let wrap = |source| CliError::Csv {
        path: csv.to_path_buf(),
        source,
    };
    let rows = export::parse_csv(&text).map_err(wrap)?;
    export::rows_on_grid(&cfg.spec.grid, &rows).map_err(wrap)
}

/// Re-evaluates the t = 1 residual and the monitors on a stored field.
pub fn verify(csv: &Path, config: &Path, out: &mut impl Write) -> Result<Exit, CliError> {
    let cfg = RunConfig::from_path(config)?;
    let values = read_solution(csv, &cfg)?;
    let spec = &cfg.spec;
    let rho = match RadialField::new(values) {
        Ok(r) => r,
        Err(e) => {
            writeln!(out, "FAIL: not a radial graph: {e}")?;
            return Ok(Exit::Failed);
        }
    };
    let limit = 10.0 * spec.solver.tol;
    let mut ok = true;

    match curvop::residual_field(spec, &rho, 1.0) {
        Ok(f) => {
            let r = f.inf_norm();
            let pass = r <= limit;
            ok &= pass;
            writeln!(out, "{} residual |F|inf = {r:.3e} (limit {limit:.1e})", tag(pass))?;
        }
        Err(e) => {
            ok = false;
            writeln!(out, "FAIL residual: {e}")?;
        }
    }
    match continuation::monitor(spec, &rho) {
        Ok(m) => {
            let f = m.flags;
            writeln!(
                out,
                "{} barrier {} < rho in [{}, {}] < {}",
                tag(f.barrier),
                spec.r1,
                m.rho_min,
                m.rho_max,
                spec.r2
            )?;
            writeln!(out, "{} support min = {:.6e}", tag(f.support), m.support_min)?;
            let sigmas: Vec<String> = m.sigma_min.iter().map(|s| format!("{s:.6e}")).collect();
            writeln!(
                out,
                "{} cone margins min sigma_j = [{}]",
                tag(f.admissible),
                sigmas.join(", ")
            )?;
            writeln!(
                out,
                "{} curvature finite, max |kappa| = {:.6e}",
                tag(f.finite),
                m.kappa_abs_max
            )?;
            writeln!(out, "info k-convex: {}", m.in_gamma_k)?;
            ok &= f.all_green();
        }
        Err(e) => {
            ok = false;
            writeln!(out, "FAIL geometry: {e}")?;
        }
    }
    Ok(if ok { Exit::Success } else { Exit::Failed })
}

fn tag(pass: bool) -> &'static str {
    if pass {
        "ok  "
    } else {
        "FAIL"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Obj,
    Csv,
}

/// Rewrites a stored solution as OBJ or canonical CSV, to `dest` or `out`.
pub fn export(
    csv: &Path,
    config: &Path,
    format: ExportFormat,
    dest: Option<&Path>,
    out: &mut impl Write,
) -> Result<Exit, CliError> {
    let cfg = RunConfig::from_path(config)?;
    let values = read_solution(csv, &cfg)?;
    let rho = RadialField::new(values).map_err(|e| CliError::Problem(format!("{}: {e}", csv.display())))?;
    let text = match format {
        ExportFormat::Obj => Mesh::from_field(&cfg.spec.grid, &rho).to_obj(),
        ExportFormat::Csv => export::solution_csv(&cfg.spec.grid, rho.values()),
    };
    match dest {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(Exit::Success)
}
