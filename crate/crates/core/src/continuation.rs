//! Hypothesis checks, the t = 0 initializer, the damped Newton corrector and
//! continuation in t from the round sphere to the target equation.

use std::fmt;
use std::time::Instant;

use thiserror::Error;

use crate::curvop::{self, CurvOpError, ProblemSpec};
use crate::exprlang::{self, BinOp, EvalEnv, Expr, Var};
use crate::sparse::LinearSolveError;
use crate::spheregeom::{self, RadialField};
use crate::symmfunc::{self, CurvatureVector};

/// Allowed positive part of the sampled radial derivative in the ρ^{k-l}α_l
/// monotonicity check; covers finite-difference noise only.
pub const RADIAL_DERIVATIVE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HypothesisKind {
    /// σ_k(e)/ρ^k ≥ Σ α_l σ_l(e)/ρ^l for ρ ≥ r2.
    Ass1,
    /// The reverse inequality for ρ ≤ r1.
    Ass2,
    /// ∂/∂ρ [ρ^{k-l} α_l] ≤ 0 on r1 ≤ ρ ≤ r2.
    Ass3 {
        l: usize,
    },
    AlphaPositive {
        l: usize,
    },
    PhiPositive,
    PhiAboveOneInside,
    PhiBelowOneOutside,
    PhiDecreasing,
}

impl fmt::Display for HypothesisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HypothesisKind::Ass1 => f.write_str("ASS1"),
            HypothesisKind::Ass2 => f.write_str("ASS2"),
            HypothesisKind::Ass3 { l } => write!(f, "ASS3[l={l}]"),
            HypothesisKind::AlphaPositive { l } => write!(f, "alpha{l}>0"),
            HypothesisKind::PhiPositive => f.write_str("phi>0"),
            HypothesisKind::PhiAboveOneInside => f.write_str("phi>1 (rho<=r1)"),
            HypothesisKind::PhiBelowOneOutside => f.write_str("phi<1 (rho>=r2)"),
            HypothesisKind::PhiDecreasing => f.write_str("phi decreasing"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleLocation {
    pub rho: f64,
    pub x: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub kind: HypothesisKind,
    pub passed: bool,
    /// Worst signed margin over the samples; negative means violated.
    pub margin: f64,
    /// Worst margin on the boundary sphere (ρ = r2 for ASS1, ρ = r1 for ASS2).
    pub boundary_margin: Option<f64>,
    /// Σ α_l σ_l(e) ρ^{k-l} / σ_k(e) at the worst boundary sample: at most 1
    /// for ASS1, at least 1 for ASS2.
    pub boundary_ratio: Option<f64>,
    pub location: SampleLocation,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, kind: HypothesisKind) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.kind == kind)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Error)]
pub enum ContinuationError {
    #[error("need at least 16 hypothesis samples, got {0}")]
    TooFewSamples(usize),
    #[error("at rho={}, x={:?}: {source}", .location.rho, .location.x)]
    Sample {
        location: SampleLocation,
        source: CurvOpError,
    },
    #[error("structural hypotheses fail: {}", failure_list(.0))]
    Hypotheses(HypothesisReport),
    #[error("cannot initialize: {0}")]
    Init(String),
    #[error("continuation stalled at t={last_t}: step fell below {min_step}")]
    StepUnderflow {
        last_t: f64,
        min_step: f64,
        rho: RadialField,
        report: SolveReport,
    },
    #[error(transparent)]
    Operator(#[from] CurvOpError),
    #[error(transparent)]
    Newton(#[from] NewtonError),
}

fn failure_list(report: &HypothesisReport) -> String {
    report
        .failures()
        .map(|c| c.kind.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Polar rings including both poles, with 2m azimuths on interior rings.
fn sample_directions(m: usize) -> Vec<[f64; 3]> {
    let mut dirs = vec![[0.0, 0.0, 1.0]];
    for i in 1..m - 1 {
        let theta = std::f64::consts::PI * i as f64 / (m - 1) as f64;
        let (st, ct) = theta.sin_cos();
        for j in 0..2 * m {
            let phi = std::f64::consts::PI * j as f64 / m as f64;
            dirs.push([st * phi.cos(), st * phi.sin(), ct]);
        }
    }
    dirs.push([0.0, 0.0, -1.0]);
    dirs
}

/// Running minimum of a margin together with where it occurred.
struct Worst {
    margin: f64,
    location: SampleLocation,
}

impl Worst {
    fn new() -> Self {
        Self {
            margin: f64::INFINITY,
            location: SampleLocation {
                rho: f64::NAN,
                x: [f64::NAN; 3],
            },
        }
    }

    fn update(&mut self, margin: f64, env: &EvalEnv) {
        if margin < self.margin {
            self.margin = margin;
            self.location = SampleLocation {
                rho: env.rho(),
                x: env.position(),
            };
        }
    }
}

fn env_at(rho: f64, dir: [f64; 3]) -> Result<EvalEnv, ContinuationError> {
    EvalEnv::on_ray(rho, dir).map_err(|source| ContinuationError::Sample {
        location: SampleLocation {
            rho,
            x: dir.map(|d| d * rho),
        },
        source: CurvOpError::Eval {
            name: "evaluation point".into(),
            source,
        },
    })
}

fn at_sample<T>(env: &EvalEnv, r: Result<T, CurvOpError>) -> Result<T, ContinuationError> {
    r.map_err(|source| ContinuationError::Sample {
        location: SampleLocation {
            rho: env.rho(),
            x: env.position(),
        },
        source,
    })
}

/// Verifies the structural hypotheses on a radius × direction sample lattice.
pub fn check_hypotheses(spec: &ProblemSpec, samples: usize) -> Result<HypothesisReport, ContinuationError> {
    if samples < 16 {
        return Err(ContinuationError::TooFewSamples(samples));
    }
    let (k, r1, r2) = (spec.k, spec.r1, spec.r2);
    let dirs = sample_directions(samples);
    let sigma_e: Vec<f64> = (0..=k).map(|l| spec.sigma_e(l)).collect();
    let mut checks = Vec::new();

    // (Σ α_l σ_l(e)/ρ^l, σ_k(e)/ρ^k)
    let sides = |env: &EvalEnv| -> Result<(f64, f64), ContinuationError> {
        let rho = env.rho();
        let mut rhs = 0.0;
        for (l, s) in sigma_e.iter().enumerate().take(k) {
            rhs += at_sample(env, spec.eval_alpha(l, env))? * s / rho.powi(l as i32);
        }
        Ok((rhs, sigma_e[k] / rho.powi(k as i32)))
    };

    for (kind, radii, boundary, sign) in [
        (HypothesisKind::Ass1, linspace(r2, 2.0 * r2, samples), r2, -1.0),
        (HypothesisKind::Ass2, linspace(0.5 * r1, r1, samples), r1, 1.0),
    ] {
        let mut worst = Worst::new();
        let (mut on_boundary, mut ratio) = (f64::INFINITY, f64::NAN);
        for &rho in &radii {
            for &dir in &dirs {
                let env = env_at(rho, dir)?;
                let (rhs, lhs) = sides(&env)?;
                let margin = sign * (rhs - lhs);
                worst.update(margin, &env);
                if rho == boundary && margin < on_boundary {
                    on_boundary = margin;
                    ratio = rhs / lhs;
                }
            }
        }
        checks.push(HypothesisCheck {
            kind,
            passed: worst.margin >= 0.0,
            margin: worst.margin,
            boundary_margin: Some(on_boundary),
            boundary_ratio: Some(ratio),
            location: worst.location,
            warnings: Vec::new(),
        });
    }

    let shell = linspace(r1, r2, samples);
    for l in 0..k {
        let weighted = Expr::binary(
            BinOp::Mul,
            Expr::binary(BinOp::Pow, Expr::var(Var::Rho), Expr::constant((k - l) as f64)),
            spec.alphas[l].clone(),
        );
        let mut worst = Worst::new();
        for &rho in &shell {
            for &dir in &dirs {
                let env = env_at(rho, dir)?;
                let d = exprlang::radial_derivative(&weighted, &env, 1e-5 * rho).map_err(|source| {
                    ContinuationError::Sample {
                        location: SampleLocation { rho, x: env.position() },
                        source: CurvOpError::Eval {
                            name: format!("rho^{}*alpha{l}", k - l),
                            source,
                        },
                    }
                })?;
                worst.update(-d, &env);
            }
        }
        checks.push(HypothesisCheck {
            kind: HypothesisKind::Ass3 { l },
            passed: worst.margin >= -RADIAL_DERIVATIVE_SLACK,
            margin: worst.margin,
            boundary_margin: None,
            boundary_ratio: None,
            location: worst.location,
            warnings: Vec::new(),
        });
    }

    let inner_band = linspace(0.5 * r1, r1, samples);
    let outer_band = linspace(r2, 2.0 * r2, samples);
    for l in 0..k {
        let mut worst = Worst::new();
        for &rho in &shell {
            for &dir in &dirs {
                let env = env_at(rho, dir)?;
                worst.update(at_sample(&env, spec.eval_alpha(l, &env))?, &env);
            }
        }
        let mut warnings = Vec::new();
        let mut outside = Worst::new();
        for &rho in inner_band.iter().chain(&outer_band) {
            for &dir in &dirs {
                let env = env_at(rho, dir)?;
                outside.update(at_sample(&env, spec.eval_alpha(l, &env))?, &env);
            }
        }
        if outside.margin <= 0.0 {
            warnings.push(format!(
                "alpha{l} = {} <= 0 outside the shell at rho = {}",
                outside.margin, outside.location.rho
            ));
        }
        checks.push(HypothesisCheck {
            kind: HypothesisKind::AlphaPositive { l },
            passed: worst.margin > 0.0,
            margin: worst.margin,
            boundary_margin: None,
            boundary_ratio: None,
            location: worst.location,
            warnings,
        });
    }

    let axis = [0.0, 0.0, 1.0];
    let phi_at = |rho: f64| -> Result<(f64, EvalEnv), ContinuationError> {
        let env = env_at(rho, axis)?;
        Ok((at_sample(&env, spec.eval_phi(rho))?, env))
    };
    let mut phi_check = |kind, radii: &[f64], margin: &dyn Fn(f64) -> f64| -> Result<(), ContinuationError> {
        let mut worst = Worst::new();
        for &rho in radii {
            let (value, env) = phi_at(rho)?;
            worst.update(margin(value), &env);
        }
        checks.push(HypothesisCheck {
            kind,
            passed: worst.margin > 0.0,
            margin: worst.margin,
            boundary_margin: None,
            boundary_ratio: None,
            location: worst.location,
            warnings: Vec::new(),
        });
        Ok(())
    };
    let full = linspace(0.5 * r1, 2.0 * r2, 4 * samples);
    phi_check(HypothesisKind::PhiPositive, &full, &|v| v)?;
    phi_check(HypothesisKind::PhiAboveOneInside, &inner_band, &|v| v - 1.0)?;
    phi_check(HypothesisKind::PhiBelowOneOutside, &outer_band, &|v| 1.0 - v)?;

    let mut worst = Worst::new();
    let mut prev = phi_at(full[0])?.0;
    for &rho in &full[1..] {
        let (value, env) = phi_at(rho)?;
        worst.update(prev - value, &env);
        prev = value;
    }
    checks.push(HypothesisCheck {
        kind: HypothesisKind::PhiDecreasing,
        passed: worst.margin > 0.0,
        margin: worst.margin,
        boundary_margin: None,
        boundary_ratio: None,
        location: worst.location,
        warnings: Vec::new(),
    });

    Ok(HypothesisReport { checks })
}

/// The constant field ρ ≡ ρ0 with φ(ρ0) = 1, found by bisection on [r1, r2].
pub fn initial_solution(spec: &ProblemSpec) -> Result<RadialField, ContinuationError> {
    let g = |rho: f64| spec.eval_phi(rho).map(|v| v - 1.0);
    let (mut lo, mut hi) = (spec.r1, spec.r2);
    let (g_lo, g_hi) = (g(lo)?, g(hi)?);
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(ContinuationError::Init(format!(
            "phi - 1 does not change sign on [{lo}, {hi}] (phi(r1) - 1 = {g_lo}, phi(r2) - 1 = {g_hi})"
        )));
    }
    let root = loop {
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid)?;
        if g_mid == 0.0 || hi - lo <= 1e-12 {
            break mid;
        }
        if g_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    };
    Ok(RadialField::constant(&spec.grid, root).map_err(CurvOpError::from)?)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NewtonError {
    #[error("starting field is not admissible: {0}")]
    InadmissibleStart(CurvOpError),
    #[error("line search exhausted after {halvings} halvings at iteration {iteration} (residual {residual:e})")]
    Stagnation {
        iteration: usize,
        halvings: usize,
        residual: f64,
    },
    #[error("every damped step at iteration {iteration} leaves the admissible set")]
    ConeExit { iteration: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("jacobian assembly failed at iteration {iteration}: {source}")]
    Jacobian { iteration: usize, source: CurvOpError },
    #[error("linear solve failed at iteration {iteration}: {source}")]
    Linear { iteration: usize, source: LinearSolveError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub rho: RadialField,
    pub iterations: usize,
    /// ∞-norm of the residual before the first and after every accepted update.
    pub residual_history: Vec<f64>,
}

impl NewtonOutcome {
    pub fn residual_inf(&self) -> f64 {
        *self.residual_history.last().expect("history is never empty")
    }
}

/// Damped Newton on F(·; t) = 0 with backtracking that requires the trial
/// iterate to stay admissible and the residual ∞-norm to decrease.
pub fn newton_solve(spec: &ProblemSpec, rho0: &RadialField, t: f64) -> Result<NewtonOutcome, NewtonError> {
    let settings = &spec.solver;
    let mut rho = rho0.clone();
    let mut f = curvop::residual_field(spec, &rho, t).map_err(NewtonError::InadmissibleStart)?;
    let mut norm = f.inf_norm();
    let mut history = vec![norm];
    let mut iteration = 0;

    while norm > settings.tol {
        if iteration == settings.max_iter {
            return Err(NewtonError::MaxIterations {
                iterations: iteration,
                residual: norm,
            });
        }
        let jac = curvop::jacobian(spec, &rho, t).map_err(|source| NewtonError::Jacobian { iteration, source })?;
        let rhs: Vec<f64> = f.values().iter().map(|v| -v).collect();
        let delta = jac
            .solve(&rhs)
            .map_err(|source| NewtonError::Linear { iteration, source })?;

        let mut accepted = None;
        let mut any_admissible = false;
        let mut step = 1.0;
        for _ in 0..=settings.max_halvings {
            let trial: Vec<f64> = rho.values().iter().zip(&delta).map(|(r, d)| r + step * d).collect();
            if let Ok(trial) = RadialField::new(trial) {
                if let Ok(f_trial) = curvop::residual_field(spec, &trial, t) {
                    any_admissible = true;
                    let trial_norm = f_trial.inf_norm();
                    if trial_norm < norm {
                        accepted = Some((trial, f_trial, trial_norm));
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        let Some((next, f_next, next_norm)) = accepted else {
            return Err(if any_admissible {
                NewtonError::Stagnation {
                    iteration,
                    halvings: settings.max_halvings,
                    residual: norm,
                }
            } else {
                NewtonError::ConeExit { iteration }
            });
        };
        rho = next;
        f = f_next;
        norm = next_norm;
        history.push(norm);
        iteration += 1;
    }

    Ok(NewtonOutcome {
        rho,
        iterations: iteration,
        residual_history: history,
    })
}

/// Pass/fail flags of the runtime monitors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonitorFlags {
    /// r1 < ρ < r2 at every node.
    pub barrier: bool,
    /// ⟨X, ν⟩ > 0 at every node.
    pub support: bool,
    /// κ ∈ Γ_{k-1} at every node.
    pub admissible: bool,
    /// All principal curvatures finite.
    pub finite: bool,
}

impl MonitorFlags {
    pub fn all_green(&self) -> bool {
        self.barrier && self.support && self.admissible && self.finite
    }
}

/// Quantities monitored on a radial field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMonitors {
    pub rho_min: f64,
    pub rho_max: f64,
    pub support_min: f64,
    /// min over nodes of σ_j(κ) for j = 1..=n.
    pub sigma_min: Vec<f64>,
    pub kappa_abs_max: f64,
    pub h_max: f64,
    /// κ ∈ Γ_k at every node.
    pub in_gamma_k: bool,
    pub flags: MonitorFlags,
}

pub fn monitor(spec: &ProblemSpec, rho: &RadialField) -> Result<FieldMonitors, CurvOpError> {
    let geom = spheregeom::geometry(&spec.grid, rho)?;
    let n = spec.n;
    let mut sigma_min = vec![f64::INFINITY; n];
    for node in &geom.nodes {
        let s = symmfunc::sigma_all(&CurvatureVector::new(node.kappa.to_vec())?);
        for j in 1..=n {
            sigma_min[j - 1] = sigma_min[j - 1].min(s[j]);
        }
    }
    let (rho_min, rho_max) = (rho.min(), rho.max());
    let support_min = geom.min_support();
    let kappa_abs_max = geom.max_abs_kappa();
    Ok(FieldMonitors {
        rho_min,
        rho_max,
        support_min,
        kappa_abs_max,
        h_max: geom.max_mean_curvature(),
        in_gamma_k: sigma_min[..spec.k].iter().all(|&s| s > 0.0),
        flags: MonitorFlags {
            barrier: spec.r1 < rho_min && rho_max < spec.r2,
            support: support_min > 0.0,
            admissible: sigma_min[..spec.k - 1].iter().all(|&s| s > 0.0),
            finite: kappa_abs_max.is_finite(),
        },
        sigma_min,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStep {
    pub t: f64,
    pub newton_iters: usize,
    pub residual_inf: f64,
    pub residual_history: Vec<f64>,
    pub monitors: FieldMonitors,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveReport {
    pub steps: Vec<SolveStep>,
    /// (t attempted, reason) for every rejected continuation step.
    pub rejected: Vec<(f64, String)>,
    pub warnings: Vec<String>,
}

impl SolveReport {
    pub fn final_t(&self) -> Option<f64> {
        self.steps.last().map(|s| s.t)
    }

    pub fn monitors_green(&self) -> bool {
        self.steps.iter().all(|s| s.monitors.flags.all_green())
    }
}

fn record_step(
    spec: &ProblemSpec,
    report: &mut SolveReport,
    t: f64,
    outcome: &NewtonOutcome,
    started: Instant,
) -> Result<(), CurvOpError> {
    let monitors = monitor(spec, &outcome.rho)?;
    let f = &monitors.flags;
    for (ok, what) in [
        (f.barrier, "barrier r1 < rho < r2"),
        (f.support, "support <X, nu> > 0"),
        (f.admissible, "admissible cone"),
        (f.finite, "finite curvature"),
    ] {
        if !ok {
            report.warnings.push(format!("t={t}: monitor violated: {what}"));
        }
    }
    report.steps.push(SolveStep {
        t,
        newton_iters: outcome.iterations,
        residual_inf: outcome.residual_inf(),
        residual_history: outcome.residual_history.clone(),
        monitors,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    });
    Ok(())
}

/// Follows the solution from the round sphere at t = 0 to t = 1.
///
/// The step in t starts at `t_step_initial`, is halved after a failed
/// Newton solve, doubles after two consecutive successes (capped at
/// `t_step_max`), and the run aborts once it drops below `t_step_min`.
pub fn continue_to_one(spec: &ProblemSpec) -> Result<(RadialField, SolveReport), ContinuationError> {
    let hypotheses = check_hypotheses(spec, spec.solver.hypothesis_samples)?;
    if !hypotheses.passed() {
        return Err(ContinuationError::Hypotheses(hypotheses));
    }
    let mut report = SolveReport::default();
    for check in &hypotheses.checks {
        report.warnings.extend(check.warnings.iter().cloned());
    }

    let settings = &spec.solver;
    let started = Instant::now();
    let start = newton_solve(spec, &initial_solution(spec)?, 0.0)?;
    record_step(spec, &mut report, 0.0, &start, started)?;

    let mut rho = start.rho;
    let mut t = 0.0;
    let mut dt = settings.t_step_initial;
    let mut successes = 0;
    while t < 1.0 {
        let t_next = (t + dt).min(1.0);
        let started = Instant::now();
        match newton_solve(spec, &rho, t_next) {
            Ok(outcome) => {
                record_step(spec, &mut report, t_next, &outcome, started)?;
                rho = outcome.rho;
                t = t_next;
                successes += 1;
                if successes == 2 {
                    dt = (2.0 * dt).min(settings.t_step_max);
                    successes = 0;
                }
            }
            Err(err) => {
                report.rejected.push((t_next, err.to_string()));
                successes = 0;
                dt *= 0.5;
                if dt < settings.t_step_min {
                    return Err(ContinuationError::StepUnderflow {
                        last_t: t,
                        min_step: settings.t_step_min,
                        rho,
                        report,
                    });
                }
            }
        }
    }
    Ok((rho, report))
}
