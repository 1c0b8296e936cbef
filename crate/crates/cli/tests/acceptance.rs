//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weingarten::continuation::{HypothesisKind, SolveReport};
use weingarten::curvop::{concavity_check, ellipticity_check, residual_field};
use weingarten::spheregeom::{geometry, Sym2};
use weingarten::symmfunc::{
    in_gamma_cone, newton_maclaurin_holds, newton_maclaurin_sides, quotient_monotonicity_holds, sigma,
};
use weingarten::{
    check_hypotheses, continue_to_one, initial_solution, newton_solve, CurvatureVector, ProblemSpec, RadialField,
    SphereGrid,
};
use weingarten_cli::export::parse_obj;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<u64>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cv(x: &[f64]) -> CurvatureVector {
    CurvatureVector::new(x.to_vec()).unwrap()
}

fn subset_sigma(x: &[f64], k: usize) -> f64 {
    let n = x.len();
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| x[i]).product::<f64>())
        .sum()
}

/// Random λ ∈ Γ_{k-lag} with n ∈ [2, 6]; half from the positive orthant.
fn cone_sample(rng: &mut ChaCha8Rng, k_min: usize, lag: usize) -> (Vec<f64>, usize) {
    loop {
        let n = rng.random_range(2..=6);
        let k = rng.random_range(k_min.min(n)..=n);
        let orthant = rng.random_bool(0.5);
        let x: Vec<f64> = (0..n)
            .map(|_| {
                let v = rng.random_range(-1.0..3.0);
                if orthant {
                    f64::abs(v) + 1e-3
                } else {
                    v
                }
            })
            .collect();
        if in_gamma_cone(&cv(&x), k - lag).unwrap() {
            return (x, k);
        }
    }
}

fn sigma_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        for k in 0..=n {
            let scale = subset_sigma(&abs, k).max(f64::MIN_POSITIVE);
            worst = worst.max((sigma(&cv(&x), k).unwrap() - subset_sigma(&x, k)).abs() / scale);
        }
    }
    ensure(worst <= 1e-12, || format!("max rel err {worst:.2e}"))?;
    Ok(format!("1000 vectors, max rel err {worst:.2e}"))
}

fn newton_maclaurin() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let (x, k) = cone_sample(&mut rng, 1, 0);
        let lambda = cv(&x);
        for l in 1..k {
            ensure(newton_maclaurin_holds(&lambda, k, l).unwrap(), || {
                format!("NM fails at {x:?}, k={k}, l={l}")
            })?;
        }
        for l in 0..k {
            for r in 1..=k {
                for s in 0..r.min(l + 1) {
                    ensure(quotient_monotonicity_holds(&lambda, (k, l), (r, s)).unwrap(), || {
                        format!("quotient monotonicity fails at {x:?}")
                    })?;
                }
            }
        }
    }
    for n in 2..=6 {
        let e = CurvatureVector::ones(n).unwrap();
        for k in 2..=n {
            for l in 1..k {
                let (lhs, rhs) = newton_maclaurin_sides(&e, k, l).unwrap();
                ensure(lhs == rhs, || format!("no equality at e: n={n} k={k} l={l}"))?;
            }
        }
    }
    Ok("10^4 cone samples, n in 2..=6; exact equality at e".into())
}

fn revolution_kappa(rho: f64, d1: f64, d2: f64, th: f64) -> [f64; 2] {
    let q = rho * rho + d1 * d1;
    let a = (rho * rho + 2.0 * d1 * d1 - rho * d2) / q.powf(1.5);
    let b = (rho * th.sin() - d1 * th.cos()) / (rho * th.sin() * q.sqrt());
    [a.min(b), a.max(b)]
}

fn kappa_error(nt: usize, np: usize, rho: impl Fn(f64) -> f64, exact: impl Fn(f64) -> [f64; 2]) -> f64 {
    let g = SphereGrid::new(nt, np).unwrap();
    let field = RadialField::new(g.sample(|th, _| rho(th))).unwrap();
    let geom = geometry(&g, &field).unwrap();
    geom.nodes
        .iter()
        .enumerate()
        .map(|(p, n)| {
            let want = exact(g.theta(g.ring_and_column(p).0));
            (n.kappa[0] - want[0]).abs().max((n.kappa[1] - want[1]).abs())
        })
        .fold(0.0, f64::max)
}

fn geometry_convergence() -> Outcome {
    let rho = |th: f64| 2.0 + 0.1 * th.cos();
    let exact = |th: f64| revolution_kappa(rho(th), -0.1 * th.sin(), -0.1 * th.cos(), th);
    let errs: Vec<f64> = [(16, 32), (32, 64), (64, 128)]
        .map(|(a, b)| kappa_error(a, b, rho, exact))
        .to_vec();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    ensure(orders.iter().all(|o| (1.7..=2.3).contains(o)), || {
        format!("orders {orders:?}")
    })?;

    let (a, c) = (1.0f64, 1.2f64);
    let rho_e = |th: f64| a * c / (a * a * th.cos().powi(2) + c * c * th.sin().powi(2)).sqrt();
    let exact_e = |th: f64| {
        let r = rho_e(th);
        let u = (r * th.cos() / c).atan2(r * th.sin() / a);
        let w = a * a * u.sin().powi(2) + c * c * u.cos().powi(2);
        let (m, p) = (a * c / w.powf(1.5), c / (a * w.sqrt()));
        [m.min(p), m.max(p)]
    };
    let ell = kappa_error(64, 128, rho_e, exact_e);
    ensure(ell <= 5e-3, || format!("ellipsoid error {ell:.2e}"))?;
    Ok(format!(
        "orders {:.3}, {:.3}; ellipsoid error {ell:.2e}",
        orders[0], orders[1]
    ))
}

fn ellipticity_concavity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut min_slack = f64::INFINITY;
    for _ in 0..1000 {
        let (x, k) = cone_sample(&mut rng, 2, 1);
        let n = x.len();
        let alphas: Vec<f64> = (0..k - 1).map(|_| rng.random_range(0.01..2.0)).collect();
        let e = ellipticity_check(&cv(&x), &alphas, k).unwrap();
        ensure(e.elliptic, || format!("G^ii not positive at {x:?}: {:?}", e.diagonal))?;
        let bound = (n - k + 1) as f64 / k as f64;
        min_slack = min_slack.min(e.trace - bound);
        ensure(e.trace >= bound - 1e-10, || {
            format!("trace {} < {bound} at {x:?}", e.trace)
        })?;
    }
    // 2×2 matrices with eigenvalues in Γ_1
    let admissible = |rng: &mut ChaCha8Rng| loop {
        let (a, b, th) = (
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(0.0..3.2),
        );
        if a + b > 1e-3 {
            let (s, c) = f64::sin_cos(th);
            break Sym2::new(a * c * c + b * s * s, (a - b) * s * c, a * s * s + b * c * c);
        }
    };
    for _ in 0..1000 {
        let (a, b) = (admissible(&mut rng), admissible(&mut rng));
        let alpha = rng.random_range(0.0..2.0);
        ensure(concavity_check(&a, &b, &[alpha], 2).unwrap(), || {
            format!("not concave: {a:?} {b:?}")
        })?;
    }
    Ok(format!("1000 + 1000 samples; min trace slack {min_slack:.3e}"))
}

fn spec(alpha0: &str) -> ProblemSpec {
    ProblemSpec::from_strings(
        2,
        2,
        1.0,
        4.0,
        &[alpha0, "0.25/rho"],
        "2.5/rho",
        SphereGrid::new(32, 64).unwrap(),
    )
    .unwrap()
}

const BENCHMARK_ALPHA0: &str = "(0.6 - 0.05*rho)/rho^2";
const NONRADIAL_ALPHA0: &str = "(0.6 - 0.05*rho)/rho^2 * (1 + 0.05*u)";

fn dist(rho: &RadialField, c: f64) -> f64 {
    rho.values().iter().map(|r| (r - c).abs()).fold(0.0, f64::max)
}

fn start_uniqueness() -> Outcome {
    let spec = spec(BENCHMARK_ALPHA0);
    let rho0 = initial_solution(&spec).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for trial in 0..10 {
        // uniform ±5% for the first two, smooth random ±5% bumps for the rest
        let eta: Vec<f64> = match trial {
            0 => vec![1.0; spec.grid.len()],
            1 => vec![-1.0; spec.grid.len()],
            _ => {
                let c: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
                let raw = spec.grid.sample(|th, ph| {
                    let (x, y, z) = (th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos());
                    let m = [x, y, z, x * y, y * z, x * z, x * x - y * y, z * z, x * y * z];
                    c.iter().zip(m).map(|(a, b)| a * b).sum()
                });
                let max = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                raw.iter().map(|v| v / max).collect()
            }
        };
        let start: Vec<f64> = rho0
            .values()
            .iter()
            .zip(&eta)
            .map(|(r, e)| r * (1.0 + 0.05 * e))
            .collect();
        let out = newton_solve(&spec, &RadialField::new(start).unwrap(), 0.0).map_err(|e| e.to_string())?;
        worst = worst.max(dist(&out.rho, 2.5));
    }
    ensure(worst <= 1e-8, || format!("max |rho - 2.5| = {worst:.2e}"))?;
    Ok(format!("10 starts, max |rho - 2.5| = {worst:.2e}"))
}

fn every_step(spec: &ProblemSpec, report: &SolveReport) -> Result<(), String> {
    for s in &report.steps {
        let m = &s.monitors;
        ensure(m.rho_min > spec.r1 && m.rho_max < spec.r2, || {
            format!("barrier at t={}", s.t)
        })?;
        ensure(m.flags.support, || format!("support at t={}", s.t))?;
        ensure(m.sigma_min.iter().all(|v| *v > 0.0), || {
            format!("sigma at t={}: {:?}", s.t, m.sigma_min)
        })?;
    }
    ensure(report.final_t() == Some(1.0), || {
        format!("stopped at {:?}", report.final_t())
    })
}

fn close(a: Option<f64>, b: f64) -> bool {
    a.is_some_and(|a| (a - b).abs() < 1e-12)
}

fn benchmark() -> Outcome {
    let spec = spec(BENCHMARK_ALPHA0);
    let hyp = check_hypotheses(&spec, spec.solver.hypothesis_samples).map_err(|e| e.to_string())?;
    let ass1 = hyp.get(HypothesisKind::Ass1).unwrap();
    let ass2 = hyp.get(HypothesisKind::Ass2).unwrap();
    ensure(hyp.passed(), || "hypotheses fail".into())?;
    ensure(
        close(ass1.boundary_margin, 0.1 / 16.0) && close(ass1.boundary_ratio, 0.9),
        || format!("ASS1 margins {:?} {:?}", ass1.boundary_margin, ass1.boundary_ratio),
    )?;
    ensure(
        close(ass2.boundary_margin, 0.05) && close(ass2.boundary_ratio, 1.05),
        || format!("ASS2 margins {:?} {:?}", ass2.boundary_margin, ass2.boundary_ratio),
    )?;
    let (rho, report) = continue_to_one(&spec).map_err(|e| e.to_string())?;
    every_step(&spec, &report)?;
    let d = dist(&rho, 2.0);
    ensure(d <= 1e-6, || format!("|rho - 2| = {d:.2e}"))?;
    Ok(format!("{} steps, |rho - 2| = {d:.2e}", report.steps.len()))
}

fn nonradial() -> Outcome {
    let spec = spec(NONRADIAL_ALPHA0);
    let hyp = check_hypotheses(&spec, spec.solver.hypothesis_samples).map_err(|e| e.to_string())?;
    ensure(hyp.passed(), || "hypotheses fail".into())?;
    let r1 = hyp.get(HypothesisKind::Ass1).unwrap().boundary_ratio;
    let r2 = hyp.get(HypothesisKind::Ass2).unwrap().boundary_ratio;
    ensure(close(r1, 0.92) && close(r2, 1.0225), || format!("ratios {r1:?} {r2:?}"))?;
    let (rho, report) = continue_to_one(&spec).map_err(|e| e.to_string())?;
    every_step(&spec, &report)?;
    ensure(report.monitors_green(), || "monitors not green".into())?;
    let f = residual_field(&spec, &rho, 1.0).map_err(|e| e.to_string())?.inf_norm();
    let osc = rho.max() - rho.min();
    ensure(f <= 1e-8, || format!("|F| = {f:.2e}"))?;
    ensure(osc > 1e-3, || format!("osc = {osc:.2e}"))?;
    Ok(format!("|F| = {f:.2e}, osc(rho) = {osc:.4e}, ratios 0.92 / 1.0225"))
}

fn round_trip() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_weingarten");
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/benchmark.toml");
    let text = fs::read_to_string(src).map_err(|e| e.to_string())?;
    let text: Vec<String> = text
        .lines()
        .map(|l| {
            if l.starts_with("dir = ") {
                "dir = \"out\"".into()
            } else {
                l.to_string()
            }
        })
        .collect();
    let cfg = tmp.path().join("benchmark.toml");
    fs::write(&cfg, text.join("\n")).map_err(|e| e.to_string())?;
    let run = |args: &[&std::ffi::OsStr]| Command::new(bin).args(args).output().map_err(|e| e.to_string());

    let solve = run(&["solve".as_ref(), cfg.as_os_str()])?;
    ensure(solve.status.code() == Some(0), || {
        format!("solve exited {:?}", solve.status.code())
    })?;
    let csv = tmp.path().join("out/solution.csv");
    let verify = run(&["verify".as_ref(), csv.as_os_str(), cfg.as_os_str()])?;
    ensure(verify.status.code() == Some(0), || {
        format!("verify exited {:?}", verify.status.code())
    })?;
    let obj = fs::read_to_string(tmp.path().join("out/solution.obj")).map_err(|e| e.to_string())?;
    let mesh = parse_obj(&obj)?;
    let chi = mesh.euler_characteristic();
    ensure(chi == 2, || format!("V - E + F = {chi}"))?;
    Ok(format!(
        "verify exit 0; V - E + F = {} - {} + {} = 2",
        mesh.vertices.len(),
        mesh.edge_count(),
        mesh.triangles.len()
    ))
}

fn main() -> ExitCode {
    // name, check, runtime limit in seconds
    let criteria: [Criterion; 8] = [
        ("symmetric-function oracle", sigma_oracle, Some(1)),
        ("Newton-Maclaurin inequalities", newton_maclaurin, None),
        ("geometry convergence", geometry_convergence, Some(10)),
        ("ellipticity and concavity", ellipticity_concavity, Some(5)),
        ("uniqueness at t = 0", start_uniqueness, None),
        ("radial benchmark", benchmark, Some(60)),
        ("non-radial run", nonradial, None),
        ("verify and export round trip", round_trip, None),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let mut outcome = run();
        let elapsed = start.elapsed();
        if let (Ok(detail), Some(secs)) = (&outcome, limit) {
            if elapsed > Duration::from_secs(secs) {
                outcome = Err(format!("{detail}; took longer than {secs} s"));
            }
        }
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} criterion {}: {name}: {detail} ({:.2} s)",
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    if failed == 0 {
        println!("acceptance: all 8 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 8 criteria fail");
        ExitCode::FAILURE
    }
}
