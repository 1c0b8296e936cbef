//! The homotopy family of curvature operators
//!
//! ```text
//! F(ρ; t) = σ_k/σ_{k-1}(κ) - Σ_{l<k-1} t·α_l(X)·σ_l/σ_{k-1}(κ) - α_{k-1}(X, t)
//! α_{k-1}(X, t) = t·α_{k-1}(X) + (1 - t)·φ(|X|)·σ_k(e)/σ_{k-1}(e)·1/|X|
//! ```
//!
//! with its finite-difference linearization and pointwise diagnostics of
//! ellipticity and concavity in eigenvalue coordinates.

use rayon::prelude::*;
use thiserror::Error;

use crate::exprlang::{self, EvalEnv, EvalError, Expr, ParseError, Var};
use crate::sparse::SparseMatrix;
use crate::spheregeom::{self, GeomError, GeometryState, NodeGeometry, RadialField, SphereGrid, Sym2};
use crate::symmfunc::{self, CurvatureVector, SymmError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurvOpError {
    #[error("invalid problem: {0}")]
    InvalidSpec(String),
    #[error("cannot parse {name}: {source}")]
    Parse { name: String, source: ParseError },
    #[error("evaluating {name}: {source}")]
    Eval { name: String, source: EvalError },
    #[error("curvatures at node {node} leave the admissible cone (sigma_{sigma} <= 0)")]
    Inadmissible { node: usize, sigma: usize },
    #[error("PDE operator requires n = 2, problem has n = {0}")]
    Dimension(usize),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    Symm(#[from] SymmError),
}

/// Newton and continuation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Residual ∞-norm at which Newton stops.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub t_step_initial: f64,
    pub t_step_max: f64,
    pub t_step_min: f64,
    pub hypothesis_samples: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            max_halvings: 8,
            t_step_initial: 0.1,
            t_step_max: 0.25,
            t_step_min: 1e-4,
            hypothesis_samples: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub n: usize,
    pub k: usize,
    pub r1: f64,
    pub r2: f64,
    /// α_0, ..., α_{k-1}.
    pub alphas: Vec<Expr>,
    pub phi: Expr,
    pub grid: SphereGrid,
    pub solver: SolverSettings,
}

impl ProblemSpec {
    pub fn new(
        n: usize,
        k: usize,
        r1: f64,
        r2: f64,
        alphas: Vec<Expr>,
        phi: Expr,
        grid: SphereGrid,
    ) -> Result<Self, CurvOpError> {
        if k < 2 || k > n {
            return Err(CurvOpError::InvalidSpec(format!("need 2 <= k <= n, got k={k}, n={n}")));
        }
        if !(r1 > 0.0 && r1 < r2 && r2.is_finite()) {
            return Err(CurvOpError::InvalidSpec(format!(
                "need 0 < r1 < r2, got r1={r1}, r2={r2}"
            )));
        }
        if alphas.len() != k {
            return Err(CurvOpError::InvalidSpec(format!(
                "expected {k} coefficient functions alpha0..alpha{}, got {}",
                k - 1,
                alphas.len()
            )));
        }
        if [Var::X1, Var::X2, Var::X3, Var::U].into_iter().any(|v| phi.uses(v)) {
            return Err(CurvOpError::InvalidSpec("phi may depend on rho only".into()));
        }
        Ok(Self {
            n,
            k,
            r1,
            r2,
            alphas,
            phi,
            grid,
            solver: SolverSettings::default(),
        })
    }

    /// Parses the coefficient expressions from text.
    pub fn from_strings(
        n: usize,
        k: usize,
        r1: f64,
        r2: f64,
        alphas: &[&str],
        phi: &str,
        grid: SphereGrid,
    ) -> Result<Self, CurvOpError> {
        let alphas = alphas
            .iter()
            .enumerate()
            .map(|(l, s)| {
                exprlang::parse(s).map_err(|source| CurvOpError::Parse {
                    name: format!("alpha{l}"),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let phi = exprlang::parse(phi).map_err(|source| CurvOpError::Parse {
            name: "phi".into(),
            source,
        })?;
        Self::new(n, k, r1, r2, alphas, phi, grid)
    }

    pub fn with_solver(mut self, solver: SolverSettings) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_grid(mut self, grid: SphereGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn eval_alpha(&self, l: usize, env: &EvalEnv) -> Result<f64, CurvOpError> {
        exprlang::evaluate(&self.alphas[l], env).map_err(|source| CurvOpError::Eval {
            name: format!("alpha{l}"),
            source,
        })
    }

    /// φ(ρ).
    pub fn eval_phi(&self, rho: f64) -> Result<f64, CurvOpError> {
        let env = EvalEnv::on_ray(rho, [0.0, 0.0, 1.0]).map_err(|source| CurvOpError::Eval {
            name: "phi".into(),
            source,
        })?;
        exprlang::evaluate(&self.phi, &env).map_err(|source| CurvOpError::Eval {
            name: "phi".into(),
            source,
        })
    }

    /// σ_l(e) for e = (1, ..., 1) of length n.
    pub fn sigma_e(&self, l: usize) -> f64 {
        symmfunc::binomial(self.n, l)
    }
}

/// α_{k-1}(X, t).
pub fn alpha_blend(spec: &ProblemSpec, env: &EvalEnv, t: f64) -> Result<f64, CurvOpError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(CurvOpError::InvalidSpec(format!("t = {t} outside [0, 1]")));
    }
    let k = spec.k;
    let target = if t > 0.0 { t * spec.eval_alpha(k - 1, env)? } else { 0.0 };
    let start = if t < 1.0 {
        (1.0 - t) * spec.eval_phi(env.rho())? * (spec.sigma_e(k) / spec.sigma_e(k - 1)) / env.rho()
    } else {
        0.0
    };
    Ok(target + start)
}

/// Per-node values of F(ρ, x; t).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualField(pub Vec<f64>);

impl ResidualField {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn inf_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

fn node_env(node: &NodeGeometry) -> Result<EvalEnv, CurvOpError> {
    EvalEnv::new(node.rho, node.position).map_err(|source| CurvOpError::Eval {
        name: "evaluation point".into(),
        source,
    })
}

/// F at a single node. `index` is only used for error reporting.
pub fn residual_at(spec: &ProblemSpec, node: &NodeGeometry, index: usize, t: f64) -> Result<f64, CurvOpError> {
    if spec.n != 2 {
        return Err(CurvOpError::Dimension(spec.n));
    }
    let k = spec.k;
    let s = symmfunc::sigma_all(&CurvatureVector::new(node.kappa.to_vec())?);
    if let Some(j) = (1..k).find(|&j| s[j] <= 0.0) {
        return Err(CurvOpError::Inadmissible { node: index, sigma: j });
    }
    let env = node_env(node)?;
    let mut value = s[k] / s[k - 1];
    if t > 0.0 {
        for l in 0..k - 1 {
            value -= t * spec.eval_alpha(l, &env)? * s[l] / s[k - 1];
        }
    }
    Ok(value - alpha_blend(spec, &env, t)?)
}

pub fn residual(spec: &ProblemSpec, geom: &GeometryState, t: f64) -> Result<ResidualField, CurvOpError> {
    let values = geom
        .nodes
        .par_iter()
        .enumerate()
        .map(|(p, node)| residual_at(spec, node, p, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ResidualField(values))
}

/// Geometry followed by the residual.
pub fn residual_field(spec: &ProblemSpec, rho: &RadialField, t: f64) -> Result<ResidualField, CurvOpError> {
    let geom = spheregeom::geometry(&spec.grid, rho)?;
    residual(spec, &geom, t)
}

/// Nodes whose residual depends on the value at each node.
fn influence_lists(grid: &SphereGrid) -> Vec<Vec<usize>> {
    let mut lists = vec![Vec::new(); grid.len()];
    for p in 0..grid.len() {
        for q in grid.footprint(p) {
            lists[q].push(p);
        }
    }
    lists
}

/// ∂F_p/∂ρ_q through the local jet of ρ at p.
///
/// F_p depends on ρ only through the jet (ρ, ρ_θ, ρ_φ, ρ_θθ, ρ_θφ, ρ_φφ) at p,
/// and each jet component is a fixed linear combination of stencil values.
/// The six partials ∂F_p/∂u_m are taken by central differences with step
/// ε^{1/3}·max(1, |u_m|) and chained with the exact stencil weights. Differencing in
/// jet space keeps the error independent of the 1/sin²θ growth of the stencil
/// weights near the poles, which [`jacobian_column_probe`] does not.
pub fn jacobian(spec: &ProblemSpec, rho: &RadialField, t: f64) -> Result<SparseMatrix, CurvOpError> {
    let grid = &spec.grid;
    check_len(grid, rho)?;
    let values = rho.values();
    let weights = spheregeom::jet_weights(grid);
    let cbrt_eps = f64::EPSILON.cbrt();

    let rows = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let jet = spheregeom::local_jet(grid, |q| values[q], p);
            let u = jet.to_array();
            let at = |probe: [f64; 6]| -> Result<f64, CurvOpError> {
                let node = spheregeom::geometry_from_jet(grid, &spheregeom::LocalJet::from_array(probe), p)?;
                residual_at(spec, &node, p, t)
            };
            let mut dfdu = [0.0; 6];
            for m in 0..6 {
                let (mut up, mut down) = (u, u);
                up[m] = u[m] + cbrt_eps * u[m].abs().max(1.0);
                down[m] = u[m] - cbrt_eps * u[m].abs().max(1.0);
                dfdu[m] = (at(up)? - at(down)?) / (up[m] - down[m]);
            }
            let stencil = grid.stencil(p);
            let mut entries = Vec::with_capacity(9);
            for a in 0..3 {
                for b in 0..3 {
                    let w = &weights[a][b];
                    let v: f64 = (0..6).map(|m| w[m] * dfdu[m]).sum();
                    entries.push((p, stencil[a][b], v));
                }
            }
            Ok(entries)
        })
        .collect::<Result<Vec<_>, CurvOpError>>()?;

    let n = grid.len();
    Ok(SparseMatrix::from_triplets(n, n, rows.into_iter().flatten().collect()))
}

/// ∂F_p/∂ρ_q by one-sided differences of the full residual pipeline, one
/// column at a time, with step √ε·max(1, |ρ_q|).
///
/// Only the nodes whose stencil contains q are re-evaluated for column q.
/// Accurate on coarse grids; on fine grids the truncation error near the
/// poles swamps the smooth modes, so Newton uses [`jacobian`].
pub fn jacobian_column_probe(spec: &ProblemSpec, rho: &RadialField, t: f64) -> Result<SparseMatrix, CurvOpError> {
    let grid = &spec.grid;
    check_len(grid, rho)?;
    let base = residual_field(spec, rho, t)?;
    let values = rho.values();
    let influence = influence_lists(grid);
    let sqrt_eps = f64::EPSILON.sqrt();

    let columns = (0..grid.len())
        .into_par_iter()
        .map(|q| {
            let trial = values[q] + sqrt_eps * values[q].abs().max(1.0);
            let h = trial - values[q];
            let probe = |idx: usize| if idx == q { trial } else { values[idx] };
            influence[q]
                .iter()
                .map(|&p| {
                    let node = spheregeom::node_geometry(grid, probe, p)?;
                    let f = residual_at(spec, &node, p, t)?;
                    Ok((p, q, (f - base.0[p]) / h))
                })
                .collect::<Result<Vec<_>, CurvOpError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;

    let n = grid.len();
    Ok(SparseMatrix::from_triplets(
        n,
        n,
        columns.into_iter().flatten().collect(),
    ))
}

fn check_len(grid: &SphereGrid, rho: &RadialField) -> Result<(), CurvOpError> {
    if rho.len() != grid.len() {
        return Err(GeomError::SizeMismatch {
            expected: grid.len(),
            found: rho.len(),
        }
        .into());
    }
    Ok(())
}

/// G(λ) = σ_k/σ_{k-1} - Σ_{l ≤ k-2} α_l σ_l/σ_{k-1}; `alphas` holds α_0..α_{k-2}.
pub fn operator_value(lambda: &CurvatureVector, alphas: &[f64], k: usize) -> Result<f64, CurvOpError> {
    check_operator_args(lambda, alphas, k)?;
    let s = symmfunc::sigma_all(lambda);
    let numerator = s[k] - alphas.iter().enumerate().map(|(l, a)| a * s[l]).sum::<f64>();
    Ok(numerator / s[k - 1])
}

fn check_operator_args(lambda: &CurvatureVector, alphas: &[f64], k: usize) -> Result<(), CurvOpError> {
    let n = lambda.len();
    if k < 2 || k > n {
        return Err(SymmError::Domain { what: "k", value: k, n }.into());
    }
    if alphas.len() != k - 1 {
        return Err(CurvOpError::InvalidSpec(format!(
            "expected {} coefficients alpha_0..alpha_{}, got {}",
            k - 1,
            k - 2,
            alphas.len()
        )));
    }
    if alphas.iter().any(|a| !(*a >= 0.0)) {
        return Err(CurvOpError::InvalidSpec("coefficients must be non-negative".into()));
    }
    if !symmfunc::in_gamma_cone(lambda, k - 1)? {
        return Err(SymmError::OutsideCone { k: k - 1 }.into());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ellipticity {
    /// All G^{ii} > 0.
    pub elliptic: bool,
    pub min_diagonal: f64,
    pub trace: f64,
    pub diagonal: Vec<f64>,
}

/// G^{ii} = ∂G/∂λ_i in eigenvalue coordinates.
pub fn ellipticity_check(lambda: &CurvatureVector, alphas: &[f64], k: usize) -> Result<Ellipticity, CurvOpError> {
    check_operator_args(lambda, alphas, k)?;
    let n = lambda.len();
    let s = symmfunc::sigma_all(lambda);
    let numerator = s[k] - alphas.iter().enumerate().map(|(l, a)| a * s[l]).sum::<f64>();
    let denom = s[k - 1];
    let mut diagonal = Vec::with_capacity(n);
    for i in 0..n {
        // ∂σ_m/∂λ_i = σ_{m-1}(λ|i)
        let d = |m: usize| -> Result<f64, SymmError> {
            if m == 0 {
                Ok(0.0)
            } else {
                symmfunc::sigma_without(lambda, m - 1, i)
            }
        };
        let mut d_num = d(k)?;
        for (l, a) in alphas.iter().enumerate() {
            d_num -= a * d(l)?;
        }
        diagonal.push((d_num * denom - numerator * d(k - 1)?) / (denom * denom));
    }
    let min_diagonal = diagonal.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Ellipticity {
        elliptic: min_diagonal > 0.0,
        min_diagonal,
        trace: diagonal.iter().sum(),
        diagonal,
    })
}

fn operator_on_matrix(m: &Sym2, alphas: &[f64], k: usize) -> Result<f64, CurvOpError> {
    let lambda = CurvatureVector::new(m.eigenvalues().to_vec())?;
    operator_value(&lambda, alphas, k)
}

/// Midpoint concavity G((A+B)/2) ≥ (G(A) + G(B))/2 - 1e-10 on symmetric 2×2 matrices.
pub fn concavity_check(a: &Sym2, b: &Sym2, alphas: &[f64], k: usize) -> Result<bool, CurvOpError> {
    let ga = operator_on_matrix(a, alphas, k)?;
    let gb = operator_on_matrix(b, alphas, k)?;
    let gm = operator_on_matrix(&a.add(b).scale(0.5), alphas, k)?;
    Ok(gm >= 0.5 * (ga + gb) - 1e-10)
}
