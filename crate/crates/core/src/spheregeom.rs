//! Latitude-longitude discretization of S², covariant derivatives in the
//! round metric, and the geometry of radial graphs X = ρ(x)·x.
//!
//! Nodes sit at θ_i = (i + 1/2)·π/Nθ and φ_j = j·2π/Nφ, so no node lies on
//! a pole. Stencils reaching past a pole read the ghost value
//! ρ(-θ, φ) = ρ(θ, φ + π), which is why Nφ must be even.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("invalid grid {ntheta}x{nphi}: need ntheta >= 4, nphi >= 8 and nphi even")]
    InvalidGrid { ntheta: usize, nphi: usize },
    #[error("field has {found} values, grid has {expected} nodes")]
    SizeMismatch { expected: usize, found: usize },
    #[error("radius at node {node} must be positive and finite, got {value}")]
    NonPositiveRadius { node: usize, value: f64 },
    #[error("non-finite {quantity} at node {node}")]
    NonFinite { node: usize, quantity: &'static str },
}

/// Symmetric 2×2 matrix [[xx, xy], [xy, yy]] in (θ, φ) coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Self::new(a, 0.0, b)
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.xx * c, self.xy * c, self.yy * c)
    }

    pub fn add(&self, o: &Sym2) -> Self {
        Self::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    pub fn inverse(&self) -> Self {
        let d = self.det();
        Self::new(self.yy / d, -self.xy / d, self.xx / d)
    }

    /// Principal square root of a positive definite matrix:
    /// √M = (M + √det·I) / √(tr M + 2√det).
    pub fn sqrt_spd(&self) -> Self {
        let s = self.det().sqrt();
        let t = (self.trace() + 2.0 * s).sqrt();
        Self::new((self.xx + s) / t, self.xy / t, (self.yy + s) / t)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let r = half_diff.hypot(self.xy);
        [mean - r, mean + r]
    }

    /// A·B·A for symmetric A, symmetrized against rounding.
    pub fn congruence(a: &Sym2, b: &Sym2) -> Sym2 {
        let ab = [
            [a.xx * b.xx + a.xy * b.xy, a.xx * b.xy + a.xy * b.yy],
            [a.xy * b.xx + a.yy * b.xy, a.xy * b.xy + a.yy * b.yy],
        ];
        let xx = ab[0][0] * a.xx + ab[0][1] * a.xy;
        let xy = ab[0][0] * a.xy + ab[0][1] * a.yy;
        let yx = ab[1][0] * a.xx + ab[1][1] * a.xy;
        let yy = ab[1][0] * a.xy + ab[1][1] * a.yy;
        Sym2::new(xx, 0.5 * (xy + yx), yy)
    }
}

/// Staggered equiangular grid on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    ntheta: usize,
    nphi: usize,
    dtheta: f64,
    dphi: f64,
    sin_theta: Vec<f64>,
    cos_theta: Vec<f64>,
    sin_phi: Vec<f64>,
    cos_phi: Vec<f64>,
}

impl SphereGrid {
    pub fn new(ntheta: usize, nphi: usize) -> Result<Self, GeomError> {
        if ntheta < 4 || nphi < 8 || !nphi.is_multiple_of(2) {
            return Err(GeomError::InvalidGrid { ntheta, nphi });
        }
        let dtheta = PI / ntheta as f64;
        let dphi = 2.0 * PI / nphi as f64;
        let thetas: Vec<f64> = (0..ntheta).map(|i| (i as f64 + 0.5) * dtheta).collect();
        let phis: Vec<f64> = (0..nphi).map(|j| j as f64 * dphi).collect();
        Ok(Self {
            ntheta,
            nphi,
            dtheta,
            dphi,
            sin_theta: thetas.iter().map(|t| t.sin()).collect(),
            cos_theta: thetas.iter().map(|t| t.cos()).collect(),
            sin_phi: phis.iter().map(|p| p.sin()).collect(),
            cos_phi: phis.iter().map(|p| p.cos()).collect(),
        })
    }

    pub fn ntheta(&self) -> usize {
        self.ntheta
    }

    pub fn nphi(&self) -> usize {
        self.nphi
    }

    pub fn len(&self) -> usize {
        self.ntheta * self.nphi
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    pub fn dphi(&self) -> f64 {
        self.dphi
    }

    pub fn theta(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dtheta
    }

    pub fn phi(&self, j: usize) -> f64 {
        j as f64 * self.dphi
    }

    /// θ-major node index.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nphi + j
    }

    pub fn ring_and_column(&self, p: usize) -> (usize, usize) {
        (p / self.nphi, p % self.nphi)
    }

    /// Unit vector x of node `p`.
    pub fn direction(&self, p: usize) -> [f64; 3] {
        let (i, j) = self.ring_and_column(p);
        let st = self.sin_theta[i];
        [st * self.cos_phi[j], st * self.sin_phi[j], self.cos_theta[i]]
    }

    /// Node holding the value at (ring `i`, column `j`), where `i` may be
    /// one ring past either pole and `j` wraps periodically.
    pub fn halo_index(&self, i: isize, j: isize) -> usize {
        let nt = self.ntheta as isize;
        let np = self.nphi as isize;
        let (i, j) = if i < 0 {
            (-1 - i, j + np / 2)
        } else if i >= nt {
            (2 * nt - 1 - i, j + np / 2)
        } else {
            (i, j)
        };
        self.index(i as usize, j.rem_euclid(np) as usize)
    }

    /// 3×3 neighbourhood of node `p`, indexed [dθ + 1][dφ + 1].
    pub fn stencil(&self, p: usize) -> [[usize; 3]; 3] {
        let (i, j) = self.ring_and_column(p);
        let (i, j) = (i as isize, j as isize);
        let mut out = [[0; 3]; 3];
        for (a, row) in out.iter_mut().enumerate() {
            for (b, slot) in row.iter_mut().enumerate() {
                *slot = self.halo_index(i + a as isize - 1, j + b as isize - 1);
            }
        }
        out
    }

    /// Distinct nodes whose values enter the derivatives at `p`, sorted.
    pub fn footprint(&self, p: usize) -> Vec<usize> {
        let mut nodes: Vec<usize> = self.stencil(p).iter().flatten().copied().collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Samples a function of (θ, φ) at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|p| {
                let (i, j) = self.ring_and_column(p);
                f(self.theta(i), self.phi(j))
            })
            .collect()
    }

    fn check_len(&self, found: usize) -> Result<(), GeomError> {
        if found != self.len() {
            return Err(GeomError::SizeMismatch {
                expected: self.len(),
                found,
            });
        }
        Ok(())
    }
}

/// Positive radial function ρ sampled on a [`SphereGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField(Vec<f64>);

impl RadialField {
    pub fn new(values: Vec<f64>) -> Result<Self, GeomError> {
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(GeomError::NonPositiveRadius { node, value });
        }
        Ok(Self(values))
    }

    pub fn constant(grid: &SphereGrid, radius: f64) -> Result<Self, GeomError> {
        Self::new(vec![radius; grid.len()])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Value and coordinate partial derivatives at one node, in the order
/// (ρ, ρ_θ, ρ_φ, ρ_θθ, ρ_θφ, ρ_φφ) used by [`LocalJet::to_array`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalJet {
    pub value: f64,
    pub d_theta: f64,
    pub d_phi: f64,
    pub d_theta_theta: f64,
    pub d_theta_phi: f64,
    pub d_phi_phi: f64,
}

impl LocalJet {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.value,
            self.d_theta,
            self.d_phi,
            self.d_theta_theta,
            self.d_theta_phi,
            self.d_phi_phi,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            value: a[0],
            d_theta: a[1],
            d_phi: a[2],
            d_theta_theta: a[3],
            d_theta_phi: a[4],
            d_phi_phi: a[5],
        }
    }
}

/// Central-difference jet of `value` at node `p`.
pub fn local_jet(grid: &SphereGrid, value: impl Fn(usize) -> f64, p: usize) -> LocalJet {
    let s = grid.stencil(p);
    let f = |a: usize, b: usize| value(s[a][b]);
    let (ht, hp) = (grid.dtheta, grid.dphi);
    let f0 = f(1, 1);
    LocalJet {
        value: f0,
        d_theta: (f(2, 1) - f(0, 1)) / (2.0 * ht),
        d_phi: (f(1, 2) - f(1, 0)) / (2.0 * hp),
        d_theta_theta: (f(2, 1) - 2.0 * f0 + f(0, 1)) / (ht * ht),
        d_phi_phi: (f(1, 2) - 2.0 * f0 + f(1, 0)) / (hp * hp),
        d_theta_phi: (f(2, 2) - f(2, 0) - f(0, 2) + f(0, 0)) / (4.0 * ht * hp),
    }
}

/// Weights of [`local_jet`]: entry `[a][b]` holds the coefficients of the
/// value at `stencil(p)[a][b]` in each jet component. The same for every node.
pub fn jet_weights(grid: &SphereGrid) -> [[[f64; 6]; 3]; 3] {
    let (ht, hp) = (grid.dtheta, grid.dphi);
    let mut w = [[[0.0; 6]; 3]; 3];
    w[1][1][0] = 1.0;
    w[2][1][1] = 0.5 / ht;
    w[0][1][1] = -0.5 / ht;
    w[1][2][2] = 0.5 / hp;
    w[1][0][2] = -0.5 / hp;
    w[2][1][3] = 1.0 / (ht * ht);
    w[0][1][3] = 1.0 / (ht * ht);
    w[1][1][3] = -2.0 / (ht * ht);
    let c = 0.25 / (ht * hp);
    w[2][2][4] = c;
    w[0][0][4] = c;
    w[2][0][4] = -c;
    w[0][2][4] = -c;
    w[1][2][5] = 1.0 / (hp * hp);
    w[1][0][5] = 1.0 / (hp * hp);
    w[1][1][5] = -2.0 / (hp * hp);
    w
}

/// Covariant Hessian from coordinate partials, using
/// Γ^θ_φφ = -sinθ cosθ and Γ^φ_θφ = cotθ.
fn covariant_hessian_at(grid: &SphereGrid, d: &LocalJet, ring: usize) -> Sym2 {
    let (st, ct) = (grid.sin_theta[ring], grid.cos_theta[ring]);
    Sym2::new(
        d.d_theta_theta,
        d.d_theta_phi - (ct / st) * d.d_phi,
        d.d_phi_phi + st * ct * d.d_theta,
    )
}

/// D_iρ at every node, components (θ, φ) in the coordinate frame.
pub fn covariant_gradient(grid: &SphereGrid, values: &[f64]) -> Result<Vec<[f64; 2]>, GeomError> {
    grid.check_len(values.len())?;
    let get = |q: usize| values[q];
    Ok((0..grid.len())
        .map(|p| {
            let d = local_jet(grid, get, p);
            [d.d_theta, d.d_phi]
        })
        .collect())
}

/// D_iD_jρ at every node in the coordinate frame.
pub fn covariant_hessian(grid: &SphereGrid, values: &[f64]) -> Result<Vec<Sym2>, GeomError> {
    grid.check_len(values.len())?;
    let get = |q: usize| values[q];
    Ok((0..grid.len())
        .map(|p| {
            let d = local_jet(grid, get, p);
            covariant_hessian_at(grid, &d, grid.ring_and_column(p).0)
        })
        .collect())
}

/// Geometry of the radial graph at a single node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGeometry {
    pub rho: f64,
    pub position: [f64; 3],
    pub gradient: [f64; 2],
    /// v = √(1 + ρ⁻²|Dρ|²)
    pub v: f64,
    pub normal: [f64; 3],
    pub metric: Sym2,
    pub metric_inv: Sym2,
    pub second_form: Sym2,
    /// g⁻¹h, row-major.
    pub shape_operator: [[f64; 2]; 2],
    /// Principal curvatures, ascending.
    pub kappa: [f64; 2],
    /// ⟨X, ν⟩ = ρ² / √(ρ² + |Dρ|²)
    pub support: f64,
    pub mean_curvature: f64,
}

impl NodeGeometry {
    /// |A|² = Σ κ_i².
    pub fn norm_a_squared(&self) -> f64 {
        self.kappa[0] * self.kappa[0] + self.kappa[1] * self.kappa[1]
    }
}

/// Geometry at node `p` with field values read through `value`.
pub fn node_geometry(grid: &SphereGrid, value: impl Fn(usize) -> f64, p: usize) -> Result<NodeGeometry, GeomError> {
    geometry_from_jet(grid, &local_jet(grid, value, p), p)
}

/// Geometry at node `p` from a prescribed local jet.
pub fn geometry_from_jet(grid: &SphereGrid, d: &LocalJet, p: usize) -> Result<NodeGeometry, GeomError> {
    let rho = d.value;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(GeomError::NonPositiveRadius { node: p, value: rho });
    }
    let (ring, col) = grid.ring_and_column(p);
    let (st, ct) = (grid.sin_theta[ring], grid.cos_theta[ring]);
    let (sp, cp) = (grid.sin_phi[col], grid.cos_phi[col]);
    let s2 = st * st;
    let (rt, rp) = (d.d_theta, d.d_phi);
    let hess = covariant_hessian_at(grid, d, ring);

    let grad_sq = rt * rt + rp * rp / s2;
    let rho2 = rho * rho;
    let v = (1.0 + grad_sq / rho2).sqrt();

    let metric = Sym2::new(rho2 + rt * rt, rt * rp, rho2 * s2 + rp * rp);
    // g^ij = ρ⁻²(σ^ij - D^iρ D^jρ / (ρ² v²)) with D^θρ = ρ_θ, D^φρ = ρ_φ / sin²θ
    let (ut, up) = (rt, rp / s2);
    let c = 1.0 / (rho2 * v * v);
    let metric_inv = Sym2::new(1.0 - c * ut * ut, -c * ut * up, 1.0 / s2 - c * up * up).scale(1.0 / rho2);

    let second_form = Sym2::new(
        -hess.xx + rho + 2.0 * rt * rt / rho,
        -hess.xy + 2.0 * rt * rp / rho,
        -hess.yy + rho * s2 + 2.0 * rp * rp / rho,
    )
    .scale(1.0 / v);

    let gi = &metric_inv;
    let h = &second_form;
    let shape_operator = [
        [gi.xx * h.xx + gi.xy * h.xy, gi.xx * h.xy + gi.xy * h.yy],
        [gi.xy * h.xx + gi.yy * h.xy, gi.xy * h.xy + gi.yy * h.yy],
    ];

    let inv_sqrt = metric.sqrt_spd().inverse();
    let kappa = Sym2::congruence(&inv_sqrt, &second_form).eigenvalues();

    let support = rho2 / (rho2 + grad_sq).sqrt();

    let radial = [st * cp, st * sp, ct];
    let e_theta = [ct * cp, ct * sp, -st];
    let e_phi = [-sp, cp, 0.0];
    let (a, b) = (rt / rho, rp / (rho * st));
    let normal = [0, 1, 2].map(|m| (radial[m] - a * e_theta[m] - b * e_phi[m]) / v);
    let position = radial.map(|x| rho * x);

    let geom = NodeGeometry {
        rho,
        position,
        gradient: [rt, rp],
        v,
        normal,
        metric,
        metric_inv,
        second_form,
        shape_operator,
        kappa,
        support,
        mean_curvature: kappa[0] + kappa[1],
    };
    let finite = |x: f64| x.is_finite();
    let checks: [(&'static str, bool); 5] = [
        ("gradient", finite(rt) && finite(rp)),
        ("second fundamental form", [h.xx, h.xy, h.yy].into_iter().all(finite)),
        ("metric", [metric.xx, metric.xy, metric.yy].into_iter().all(finite)),
        ("principal curvature", kappa.into_iter().all(finite)),
        ("support", finite(support)),
    ];
    if let Some((quantity, _)) = checks.iter().find(|(_, ok)| !ok) {
        return Err(GeomError::NonFinite { node: p, quantity });
    }
    Ok(geom)
}

/// Per-node geometry of the graph X = ρ(x)x.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryState {
    pub nodes: Vec<NodeGeometry>,
}

impl GeometryState {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn min_support(&self) -> f64 {
        self.nodes.iter().map(|n| n.support).fold(f64::INFINITY, f64::min)
    }

    pub fn max_mean_curvature(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| n.mean_curvature)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_kappa(&self) -> f64 {
        self.nodes
            .iter()
            .flat_map(|n| n.kappa)
            .map(f64::abs)
            .fold(0.0, f64::max)
    }
}

pub fn geometry(grid: &SphereGrid, rho: &RadialField) -> Result<GeometryState, GeomError> {
    grid.check_len(rho.len())?;
    let values = rho.values();
    let nodes = (0..grid.len())
        .into_par_iter()
        .map(|p| node_geometry(grid, |q| values[q], p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GeometryState { nodes })
}
