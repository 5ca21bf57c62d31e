//! Reference grids on `[0, 2π) × [0, 1]`, sampled fields, J-weighted
//! quadrature, finite-difference gradients and the discrete Dirichlet forms.
//!
//! Thin-domain fields live on the tensor grid `(θ_j, σ_k)` with
//! `θ_j = 2πj / M_θ` (periodic) and `σ_k = k / (M_σ - 1)`. The physical point
//! is `γ(θ) + R(θ, σ) ν(θ)` with `R = ε (g0 + σ g)`, and the quadrature weight
//! of node `(j, k)` is `J m ε g Δθ Δσ τ_k` with trapezoid factors `τ_k`.
//!
//! Gradients are expressed in the orthonormal frame `(t, ν)` of the base
//! point: the normal component is `u_σ / (ε g)` and the tangential component
//! is `(u_θ + u_σ σ_θ) / (m J)` with `σ_θ = -(g0' + σ g') / g` the
//! θ-derivative of σ at fixed offset `r`.

use std::f64::consts::PI;

use ndarray::{Array2, Array3, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};
use crate::geometry::{FrameSample, PlaneCurve, Point2, ThicknessProfile, ThinDomain};

pub const DEFAULT_M_THETA: usize = 256;
pub const DEFAULT_M_SIGMA: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    L4,
    H1Seminorm,
    Sup,
}

/// Nonlinearity strength and number of components of the GL system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GLParams {
    pub lambda: f64,
    pub components: usize,
    /// When false the reaction term is dropped and the flow is the plain heat
    /// equation. Only meant for linear-regime tests.
    pub reaction: bool,
}

impl GLParams {
    pub fn new(lambda: f64, components: usize) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        if components == 0 {
            return Err(Error::InvalidParameter("component count must be at least 1".into()));
        }
        Ok(GLParams {
            lambda,
            components,
            reaction: true,
        })
    }

    pub fn linear(mut self) -> Self {
        self.reaction = false;
        self
    }
}

/// Position of θ-node `j` in the folded ordering `0, 1, M-1, 2, M-2, ...`,
/// which turns periodic neighbours at distance `d` into positions at most
/// `2d` apart and so keeps the periodic operators banded.
pub fn folded_position(j: usize, m: usize) -> usize {
    if j == 0 {
        0
    } else if 2 * j <= m {
        2 * j - 1
    } else {
        2 * (m - j)
    }
}

/// Up to five `(θ-index, σ-index, coefficient)` entries of one difference row.
#[derive(Debug, Clone, Copy, Default)]
pub struct Stencil {
    entries: [(usize, usize, f64); 5],
    len: usize,
}

impl Stencil {
    fn push(&mut self, j: usize, k: usize, c: f64) {
        self.entries[self.len] = (j, k, c);
        self.len += 1;
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries[..self.len]
    }

    pub fn apply(&self, values: ArrayView2<f64>) -> f64 {
        self.entries().iter().map(|&(j, k, c)| c * values[[j, k]]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceField {
    /// Shape `(components, M_θ)`.
    pub values: Array2<f64>,
}

impl SurfaceField {
    pub fn zeros(components: usize, m_theta: usize) -> Self {
        SurfaceField {
            values: Array2::zeros((components, m_theta)),
        }
    }

    pub fn components(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, a: f64) -> Self {
        SurfaceField {
            values: &self.values * a,
        }
    }

    pub fn sub(&self, other: &SurfaceField) -> Self {
        SurfaceField {
            values: &self.values - &other.values,
        }
    }

    pub fn add(&self, other: &SurfaceField) -> Self {
        SurfaceField {
            values: &self.values + &other.values,
        }
    }

    /// Every `factor`-th node; maps a fine periodic grid onto a nested coarse one.
    pub fn restrict(&self, factor: usize) -> Self {
        let m = self.len() / factor;
        SurfaceField {
            values: Array2::from_shape_fn((self.components(), m), |(c, j)| self.values[[c, j * factor]]),
        }
    }

    /// Euclidean length of the component vector at node `j`.
    pub fn magnitude(&self, j: usize) -> f64 {
        self.values.column(j).iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThinField {
    /// Shape `(components, M_θ, M_σ)`.
    pub values: Array3<f64>,
}

impl ThinField {
    pub fn zeros(components: usize, m_theta: usize, m_sigma: usize) -> Self {
        ThinField {
            values: Array3::zeros((components, m_theta, m_sigma)),
        }
    }

    pub fn components(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        let s = self.values.shape();
        (s[0], s[1], s[2])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, a: f64) -> Self {
        ThinField {
            values: &self.values * a,
        }
    }

    pub fn sub(&self, other: &ThinField) -> Self {
        ThinField {
            values: &self.values - &other.values,
        }
    }

    pub fn add(&self, other: &ThinField) -> Self {
        ThinField {
            values: &self.values + &other.values,
        }
    }

    pub fn magnitude(&self, j: usize, k: usize) -> f64 {
        (0..self.components())
            .map(|c| self.values[[c, j, k]].powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Values at a fixed σ-index as a surface field.
    pub fn restrict_sigma(&self, k: usize) -> SurfaceField {
        SurfaceField {
            values: self.values.index_axis(Axis(2), k).to_owned(),
        }
    }
}

/// Physical gradient in the `(t, ν)` frame of the base point, per component.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinGradient {
    pub tangential: Array3<f64>,
    pub normal: Array3<f64>,
}

#[derive(Debug, Clone)]
pub struct SurfaceGrid {
    m_theta: usize,
    dtheta: f64,
    theta: Vec<f64>,
    frames: Vec<FrameSample>,
}

impl SurfaceGrid {
    pub fn new(curve: &PlaneCurve, m_theta: usize) -> Result<Self> {
        if m_theta < 4 {
            return Err(Error::GridTooCoarse(format!("M_theta = {m_theta} < 4")));
        }
        let dtheta = 2.0 * PI / m_theta as f64;
        let theta: Vec<f64> = (0..m_theta).map(|j| j as f64 * dtheta).collect();
        let frames = theta.iter().map(|&t| curve.frame(t)).collect();
        Ok(SurfaceGrid {
            m_theta,
            dtheta,
            theta,
            frames,
        })
    }

    pub fn m_theta(&self) -> usize {
        self.m_theta
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.theta[j]
    }

    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }

    pub fn frame(&self, j: usize) -> &FrameSample {
        &self.frames[j]
    }

    pub fn metric(&self, j: usize) -> f64 {
        self.frames[j].metric
    }

    /// Quadrature weight `m(θ_j) Δθ` of the surface measure.
    pub fn weight(&self, j: usize) -> f64 {
        self.frames[j].metric * self.dtheta
    }

    pub fn length(&self) -> f64 {
        (0..self.m_theta).map(|j| self.weight(j)).sum()
    }

    #[inline]
    pub fn next(&self, j: usize) -> usize {
        (j + 1) % self.m_theta
    }

    #[inline]
    pub fn prev(&self, j: usize) -> usize {
        (j + self.m_theta - 1) % self.m_theta
    }

    /// Samples `f(θ)` (one value per component) at every node.
    pub fn sample(&self, components: usize, f: impl Fn(f64) -> Vec<f64>) -> SurfaceField {
        let mut field = SurfaceField::zeros(components, self.m_theta);
        for j in 0..self.m_theta {
            let v = f(self.theta[j]);
            assert_eq!(v.len(), components, "sampler returned wrong component count");
            for c in 0..components {
                field.values[[c, j]] = v[c];
            }
        }
        field
    }

    /// Samples a profile function of θ.
    pub fn sample_scalar(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.theta.iter().map(|&t| f(t)).collect()
    }

    pub fn check(&self, field: &SurfaceField) -> Result<()> {
        if field.len() != self.m_theta {
            return Err(Error::GridMismatch(format!(
                "surface field has {} nodes, grid has {}",
                field.len(),
                self.m_theta
            )));
        }
        Ok(())
    }

    /// Tangential derivative coefficient `(1/m) ∂_θ v` by centered periodic
    /// differences; the gradient itself is this value times `t`.
    pub fn tangential_derivative(&self, v: &SurfaceField) -> SurfaceField {
        let mut out = SurfaceField::zeros(v.components(), self.m_theta);
        let h = 2.0 * self.dtheta;
        for c in 0..v.components() {
            for j in 0..self.m_theta {
                out.values[[c, j]] =
                    (v.values[[c, self.next(j)]] - v.values[[c, self.prev(j)]]) / (h * self.metric(j));
            }
        }
        out
    }

    /// `Σ_j w_j ρ_j a_j · b_j` with optional extra weight `ρ`.
    pub fn inner(&self, a: &SurfaceField, b: &SurfaceField, weight: Option<&[f64]>) -> f64 {
        let mut s = 0.0;
        for j in 0..self.m_theta {
            let rho = weight.map_or(1.0, |w| w[j]);
            let dot: f64 = a.values.column(j).iter().zip(b.values.column(j)).map(|(x, y)| x * y).sum();
            s += self.weight(j) * rho * dot;
        }
        s
    }

    pub fn norm(&self, field: &SurfaceField, kind: NormKind) -> f64 {
        self.weighted_norm(field, kind, None)
    }

    /// Norms with an optional extra density (e.g. the thickness `g`).
    pub fn weighted_norm(&self, field: &SurfaceField, kind: NormKind, weight: Option<&[f64]>) -> f64 {
        match kind {
            NormKind::L2 => self.inner(field, field, weight).max(0.0).sqrt(),
            NormKind::L4 => {
                let s: f64 = (0..self.m_theta)
                    .map(|j| self.weight(j) * weight.map_or(1.0, |w| w[j]) * field.magnitude(j).powi(4))
                    .sum();
                s.powf(0.25)
            }
            NormKind::H1Seminorm => {
                let d = self.tangential_derivative(field);
                self.inner(&d, &d, weight).max(0.0).sqrt()
            }
            NormKind::Sup => (0..self.m_theta).map(|j| field.magnitude(j)).fold(0.0, f64::max),
        }
    }

    /// `(g ∇_Γ v, ∇_Γ z)_{L²(Γ)}`.
    pub fn dirichlet_form(&self, v: &SurfaceField, z: &SurfaceField, profile: &ThicknessProfile) -> Result<f64> {
        self.check(v)?;
        self.check(z)?;
        if v.components() != z.components() {
            return Err(Error::GridMismatch("component counts differ".into()));
        }
        let g = self.sample_scalar(|t| profile.g(t));
        let (dv, dz) = (self.tangential_derivative(v), self.tangential_derivative(z));
        Ok(self.inner(&dv, &dz, Some(&g)))
    }

    /// Row of the tangential derivative at node `j`: `(θ-index, coefficient)`.
    pub fn derivative_row(&self, j: usize) -> [(usize, f64); 2] {
        let c = 1.0 / (2.0 * self.dtheta * self.metric(j));
        [(self.next(j), c), (self.prev(j), -c)]
    }
}

/// Geometry cached at one node of the thin grid.
#[derive(Debug, Clone, Copy)]
pub struct NodeGeometry {
    pub sigma: f64,
    pub r: f64,
    pub jacobian: f64,
    /// Quadrature weight `J m ε g Δθ Δσ τ_k`.
    pub weight: f64,
    /// ∂σ/∂θ at fixed r.
    pub sigma_theta: f64,
}

#[derive(Debug, Clone)]
pub struct ThinGrid {
    surface: SurfaceGrid,
    domain: ThinDomain,
    m_sigma: usize,
    dsigma: f64,
    g: Vec<f64>,
    dg0: Vec<f64>,
    dg1: Vec<f64>,
    nodes: Vec<NodeGeometry>,
}

impl ThinGrid {
    pub fn new(domain: &ThinDomain, m_theta: usize, m_sigma: usize) -> Result<Self> {
        domain.ensure_valid()?;
        if m_sigma < 3 {
            return Err(Error::GridTooCoarse(format!("M_sigma = {m_sigma} < 3")));
        }
        let surface = SurfaceGrid::new(&domain.curve, m_theta)?;
        let eps = domain.epsilon;
        let dsigma = 1.0 / (m_sigma - 1) as f64;
        let profile = &domain.profile;
        let g = surface.sample_scalar(|t| profile.g(t));
        let g0 = surface.sample_scalar(|t| profile.g0.value(t));
        let dg0 = surface.sample_scalar(|t| profile.g0.derivative(t));
        let dg1 = surface.sample_scalar(|t| profile.g1.derivative(t));
        let mut nodes = Vec::with_capacity(m_theta * m_sigma);
        for j in 0..m_theta {
            let frame = surface.frame(j);
            let dg = dg1[j] - dg0[j];
            for k in 0..m_sigma {
                let sigma = k as f64 * dsigma;
                let r = eps * (g0[j] + sigma * g[j]);
                let jacobian = 1.0 - r * frame.kappa_w;
                let tau = if k == 0 || k == m_sigma - 1 { 0.5 } else { 1.0 };
                nodes.push(NodeGeometry {
                    sigma,
                    r,
                    jacobian,
                    weight: jacobian * frame.metric * eps * g[j] * surface.dtheta() * dsigma * tau,
                    sigma_theta: -(dg0[j] + sigma * dg) / g[j],
                });
            }
        }
        Ok(ThinGrid {
            surface,
            domain: domain.clone(),
            m_sigma,
            dsigma,
            g,
            dg0,
            dg1,
            nodes,
        })
    }

    pub fn surface(&self) -> &SurfaceGrid {
        &self.surface
    }

    pub fn domain(&self) -> &ThinDomain {
        &self.domain
    }

    pub fn epsilon(&self) -> f64 {
        self.domain.epsilon
    }

    pub fn m_theta(&self) -> usize {
        self.surface.m_theta()
    }

    pub fn m_sigma(&self) -> usize {
        self.m_sigma
    }

    pub fn dsigma(&self) -> f64 {
        self.dsigma
    }

    /// Thickness `g(θ_j)`.
    pub fn g(&self, j: usize) -> f64 {
        self.g[j]
    }

    pub fn g_values(&self) -> &[f64] {
        &self.g
    }

    pub fn dg0(&self, j: usize) -> f64 {
        self.dg0[j]
    }

    pub fn dg1(&self, j: usize) -> f64 {
        self.dg1[j]
    }

    #[inline]
    pub fn node(&self, j: usize, k: usize) -> &NodeGeometry {
        &self.nodes[j * self.m_sigma + k]
    }

    /// Trapezoid factor of σ-node `k` times Δσ.
    pub fn sigma_weight(&self, k: usize) -> f64 {
        let tau = if k == 0 || k == self.m_sigma - 1 { 0.5 } else { 1.0 };
        tau * self.dsigma
    }

    /// Physical position of node `(j, k)`.
    pub fn position(&self, j: usize, k: usize) -> Point2 {
        let f = self.surface.frame(j);
        let r = self.node(j, k).r;
        [f.position[0] + r * f.normal[0], f.position[1] + r * f.normal[1]]
    }

    /// Samples `f(x, θ, σ)` at every node.
    pub fn sample(&self, components: usize, f: impl Fn(Point2, f64, f64) -> Vec<f64>) -> ThinField {
        let mut field = ThinField::zeros(components, self.m_theta(), self.m_sigma);
        for j in 0..self.m_theta() {
            for k in 0..self.m_sigma {
                let v = f(self.position(j, k), self.surface.theta(j), self.node(j, k).sigma);
                assert_eq!(v.len(), components, "sampler returned wrong component count");
                for c in 0..components {
                    field.values[[c, j, k]] = v[c];
                }
            }
        }
        field
    }

    pub fn check(&self, field: &ThinField) -> Result<()> {
        let (_, m, s) = field.shape();
        if m != self.m_theta() || s != self.m_sigma {
            return Err(Error::GridMismatch(format!(
                "thin field is {m}x{s}, grid is {}x{}",
                self.m_theta(),
                self.m_sigma
            )));
        }
        Ok(())
    }

    fn sigma_row(&self, j: usize, k: usize) -> Stencil {
        let h = 2.0 * self.dsigma;
        let mut s = Stencil::default();
        let last = self.m_sigma - 1;
        if k == 0 {
            s.push(j, 0, -3.0 / h);
            s.push(j, 1, 4.0 / h);
            s.push(j, 2, -1.0 / h);
        } else if k == last {
            s.push(j, last, 3.0 / h);
            s.push(j, last - 1, -4.0 / h);
            s.push(j, last - 2, 1.0 / h);
        } else {
            s.push(j, k + 1, 1.0 / h);
            s.push(j, k - 1, -1.0 / h);
        }
        s
    }

    /// Difference rows of the tangential and normal gradient components at `(j, k)`.
    pub fn gradient_stencils(&self, j: usize, k: usize) -> (Stencil, Stencil) {
        let node = self.node(j, k);
        let m = self.surface.metric(j);
        let us = self.sigma_row(j, k);
        let ct = 1.0 / (m * node.jacobian);
        let cn = 1.0 / (self.epsilon() * self.g[j]);
        let mut tangential = Stencil::default();
        let dt = 1.0 / (2.0 * self.surface.dtheta());
        tangential.push(self.surface.next(j), k, ct * dt);
        tangential.push(self.surface.prev(j), k, -ct * dt);
        let mut normal = Stencil::default();
        for &(jj, kk, c) in us.entries() {
            tangential.push(jj, kk, ct * node.sigma_theta * c);
            normal.push(jj, kk, cn * c);
        }
        (tangential, normal)
    }

    pub fn gradient(&self, u: &ThinField) -> Result<ThinGradient> {
        self.check(u)?;
        let shape = u.values.raw_dim();
        let mut tangential = Array3::zeros(shape);
        let mut normal = Array3::zeros(shape);
        for j in 0..self.m_theta() {
            for k in 0..self.m_sigma {
                let (ts, ns) = self.gradient_stencils(j, k);
                for c in 0..u.components() {
                    let view = u.values.index_axis(Axis(0), c);
                    tangential[[c, j, k]] = ts.apply(view);
                    normal[[c, j, k]] = ns.apply(view);
                }
            }
        }
        Ok(ThinGradient { tangential, normal })
    }

    /// Cartesian gradient `(∂_1 u_c, ∂_2 u_c)` at node `(j, k)`.
    pub fn cartesian(&self, grad: &ThinGradient, c: usize, j: usize, k: usize) -> Point2 {
        let f = self.surface.frame(j);
        let (a, b) = (grad.tangential[[c, j, k]], grad.normal[[c, j, k]]);
        [a * f.tangent[0] + b * f.normal[0], a * f.tangent[1] + b * f.normal[1]]
    }

    /// `Σ_n w_n a_n · b_n`.
    pub fn inner(&self, a: &ThinField, b: &ThinField) -> f64 {
        let mut s = 0.0;
        for j in 0..self.m_theta() {
            for k in 0..self.m_sigma {
                let w = self.node(j, k).weight;
                let dot: f64 = (0..a.components()).map(|c| a.values[[c, j, k]] * b.values[[c, j, k]]).sum();
                s += w * dot;
            }
        }
        s
    }

    pub fn norm(&self, field: &ThinField, kind: NormKind) -> Result<f64> {
        self.check(field)?;
        Ok(match kind {
            NormKind::L2 => self.inner(field, field).max(0.0).sqrt(),
            NormKind::L4 => {
                let mut s = 0.0;
                for j in 0..self.m_theta() {
                    for k in 0..self.m_sigma {
                        s += self.node(j, k).weight * field.magnitude(j, k).powi(4);
                    }
                }
                s.powf(0.25)
            }
            NormKind::H1Seminorm => {
                let g = self.gradient(field)?;
                self.gradient_inner(&g, &g).max(0.0).sqrt()
            }
            NormKind::Sup => {
                let mut s: f64 = 0.0;
                for j in 0..self.m_theta() {
                    for k in 0..self.m_sigma {
                        s = s.max(field.magnitude(j, k));
                    }
                }
                s
            }
        })
    }

    /// Full `H¹(Ω_ε)` norm.
    pub fn h1_norm(&self, field: &ThinField) -> Result<f64> {
        Ok(self.norm(field, NormKind::L2)?.hypot(self.norm(field, NormKind::H1Seminorm)?))
    }

    /// `‖∂_ν u‖_{L²(Ω_ε)}`.
    pub fn normal_derivative_norm(&self, field: &ThinField) -> Result<f64> {
        let g = self.gradient(field)?;
        Ok(self.weighted_sum_sq(&g.normal).sqrt())
    }

    fn weighted_sum_sq(&self, a: &Array3<f64>) -> f64 {
        let mut s = 0.0;
        for c in 0..a.shape()[0] {
            for j in 0..self.m_theta() {
                for k in 0..self.m_sigma {
                    s += self.node(j, k).weight * a[[c, j, k]].powi(2);
                }
            }
        }
        s
    }

    pub fn gradient_inner(&self, a: &ThinGradient, b: &ThinGradient) -> f64 {
        let mut s = 0.0;
        Zip::indexed(&a.tangential)
            .and(&a.normal)
            .and(&b.tangential)
            .and(&b.normal)
            .for_each(|(_, j, k), at, an, bt, bn| {
                s += self.node(j, k).weight * (at * bt + an * bn);
            });
        s
    }

    /// `(∇u, ∇w)_{L²(Ω_ε)}`.
    pub fn dirichlet_form(&self, u: &ThinField, w: &ThinField) -> Result<f64> {
        self.check(u)?;
        self.check(w)?;
        if u.components() != w.components() {
            return Err(Error::GridMismatch("component counts differ".into()));
        }
        let (gu, gw) = (self.gradient(u)?, self.gradient(w)?);
        Ok(self.gradient_inner(&gu, &gw))
    }

    /// Area of the band by quadrature.
    pub fn area(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    /// Index of node `(j, k)` in the banded unknown ordering.
    #[inline]
    pub fn unknown_index(&self, j: usize, k: usize) -> usize {
        folded_position(j, self.m_theta()) * self.m_sigma + k
    }
}
