//! The limit equation `∂_t v - (1/g) div_Γ(g ∇_Γ v) + λ(|v|² - 1) v = 0` on
//! the curve, with a finite-difference backend sharing the thin solver's
//! time stepping and a Galerkin backend (see [`crate::galerkin`]).
//!
//! Both backends measure energy in the g-weighted norms of the limit problem:
//! `‖v‖²` means `(g v, v)_{L²(Γ)}` and `‖∇v‖²` means `(g ∇_Γ v, ∇_Γ v)`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::banded::SymBandMatrix;
use crate::discretization::{folded_position, GLParams, NormKind, SurfaceField, SurfaceGrid};
use crate::error::{Error, Result};
use crate::galerkin::{BasisWeighting, GalerkinBasis};
use crate::geometry::ThicknessProfile;
use crate::imex::{self, LinearSolverKind, LumpedSystem, State, TimeScheme};
use crate::reaction::stability_dt_max;
use crate::trace::{EnergyCheck, EnergyTrace, TraceRecord};

/// RK4 stays stable for `dt · ρ(M⁻¹K) ≤ 2.78`; keep a margin.
const RK4_DIFFUSION_LIMIT: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceBackend {
    Fd,
    Galerkin { modes: usize, weighting: BasisWeighting },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSolverConfig {
    pub dt: f64,
    pub t_final: f64,
    pub scheme: TimeScheme,
    pub backend: SurfaceBackend,
    pub linear_solver: LinearSolverKind,
    pub snapshot_times: Vec<f64>,
    pub enforce_stability_guard: bool,
}

impl SurfaceSolverConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        SurfaceSolverConfig {
            dt,
            t_final,
            scheme: TimeScheme::ImexEuler,
            backend: SurfaceBackend::Fd,
            linear_solver: LinearSolverKind::DirectBanded,
            snapshot_times: Vec::new(),
            enforce_stability_guard: true,
        }
    }

    pub fn with_scheme(mut self, scheme: TimeScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_backend(mut self, backend: SurfaceBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn galerkin(self, modes: usize) -> Self {
        self.with_backend(SurfaceBackend::Galerkin {
            modes,
            weighting: BasisWeighting::Weighted,
        })
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }
}

/// g-weighted lumped mass and stiffness of the surface grid.
#[derive(Debug, Clone)]
pub struct SurfaceOperator {
    grid: SurfaceGrid,
    g: Vec<f64>,
    system: LumpedSystem,
}

impl SurfaceOperator {
    pub fn new(grid: &SurfaceGrid, profile: &ThicknessProfile) -> Self {
        let m = grid.m_theta();
        let g = grid.sample_scalar(|t| profile.g(t));
        let pos = |j: usize| folded_position(j, m);
        let mut stiffness = SymBandMatrix::zeros(m, 4.min(m - 1));
        let mut mass = vec![0.0; m];
        for j in 0..m {
            let w = g[j] * grid.weight(j);
            mass[pos(j)] = w;
            let [(a, ca), (b, cb)] = grid.derivative_row(j);
            stiffness.add(pos(a), pos(a), w * ca * ca);
            stiffness.add(pos(b), pos(b), w * cb * cb);
            stiffness.add(pos(a), pos(b), w * ca * cb);
        }
        SurfaceOperator {
            grid: grid.clone(),
            g,
            system: LumpedSystem { mass, stiffness },
        }
    }

    pub fn grid(&self) -> &SurfaceGrid {
        &self.grid
    }

    pub fn system(&self) -> &LumpedSystem {
        &self.system
    }

    pub fn to_state(&self, v: &SurfaceField) -> State {
        let m = self.grid.m_theta();
        (0..v.components())
            .map(|c| {
                let mut s = vec![0.0; m];
                for j in 0..m {
                    s[folded_position(j, m)] = v.values[[c, j]];
                }
                s
            })
            .collect()
    }

    pub fn from_state(&self, s: &State) -> SurfaceField {
        let m = self.grid.m_theta();
        let mut v = SurfaceField::zeros(s.len(), m);
        for (c, x) in s.iter().enumerate() {
            for j in 0..m {
                v.values[[c, j]] = x[folded_position(j, m)];
            }
        }
        v
    }

    pub fn thickness(&self) -> &[f64] {
        &self.g
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceSolution {
    pub field: SurfaceField,
    pub trace: EnergyTrace,
    pub snapshots: Vec<(f64, SurfaceField)>,
}

pub fn solve_surface(
    grid: &SurfaceGrid,
    v0: &SurfaceField,
    params: &GLParams,
    profile: &ThicknessProfile,
    config: &SurfaceSolverConfig,
) -> Result<SurfaceSolution> {
    solve_surface_observed(grid, v0, params, profile, config, |_, _| {})
}

/// As [`solve_surface`], calling `observer(t, v)` at `t = 0` and after every step.
pub fn solve_surface_observed(
    grid: &SurfaceGrid,
    v0: &SurfaceField,
    params: &GLParams,
    profile: &ThicknessProfile,
    config: &SurfaceSolverConfig,
    mut observer: impl FnMut(f64, &SurfaceField),
) -> Result<SurfaceSolution> {
    grid.check(v0)?;
    if v0.components() != params.components {
        return Err(Error::GridMismatch(format!(
            "field has {} components, parameters expect {}",
            v0.components(),
            params.components
        )));
    }
    if !v0.is_finite() {
        return Err(Error::InvalidParameter("initial data is not finite".into()));
    }
    let (min_g, _) = profile.g_range();
    if min_g <= 0.0 {
        return Err(Error::InvalidProfile(format!("thickness must be positive (min {min_g})")));
    }
    let times = imex::output_times(config.t_final, config.dt, &config.snapshot_times)?;
    let sup0 = grid.norm(v0, NormKind::Sup);
    match config.backend {
        SurfaceBackend::Fd => {
            imex::check_guard(params, config.dt, sup0, config.enforce_stability_guard)?;
            let op = SurfaceOperator::new(grid, profile);
            let out = imex::run(
                &op.system,
                *params,
                config.scheme,
                config.linear_solver,
                config.dt,
                &times,
                op.to_state(v0),
                |t, s| observer(t, &op.from_state(s)),
            )?;
            Ok(SurfaceSolution {
                field: op.from_state(&out.state),
                trace: out.trace,
                snapshots: out.snapshots.iter().map(|(t, s)| (*t, op.from_state(s))).collect(),
            })
        }
        SurfaceBackend::Galerkin { modes, weighting } => {
            let basis = GalerkinBasis::new(grid, profile, modes, weighting)?;
            let dt_max = stability_dt_max(params.lambda, sup0).min(RK4_DIFFUSION_LIMIT / basis.spectral_radius());
            if config.enforce_stability_guard && config.dt > dt_max {
                return Err(Error::StabilityGuard { dt: config.dt, dt_max });
            }
            run_galerkin(&basis, v0, params, config.dt, &times, &mut observer)
        }
    }
}

fn run_galerkin(
    basis: &GalerkinBasis,
    v0: &SurfaceField,
    params: &GLParams,
    dt: f64,
    times: &[f64],
    observer: &mut impl FnMut(f64, &SurfaceField),
) -> Result<SurfaceSolution> {
    let mut alpha: Array2<f64> = basis.project(v0)?;
    let mut trace = EnergyTrace::default();
    let (l2sq, mut dir_prev, mut l4_prev, sup) = basis.energy(&alpha);
    trace.push(TraceRecord {
        t: 0.0,
        l2sq,
        cum_dirichlet: 0.0,
        cum_l4: 0.0,
        sup,
    });
    let mut snapshots = Vec::new();
    let v = basis.evaluate(&alpha);
    if times.first() == Some(&0.0) {
        snapshots.push((0.0, v.clone()));
    }
    observer(0.0, &v);
    let (mut cum_d, mut cum_l4, mut t_start) = (0.0, 0.0, 0.0);
    for (target, n, h) in imex::step_schedule(times, dt) {
        for s in 1..=n {
            alpha = basis.rk4_step(&alpha, params, h);
            let t = if s == n { target } else { t_start + s as f64 * h };
            let (l2sq, dir, l4, sup) = basis.energy(&alpha);
            cum_d += 0.5 * h * (dir + dir_prev);
            cum_l4 += 0.5 * h * (l4 + l4_prev);
            (dir_prev, l4_prev) = (dir, l4);
            trace.push(TraceRecord {
                t,
                l2sq,
                cum_dirichlet: cum_d,
                cum_l4,
                sup,
            });
            if !alpha.iter().all(|a| a.is_finite()) {
                return Err(Error::Diverged {
                    t,
                    trace: Box::new(trace),
                });
            }
            observer(t, &basis.evaluate(&alpha));
        }
        t_start = target;
        snapshots.push((target, basis.evaluate(&alpha)));
    }
    Ok(SurfaceSolution {
        field: basis.evaluate(&alpha),
        trace,
        snapshots,
    })
}

/// Discrete Galerkin energy inequality with slack factor 1.05.
pub fn galerkin_energy_check(trace: &EnergyTrace, lambda: f64) -> EnergyCheck {
    trace.energy_check(lambda, 1.05)
}
