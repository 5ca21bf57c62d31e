//! Time stepping for lumped-mass systems `W u' + A u + λ W f(u) = 0` with
//! `f(u) = (|u|² - 1) u`, diffusion implicit and reaction explicit. Shared by
//! the thin-domain and surface finite-difference backends; both hand over
//! their mass diagonal and stiffness matrix in the banded unknown ordering.

use serde::{Deserialize, Serialize};

use crate::banded::{conjugate_gradient, BandCholesky, SymBandMatrix};
use crate::discretization::GLParams;
use crate::error::{Error, Result};
use crate::reaction::{gl_term, stability_dt_max};
use crate::trace::{EnergyTrace, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    /// `(W/dt + A) u¹ = W/dt u⁰ - λ W f(u⁰)`.
    #[default]
    ImexEuler,
    /// Crank–Nicolson diffusion with Adams–Bashforth reaction; the first
    /// step uses the current reaction only.
    SemiImplicitCn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolverKind {
    #[default]
    DirectBanded,
    ConjugateGradient { tol: f64, max_iter: usize },
}

/// Values per component, each in unknown ordering.
pub type State = Vec<Vec<f64>>;

#[derive(Debug, Clone)]
pub struct LumpedSystem {
    pub mass: Vec<f64>,
    pub stiffness: SymBandMatrix,
}

/// Energy quantities of one state.
#[derive(Debug, Clone, Copy)]
pub struct StateEnergy {
    pub l2sq: f64,
    pub dirichlet: f64,
    pub l4: f64,
    pub sup: f64,
}

impl LumpedSystem {
    pub fn unknowns(&self) -> usize {
        self.mass.len()
    }

    pub fn energy(&self, u: &State) -> StateEnergy {
        let n = self.unknowns();
        let mut l2sq = 0.0;
        let mut l4 = 0.0;
        let mut sup: f64 = 0.0;
        for i in 0..n {
            let s: f64 = u.iter().map(|c| c[i] * c[i]).sum();
            l2sq += self.mass[i] * s;
            l4 += self.mass[i] * s * s;
            sup = sup.max(s);
        }
        let dirichlet = u.iter().map(|c| self.stiffness.bilinear(c, c)).sum();
        StateEnergy {
            l2sq,
            dirichlet,
            l4,
            sup: sup.sqrt(),
        }
    }

    pub fn sup(&self, u: &State) -> f64 {
        (0..self.unknowns())
            .map(|i| u.iter().map(|c| c[i] * c[i]).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt()
    }
}

enum Factor {
    Direct(BandCholesky),
    Cg { tol: f64, max_iter: usize },
}

pub(crate) struct Stepper<'a> {
    sys: &'a LumpedSystem,
    params: GLParams,
    scheme: TimeScheme,
    linear: LinearSolverKind,
    dt: f64,
    lhs: SymBandMatrix,
    factor: Factor,
    prev_reaction: Option<State>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        sys: &'a LumpedSystem,
        params: GLParams,
        scheme: TimeScheme,
        linear: LinearSolverKind,
        dt: f64,
    ) -> Result<Self> {
        let (lhs, factor) = Self::build(sys, scheme, linear, dt)?;
        Ok(Stepper {
            sys,
            params,
            scheme,
            linear,
            dt,
            lhs,
            factor,
            prev_reaction: None,
        })
    }

    fn build(
        sys: &LumpedSystem,
        scheme: TimeScheme,
        linear: LinearSolverKind,
        dt: f64,
    ) -> Result<(SymBandMatrix, Factor)> {
        let a_scale = match scheme {
            TimeScheme::ImexEuler => 1.0,
            TimeScheme::SemiImplicitCn => 0.5,
        };
        let mut lhs = sys.stiffness.scaled(a_scale);
        lhs.add_diagonal(&sys.mass, 1.0 / dt);
        let factor = match linear {
            LinearSolverKind::DirectBanded => Factor::Direct(lhs.cholesky()?),
            LinearSolverKind::ConjugateGradient { tol, max_iter } => Factor::Cg { tol, max_iter },
        };
        Ok((lhs, factor))
    }

    pub fn set_dt(&mut self, dt: f64) -> Result<()> {
        if dt.to_bits() != self.dt.to_bits() {
            let (lhs, factor) = Self::build(self.sys, self.scheme, self.linear, dt)?;
            self.lhs = lhs;
            self.factor = factor;
            self.dt = dt;
        }
        Ok(())
    }

    fn reaction(&self, u: &State) -> State {
        let n = self.sys.unknowns();
        let comps = u.len();
        let mut out = vec![vec![0.0; n]; comps];
        if !self.params.reaction {
            return out;
        }
        let mut a = vec![0.0; comps];
        let mut f = vec![0.0; comps];
        for i in 0..n {
            for c in 0..comps {
                a[c] = u[c][i];
            }
            gl_term(&a, &mut f);
            for c in 0..comps {
                out[c][i] = f[c];
            }
        }
        out
    }

    pub fn step(&mut self, u: &mut State) -> Result<()> {
        let n = self.sys.unknowns();
        let w = &self.sys.mass;
        let lambda = self.params.lambda;
        let f = self.reaction(u);
        let mut au = vec![0.0; n];
        for c in 0..u.len() {
            let mut rhs: Vec<f64> = (0..n).map(|i| w[i] * u[c][i] / self.dt).collect();
            match self.scheme {
                TimeScheme::ImexEuler => {
                    for i in 0..n {
                        rhs[i] -= lambda * w[i] * f[c][i];
                    }
                }
                TimeScheme::SemiImplicitCn => {
                    self.sys.stiffness.matvec(&u[c], &mut au);
                    for i in 0..n {
                        let fe = match &self.prev_reaction {
                            Some(p) => 1.5 * f[c][i] - 0.5 * p[c][i],
                            None => f[c][i],
                        };
                        rhs[i] -= 0.5 * au[i] + lambda * w[i] * fe;
                    }
                }
            }
            match &self.factor {
                Factor::Direct(chol) => {
                    chol.solve_in_place(&mut rhs);
                    u[c] = rhs;
                }
                Factor::Cg { tol, max_iter } => {
                    conjugate_gradient(&self.lhs, &rhs, &mut u[c], *tol, *max_iter)?;
                }
            }
        }
        if self.scheme == TimeScheme::SemiImplicitCn {
            self.prev_reaction = Some(f);
        }
        Ok(())
    }
}

/// Splits `[0, T]` at the requested output times into intervals of
/// `n` equal steps of length `interval / n <= dt`.
pub(crate) fn step_schedule(times: &[f64], dt: f64) -> Vec<(f64, usize, f64)> {
    let mut out = Vec::new();
    let mut t = 0.0;
    for &target in times {
        let len = target - t;
        if len <= 0.0 {
            continue;
        }
        let n = ((len / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        out.push((target, n, len / n as f64));
        t = target;
    }
    out
}

/// Validates horizon, step and output times; returns the sorted output times
/// with `T` appended if missing.
pub(crate) fn output_times(t_final: f64, dt: f64, requested: &[f64]) -> Result<Vec<f64>> {
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::InvalidParameter(format!("T must be positive, got {t_final}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let mut times = requested.to_vec();
    if times.iter().any(|t| !t.is_finite() || *t < 0.0 || *t > t_final * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!("snapshot times must lie in [0, {t_final}]")));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.last().is_none_or(|&t| t < t_final * (1.0 - 1e-12)) {
        times.push(t_final);
    }
    Ok(times)
}

/// `k + 1` equispaced times in `[0, T]`.
pub fn equispaced_times(t_final: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![t_final];
    }
    (0..count).map(|i| t_final * i as f64 / (count - 1) as f64).collect()
}

pub(crate) fn check_guard(params: &GLParams, dt: f64, sup0: f64, enforce: bool) -> Result<()> {
    let dt_max = stability_dt_max(params.lambda, sup0);
    if enforce && dt > dt_max {
        return Err(Error::StabilityGuard { dt, dt_max });
    }
    Ok(())
}

pub(crate) struct RunOutput {
    pub state: State,
    pub trace: EnergyTrace,
    pub snapshots: Vec<(f64, State)>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn run(
    sys: &LumpedSystem,
    params: GLParams,
    scheme: TimeScheme,
    linear: LinearSolverKind,
    dt: f64,
    times: &[f64],
    u0: State,
    mut observer: impl FnMut(f64, &State),
) -> Result<RunOutput> {
    let schedule = step_schedule(times, dt);
    let first_dt = schedule.first().map_or(dt, |s| s.2);
    let mut stepper = Stepper::new(sys, params, scheme, linear, first_dt)?;
    let mut u = u0;
    let mut trace = EnergyTrace::default();
    let e0 = sys.energy(&u);
    trace.push(TraceRecord {
        t: 0.0,
        l2sq: e0.l2sq,
        cum_dirichlet: 0.0,
        cum_l4: 0.0,
        sup: e0.sup,
    });
    let mut snapshots = Vec::new();
    if times.first() == Some(&0.0) {
        snapshots.push((0.0, u.clone()));
    }
    observer(0.0, &u);
    let (mut t, mut cum_d, mut cum_l4, mut l4_prev) = (0.0, 0.0, 0.0, e0.l4);
    let mut t_start = 0.0;
    for (target, n, h) in schedule {
        stepper.set_dt(h)?;
        for s in 1..=n {
            stepper.step(&mut u)?;
            t = if s == n { target } else { t_start + s as f64 * h };
            let e = sys.energy(&u);
            cum_d += h * e.dirichlet;
            cum_l4 += h * l4_prev;
            l4_prev = e.l4;
            trace.push(TraceRecord {
                t,
                l2sq: e.l2sq,
                cum_dirichlet: cum_d,
                cum_l4,
                sup: e.sup,
            });
            if !u.iter().all(|c| c.iter().all(|v| v.is_finite())) {
                return Err(Error::Diverged {
                    t,
                    trace: Box::new(trace),
                });
            }
            observer(t, &u);
        }
        t_start = target;
        snapshots.push((t, u.clone()));
    }
    Ok(RunOutput {
        state: u,
        trace,
        snapshots,
    })
}
