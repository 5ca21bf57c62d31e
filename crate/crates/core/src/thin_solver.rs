//! Neumann Ginzburg–Landau heat flow on the thin domain, in reference
//! coordinates. The Neumann condition is natural: the stiffness matrix is
//! the Dirichlet form assembled from the gradient stencils and no boundary
//! rows are modified.

use crate::banded::SymBandMatrix;
use crate::discretization::{GLParams, NormKind, ThinField, ThinGrid};
use crate::error::{Error, Result};
use crate::imex::{self, LinearSolverKind, LumpedSystem, State, TimeScheme};
use crate::trace::EnergyTrace;

#[derive(Debug, Clone, PartialEq)]
pub struct ThinSolverConfig {
    pub dt: f64,
    pub t_final: f64,
    pub scheme: TimeScheme,
    pub linear_solver: LinearSolverKind,
    /// Output times in `[0, T]`; `T` is always included.
    pub snapshot_times: Vec<f64>,
    /// Reject steps above the explicit-reaction limit. Only disabled to
    /// witness instability on purpose.
    pub enforce_stability_guard: bool,
}

impl ThinSolverConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        ThinSolverConfig {
            dt,
            t_final,
            scheme: TimeScheme::ImexEuler,
            linear_solver: LinearSolverKind::DirectBanded,
            snapshot_times: Vec::new(),
            enforce_stability_guard: true,
        }
    }

    pub fn with_scheme(mut self, scheme: TimeScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn with_linear_solver(mut self, linear: LinearSolverKind) -> Self {
        self.linear_solver = linear;
        self
    }
}

/// Lumped mass and Dirichlet stiffness of a thin grid.
#[derive(Debug, Clone)]
pub struct ThinOperator {
    grid: ThinGrid,
    system: LumpedSystem,
}

impl ThinOperator {
    pub fn new(grid: &ThinGrid) -> Self {
        let (m, s) = (grid.m_theta(), grid.m_sigma());
        let n = m * s;
        let mut rows = Vec::with_capacity(2 * n);
        let mut bandwidth = 0;
        for j in 0..m {
            for k in 0..s {
                let w = grid.node(j, k).weight;
                let (ts, ns) = grid.gradient_stencils(j, k);
                for st in [ts, ns] {
                    let row: Vec<(usize, f64)> = st
                        .entries()
                        .iter()
                        .map(|&(jj, kk, c)| (grid.unknown_index(jj, kk), c))
                        .collect();
                    for &(a, _) in &row {
                        for &(b, _) in &row {
                            bandwidth = bandwidth.max(a.abs_diff(b));
                        }
                    }
                    rows.push((w, row));
                }
            }
        }
        let mut stiffness = SymBandMatrix::zeros(n, bandwidth);
        for (w, row) in rows {
            for (p, &(a, ca)) in row.iter().enumerate() {
                stiffness.add(a, a, w * ca * ca);
                for &(b, cb) in &row[p + 1..] {
                    stiffness.add(a, b, w * ca * cb);
                }
            }
        }
        let mut mass = vec![0.0; n];
        for j in 0..m {
            for k in 0..s {
                mass[grid.unknown_index(j, k)] = grid.node(j, k).weight;
            }
        }
        ThinOperator {
            grid: grid.clone(),
            system: LumpedSystem { mass, stiffness },
        }
    }

    pub fn grid(&self) -> &ThinGrid {
        &self.grid
    }

    pub fn system(&self) -> &LumpedSystem {
        &self.system
    }

    pub fn to_state(&self, u: &ThinField) -> State {
        let (nc, m, s) = u.shape();
        (0..nc)
            .map(|c| {
                let mut v = vec![0.0; m * s];
                for j in 0..m {
                    for k in 0..s {
                        v[self.grid.unknown_index(j, k)] = u.values[[c, j, k]];
                    }
                }
                v
            })
            .collect()
    }

    pub fn from_state(&self, state: &State) -> ThinField {
        let (m, s) = (self.grid.m_theta(), self.grid.m_sigma());
        let mut u = ThinField::zeros(state.len(), m, s);
        for (c, v) in state.iter().enumerate() {
            for j in 0..m {
                for k in 0..s {
                    u.values[[c, j, k]] = v[self.grid.unknown_index(j, k)];
                }
            }
        }
        u
    }

    /// `‖∇u‖²` through the assembled matrix.
    pub fn dirichlet_energy(&self, u: &ThinField) -> f64 {
        self.to_state(u).iter().map(|c| self.system.stiffness.bilinear(c, c)).sum()
    }
}

#[derive(Debug, Clone)]
pub struct ThinSolution {
    pub field: ThinField,
    pub trace: EnergyTrace,
    pub snapshots: Vec<(f64, ThinField)>,
}

fn check_inputs(op: &ThinOperator, u: &ThinField, params: &GLParams, config: &ThinSolverConfig) -> Result<()> {
    op.grid.check(u)?;
    if u.components() != params.components {
        return Err(Error::GridMismatch(format!(
            "field has {} components, parameters expect {}",
            u.components(),
            params.components
        )));
    }
    if !u.is_finite() {
        return Err(Error::InvalidParameter("initial data is not finite".into()));
    }
    if !(config.dt.is_finite() && config.dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {}", config.dt)));
    }
    let sup = op.grid.norm(u, NormKind::Sup)?;
    imex::check_guard(params, config.dt, sup, config.enforce_stability_guard)
}

/// One step of the configured scheme (the Adams–Bashforth variant starts
/// from the current reaction only).
pub fn step(op: &ThinOperator, u: &ThinField, params: &GLParams, config: &ThinSolverConfig) -> Result<ThinField> {
    check_inputs(op, u, params, config)?;
    let mut stepper = imex::Stepper::new(&op.system, *params, config.scheme, config.linear_solver, config.dt)?;
    let mut state = op.to_state(u);
    stepper.step(&mut state)?;
    let out = op.from_state(&state);
    if !out.is_finite() {
        let mut trace = EnergyTrace::default();
        let e = op.system.energy(&state);
        trace.push(crate::trace::TraceRecord {
            t: config.dt,
            l2sq: e.l2sq,
            cum_dirichlet: f64::NAN,
            cum_l4: f64::NAN,
            sup: e.sup,
        });
        return Err(Error::Diverged {
            t: config.dt,
            trace: Box::new(trace),
        });
    }
    Ok(out)
}

pub fn solve(op: &ThinOperator, u0: &ThinField, params: &GLParams, config: &ThinSolverConfig) -> Result<ThinSolution> {
    solve_observed(op, u0, params, config, |_, _| {})
}

/// As [`solve`], calling `observer(t, u)` at `t = 0` and after every step.
pub fn solve_observed(
    op: &ThinOperator,
    u0: &ThinField,
    params: &GLParams,
    config: &ThinSolverConfig,
    mut observer: impl FnMut(f64, &ThinField),
) -> Result<ThinSolution> {
    check_inputs(op, u0, params, config)?;
    let times = imex::output_times(config.t_final, config.dt, &config.snapshot_times)?;
    let out = imex::run(
        &op.system,
        *params,
        config.scheme,
        config.linear_solver,
        config.dt,
        &times,
        op.to_state(u0),
        |t, s| observer(t, &op.from_state(s)),
    )?;
    Ok(ThinSolution {
        field: op.from_state(&out.state),
        trace: out.trace,
        snapshots: out.snapshots.iter().map(|(t, s)| (*t, op.from_state(s))).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PlaneCurve, ProfileFn, ThicknessProfile, ThinDomain};
    use crate::reaction::logistic_w;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wavy_grid(eps: f64, m: usize, s: usize) -> ThinGrid {
        let d = ThinDomain::new(
            PlaneCurve::circle(1.0).unwrap(),
            ThicknessProfile::new(ProfileFn::Constant(0.0), ProfileFn::Cosine { c0: 1.0, c1: 0.3, k: 1 }).unwrap(),
            eps,
        )
        .unwrap();
        ThinGrid::new(&d, m, s).unwrap()
    }

    #[test]
    fn assembled_matrix_reproduces_dirichlet_form() {
        let grid = wavy_grid(0.1, 32, 6);
        let op = ThinOperator::new(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut u = ThinField::zeros(2, 32, 6);
        u.values.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        let a = op.dirichlet_energy(&u);
        let b = grid.dirichlet_form(&u, &u).unwrap();
        assert!((a - b).abs() <= 1e-12 * b, "{a} vs {b}");
        let c = ThinField {
            values: ndarray::Array3::from_elem((1, 32, 6), 1.7),
        };
        assert!(op.dirichlet_energy(&c).abs() < 1e-12 * b);
    }

    #[test]
    fn bandwidth_is_four_sigma_rows() {
        let grid = wavy_grid(0.1, 32, 6);
        let op = ThinOperator::new(&grid);
        assert!(op.system().stiffness.bandwidth() <= 4 * 6 + 2);
    }

    #[test]
    fn zero_and_unit_data_are_stationary() {
        let grid = wavy_grid(0.1, 32, 6);
        let op = ThinOperator::new(&grid);
        let params = GLParams::new(1.0, 2).unwrap();
        let cfg = ThinSolverConfig::new(0.01, 0.2);
        let zero = ThinField::zeros(2, 32, 6);
        assert_eq!(solve(&op, &zero, &params, &cfg).unwrap().field, zero);
        let unit = grid.sample(2, |_, _, _| vec![0.6, 0.8]);
        let out = solve(&op, &unit, &params, &cfg).unwrap().field;
        let diff = out.sub(&unit);
        assert!(diff.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn constant_data_follow_logistic_ode() {
        let grid = wavy_grid(0.1, 16, 4);
        let op = ThinOperator::new(&grid);
        let params = GLParams::new(1.0, 1).unwrap();
        let u0 = grid.sample(1, |_, _, _| vec![0.3]);
        let mut errs = Vec::new();
        for dt in [0.02, 0.01, 0.005] {
            let sol = solve(&op, &u0, &params, &ThinSolverConfig::new(dt, 0.5)).unwrap();
            let w = sol.field.values[[0, 3, 2]].powi(2);
            errs.push((w - logistic_w(0.09, 1.0, 0.5)).abs());
        }
        assert!(errs[0] / errs[1] > 1.8 && errs[1] / errs[2] > 1.8, "{errs:?}");
    }

    #[test]
    fn negative_dt_is_rejected() {
        let grid = wavy_grid(0.1, 16, 4);
        let op = ThinOperator::new(&grid);
        let params = GLParams::new(1.0, 1).unwrap();
        let u0 = grid.sample(1, |_, _, _| vec![0.3]);
        let err = solve(&op, &u0, &params, &ThinSolverConfig::new(-0.1, 0.5)).unwrap_err();
        assert!(err.is_config_error());
    }

    #[test]
    fn oversized_step_hits_guard() {
        let grid = wavy_grid(0.1, 16, 4);
        let op = ThinOperator::new(&grid);
        let params = GLParams::new(1.0, 1).unwrap();
        let u0 = grid.sample(1, |_, _, _| vec![1.5]);
        let err = solve(&op, &u0, &params, &ThinSolverConfig::new(0.5, 1.0)).unwrap_err();
        assert!(matches!(err, Error::StabilityGuard { .. }));
    }

    #[test]
    fn unguarded_blow_up_reports_divergence() {
        let grid = wavy_grid(0.1, 16, 4);
        let op = ThinOperator::new(&grid);
        let params = GLParams::new(1.0, 1).unwrap();
        let u0 = grid.sample(1, |_, _, _| vec![3.0]);
        let mut cfg = ThinSolverConfig::new(0.5, 20.0);
        cfg.enforce_stability_guard = false;
        match solve(&op, &u0, &params, &cfg) {
            Err(Error::Diverged { trace, .. }) => assert!(!trace.is_finite()),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn cg_matches_direct_solver() {
        let grid = wavy_grid(0.1, 32, 6);
        let op = ThinOperator::new(&grid);
        let params = GLParams::new(1.0, 1).unwrap();
        let u0 = grid.sample(1, |x, _, _| vec![x[0] + 0.5 * x[1] * x[1]]);
        let base = ThinSolverConfig::new(0.01, 0.1);
        let a = solve(&op, &u0, &params, &base).unwrap().field;
        let cg = base.with_linear_solver(LinearSolverKind::ConjugateGradient {
            tol: 1e-13,
            max_iter: 2000,
        });
        let b = solve(&op, &u0, &params, &cg).unwrap().field;
        assert!(a.sub(&b).values.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn snapshots_land_on_requested_times() {
        let grid = wavy_grid(0.1, 16, 4);
        let op = ThinOperator::new(&grid);
        let params = GLParams::new(1.0, 1).unwrap();
        let u0 = grid.sample(1, |x, _, _| vec![x[0]]);
        let cfg = ThinSolverConfig::new(0.03, 0.1).with_snapshots(vec![0.0, 0.05, 0.1]);
        let sol = solve(&op, &u0, &params, &cfg).unwrap();
        let ts: Vec<f64> = sol.snapshots.iter().map(|s| s.0).collect();
        assert_eq!(ts, vec![0.0, 0.05, 0.1]);
        assert_eq!(sol.trace.last().unwrap().t, 0.1);
    }
}
