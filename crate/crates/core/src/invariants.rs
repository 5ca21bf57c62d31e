//! Property battery behind `check-invariants`: pairing identity,
//! monotonicity of the cubic, geometry oracles, and energy and maximum
//! principle on a short run of the configured problem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::averaging::pairing_defect;
use crate::config::RunConfig;
use crate::discretization::{SurfaceField, SurfaceGrid, ThinField, ThinGrid};
use crate::error::Result;
use crate::geometry::{PlaneCurve, ThicknessProfile, ThinDomain};
use crate::reaction::monotonicity_gaps;
use crate::surface_solver::{galerkin_energy_check, solve_surface, SurfaceBackend};
use crate::thin_solver::{solve, ThinOperator};

/// Length of the short run.
pub const SHORT_RUN_T: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantResult {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl InvariantResult {
    fn at_most(name: &'static str, value: f64, threshold: f64) -> Self {
        InvariantResult {
            name,
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    fn at_least(name: &'static str, value: f64, threshold: f64) -> Self {
        InvariantResult {
            name,
            value,
            threshold,
            passed: value >= threshold,
        }
    }
}

fn pairing(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<InvariantResult> {
    let domain = cfg.thin_domain()?;
    let (m, s, n) = (64, 8, cfg.sweep.params.components);
    let grid = ThinGrid::new(&domain, m, s)?;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mut u = ThinField::zeros(n, m, s);
        u.values.iter_mut().for_each(|v| *v = rng.random_range(-2.0..2.0));
        let mut eta = SurfaceField::zeros(n, m);
        eta.values.iter_mut().for_each(|v| *v = rng.random_range(-2.0..2.0));
        worst = worst.max(pairing_defect(&grid, &u, &eta)?.relative());
    }
    Ok(InvariantResult::at_most("pairing_identity", worst, 1e-12))
}

fn monotonicity(rng: &mut ChaCha8Rng) -> InvariantResult {
    let mut worst = f64::INFINITY;
    for i in 0..100_000 {
        let n = 1 + i % 3;
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (gap, middle, mag) = monotonicity_gaps(&a, &b);
        if mag > 0.0 {
            worst = worst.min(gap / mag).min(middle / mag);
        }
    }
    InvariantResult::at_least("monotonicity", worst, -1e-12)
}

fn geometry() -> Result<Vec<InvariantResult>> {
    let mut circle = 0.0f64;
    for r0 in [0.5, 1.0, 2.0] {
        let c = PlaneCurve::circle(r0)?;
        let d = ThinDomain::new(c.clone(), ThicknessProfile::constant(0.0, 1.0)?, 0.1)?;
        for i in 0..12 {
            let t = 0.5 * i as f64;
            circle = circle.max((c.frame(t).kappa_w + 1.0 / r0).abs());
            circle = circle.max((d.jacobian(t, 0.07)? - (r0 + 0.07) / r0).abs());
        }
    }
    let e = PlaneCurve::ellipse(1.5, 0.7)?;
    let d = ThinDomain::new(e.clone(), ThicknessProfile::constant(-1.0, 1.0)?, 0.2)?;
    let h = 1e-5;
    let mut stretch = 0.0f64;
    for i in 0..24 {
        let t = 0.26 * i as f64;
        for r in [-0.1, 0.0, 0.15] {
            let p = |s: f64| {
                let f = e.frame(s);
                [f.position[0] + r * f.normal[0], f.position[1] + r * f.normal[1]]
            };
            let (a, b) = (p(t + h), p(t - h));
            let speed = (a[0] - b[0]).hypot(a[1] - b[1]) / (2.0 * h);
            stretch = stretch.max((speed / e.metric(t) - d.jacobian(t, r)?).abs());
        }
    }
    Ok(vec![
        InvariantResult::at_most("circle_curvature_and_jacobian", circle, 1e-14),
        InvariantResult::at_most("ellipse_offset_stretch", stretch, 1e-8),
    ])
}

fn short_runs(cfg: &RunConfig) -> Result<Vec<InvariantResult>> {
    let sweep = &cfg.sweep;
    let t = SHORT_RUN_T.min(sweep.t_final);
    let slack = 1.0 + 10.0 * sweep.dt;
    let lambda = sweep.params.lambda;
    let grid = ThinGrid::new(&cfg.thin_domain()?, sweep.m_theta, sweep.m_sigma)?;
    let op = ThinOperator::new(&grid);
    let u0 = sweep.init.thin_data(&grid)?;
    let mut thin_cfg = cfg.thin_solver();
    thin_cfg.t_final = t;
    thin_cfg.snapshot_times.clear();
    let thin = solve(&op, &u0, &sweep.params, &thin_cfg)?;
    let e = thin.trace.energy_check(lambda, slack);
    let mp = thin.trace.max_principle_check(1e-3);

    let sgrid = SurfaceGrid::new(&sweep.curve, sweep.m_theta)?;
    let v0 = sweep.init.surface_data(&sgrid);
    let mut surf_cfg = cfg.surface_solver();
    surf_cfg.t_final = t;
    surf_cfg.snapshot_times.clear();
    surf_cfg.backend = SurfaceBackend::Fd;
    let fd = solve_surface(&sgrid, &v0, &sweep.params, &sweep.profile, &surf_cfg)?;
    let efd = fd.trace.energy_check(lambda, slack);
    // 4L + 2 <= M keeps the cubic unaliased.
    surf_cfg = surf_cfg.galerkin(16.min((sweep.m_theta - 2) / 4));
    let gal = solve_surface(&sgrid, &v0, &sweep.params, &sweep.profile, &surf_cfg)?;
    let egal = galerkin_energy_check(&gal.trace, lambda);
    Ok(vec![
        InvariantResult::at_most("thin_energy_ratio", e.max_ratio, e.slack),
        InvariantResult::at_most("thin_max_principle", mp.max_sup, mp.bound + 1e-3),
        InvariantResult::at_most("surface_energy_ratio", efd.max_ratio, efd.slack),
        InvariantResult::at_most("galerkin_energy_ratio", egal.max_ratio, egal.slack),
    ])
}

pub fn run_invariants(cfg: &RunConfig, seed: u64) -> Result<Vec<InvariantResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![pairing(cfg, &mut rng)?, monotonicity(&mut rng)];
    out.extend(geometry()?);
    out.extend(short_runs(cfg)?);
    Ok(out)
}

pub fn format_table(results: &[InvariantResult]) -> String {
    let mut s = format!("{:<32} {:>14} {:>14}  result\n", "invariant", "value", "threshold");
    for r in results {
        s.push_str(&format!(
            "{:<32} {:>14.6e} {:>14.6e}  {}\n",
            r.name,
            r.value,
            r.threshold,
            if r.passed { "PASS" } else { "FAIL" }
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes_on_a_small_default() {
        let cfg = crate::config::load("", &["grid.m_theta=64".into(), "grid.m_sigma=8".into()]).unwrap();
        let r = run_invariants(&cfg, 7).unwrap();
        assert_eq!(r.len(), 8);
        assert!(r.iter().all(|x| x.passed), "{}", format_table(&r));
        assert_eq!(r, run_invariants(&cfg, 7).unwrap());
    }
}
