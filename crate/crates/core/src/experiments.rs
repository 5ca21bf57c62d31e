//! ε-sweeps comparing thin-domain solutions with the limit solution, the
//! averaging-defect rate study on manufactured fields, and log-log rate fits.

use std::f64::consts::PI;

use log::{info, warn};
use rayon::prelude::*;

use crate::averaging::{self, average, extend};
use crate::discretization::{GLParams, NormKind, SurfaceField, SurfaceGrid, ThinField, ThinGrid};
use crate::error::{Error, Result};
use crate::geometry::{PlaneCurve, Point2, ThicknessProfile, ThinDomain};
use crate::imex::{equispaced_times, LinearSolverKind, TimeScheme};
use crate::surface_solver::{solve_surface_observed, SurfaceSolution, SurfaceSolverConfig};
use crate::thin_solver::{solve_observed, ThinOperator, ThinSolverConfig};
use crate::trace::{EnergyCheck, EnergyTrace, MaxPrincipleCheck};

/// Errors at or below this value are excluded from rate fits.
pub const RATE_FLOOR: f64 = 1e-13;

pub const DEFAULT_EPSILONS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub pairs: Vec<(f64, f64)>,
    /// Pairs dropped by the floor guard.
    pub excluded: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
}

/// Least-squares line through `(ln ε, ln error)`.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    let (kept, excluded): (Vec<_>, Vec<_>) = pairs
        .iter()
        .copied()
        .partition(|&(e, err)| err.is_finite() && err > RATE_FLOOR && e > 0.0);
    if kept.len() < 3 {
        return Err(Error::InsufficientRateData {
            kept: kept.len(),
            excluded: excluded.len(),
        });
    }
    let n = kept.len() as f64;
    let xs: Vec<f64> = kept.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("rate fit needs distinct epsilons".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(RateFit {
        pairs: kept,
        excluded,
        slope,
        intercept,
        max_residual,
    })
}

/// Real Fourier series per component: `[a0, a1, b1, a2, b2, ...]` stands for
/// `a0 + Σ_k (a_k cos kθ + b_k sin kθ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierData {
    pub components: Vec<Vec<f64>>,
}

impl FourierData {
    /// Splits a flat coefficient list into `components` equal chunks.
    pub fn from_flat(params: &[f64], components: usize) -> Result<Self> {
        if components == 0 || params.is_empty() || !params.len().is_multiple_of(components) {
            return Err(Error::Config(format!(
                "{} Fourier coefficients cannot be split into {components} components",
                params.len()
            )));
        }
        let n = params.len() / components;
        Ok(FourierData {
            components: params.chunks(n).map(|c| c.to_vec()).collect(),
        })
    }

    pub fn eval(&self, theta: f64) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                let mut v = c[0];
                for (i, a) in c[1..].iter().enumerate() {
                    let k = (i / 2 + 1) as f64;
                    v += if i % 2 == 0 { a * (k * theta).cos() } else { a * (k * theta).sin() };
                }
                v
            })
            .collect()
    }

    pub fn sample(&self, grid: &SurfaceGrid) -> SurfaceField {
        grid.sample(self.components.len(), |t| self.eval(t))
    }

    pub fn scaled(&self, a: f64) -> Self {
        FourierData {
            components: self.components.iter().map(|c| c.iter().map(|x| a * x).collect()).collect(),
        }
    }
}

/// Thin-domain initial data built from surface data `v0`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDataFamily {
    /// `u₀ = extend(v0)`.
    WellPrepared { v0: FourierData },
    /// `u₀ = extend(v0) + ε^β w` with `w = amplitude · cos(πσ)(1 + cos θ / 2)`
    /// in every component.
    NormalPerturbed { v0: FourierData, beta: f64, amplitude: f64 },
    /// `extend(v0)` raised near the maximizer of `|v0|` by a bump of
    /// arclength width ε so that `‖u₀‖_∞ = c1 ε^{-1/3 + α}`.
    SupGrowing { v0: FourierData, c1: f64, alpha: f64 },
}

impl InitialDataFamily {
    pub fn v0(&self) -> &FourierData {
        match self {
            InitialDataFamily::WellPrepared { v0 }
            | InitialDataFamily::NormalPerturbed { v0, .. }
            | InitialDataFamily::SupGrowing { v0, .. } => v0,
        }
    }

    pub fn components(&self) -> usize {
        self.v0().components.len()
    }

    pub fn surface_data(&self, grid: &SurfaceGrid) -> SurfaceField {
        self.v0().sample(grid)
    }

    pub fn thin_data(&self, grid: &ThinGrid) -> Result<ThinField> {
        let v = self.surface_data(grid.surface());
        let mut u = extend(grid, &v)?;
        let eps = grid.epsilon();
        match *self {
            InitialDataFamily::WellPrepared { .. } => {}
            InitialDataFamily::NormalPerturbed { beta, amplitude, .. } => {
                let scale = eps.powf(beta) * amplitude;
                let w = grid.sample(1, |_, t, s| vec![scale * (PI * s).cos() * (1.0 + 0.5 * t.cos())]);
                for c in 0..u.components() {
                    let mut slab = u.values.index_axis_mut(ndarray::Axis(0), c);
                    slab += &w.values.index_axis(ndarray::Axis(0), 0);
                }
            }
            InitialDataFamily::SupGrowing { c1, alpha, .. } => {
                let target = c1 * eps.powf(-1.0 / 3.0 + alpha);
                let sg = grid.surface();
                let (jstar, vmax) = (0..sg.m_theta())
                    .map(|j| (j, v.magnitude(j)))
                    .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
                if vmax > 0.0 && target > vmax {
                    let theta_star = sg.theta(jstar);
                    let speed = sg.metric(jstar);
                    for j in 0..sg.m_theta() {
                        let mut d = (sg.theta(j) - theta_star).abs();
                        d = d.min(2.0 * PI - d);
                        let bump = (-(d * speed / eps).powi(2)).exp();
                        let factor = 1.0 + (target / vmax - 1.0) * bump;
                        u.values.slice_mut(ndarray::s![.., j, ..]).mapv_inplace(|x| x * factor);
                    }
                }
            }
        }
        Ok(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Check {
    SurfaceRate,
    ThinRate,
    LemmaRates,
}

impl Check {
    pub fn name(&self) -> &'static str {
        match self {
            Check::SurfaceRate => "surface_rate",
            Check::ThinRate => "thin_rate",
            Check::LemmaRates => "lemma_rates",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Check::SurfaceRate, Check::ThinRate, Check::LemmaRates]
            .into_iter()
            .find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub curve: PlaneCurve,
    pub profile: ThicknessProfile,
    pub epsilons: Vec<f64>,
    pub params: GLParams,
    pub t_final: f64,
    pub dt: f64,
    pub scheme: TimeScheme,
    pub linear_solver: LinearSolverKind,
    pub m_theta: usize,
    pub m_sigma: usize,
    /// Resolution multiple of the reference limit solution.
    pub reference_factor: usize,
    /// Number of equispaced snapshot times in `[0, T]`.
    pub snapshots: usize,
    pub init: InitialDataFamily,
    pub checks: Vec<Check>,
    pub jobs: usize,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::Config("epsilon ladder is empty".into()));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("epsilon ladder must be strictly decreasing".into()));
        }
        for &eps in &self.epsilons {
            ThinDomain::new(self.curve.clone(), self.profile, eps)
                .and_then(|d| d.ensure_valid().map(|_| ()))
                .map_err(|e| Error::AtEpsilon {
                    epsilon: eps,
                    source: Box::new(e),
                })?;
        }
        if self.init.components() != self.params.components {
            return Err(Error::Config(format!(
                "initial data has {} components, gl.components = {}",
                self.init.components(),
                self.params.components
            )));
        }
        if self.reference_factor == 0 {
            return Err(Error::Config("reference factor must be at least 1".into()));
        }
        if self.snapshots == 0 {
            return Err(Error::Config("need at least one snapshot".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::InvalidParameter(format!("T must be positive, got {}", self.t_final)));
        }
        Ok(())
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        equispaced_times(self.t_final, self.snapshots)
    }

    pub fn domain(&self, epsilon: f64) -> Result<ThinDomain> {
        ThinDomain::new(self.curve.clone(), self.profile, epsilon)
    }
}

/// Limit solution sampled on the sweep grid at every time step.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub factor: usize,
    pub times: Vec<f64>,
    pub steps: Vec<SurfaceField>,
    pub solution: SurfaceSolution,
}

pub fn reference_solution(config: &SweepConfig, factor: usize) -> Result<ReferenceSolution> {
    let fine = SurfaceGrid::new(&config.curve, config.m_theta * factor)?;
    let v0 = config.init.surface_data(&fine);
    let solver = SurfaceSolverConfig {
        linear_solver: config.linear_solver,
        ..SurfaceSolverConfig::new(config.dt, config.t_final)
            .with_scheme(config.scheme)
            .with_snapshots(config.snapshot_times())
    };
    let (mut times, mut steps) = (Vec::new(), Vec::new());
    let solution = solve_surface_observed(&fine, &v0, &config.params, &config.profile, &solver, |t, v| {
        times.push(t);
        steps.push(v.restrict(factor));
    })?;
    Ok(ReferenceSolution {
        factor,
        times,
        steps,
        solution,
    })
}

/// Error functionals accumulated along one thin run against one reference.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepErrors {
    /// `max_t ‖M_ε u - v‖_{L²(Γ)}` over snapshot times.
    pub err_c: f64,
    /// `(∫ ‖∇_Γ(M_ε u - v)‖² dt)^{1/2}`.
    pub err_h1: f64,
    /// `ε^{-1/2}(max_t ‖u - v̄‖_{L²(Ω_ε)} + (∫ ‖∇(u - v̄)‖² dt)^{1/2})`.
    pub err_thin: f64,
}

struct ErrorAccumulator<'a> {
    grid: &'a ThinGrid,
    op: &'a ThinOperator,
    reference: &'a ReferenceSolution,
    snapshot_times: &'a [f64],
    index: usize,
    t_prev: f64,
    max_c: f64,
    max_thin: f64,
    int_h1: f64,
    int_dir: f64,
    failure: Option<String>,
}

impl<'a> ErrorAccumulator<'a> {
    fn observe(&mut self, t: f64, u: &ThinField) {
        if self.failure.is_some() {
            return;
        }
        let Some(v) = self.reference.steps.get(self.index) else {
            self.failure = Some("thin run has more steps than the reference".into());
            return;
        };
        if (self.reference.times[self.index] - t).abs() > 1e-12 {
            self.failure = Some(format!("time mismatch at step {}", self.index));
            return;
        }
        let sg = self.grid.surface();
        let (Ok(mu), Ok(vbar)) = (average(self.grid, u), extend(self.grid, v)) else {
            self.failure = Some("grid mismatch".into());
            return;
        };
        let dm = mu.sub(v);
        let d = u.sub(&vbar);
        let h1 = sg.norm(&dm, NormKind::H1Seminorm).powi(2);
        let dir = self.op.dirichlet_energy(&d);
        // Right-endpoint rule, as for the cumulative energy trace: a trapezoid
        // would charge half a step of the initial normal layer, which relaxes
        // on an O(ε²) time scale far shorter than dt.
        if self.index > 0 {
            let h = t - self.t_prev;
            self.int_h1 += h * h1;
            self.int_dir += h * dir;
        }
        if self.snapshot_times.contains(&t) {
            self.max_c = self.max_c.max(sg.norm(&dm, NormKind::L2));
            self.max_thin = self.max_thin.max(self.grid.norm(&d, NormKind::L2).unwrap_or(f64::NAN));
        }
        self.t_prev = t;
        self.index += 1;
    }

    fn finish(self) -> Result<SweepErrors> {
        if let Some(f) = self.failure {
            return Err(Error::GridMismatch(f));
        }
        if self.index != self.reference.steps.len() {
            return Err(Error::GridMismatch("thin run and reference have different step counts".into()));
        }
        Ok(SweepErrors {
            err_c: self.max_c,
            err_h1: self.int_h1.sqrt(),
            err_thin: (self.max_thin + self.int_dir.sqrt()) / self.grid.epsilon().sqrt(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct EpsilonRun {
    pub epsilon: f64,
    pub errors: SweepErrors,
    /// Same functionals against the reference at the sweep resolution.
    pub errors_coarse_reference: SweepErrors,
    pub trace: EnergyTrace,
    pub energy: EnergyCheck,
    pub max_principle: MaxPrincipleCheck,
    pub final_field: ThinField,
}

impl EpsilonRun {
    /// Relative change of `err_C` when the reference resolution is halved.
    pub fn hygiene(&self) -> f64 {
        let a = self.errors.err_c;
        if a > RATE_FLOOR {
            (self.errors_coarse_reference.err_c - a).abs() / a
        } else {
            0.0
        }
    }
}

fn run_epsilon(
    config: &SweepConfig,
    epsilon: f64,
    fine: &ReferenceSolution,
    coarse: &ReferenceSolution,
) -> Result<EpsilonRun> {
    let domain = config.domain(epsilon)?;
    let grid = ThinGrid::new(&domain, config.m_theta, config.m_sigma)?;
    let op = ThinOperator::new(&grid);
    let u0 = config.init.thin_data(&grid)?;
    let times = config.snapshot_times();
    let solver = ThinSolverConfig {
        linear_solver: config.linear_solver,
        ..ThinSolverConfig::new(config.dt, config.t_final)
            .with_scheme(config.scheme)
            .with_snapshots(times.clone())
    };
    let new_acc = |reference| ErrorAccumulator {
        grid: &grid,
        op: &op,
        reference,
        snapshot_times: &times,
        index: 0,
        t_prev: 0.0,
        max_c: 0.0,
        max_thin: 0.0,
        int_h1: 0.0,
        int_dir: 0.0,
        failure: None,
    };
    let mut acc_fine = new_acc(fine);
    let mut acc_coarse = new_acc(coarse);
    let sol = solve_observed(&op, &u0, &config.params, &solver, |t, u| {
        acc_fine.observe(t, u);
        acc_coarse.observe(t, u);
    })?;
    let energy = sol.trace.energy_check(config.params.lambda, 1.0 + 10.0 * config.dt);
    let max_principle = sol.trace.max_principle_check(1e-3);
    Ok(EpsilonRun {
        epsilon,
        errors: acc_fine.finish()?,
        errors_coarse_reference: acc_coarse.finish()?,
        trace: sol.trace,
        energy,
        max_principle,
        final_field: sol.field,
    })
}

/// A fitted rate, or the reason none could be fitted.
#[derive(Debug, Clone)]
pub struct NamedRate {
    pub name: String,
    pub fit: std::result::Result<RateFit, String>,
}

impl NamedRate {
    fn new(name: &str, pairs: &[(f64, f64)]) -> Self {
        NamedRate {
            name: name.to_string(),
            fit: fit_rate(pairs).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub runs: Vec<EpsilonRun>,
    pub reference: Option<ReferenceSolution>,
    pub lemma: Option<LemmaReport>,
    pub rates: Vec<NamedRate>,
}

impl SweepReport {
    pub fn rate(&self, name: &str) -> Option<&RateFit> {
        self.rates.iter().find(|r| r.name == name).and_then(|r| r.fit.as_ref().ok())
    }

    /// `(epsilon, check_name, error_value)` rows in ε order.
    pub fn sweep_rows(&self) -> Vec<(f64, String, f64)> {
        let mut rows = Vec::new();
        for r in &self.runs {
            rows.push((r.epsilon, "err_C".to_string(), r.errors.err_c));
            rows.push((r.epsilon, "err_H1".to_string(), r.errors.err_h1));
            rows.push((r.epsilon, "err_thin".to_string(), r.errors.err_thin));
            rows.push((r.epsilon, "reference_hygiene".to_string(), r.hygiene()));
            rows.push((r.epsilon, "energy_ratio".to_string(), r.energy.max_ratio));
            rows.push((r.epsilon, "max_sup".to_string(), r.max_principle.max_sup));
        }
        if let Some(lemma) = &self.lemma {
            for row in &lemma.rows {
                rows.push((row.epsilon, row.name.clone(), row.ratio));
            }
        }
        rows
    }
}

fn build_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs the configured checks over the ε ladder.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport> {
    config.validate()?;
    let pool = build_pool(config.jobs)?;
    let mut report = SweepReport {
        runs: Vec::new(),
        reference: None,
        lemma: None,
        rates: Vec::new(),
    };
    let wants = |c: Check| config.checks.contains(&c);
    if wants(Check::SurfaceRate) || wants(Check::ThinRate) {
        let fine = reference_solution(config, config.reference_factor)?;
        let coarse = reference_solution(config, 1)?;
        let runs: Vec<Result<EpsilonRun>> = pool.install(|| {
            config
                .epsilons
                .par_iter()
                .map(|&eps| {
                    run_epsilon(config, eps, &fine, &coarse).map_err(|e| Error::AtEpsilon {
                        epsilon: eps,
                        source: Box::new(e),
                    })
                })
                .collect()
        });
        report.runs = runs.into_iter().collect::<Result<_>>()?;
        for r in &report.runs {
            let h = r.hygiene();
            if h > 0.05 {
                warn!("epsilon = {}: halving the reference resolution changes err_C by {:.1}%", r.epsilon, 100.0 * h);
            } else {
                info!("epsilon = {}: reference hygiene {:.2}%", r.epsilon, 100.0 * h);
            }
        }
        let pairs = |f: fn(&EpsilonRun) -> f64| -> Vec<(f64, f64)> {
            report.runs.iter().map(|r| (r.epsilon, f(r))).collect()
        };
        if wants(Check::SurfaceRate) {
            report.rates.push(NamedRate::new("err_C", &pairs(|r| r.errors.err_c)));
            report.rates.push(NamedRate::new("err_H1", &pairs(|r| r.errors.err_h1)));
        }
        if wants(Check::ThinRate) {
            report.rates.push(NamedRate::new("err_thin", &pairs(|r| r.errors.err_thin)));
        }
        report.reference = Some(fine);
    }
    if wants(Check::LemmaRates) {
        let lemma = pool.install(|| run_lemma_rates(&config.curve, &config.profile, &config.epsilons, config.m_theta, config.m_sigma))?;
        report.rates.extend(lemma.fits.iter().cloned());
        report.lemma = Some(lemma);
    }
    Ok(report)
}

/// Limit-solution rate `max_t ‖M_ε u^ε - v‖_{L²(Γ)}` over the ladder.
pub fn run_surface_rate(config: &SweepConfig) -> Result<SweepReport> {
    run_sweep(&SweepConfig {
        checks: vec![Check::SurfaceRate],
        ..config.clone()
    })
}

/// Thin-domain rate `ε^{-1/2}(‖u^ε - v̄‖_{C(L²)} + ‖∇(u^ε - v̄)‖_{L²(L²)})`.
pub fn run_thin_rate(config: &SweepConfig) -> Result<SweepReport> {
    run_sweep(&SweepConfig {
        checks: vec![Check::ThinRate],
        ..config.clone()
    })
}

/// Smooth two-component test field of the Cartesian position.
pub fn manufactured_field(x: Point2) -> Vec<f64> {
    vec![
        (x[0] + 0.5 * x[1]).sin() + 0.3 * x[0] * x[1],
        (0.8 * x[0] - x[1]).cos(),
    ]
}

pub fn manufactured_eta(theta: f64) -> Vec<f64> {
    vec![theta.cos() + 0.5 * (2.0 * theta).sin(), theta.sin() - 0.3 * (3.0 * theta).cos()]
}

pub fn manufactured_zeta(theta: f64) -> Vec<f64> {
    vec![0.5 + (2.0 * theta).sin(), theta.cos()]
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaRow {
    pub epsilon: f64,
    pub name: String,
    pub raw: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct LemmaReport {
    pub rows: Vec<LemmaRow>,
    pub fits: Vec<NamedRate>,
}

impl LemmaReport {
    pub fn ratios(&self, name: &str) -> Vec<(f64, f64)> {
        self.rows.iter().filter(|r| r.name == name).map(|r| (r.epsilon, r.ratio)).collect()
    }

    /// `max / min` of the compensated ratio across the ladder.
    pub fn spread(&self, name: &str) -> f64 {
        let r: Vec<f64> = self.ratios(name).iter().map(|p| p.1).collect();
        let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = r.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// Rate fit of the compensated ratio `name` (without the `lemma_` prefix).
    pub fn fit(&self, name: &str) -> Option<&RateFit> {
        let key = format!("lemma_{name}");
        self.fits.iter().find(|r| r.name == key).and_then(|r| r.fit.as_ref().ok())
    }
}

/// Names of the compensated ratios expected to decay, with their rate fits.
pub const DECAYING_LEMMA_QUANTITIES: [&str; 4] = [
    "dirichlet_form_defect",
    "cubic_pairing_defect",
    "extension_gradient_defect",
    "extension_gradient_defect_scaled",
];

fn lemma_rows_at(grid: &ThinGrid) -> Result<Vec<LemmaRow>> {
    let eps = grid.epsilon();
    let sg = grid.surface();
    let u = grid.sample(2, |x, _, _| manufactured_field(x));
    let eta = sg.sample(2, manufactured_eta);
    let zeta = sg.sample(2, manufactured_zeta);
    let l2 = grid.norm(&u, NormKind::L2)?;
    let h1 = grid.h1_norm(&u)?;
    let dnu = grid.normal_derivative_norm(&u)?;
    let sup = grid.norm(&u, NormKind::Sup)?;
    let grad_eta = sg.norm(&eta, NormKind::H1Seminorm);
    let mu = average(grid, &u)?;
    let mut rows = Vec::new();
    let mut push = |name: &str, raw: f64, ratio: f64| {
        rows.push(LemmaRow {
            epsilon: eps,
            name: name.to_string(),
            raw,
            ratio,
        })
    };
    let p = averaging::pairing_defect(grid, &u, &eta)?;
    push("pairing_defect", p.defect(), p.relative());
    let d = averaging::dirichlet_form_defect(grid, &u, &eta)?;
    push("dirichlet_form_defect", d, d / (h1 * grad_eta));
    let c = averaging::cubic_pairing_defect(grid, &u, &zeta)?;
    push(
        "cubic_pairing_defect",
        c,
        c / (sup * sup * (l2 + dnu) * sg.norm(&zeta, NormKind::L2)),
    );
    let e = averaging::extension_gradient_defect(grid, &eta)?;
    push("extension_gradient_defect", e, e / grad_eta);
    push("extension_gradient_defect_scaled", e, e / (eps.sqrt() * grad_eta));
    let n = averaging::normal_deviation(grid, &u)?;
    push("normal_deviation", n, n / (eps * (l2 + dnu)));
    let s = averaging::average_square_defect(grid, &u)?;
    push("average_square_defect", s, s / (eps.sqrt() * sup * (l2 + dnu)));
    let m2 = sg.norm(&mu, NormKind::L2);
    push("average_l2", m2, m2 * eps.sqrt() / l2);
    let m4 = sg.norm(&mu, NormKind::L4);
    push("average_l4", m4, m4 * eps.powf(0.25) / grid.norm(&u, NormKind::L4)?);
    let gm = sg.norm(&mu, NormKind::H1Seminorm);
    push("average_h1", gm, gm * eps.sqrt() / h1);
    let t = averaging::tangential_average_defect(grid, &u)?;
    push("tangential_average_defect", t, t / (eps.sqrt() * h1));
    Ok(rows)
}

/// Averaging defects of manufactured fields across the ladder, with rate fits
/// of every compensated ratio.
pub fn run_lemma_rates(
    curve: &PlaneCurve,
    profile: &ThicknessProfile,
    epsilons: &[f64],
    m_theta: usize,
    m_sigma: usize,
) -> Result<LemmaReport> {
    let per_eps: Vec<Result<Vec<LemmaRow>>> = epsilons
        .par_iter()
        .map(|&eps| {
            let domain = ThinDomain::new(curve.clone(), *profile, eps)?;
            let grid = ThinGrid::new(&domain, m_theta, m_sigma)?;
            lemma_rows_at(&grid).map_err(|e| Error::AtEpsilon {
                epsilon: eps,
                source: Box::new(e),
            })
        })
        .collect();
    let rows: Vec<LemmaRow> = per_eps.into_iter().collect::<Result<Vec<_>>>()?.concat();
    let mut names: Vec<String> = Vec::new();
    for r in &rows {
        if !names.contains(&r.name) {
            names.push(r.name.clone());
        }
    }
    let fits = names
        .iter()
        .map(|n| {
            let pairs: Vec<(f64, f64)> = rows.iter().filter(|r| &r.name == n).map(|r| (r.epsilon, r.ratio)).collect();
            NamedRate::new(&format!("lemma_{n}"), &pairs)
        })
        .collect();
    Ok(LemmaReport { rows, fits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fit_examples() {
        let f = fit_rate(&[(0.2, 0.2), (0.1, 0.1), (0.05, 0.05)]).unwrap();
        assert_abs_diff_eq!(f.slope, 1.0, epsilon = 1e-12);
        assert!(f.max_residual < 1e-12);
        let f = fit_rate(&[(0.2, 0.04), (0.1, 0.01), (0.05, 0.0025)]).unwrap();
        assert_abs_diff_eq!(f.slope, 2.0, epsilon = 1e-12);
        let f = fit_rate(&[(0.2, 0.04), (0.1, 0.01), (0.05, 0.0025), (0.025, 1e-15)]).unwrap();
        assert_eq!(f.excluded, vec![(0.025, 1e-15)]);
        assert_eq!(f.pairs.len(), 3);
        assert!(matches!(
            fit_rate(&[(0.2, 0.0), (0.1, 0.0), (0.05, 0.0)]),
            Err(Error::InsufficientRateData { kept: 0, excluded: 3 })
        ));
    }

    #[test]
    fn fourier_data_layout() {
        let f = FourierData::from_flat(&[1.0, 2.0, 3.0, 0.5, 0.0, 0.0], 2).unwrap();
        assert_eq!(f.components.len(), 2);
        let v = f.eval(0.0);
        assert_abs_diff_eq!(v[0], 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 0.5, epsilon = 1e-15);
        let v = f.eval(PI / 2.0);
        assert_abs_diff_eq!(v[0], 1.0 + 3.0, epsilon = 1e-12);
        assert!(FourierData::from_flat(&[1.0, 2.0, 3.0], 2).is_err());
    }

    #[test]
    fn sup_growing_data_hit_target() {
        let v0 = FourierData::from_flat(&[0.5, 0.3], 1).unwrap();
        let init = InitialDataFamily::SupGrowing {
            v0,
            c1: 1.0,
            alpha: 0.1,
        };
        let d = ThinDomain::new(PlaneCurve::circle(1.0).unwrap(), ThicknessProfile::constant(0.0, 1.0).unwrap(), 0.05)
            .unwrap();
        let grid = ThinGrid::new(&d, 128, 4).unwrap();
        let u = init.thin_data(&grid).unwrap();
        let sup = grid.norm(&u, NormKind::Sup).unwrap();
        assert_abs_diff_eq!(sup, 0.05f64.powf(-1.0 / 3.0 + 0.1), epsilon = 1e-12);
    }

    #[test]
    fn normal_perturbation_has_expected_size() {
        let v0 = FourierData::from_flat(&[0.5], 1).unwrap();
        let mut ratios = Vec::new();
        for eps in [0.1, 0.05] {
            let d = ThinDomain::new(PlaneCurve::circle(1.0).unwrap(), ThicknessProfile::constant(0.0, 1.0).unwrap(), eps)
                .unwrap();
            let grid = ThinGrid::new(&d, 64, 16).unwrap();
            let init = InitialDataFamily::NormalPerturbed {
                v0: v0.clone(),
                beta: 1.0,
                amplitude: 1.0,
            };
            let u = init.thin_data(&grid).unwrap();
            let base = InitialDataFamily::WellPrepared { v0: v0.clone() }.thin_data(&grid).unwrap();
            // ε^{-1/2} ‖u₀ - v̄₀‖ = O(ε) for β = 1.
            ratios.push(grid.norm(&u.sub(&base), NormKind::L2).unwrap() / eps.sqrt() / eps);
        }
        assert!((ratios[0] / ratios[1] - 1.0).abs() < 0.1, "{ratios:?}");
    }
}
