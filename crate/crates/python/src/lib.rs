//! Python bindings. Fields cross the boundary as nested lists:
//! `u[c][j][k]` on the thin grid and `v[c][j]` on the curve.

use ndarray::{Array2, Array3};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use thinflow::averaging;
use thinflow::config;
use thinflow::experiments::{self, fit_rate};
use thinflow::imex::TimeScheme;
use thinflow::invariants::run_invariants;
use thinflow::surface_solver::{self, SurfaceBackend, SurfaceSolverConfig};
use thinflow::thin_solver::{self, ThinOperator, ThinSolverConfig};
use thinflow::trace::EnergyTrace;
use thinflow::{Error, GLParams, ProfileFn, SurfaceField, ThinField};

fn to_py(e: Error) -> PyErr {
    if e.is_config_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn profile_fn(p: &[f64]) -> PyResult<ProfileFn> {
    match *p {
        [c] => Ok(ProfileFn::Constant(c)),
        [c0, c1, k] if k >= 0.0 && k.fract() == 0.0 => Ok(ProfileFn::Cosine { c0, c1, k: k as u32 }),
        _ => Err(PyValueError::new_err("profile must be [c] or [c0, c1, k]")),
    }
}

fn scheme(name: &str) -> PyResult<TimeScheme> {
    match name {
        "imex_euler" => Ok(TimeScheme::ImexEuler),
        "semi_implicit_cn" => Ok(TimeScheme::SemiImplicitCn),
        _ => Err(PyValueError::new_err(format!("unknown scheme `{name}`"))),
    }
}

fn thin_field(u: Vec<Vec<Vec<f64>>>, shape: (usize, usize)) -> PyResult<ThinField> {
    let nc = u.len();
    let flat: Vec<f64> = u.into_iter().flatten().flatten().collect();
    let values = Array3::from_shape_vec((nc, shape.0, shape.1), flat)
        .map_err(|_| PyValueError::new_err(format!("field must have shape [components][{}][{}]", shape.0, shape.1)))?;
    Ok(ThinField { values })
}

fn surface_field(v: Vec<Vec<f64>>, m: usize) -> PyResult<SurfaceField> {
    let nc = v.len();
    let flat: Vec<f64> = v.into_iter().flatten().collect();
    let values = Array2::from_shape_vec((nc, m), flat)
        .map_err(|_| PyValueError::new_err(format!("field must have shape [components][{m}]")))?;
    Ok(SurfaceField { values })
}

fn thin_lists(u: &ThinField) -> Vec<Vec<Vec<f64>>> {
    u.values
        .outer_iter()
        .map(|c| c.outer_iter().map(|row| row.to_vec()).collect())
        .collect()
}

fn surface_lists(v: &SurfaceField) -> Vec<Vec<f64>> {
    v.values.outer_iter().map(|c| c.to_vec()).collect()
}

fn trace_rows(t: &EnergyTrace) -> Vec<(f64, f64, f64, f64, f64)> {
    t.records.iter().map(|r| (r.t, r.l2sq, r.cum_dirichlet, r.cum_l4, r.sup)).collect()
}

type Vec2 = (f64, f64);

/// Closed plane curve (or the periodic flat segment).
#[pyclass(name = "Curve", frozen, module = "thinflow_py")]
struct PyCurve(thinflow::PlaneCurve);

#[pymethods]
impl PyCurve {
    #[staticmethod]
    fn circle(radius: f64) -> PyResult<Self> {
        thinflow::PlaneCurve::circle(radius).map(PyCurve).map_err(to_py)
    }

    #[staticmethod]
    fn ellipse(a: f64, b: f64) -> PyResult<Self> {
        thinflow::PlaneCurve::ellipse(a, b).map(PyCurve).map_err(to_py)
    }

    #[staticmethod]
    fn fourier(c0: f64, cos: Vec<f64>, sin: Vec<f64>) -> PyResult<Self> {
        thinflow::PlaneCurve::fourier(c0, cos, sin).map(PyCurve).map_err(to_py)
    }

    #[staticmethod]
    fn flat(length: f64) -> PyResult<Self> {
        thinflow::PlaneCurve::flat(length).map(PyCurve).map_err(to_py)
    }

    /// `(position, tangent, normal, kappa_w, metric)` at `theta`.
    fn frame(&self, theta: f64) -> (Vec2, Vec2, Vec2, f64, f64) {
        let f = self.0.frame(theta);
        (
            (f.position[0], f.position[1]),
            (f.tangent[0], f.tangent[1]),
            (f.normal[0], f.normal[1]),
            f.kappa_w,
            f.metric,
        )
    }

    fn length(&self) -> f64 {
        self.0.length()
    }

    fn tubular_radius(&self) -> f64 {
        self.0.tubular_radius()
    }

    fn sup_abs_kappa(&self) -> f64 {
        self.0.sup_abs_kappa()
    }
}

/// Band `ε g0(θ) < r < ε g1(θ)` around a curve.
#[pyclass(name = "ThinDomain", frozen, module = "thinflow_py")]
struct PyThinDomain(thinflow::ThinDomain);

#[pymethods]
impl PyThinDomain {
    /// `g0`, `g1` are `[c]` or `[c0, c1, k]` for `c0 + c1 cos(kθ)`.
    #[new]
    fn new(curve: &PyCurve, g0: Vec<f64>, g1: Vec<f64>, epsilon: f64) -> PyResult<Self> {
        let profile = thinflow::ThicknessProfile::new(profile_fn(&g0)?, profile_fn(&g1)?).map_err(to_py)?;
        thinflow::ThinDomain::new(curve.0.clone(), profile, epsilon)
            .map(PyThinDomain)
            .map_err(to_py)
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.0.epsilon
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.0.delta
    }

    fn jacobian(&self, theta: f64, r: f64) -> PyResult<f64> {
        self.0.jacobian(theta, r).map_err(to_py)
    }

    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = self.0.validate();
        let d = PyDict::new(py);
        d.set_item("passed", r.passed())?;
        d.set_item("delta", r.delta)?;
        d.set_item("min_jacobian", r.min_jacobian)?;
        d.set_item("min_g", r.min_g)?;
        d.set_item("failures", r.failures.iter().map(|f| f.to_string()).collect::<Vec<_>>())?;
        Ok(d)
    }
}

#[pyclass(name = "SurfaceGrid", frozen, module = "thinflow_py")]
struct PySurfaceGrid(thinflow::SurfaceGrid);

#[pymethods]
impl PySurfaceGrid {
    #[new]
    fn new(curve: &PyCurve, m_theta: usize) -> PyResult<Self> {
        thinflow::SurfaceGrid::new(&curve.0, m_theta).map(PySurfaceGrid).map_err(to_py)
    }

    #[getter]
    fn m_theta(&self) -> usize {
        self.0.m_theta()
    }

    fn thetas(&self) -> Vec<f64> {
        (0..self.0.m_theta()).map(|j| self.0.theta(j)).collect()
    }

    /// `norm` is one of `l2`, `l4`, `h1`, `sup`.
    fn norm(&self, v: Vec<Vec<f64>>, norm: &str) -> PyResult<f64> {
        let v = surface_field(v, self.0.m_theta())?;
        Ok(self.0.norm(&v, norm_kind(norm)?))
    }
}

#[pyclass(name = "ThinGrid", frozen, module = "thinflow_py")]
struct PyThinGrid(thinflow::ThinGrid);

impl PyThinGrid {
    fn shape(&self) -> (usize, usize) {
        (self.0.m_theta(), self.0.m_sigma())
    }
}

fn norm_kind(name: &str) -> PyResult<thinflow::NormKind> {
    use thinflow::NormKind::*;
    match name {
        "l2" => Ok(L2),
        "l4" => Ok(L4),
        "h1" => Ok(H1Seminorm),
        "sup" => Ok(Sup),
        _ => Err(PyValueError::new_err(format!("unknown norm `{name}`"))),
    }
}

#[pymethods]
impl PyThinGrid {
    #[new]
    fn new(domain: &PyThinDomain, m_theta: usize, m_sigma: usize) -> PyResult<Self> {
        thinflow::ThinGrid::new(&domain.0, m_theta, m_sigma).map(PyThinGrid).map_err(to_py)
    }

    #[getter]
    fn m_theta(&self) -> usize {
        self.0.m_theta()
    }

    #[getter]
    fn m_sigma(&self) -> usize {
        self.0.m_sigma()
    }

    fn surface(&self) -> PySurfaceGrid {
        PySurfaceGrid(self.0.surface().clone())
    }

    /// Cartesian node positions as `[j][k] -> (x, y)`.
    fn positions(&self) -> Vec<Vec<(f64, f64)>> {
        (0..self.0.m_theta())
            .map(|j| {
                (0..self.0.m_sigma())
                    .map(|k| {
                        let p = self.0.position(j, k);
                        (p[0], p[1])
                    })
                    .collect()
            })
            .collect()
    }

    fn norm(&self, u: Vec<Vec<Vec<f64>>>, norm: &str) -> PyResult<f64> {
        let u = thin_field(u, self.shape())?;
        self.0.norm(&u, norm_kind(norm)?).map_err(to_py)
    }

    fn extend(&self, v: Vec<Vec<f64>>) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let v = surface_field(v, self.0.m_theta())?;
        averaging::extend(&self.0, &v).map(|u| thin_lists(&u)).map_err(to_py)
    }

    /// Weighted transverse average `M_ε u`.
    fn average(&self, u: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<Vec<f64>>> {
        let u = thin_field(u, self.shape())?;
        averaging::average(&self.0, &u).map(|v| surface_lists(&v)).map_err(to_py)
    }

    /// Relative defect of `(u, extend η)_Ω = ε (g M_ε u, η)_Γ`.
    fn pairing_defect(&self, u: Vec<Vec<Vec<f64>>>, eta: Vec<Vec<f64>>) -> PyResult<f64> {
        let u = thin_field(u, self.shape())?;
        let eta = surface_field(eta, self.0.m_theta())?;
        averaging::pairing_defect(&self.0, &u, &eta).map(|p| p.relative()).map_err(to_py)
    }
}

/// Solves on the thin grid; returns `{"field", "trace", "snapshots"}`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (grid, u0, lam, dt, t_final, scheme_name = "imex_euler", snapshots = Vec::new()))]
fn solve_thin<'py>(
    py: Python<'py>,
    grid: &PyThinGrid,
    u0: Vec<Vec<Vec<f64>>>,
    lam: f64,
    dt: f64,
    t_final: f64,
    scheme_name: &str,
    snapshots: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let u0 = thin_field(u0, grid.shape())?;
    let params = GLParams::new(lam, u0.components()).map_err(to_py)?;
    let cfg = ThinSolverConfig::new(dt, t_final)
        .with_scheme(scheme(scheme_name)?)
        .with_snapshots(snapshots);
    let op = ThinOperator::new(&grid.0);
    let sol = py
        .detach(|| thin_solver::solve(&op, &u0, &params, &cfg))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("field", thin_lists(&sol.field))?;
    d.set_item("trace", trace_rows(&sol.trace))?;
    d.set_item(
        "snapshots",
        sol.snapshots.iter().map(|(t, u)| (*t, thin_lists(u))).collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// Solves the limit problem; `backend` is `fd` or `galerkin`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (grid, v0, g0, g1, lam, dt, t_final, scheme_name = "imex_euler", backend = "fd", modes = 16, snapshots = Vec::new()))]
fn solve_surface<'py>(
    py: Python<'py>,
    grid: &PySurfaceGrid,
    v0: Vec<Vec<f64>>,
    g0: Vec<f64>,
    g1: Vec<f64>,
    lam: f64,
    dt: f64,
    t_final: f64,
    scheme_name: &str,
    backend: &str,
    modes: usize,
    snapshots: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let v0 = surface_field(v0, grid.0.m_theta())?;
    let profile = thinflow::ThicknessProfile::new(profile_fn(&g0)?, profile_fn(&g1)?).map_err(to_py)?;
    let params = GLParams::new(lam, v0.components()).map_err(to_py)?;
    let backend = match backend {
        "fd" => SurfaceBackend::Fd,
        "galerkin" => SurfaceBackend::Galerkin {
            modes,
            weighting: Default::default(),
        },
        _ => return Err(PyValueError::new_err(format!("unknown backend `{backend}`"))),
    };
    let cfg = SurfaceSolverConfig::new(dt, t_final)
        .with_scheme(scheme(scheme_name)?)
        .with_backend(backend)
        .with_snapshots(snapshots);
    let sol = py
        .detach(|| surface_solver::solve_surface(&grid.0, &v0, &params, &profile, &cfg))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("field", surface_lists(&sol.field))?;
    d.set_item("trace", trace_rows(&sol.trace))?;
    d.set_item(
        "snapshots",
        sol.snapshots.iter().map(|(t, v)| (*t, surface_lists(v))).collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// Least-squares slope of `log error` against `log ε`: `(slope, intercept, max_residual)`.
#[pyfunction(name = "fit_rate")]
fn py_fit_rate(pairs: Vec<(f64, f64)>) -> PyResult<(f64, f64, f64)> {
    let f = fit_rate(&pairs).map_err(to_py)?;
    Ok((f.slope, f.intercept, f.max_residual))
}

/// Runs a sweep from TOML text and overrides; returns `{name: slope}`.
#[pyfunction]
#[pyo3(signature = (config_text = "", overrides = Vec::new(), jobs = 1))]
fn sweep(py: Python<'_>, config_text: &str, overrides: Vec<String>, jobs: usize) -> PyResult<Vec<(String, Option<f64>)>> {
    let mut cfg = config::load(config_text, &overrides).map_err(to_py)?;
    cfg.sweep.jobs = jobs;
    let report = py.detach(|| experiments::run_sweep(&cfg.sweep)).map_err(to_py)?;
    Ok(report
        .rates
        .iter()
        .map(|r| (r.name.clone(), r.fit.as_ref().ok().map(|f| f.slope)))
        .collect())
}

/// Property battery: `[(name, value, threshold, passed)]`.
#[pyfunction]
#[pyo3(signature = (config_text = "", overrides = Vec::new(), seed = 0))]
fn check_invariants(
    py: Python<'_>,
    config_text: &str,
    overrides: Vec<String>,
    seed: u64,
) -> PyResult<Vec<(String, f64, f64, bool)>> {
    let cfg = config::load(config_text, &overrides).map_err(to_py)?;
    let r = py.detach(|| run_invariants(&cfg, seed)).map_err(to_py)?;
    Ok(r.into_iter().map(|x| (x.name.to_string(), x.value, x.threshold, x.passed)).collect())
}

#[pymodule]
pub fn thinflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCurve>()?;
    m.add_class::<PyThinDomain>()?;
    m.add_class::<PySurfaceGrid>()?;
    m.add_class::<PyThinGrid>()?;
    m.add_function(wrap_pyfunction!(solve_thin, m)?)?;
    m.add_function(wrap_pyfunction!(solve_surface, m)?)?;
    m.add_function(wrap_pyfunction!(py_fit_rate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(check_invariants, m)?)?;
    Ok(())
}
