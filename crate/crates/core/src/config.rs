//! Run configuration: a TOML file with the keys below, every one optional,
//! plus `key=value` overrides addressed by dotted path.
//!
//! ```toml
//! checks = ["surface_rate", "thin_rate", "lemma_rates"]
//!
//! [geometry]
//! family = "circle"          # circle | ellipse | fourier | flat
//! params = [1.0]             # R | a, b | c0, a1, b1, a2, b2, ... | length
//!
//! [profile]
//! g0 = [0.0]                 # [c] constant or [c0, c1, k] for c0 + c1 cos(kθ)
//! g1 = [1.0, 0.3, 1]
//!
//! [sweep]
//! epsilons = [0.2, 0.1, 0.05, 0.025]
//!
//! [gl]
//! lambda = 1.0
//! components = 2
//!
//! [time]
//! T = 0.5
//! dt = 1e-3
//! snapshots = 11
//! scheme = "imex_euler"      # imex_euler | semi_implicit_cn
//!
//! [grid]
//! m_theta = 256
//! m_sigma = 32
//! reference_factor = 2
//!
//! [init]
//! family = "well_prepared"   # well_prepared | normal_perturbed | sup_growing
//! params = [...]             # Fourier coefficients, prefixed by [beta, amplitude]
//!                            # or [c1, alpha] for the last two families
//!
//! [run]
//! epsilon = 0.1              # thickness used by the single-run subcommands
//!
//! [surface]
//! backend = "fd"             # fd | galerkin
//! modes = 16
//! basis = "weighted"         # weighted | unweighted
//!
//! [solver]
//! linear = "direct_banded"   # direct_banded | conjugate_gradient
//! cg_tol = 1e-10
//! cg_max_iter = 2000
//! ```

use std::path::Path;

use serde::Deserialize;
use toml::{Table, Value};

use crate::discretization::{GLParams, DEFAULT_M_SIGMA, DEFAULT_M_THETA};
use crate::error::{Error, Result};
use crate::experiments::{Check, FourierData, InitialDataFamily, SweepConfig, DEFAULT_EPSILONS};
use crate::galerkin::BasisWeighting;
use crate::geometry::{CurveFamily, PlaneCurve, ProfileFn, ThicknessProfile, ThinDomain};
use crate::imex::{LinearSolverKind, TimeScheme};
use crate::surface_solver::{SurfaceBackend, SurfaceSolverConfig};
use crate::thin_solver::ThinSolverConfig;

/// Two smooth components with `‖v0‖_∞` a little above 1.
pub const DEFAULT_INIT_PARAMS: [f64; 10] = [0.5, 0.6, 0.0, 0.0, 0.3, 0.2, 0.0, 0.7, 0.3, 0.0];

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    checks: Option<Vec<String>>,
    geometry: RawGeometry,
    profile: RawProfile,
    sweep: RawSweep,
    gl: RawGl,
    time: RawTime,
    grid: RawGrid,
    init: RawInit,
    run: RawRun,
    surface: RawSurface,
    solver: RawSolver,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawGeometry {
    family: String,
    params: Vec<f64>,
}

impl Default for RawGeometry {
    fn default() -> Self {
        RawGeometry {
            family: "circle".into(),
            params: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawProfile {
    g0: Vec<f64>,
    g1: Vec<f64>,
}

impl Default for RawProfile {
    fn default() -> Self {
        RawProfile {
            g0: vec![0.0],
            g1: vec![1.0, 0.3, 1.0],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSweep {
    epsilons: Vec<f64>,
}

impl Default for RawSweep {
    fn default() -> Self {
        RawSweep {
            epsilons: DEFAULT_EPSILONS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawGl {
    lambda: f64,
    components: usize,
}

impl Default for RawGl {
    fn default() -> Self {
        RawGl {
            lambda: 1.0,
            components: 2,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawTime {
    #[serde(rename = "T")]
    t_final: f64,
    dt: f64,
    snapshots: usize,
    scheme: TimeScheme,
}

impl Default for RawTime {
    fn default() -> Self {
        RawTime {
            t_final: 0.5,
            dt: 1e-3,
            snapshots: 11,
            scheme: TimeScheme::ImexEuler,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawGrid {
    m_theta: usize,
    m_sigma: usize,
    reference_factor: usize,
}

impl Default for RawGrid {
    fn default() -> Self {
        RawGrid {
            m_theta: DEFAULT_M_THETA,
            m_sigma: DEFAULT_M_SIGMA,
            reference_factor: 2,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawInit {
    family: String,
    params: Vec<f64>,
}

impl Default for RawInit {
    fn default() -> Self {
        RawInit {
            family: "well_prepared".into(),
            params: DEFAULT_INIT_PARAMS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawRun {
    epsilon: f64,
}

impl Default for RawRun {
    fn default() -> Self {
        RawRun { epsilon: 0.1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSurface {
    backend: String,
    modes: usize,
    basis: BasisWeighting,
}

impl Default for RawSurface {
    fn default() -> Self {
        RawSurface {
            backend: "fd".into(),
            modes: 16,
            basis: BasisWeighting::Weighted,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSolver {
    linear: String,
    cg_tol: f64,
    cg_max_iter: usize,
}

impl Default for RawSolver {
    fn default() -> Self {
        RawSolver {
            linear: "direct_banded".into(),
            cg_tol: 1e-10,
            cg_max_iter: 2000,
        }
    }
}

/// Fully resolved configuration shared by every subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sweep: SweepConfig,
    pub run_epsilon: f64,
    pub surface_backend: SurfaceBackend,
}

impl RunConfig {
    pub fn thin_domain(&self) -> Result<ThinDomain> {
        self.sweep.domain(self.run_epsilon)
    }

    pub fn thin_solver(&self) -> ThinSolverConfig {
        ThinSolverConfig {
            linear_solver: self.sweep.linear_solver,
            ..ThinSolverConfig::new(self.sweep.dt, self.sweep.t_final)
                .with_scheme(self.sweep.scheme)
                .with_snapshots(self.sweep.snapshot_times())
        }
    }

    pub fn surface_solver(&self) -> SurfaceSolverConfig {
        SurfaceSolverConfig {
            linear_solver: self.sweep.linear_solver,
            ..SurfaceSolverConfig::new(self.sweep.dt, self.sweep.t_final)
                .with_scheme(self.sweep.scheme)
                .with_backend(self.surface_backend)
                .with_snapshots(self.sweep.snapshot_times())
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        resolve(RawConfig::default()).expect("built-in defaults are valid")
    }
}

/// Parses a `key=value` override; the value is read as a TOML value and
/// falls back to a bare string.
pub fn parse_override(s: &str) -> Result<(Vec<String>, Value)> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not of the form key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override `{s}` has an empty key segment")));
    }
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()));
    Ok((path, parsed))
}

fn apply_override(table: &mut Table, path: &[String], value: Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.clone()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{p}` is not a table")))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

pub fn load(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut table: Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
    for o in overrides {
        let (path, value) = parse_override(o)?;
        apply_override(&mut table, &path, value)?;
    }
    let raw: RawConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string().trim().to_string()))?;
    resolve(raw)
}

pub fn load_file(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    load(&text, overrides)
}

fn profile_fn(name: &str, p: &[f64]) -> Result<ProfileFn> {
    match p {
        [c] => Ok(ProfileFn::Constant(*c)),
        [c0, c1, k] if *k >= 0.0 && k.fract() == 0.0 => Ok(ProfileFn::Cosine {
            c0: *c0,
            c1: *c1,
            k: *k as u32,
        }),
        _ => Err(Error::Config(format!(
            "profile.{name} must be [c] or [c0, c1, k] with integer k >= 0"
        ))),
    }
}

fn curve(family: &str, p: &[f64]) -> Result<PlaneCurve> {
    let fam = match (family, p) {
        ("circle", [r]) => CurveFamily::Circle { radius: *r },
        ("ellipse", [a, b]) => CurveFamily::Ellipse { a: *a, b: *b },
        ("flat", [l]) => CurveFamily::Flat { length: *l },
        ("fourier", [c0, rest @ ..]) => {
            let cos = rest.iter().step_by(2).copied().collect();
            let sin = rest.iter().skip(1).step_by(2).copied().collect();
            CurveFamily::Fourier { c0: *c0, cos, sin }
        }
        ("circle" | "ellipse" | "flat" | "fourier", _) => {
            return Err(Error::Config(format!("wrong number of geometry.params for {family}")))
        }
        _ => return Err(Error::Config(format!("unknown geometry.family `{family}`"))),
    };
    PlaneCurve::new(fam)
}

fn init_family(family: &str, p: &[f64], components: usize) -> Result<InitialDataFamily> {
    let need = |n: usize| {
        if p.len() <= n {
            Err(Error::Config(format!("init.params for {family} needs {n} leading values and coefficients")))
        } else {
            Ok(())
        }
    };
    match family {
        "well_prepared" => Ok(InitialDataFamily::WellPrepared {
            v0: FourierData::from_flat(p, components)?,
        }),
        "normal_perturbed" => {
            need(2)?;
            Ok(InitialDataFamily::NormalPerturbed {
                beta: p[0],
                amplitude: p[1],
                v0: FourierData::from_flat(&p[2..], components)?,
            })
        }
        "sup_growing" => {
            need(2)?;
            let (c1, alpha) = (p[0], p[1]);
            if !(alpha > 0.0 && alpha <= 1.0 / 3.0) || c1 <= 0.0 {
                return Err(Error::Config("sup_growing needs c1 > 0 and alpha in (0, 1/3]".into()));
            }
            Ok(InitialDataFamily::SupGrowing {
                c1,
                alpha,
                v0: FourierData::from_flat(&p[2..], components)?,
            })
        }
        _ => Err(Error::Config(format!("unknown init.family `{family}`"))),
    }
}

fn resolve(raw: RawConfig) -> Result<RunConfig> {
    let checks = match &raw.checks {
        None => vec![Check::SurfaceRate, Check::ThinRate, Check::LemmaRates],
        Some(list) => list
            .iter()
            .map(|s| Check::parse(s).ok_or_else(|| Error::Config(format!("unknown check `{s}`"))))
            .collect::<Result<_>>()?,
    };
    let params = GLParams::new(raw.gl.lambda, raw.gl.components)?;
    let linear_solver = match raw.solver.linear.as_str() {
        "direct_banded" => LinearSolverKind::DirectBanded,
        "conjugate_gradient" => LinearSolverKind::ConjugateGradient {
            tol: raw.solver.cg_tol,
            max_iter: raw.solver.cg_max_iter,
        },
        other => return Err(Error::Config(format!("unknown solver.linear `{other}`"))),
    };
    let surface_backend = match raw.surface.backend.as_str() {
        "fd" => SurfaceBackend::Fd,
        "galerkin" => SurfaceBackend::Galerkin {
            modes: raw.surface.modes,
            weighting: raw.surface.basis,
        },
        other => return Err(Error::Config(format!("unknown surface.backend `{other}`"))),
    };
    let sweep = SweepConfig {
        curve: curve(&raw.geometry.family, &raw.geometry.params)?,
        profile: ThicknessProfile::new(profile_fn("g0", &raw.profile.g0)?, profile_fn("g1", &raw.profile.g1)?)?,
        epsilons: raw.sweep.epsilons,
        params,
        t_final: raw.time.t_final,
        dt: raw.time.dt,
        scheme: raw.time.scheme,
        linear_solver,
        m_theta: raw.grid.m_theta,
        m_sigma: raw.grid.m_sigma,
        reference_factor: raw.grid.reference_factor,
        snapshots: raw.time.snapshots,
        init: init_family(&raw.init.family, &raw.init.params, raw.gl.components)?,
        checks,
        jobs: 1,
    };
    Ok(RunConfig {
        sweep,
        run_epsilon: raw.run.epsilon,
        surface_backend,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = load("", &[]).unwrap();
        assert_eq!(c.sweep.epsilons, DEFAULT_EPSILONS.to_vec());
        assert_eq!(c.sweep.m_theta, 256);
        assert_eq!(c.sweep.m_sigma, 32);
        assert_eq!(c.sweep.dt, 1e-3);
        assert_eq!(c.sweep.t_final, 0.5);
        assert_eq!(c.sweep.params.lambda, 1.0);
        assert_eq!(c.sweep.snapshots, 11);
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn overrides_replace_values() {
        let c = load(
            "[time]\ndt = 0.01\n",
            &["time.dt=0.002".into(), "geometry.family=ellipse".into(), "geometry.params=[1.5, 1.0]".into()],
        )
        .unwrap();
        assert_eq!(c.sweep.dt, 0.002);
        assert_eq!(c.sweep.curve.family(), &CurveFamily::Ellipse { a: 1.5, b: 1.0 });
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        assert!(load("[time]\nfoo = 1\n", &[]).unwrap_err().is_config_error());
        assert!(load("bogus = 1\n", &[]).unwrap_err().is_config_error());
        assert!(load("", &["grid.nope=3".into()]).unwrap_err().is_config_error());
        assert!(load("", &["checks=[\"nope\"]".into()]).unwrap_err().is_config_error());
        assert!(load("", &["novalue".into()]).unwrap_err().is_config_error());
    }

    #[test]
    fn families_parse() {
        let c = load("", &["init.family=sup_growing".into(), "init.params=[1.0, 0.1, 0.5, 0.2]".into(), "gl.components=1".into()]).unwrap();
        assert!(matches!(c.sweep.init, InitialDataFamily::SupGrowing { .. }));
        let c = load("", &["geometry.family=fourier".into(), "geometry.params=[1.0, 0.0, 0.0, 0.1, 0.0]".into()]).unwrap();
        assert!(matches!(c.sweep.curve.family(), CurveFamily::Fourier { .. }));
        assert!(load("", &["profile.g1=[1.0, 0.3]".into()]).is_err());
    }
}
