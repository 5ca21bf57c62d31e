//! Closed plane curves, thickness profiles and Fermi coordinates of the
//! curved thin domain around a curve.
//!
//! Sign convention: the unit normal `ν` points outward (curves are traversed
//! counterclockwise) and `kappa_w` is the eigenvalue of the Weingarten map
//! `W = -∇_Γ ν`, so that `dν/ds = -kappa_w t`. A circle of radius `R`
//! therefore has `kappa_w = -1/R`, the opposite of the usual "curvature of
//! a circle is 1/R" convention. The area stretch of the offset map is
//! `J(θ, r) = 1 - r kappa_w(θ)`.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

/// Ambient dimension of every geometry in this crate. Curves are hypersurfaces
/// of R^2; higher dimensions would add principal curvatures to `FrameSample`.
pub const AMBIENT_DIM: usize = 2;

/// Smallest admissible speed `|γ'(θ)|` of a parametrization.
pub const DEFAULT_M_MIN: f64 = 1e-6;

/// Samples used for suprema, validity checks and reach estimates.
const GEOMETRY_SAMPLES: usize = 1024;
const OFFSET_POLYLINE_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum CurveFamily {
    Circle { radius: f64 },
    Ellipse { a: f64, b: f64 },
    /// Star-shaped curve `γ(θ) = ρ(θ)(cos θ, sin θ)` with
    /// `ρ(θ) = c0 + Σ_k (cos_k cos kθ + sin_k sin kθ)`, `k = 1, 2, ...`.
    Fourier {
        c0: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
    /// Straight segment of the given length with periodic identification.
    /// Curvature vanishes identically; used as an exact test fixture.
    Flat { length: f64 },
}

/// Position and first three θ-derivatives of a parametrization.
#[derive(Debug, Clone, Copy)]
pub struct CurveJet {
    pub pos: Point2,
    pub d1: Point2,
    pub d2: Point2,
    pub d3: Point2,
}

/// Differential geometry of the curve at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSample {
    pub position: Point2,
    pub tangent: Point2,
    pub normal: Point2,
    pub kappa_w: f64,
    /// dκ_W/dθ (not arclength).
    pub dkappa_w: f64,
    /// Speed `m(θ) = |γ'(θ)|`.
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneCurve {
    family: CurveFamily,
    m_min: f64,
}

impl PlaneCurve {
    pub fn circle(radius: f64) -> Result<Self> {
        Self::new(CurveFamily::Circle { radius })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Self::new(CurveFamily::Ellipse { a, b })
    }

    pub fn fourier(c0: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        Self::new(CurveFamily::Fourier { c0, cos, sin })
    }

    pub fn flat(length: f64) -> Result<Self> {
        Self::new(CurveFamily::Flat { length })
    }

    pub fn new(family: CurveFamily) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidCurve(format!("{name} must be positive, got {v}")))
            }
        };
        match &family {
            CurveFamily::Circle { radius } => positive("radius", *radius)?,
            CurveFamily::Ellipse { a, b } => {
                positive("semi-axis a", *a)?;
                positive("semi-axis b", *b)?;
            }
            CurveFamily::Fourier { c0, cos, sin } => {
                if !c0.is_finite() || cos.iter().chain(sin).any(|c| !c.is_finite()) {
                    return Err(Error::InvalidCurve("non-finite Fourier coefficient".into()));
                }
            }
            CurveFamily::Flat { length } => positive("length", *length)?,
        }
        let curve = PlaneCurve {
            family,
            m_min: DEFAULT_M_MIN,
        };
        if let CurveFamily::Fourier { .. } = curve.family {
            let min_rho = sample_thetas(GEOMETRY_SAMPLES)
                .map(|t| curve.radial(t).0)
                .fold(f64::INFINITY, f64::min);
            if min_rho <= 0.0 {
                return Err(Error::InvalidCurve(format!(
                    "radial function must stay positive, minimum {min_rho}"
                )));
            }
        }
        let min_metric = curve.min_metric(GEOMETRY_SAMPLES);
        if min_metric < curve.m_min {
            return Err(Error::InvalidCurve(format!(
                "degenerate parametrization: min |γ'| = {min_metric} < {}",
                curve.m_min
            )));
        }
        Ok(curve)
    }

    pub fn family(&self) -> &CurveFamily {
        &self.family
    }

    pub fn dimension(&self) -> usize {
        AMBIENT_DIM
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.family, CurveFamily::Flat { .. })
    }

    /// ρ and its first three derivatives for the radial families.
    fn radial(&self, theta: f64) -> (f64, f64, f64, f64) {
        match &self.family {
            CurveFamily::Circle { radius } => (*radius, 0.0, 0.0, 0.0),
            CurveFamily::Fourier { c0, cos, sin } => {
                let (mut r0, mut r1, mut r2, mut r3) = (*c0, 0.0, 0.0, 0.0);
                let n = cos.len().max(sin.len());
                for i in 0..n {
                    let k = (i + 1) as f64;
                    let a = cos.get(i).copied().unwrap_or(0.0);
                    let b = sin.get(i).copied().unwrap_or(0.0);
                    let (s, c) = (k * theta).sin_cos();
                    let f = a * c + b * s;
                    let df = k * (-a * s + b * c);
                    r0 += f;
                    r1 += df;
                    r2 -= k * k * f;
                    r3 -= k * k * df;
                }
                (r0, r1, r2, r3)
            }
            _ => unreachable!("radial() called on a non-radial family"),
        }
    }

    /// Analytic position and derivatives.
    pub fn jet(&self, theta: f64) -> CurveJet {
        match &self.family {
            CurveFamily::Ellipse { a, b } => {
                let (s, c) = theta.sin_cos();
                CurveJet {
                    pos: [a * c, b * s],
                    d1: [-a * s, b * c],
                    d2: [-a * c, -b * s],
                    d3: [a * s, -b * c],
                }
            }
            CurveFamily::Flat { length } => {
                let speed = length / (2.0 * PI);
                CurveJet {
                    pos: [speed * theta, 0.0],
                    d1: [speed, 0.0],
                    d2: [0.0, 0.0],
                    d3: [0.0, 0.0],
                }
            }
            CurveFamily::Circle { .. } | CurveFamily::Fourier { .. } => {
                let (r0, r1, r2, r3) = self.radial(theta);
                let (s, c) = theta.sin_cos();
                let radial = [c, s];
                let angular = [-s, c];
                let comb = |p: f64, q: f64| [p * radial[0] + q * angular[0], p * radial[1] + q * angular[1]];
                CurveJet {
                    pos: comb(r0, 0.0),
                    d1: comb(r1, r0),
                    d2: comb(r2 - r0, 2.0 * r1),
                    d3: comb(r3 - 3.0 * r1, 3.0 * r2 - r0),
                }
            }
        }
    }

    pub fn position(&self, theta: f64) -> Point2 {
        self.jet(theta).pos
    }

    pub fn metric(&self, theta: f64) -> f64 {
        let d = self.jet(theta).d1;
        d[0].hypot(d[1])
    }

    fn min_metric(&self, samples: usize) -> f64 {
        sample_thetas(samples)
            .map(|t| self.metric(t))
            .fold(f64::INFINITY, f64::min)
    }

    /// Position, unit tangent, outward unit normal, Weingarten curvature and speed.
    pub fn frame(&self, theta: f64) -> FrameSample {
        let CurveJet { pos, d1, d2, d3 } = self.jet(theta);
        let m = d1[0].hypot(d1[1]);
        let tangent = [d1[0] / m, d1[1] / m];
        let normal = [tangent[1], -tangent[0]];
        let cross12 = d1[0] * d2[1] - d1[1] * d2[0];
        let cross13 = d1[0] * d3[1] - d1[1] * d3[0];
        let dot12 = d1[0] * d2[0] + d1[1] * d2[1];
        let m3 = m * m * m;
        // Signed curvature of a counterclockwise curve and its θ-derivative;
        // kappa_w is its negative.
        let kappa = cross12 / m3;
        let dkappa = cross13 / m3 - 3.0 * cross12 * dot12 / (m3 * m * m);
        FrameSample {
            position: pos,
            tangent,
            normal,
            kappa_w: -kappa,
            dkappa_w: -dkappa,
            metric: m,
        }
    }

    /// Largest |κ_W| over a fine sample of the curve.
    pub fn sup_abs_kappa(&self) -> f64 {
        sample_thetas(GEOMETRY_SAMPLES)
            .map(|t| self.frame(t).kappa_w.abs())
            .fold(0.0, f64::max)
    }

    /// Length by the periodic equal-weight rule (spectrally accurate).
    pub fn length(&self) -> f64 {
        let n = GEOMETRY_SAMPLES;
        sample_thetas(n).map(|t| self.metric(t)).sum::<f64>() * 2.0 * PI / n as f64
    }

    /// Admissible tubular radius: `0.9 / sup|κ_W|`, reduced until the offset
    /// curves at `±delta` no longer self-intersect.
    pub fn tubular_radius(&self) -> f64 {
        if self.is_flat() {
            return f64::INFINITY;
        }
        if self.offset_self_intersects(0.0) {
            return 0.0;
        }
        let sup = self.sup_abs_kappa();
        let mut delta = if sup > 0.0 { 0.9 / sup } else { f64::INFINITY };
        if !delta.is_finite() {
            // A closed curve always has somewhere curvature; only reachable through
            // round-off, so fall back to a length-based bound.
            delta = self.length() / (2.0 * PI);
        }
        let clashes = |d: f64| self.offset_self_intersects(d) || self.offset_self_intersects(-d);
        if !clashes(delta) {
            return delta;
        }
        let (mut lo, mut hi) = (0.0, delta);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if clashes(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// True if the polyline through `γ(θ_j) + r ν(θ_j)` crosses itself.
    pub fn offset_self_intersects(&self, r: f64) -> bool {
        let n = OFFSET_POLYLINE_SAMPLES;
        let pts: Vec<Point2> = sample_thetas(n)
            .map(|t| {
                let f = self.frame(t);
                [f.position[0] + r * f.normal[0], f.position[1] + r * f.normal[1]]
            })
            .collect();
        for i in 0..n {
            let (a0, a1) = (pts[i], pts[(i + 1) % n]);
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                if segments_intersect(a0, a1, pts[j], pts[(j + 1) % n]) {
                    return true;
                }
            }
        }
        false
    }
}

fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let orient = |a: Point2, b: Point2, c: Point2| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

pub(crate) fn sample_thetas(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |j| 2.0 * PI * j as f64 / n as f64)
}

/// 2π-periodic C¹ scalar function on the curve parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileFn {
    Constant(f64),
    /// `c0 + c1 cos(k θ)`.
    Cosine { c0: f64, c1: f64, k: u32 },
}

impl ProfileFn {
    pub fn value(&self, theta: f64) -> f64 {
        match *self {
            ProfileFn::Constant(c) => c,
            ProfileFn::Cosine { c0, c1, k } => c0 + c1 * (k as f64 * theta).cos(),
        }
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        match *self {
            ProfileFn::Constant(_) => 0.0,
            ProfileFn::Cosine { c1, k, .. } => -c1 * k as f64 * (k as f64 * theta).sin(),
        }
    }

    /// Exact supremum of |f|.
    pub fn sup_abs(&self) -> f64 {
        match *self {
            ProfileFn::Constant(c) => c.abs(),
            ProfileFn::Cosine { c0, c1, k: 0 } => (c0 + c1).abs(),
            ProfileFn::Cosine { c0, c1, .. } => (c0 + c1).abs().max((c0 - c1).abs()),
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            ProfileFn::Constant(c) => c.is_finite(),
            ProfileFn::Cosine { c0, c1, .. } => c0.is_finite() && c1.is_finite(),
        }
    }
}

/// Inner and outer offsets `g0 < g1` of the thin domain, in units of ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThicknessProfile {
    pub g0: ProfileFn,
    pub g1: ProfileFn,
}

impl ThicknessProfile {
    pub fn new(g0: ProfileFn, g1: ProfileFn) -> Result<Self> {
        if !g0.is_finite() || !g1.is_finite() {
            return Err(Error::InvalidProfile("non-finite coefficient".into()));
        }
        Ok(ThicknessProfile { g0, g1 })
    }

    pub fn constant(g0: f64, g1: f64) -> Result<Self> {
        Self::new(ProfileFn::Constant(g0), ProfileFn::Constant(g1))
    }

    /// Thickness `g = g1 - g0`.
    pub fn g(&self, theta: f64) -> f64 {
        self.g1.value(theta) - self.g0.value(theta)
    }

    pub fn dg(&self, theta: f64) -> f64 {
        self.g1.derivative(theta) - self.g0.derivative(theta)
    }

    /// Sampled minimum and maximum of `g`.
    pub fn g_range(&self) -> (f64, f64) {
        sample_thetas(GEOMETRY_SAMPLES)
            .map(|t| self.g(t))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g), hi.max(g)))
    }

    /// The same profile with `g` scaled by `factor` about `g0`.
    pub fn scaled_thickness(&self, factor: f64) -> Self {
        let scale = |f: ProfileFn| match f {
            ProfileFn::Constant(c) => ProfileFn::Constant(factor * c),
            ProfileFn::Cosine { c0, c1, k } => ProfileFn::Cosine {
                c0: factor * c0,
                c1: factor * c1,
                k,
            },
        };
        ThicknessProfile {
            g0: scale(self.g0),
            g1: scale(self.g1),
        }
    }
}

/// Geometric quantities at a point of the reference grid needed by the
/// transformed gradient and the area element `J m ε g dθ dσ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTerms {
    pub metric: f64,
    pub jacobian: f64,
    /// ∂R/∂θ = ε (g0' + σ g').
    pub dr_dtheta: f64,
    /// ∂R/∂σ = ε g.
    pub dr_dsigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FermiPoint {
    pub x: Point2,
    pub r: f64,
    pub terms: MetricTerms,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidityFailure {
    NonPositiveThickness { min_g: f64 },
    OffsetSelfIntersection { min_jacobian: f64 },
    ExceedsTube { extent: f64, delta: f64 },
}

impl fmt::Display for ValidityFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidityFailure::NonPositiveThickness { min_g } => {
                write!(f, "thickness g = g1 - g0 must be positive (min {min_g})")
            }
            ValidityFailure::OffsetSelfIntersection { min_jacobian } => {
                write!(f, "offset curves self-intersect (min 1 - r kappa_w = {min_jacobian})")
            }
            ValidityFailure::ExceedsTube { extent, delta } => {
                write!(f, "band extent eps*sup|g_i| = {extent} reaches the tubular radius {delta}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    pub delta: f64,
    pub min_g: f64,
    pub max_g: f64,
    pub min_jacobian: f64,
    pub max_jacobian: f64,
    pub sup_kappa: f64,
    pub failures: Vec<ValidityFailure>,
}

impl ValidityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThinDomain {
    pub curve: PlaneCurve,
    pub profile: ThicknessProfile,
    pub epsilon: f64,
    pub delta: f64,
}

impl ThinDomain {
    /// Builds the domain and computes its tubular radius. Geometric validity is
    /// reported by [`ThinDomain::validate`], not enforced here.
    pub fn new(curve: PlaneCurve, profile: ThicknessProfile, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        let delta = curve.tubular_radius();
        Ok(ThinDomain {
            curve,
            profile,
            epsilon,
            delta,
        })
    }

    /// Same curve and profile at a different thickness scale.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        Ok(ThinDomain { epsilon, ..self.clone() })
    }

    pub fn validate(&self) -> ValidityReport {
        let eps = self.epsilon;
        let mut report = ValidityReport {
            delta: self.delta,
            min_g: f64::INFINITY,
            max_g: f64::NEG_INFINITY,
            min_jacobian: f64::INFINITY,
            max_jacobian: f64::NEG_INFINITY,
            sup_kappa: 0.0,
            failures: Vec::new(),
        };
        for theta in sample_thetas(GEOMETRY_SAMPLES) {
            let kw = self.curve.frame(theta).kappa_w;
            report.sup_kappa = report.sup_kappa.max(kw.abs());
            let g = self.profile.g(theta);
            report.min_g = report.min_g.min(g);
            report.max_g = report.max_g.max(g);
            // J is affine in r, so its extremes over the band sit on the boundaries.
            for r in [eps * self.profile.g0.value(theta), eps * self.profile.g1.value(theta)] {
                let j = 1.0 - r * kw;
                report.min_jacobian = report.min_jacobian.min(j);
                report.max_jacobian = report.max_jacobian.max(j);
            }
        }
        if report.min_g <= 0.0 {
            report.failures.push(ValidityFailure::NonPositiveThickness { min_g: report.min_g });
        }
        if report.min_jacobian <= 0.0 {
            report.failures.push(ValidityFailure::OffsetSelfIntersection {
                min_jacobian: report.min_jacobian,
            });
        }
        let extent = eps * self.profile.g0.sup_abs().max(self.profile.g1.sup_abs());
        if extent >= self.delta {
            report.failures.push(ValidityFailure::ExceedsTube {
                extent,
                delta: self.delta,
            });
        }
        report
    }

    /// Returns the domain if valid, the failure list otherwise.
    pub fn ensure_valid(&self) -> Result<&Self> {
        let report = self.validate();
        if report.passed() {
            Ok(self)
        } else {
            Err(Error::InvalidDomain(report.failures))
        }
    }

    pub fn jacobian(&self, theta: f64, r: f64) -> Result<f64> {
        if r.abs() > self.delta {
            return Err(Error::OutOfTube { r, delta: self.delta });
        }
        Ok(1.0 - r * self.curve.frame(theta).kappa_w)
    }

    /// Signed offset `R(θ, σ) = ε (g0(θ) + σ g(θ))`.
    pub fn offset(&self, theta: f64, sigma: f64) -> f64 {
        self.epsilon * (self.profile.g0.value(theta) + sigma * self.profile.g(theta))
    }

    pub fn fermi_map(&self, theta: f64, sigma: f64) -> Result<FermiPoint> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(Error::SigmaOutOfRange(sigma));
        }
        let frame = self.curve.frame(theta);
        let eps = self.epsilon;
        let r = self.offset(theta, sigma);
        let x = [
            frame.position[0] + r * frame.normal[0],
            frame.position[1] + r * frame.normal[1],
        ];
        Ok(FermiPoint {
            x,
            r,
            terms: MetricTerms {
                metric: frame.metric,
                jacobian: 1.0 - r * frame.kappa_w,
                dr_dtheta: eps * (self.profile.g0.derivative(theta) + sigma * self.profile.dg(theta)),
                dr_dsigma: eps * self.profile.g(theta),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn annulus(eps: f64) -> ThinDomain {
        ThinDomain::new(
            PlaneCurve::circle(1.0).unwrap(),
            ThicknessProfile::constant(0.0, 1.0).unwrap(),
            eps,
        )
        .unwrap()
    }

    #[test]
    fn unit_circle_frame_at_zero() {
        let f = PlaneCurve::circle(1.0).unwrap().frame(0.0);
        assert_abs_diff_eq!(f.position[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.position[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.normal[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.tangent[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.kappa_w, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.metric, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn circle_radius_two_curvature() {
        let c = PlaneCurve::circle(2.0).unwrap();
        for i in 0..16 {
            let f = c.frame(i as f64 * 0.4);
            assert_abs_diff_eq!(f.kappa_w, -0.5, epsilon = 1e-14);
            assert_abs_diff_eq!(f.dkappa_w, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn round_ellipse_matches_circle() {
        let c = PlaneCurve::circle(1.7).unwrap();
        let e = PlaneCurve::ellipse(1.7, 1.7).unwrap();
        for i in 0..64 {
            let t = i as f64 * 2.0 * PI / 64.0;
            let (a, b) = (c.frame(t), e.frame(t));
            for k in 0..2 {
                assert_abs_diff_eq!(a.position[k], b.position[k], epsilon = 1e-12);
                assert_abs_diff_eq!(a.tangent[k], b.tangent[k], epsilon = 1e-12);
                assert_abs_diff_eq!(a.normal[k], b.normal[k], epsilon = 1e-12);
            }
            assert_abs_diff_eq!(a.kappa_w, b.kappa_w, epsilon = 1e-12);
            assert_abs_diff_eq!(a.metric, b.metric, epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobian_examples() {
        let d = annulus(0.1);
        assert_abs_diff_eq!(d.jacobian(0.3, 0.1).unwrap(), 1.1, epsilon = 1e-15);
        assert_abs_diff_eq!(d.jacobian(0.3, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        let d2 = ThinDomain::new(
            PlaneCurve::circle(2.0).unwrap(),
            ThicknessProfile::constant(-1.0, 0.0).unwrap(),
            0.2,
        )
        .unwrap();
        assert_abs_diff_eq!(d2.jacobian(1.0, -0.2).unwrap(), 0.9, epsilon = 1e-15);
    }

    #[test]
    fn jacobian_rejects_offsets_outside_the_tube() {
        let d = annulus(0.1);
        assert!(matches!(d.jacobian(0.0, 0.95), Err(Error::OutOfTube { .. })));
    }

    #[test]
    fn fermi_map_examples() {
        let d = ThinDomain::new(
            PlaneCurve::circle(1.0).unwrap(),
            ThicknessProfile::constant(-1.0, 1.0).unwrap(),
            0.1,
        )
        .unwrap();
        let mid = d.fermi_map(0.0, 0.5).unwrap();
        assert_abs_diff_eq!(mid.r, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mid.x[0], 1.0, epsilon = 1e-15);
        let outer = d.fermi_map(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(outer.r, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(outer.x[0], 1.1, epsilon = 1e-15);
        assert_abs_diff_eq!(outer.x[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(outer.terms.dr_dsigma, 0.2, epsilon = 1e-15);
        assert!(matches!(d.fermi_map(0.0, 1.5), Err(Error::SigmaOutOfRange(_))));
    }

    #[test]
    fn validate_examples() {
        let ok = annulus(0.5).validate();
        assert!(ok.passed(), "{:?}", ok.failures);
        assert_abs_diff_eq!(ok.min_jacobian, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ok.max_jacobian, 1.5, epsilon = 1e-12);

        let inner = ThinDomain::new(
            PlaneCurve::circle(1.0).unwrap(),
            ThicknessProfile::constant(-3.0, 0.0).unwrap(),
            0.5,
        )
        .unwrap()
        .validate();
        assert!(!inner.passed());
        assert!(inner
            .failures
            .iter()
            .any(|f| matches!(f, ValidityFailure::OffsetSelfIntersection { .. })));

        let degenerate = ThinDomain::new(
            PlaneCurve::circle(1.0).unwrap(),
            ThicknessProfile::constant(1.0, 1.0).unwrap(),
            0.1,
        )
        .unwrap()
        .validate();
        assert!(degenerate
            .failures
            .iter()
            .any(|f| matches!(f, ValidityFailure::NonPositiveThickness { .. })));
    }

    #[test]
    fn tubular_radius_of_circle_is_curvature_bound() {
        let c = PlaneCurve::circle(2.0).unwrap();
        assert_abs_diff_eq!(c.tubular_radius(), 1.8, epsilon = 1e-12);
    }

    #[test]
    fn pinched_curve_radius_limited_by_offset_clash() {
        // A peanut whose waist is much narrower than its curvature radius there.
        let c = PlaneCurve::fourier(1.0, vec![0.0, 0.8], vec![]).unwrap();
        let delta = c.tubular_radius();
        assert!(delta > 0.0);
        assert!(delta <= 0.9 / c.sup_abs_kappa() + 1e-12);
        assert!(!c.offset_self_intersects(delta) && !c.offset_self_intersects(-delta));
    }

    #[test]
    fn degenerate_curves_rejected() {
        assert!(PlaneCurve::circle(0.0).is_err());
        assert!(PlaneCurve::ellipse(1.0, -1.0).is_err());
        assert!(PlaneCurve::fourier(0.5, vec![1.0], vec![]).is_err());
    }

    #[test]
    fn normals_are_unit_and_orthogonal() {
        let curves = [
            PlaneCurve::ellipse(1.5, 0.7).unwrap(),
            PlaneCurve::fourier(1.0, vec![0.1, 0.05], vec![0.0, 0.0, 0.08]).unwrap(),
        ];
        for c in &curves {
            for t in sample_thetas(97) {
                let f = c.frame(t);
                assert_abs_diff_eq!(f.normal[0].hypot(f.normal[1]), 1.0, epsilon = 1e-12);
                let dot = f.normal[0] * f.tangent[0] + f.normal[1] * f.tangent[1];
                assert_abs_diff_eq!(dot, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn length_of_circle() {
        assert_abs_diff_eq!(PlaneCurve::circle(1.5).unwrap().length(), 3.0 * PI, epsilon = 1e-12);
    }
}
