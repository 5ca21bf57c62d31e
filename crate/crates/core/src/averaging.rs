//! The weighted average across the thin direction,
//! `M_ε u(θ) = (1/(ε g)) ∫ u J dr = ∫₀¹ u(θ, σ) J(θ, R(θ, σ)) dσ`,
//! the constant extension, and the defects comparing thin-domain quantities
//! with their averaged surface counterparts.
//!
//! Every routine evaluates σ-integrals with the grid's trapezoid weights, so
//! that `(u, η̄)_{L²(Ω_ε)} = ε (g M_ε u, η)_{L²(Γ)}` holds to roundoff.
//! Surface gradients are stored as their component along the unit tangent.

use crate::discretization::{NormKind, SurfaceField, ThinField, ThinGradient, ThinGrid};
use crate::error::{Error, Result};

pub fn average(grid: &ThinGrid, u: &ThinField) -> Result<SurfaceField> {
    grid.check(u)?;
    let (nc, m, s) = u.shape();
    let mut out = SurfaceField::zeros(nc, m);
    for c in 0..nc {
        for j in 0..m {
            out.values[[c, j]] = (0..s)
                .map(|k| grid.sigma_weight(k) * grid.node(j, k).jacobian * u.values[[c, j, k]])
                .sum();
        }
    }
    Ok(out)
}

/// Constant extension `η̄(θ, σ) = η(θ)`.
pub fn extend(grid: &ThinGrid, v: &SurfaceField) -> Result<ThinField> {
    grid.surface().check(v)?;
    let (m, s) = (grid.m_theta(), grid.m_sigma());
    let mut out = ThinField::zeros(v.components(), m, s);
    for c in 0..v.components() {
        for j in 0..m {
            out.values.slice_mut(ndarray::s![c, j, ..]).fill(v.values[[c, j]]);
        }
    }
    Ok(out)
}

/// Both sides of the pairing identity and the scale `(|u|, |η̄|)` used to
/// make the defect relative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingDefect {
    pub thin: f64,
    pub surface: f64,
    pub scale: f64,
}

impl PairingDefect {
    pub fn defect(&self) -> f64 {
        (self.thin - self.surface).abs()
    }

    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.defect() / self.scale
        } else {
            self.defect()
        }
    }
}

fn check_components(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!("component counts differ ({a} vs {b})")));
    }
    Ok(())
}

/// `|(u, η̄)_{L²(Ω_ε)} - ε (g M_ε u, η)_{L²(Γ)}|`.
pub fn pairing_defect(grid: &ThinGrid, u: &ThinField, eta: &SurfaceField) -> Result<PairingDefect> {
    check_components(u.components(), eta.components())?;
    let ext = extend(grid, eta)?;
    let thin = grid.inner(u, &ext);
    let abs_u = ThinField {
        values: u.values.mapv(f64::abs),
    };
    let abs_e = ThinField {
        values: ext.values.mapv(f64::abs),
    };
    let scale = grid.inner(&abs_u, &abs_e);
    let mu = average(grid, u)?;
    let surface = grid.epsilon() * grid.surface().inner(&mu, eta, Some(grid.g_values()));
    Ok(PairingDefect { thin, surface, scale })
}

/// Geometric fields entering the explicit formula for `∇_Γ M_ε u`, per node:
/// `B = P - rW = J t⊗t`, `Ψ_ε = ε(σ g1' + (1-σ) g0')/m · t`, `f_J = ∂_r J / J`
/// and `Ψ_J = ∇_Γ J / J = -r κ_W'(s)/J · t`.
#[derive(Debug, Clone)]
pub struct AverageGradientTerms {
    m_sigma: usize,
    /// Tangential coefficient of `B` (its only nonzero eigenvalue).
    pub b: Vec<f64>,
    pub psi_eps: Vec<f64>,
    pub f_j: Vec<f64>,
    pub psi_j: Vec<f64>,
}

impl AverageGradientTerms {
    pub fn new(grid: &ThinGrid) -> Self {
        let (m, s) = (grid.m_theta(), grid.m_sigma());
        let eps = grid.epsilon();
        let mut t = AverageGradientTerms {
            m_sigma: s,
            b: Vec::with_capacity(m * s),
            psi_eps: Vec::with_capacity(m * s),
            f_j: Vec::with_capacity(m * s),
            psi_j: Vec::with_capacity(m * s),
        };
        for j in 0..m {
            let f = grid.surface().frame(j);
            for k in 0..s {
                let node = grid.node(j, k);
                let sigma = node.sigma;
                t.b.push(node.jacobian);
                t.psi_eps
                    .push(eps * (sigma * grid.dg1(j) + (1.0 - sigma) * grid.dg0(j)) / f.metric);
                t.f_j.push(-f.kappa_w / node.jacobian);
                t.psi_j.push(-node.r * f.dkappa_w / (f.metric * node.jacobian));
            }
        }
        t
    }

    #[inline]
    fn at(&self, v: &[f64], j: usize, k: usize) -> f64 {
        v[j * self.m_sigma + k]
    }

    /// `sup |Ψ_ε| / ε` and `sup |Ψ_J| / ε`.
    pub fn measured_constants(&self, epsilon: f64) -> (f64, f64) {
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs())) / epsilon;
        (sup(&self.psi_eps), sup(&self.psi_j))
    }
}

/// `M_ε(B∇u) + M_ε((∂_ν u + u f_J) Ψ_ε) + M_ε(u Ψ_J)`, tangential coefficient.
pub fn average_gradient_explicit(grid: &ThinGrid, u: &ThinField, du: &ThinGradient) -> Result<SurfaceField> {
    grid.check(u)?;
    if du.tangential.shape() != u.values.shape() {
        return Err(Error::GridMismatch("gradient shape differs from field".into()));
    }
    let terms = AverageGradientTerms::new(grid);
    let (nc, m, s) = u.shape();
    let mut out = SurfaceField::zeros(nc, m);
    for c in 0..nc {
        for j in 0..m {
            let mut acc = 0.0;
            for k in 0..s {
                let val = u.values[[c, j, k]];
                let integrand = terms.at(&terms.b, j, k) * du.tangential[[c, j, k]]
                    + (du.normal[[c, j, k]] + val * terms.at(&terms.f_j, j, k)) * terms.at(&terms.psi_eps, j, k)
                    + val * terms.at(&terms.psi_j, j, k);
                acc += grid.sigma_weight(k) * grid.node(j, k).jacobian * integrand;
            }
            out.values[[c, j]] = acc;
        }
    }
    Ok(out)
}

/// `∇_Γ M_ε u` by differencing the average.
pub fn average_gradient_differenced(grid: &ThinGrid, u: &ThinField) -> Result<SurfaceField> {
    Ok(grid.surface().tangential_derivative(&average(grid, u)?))
}

/// `‖M_ε(|u|²) - |M_ε u|²‖_{L²(Γ)}`.
pub fn average_square_defect(grid: &ThinGrid, u: &ThinField) -> Result<f64> {
    grid.check(u)?;
    let (_, m, s) = u.shape();
    let mut sq = ThinField::zeros(1, m, s);
    for j in 0..m {
        for k in 0..s {
            sq.values[[0, j, k]] = u.magnitude(j, k).powi(2);
        }
    }
    let msq = average(grid, &sq)?;
    let mu = average(grid, u)?;
    let mut d = SurfaceField::zeros(1, m);
    for j in 0..m {
        d.values[[0, j]] = msq.values[[0, j]] - mu.magnitude(j).powi(2);
    }
    Ok(grid.surface().norm(&d, NormKind::L2))
}

/// `‖u - extend(M_ε u)‖_{L²(Ω_ε)}`.
pub fn normal_deviation(grid: &ThinGrid, u: &ThinField) -> Result<f64> {
    let ext = extend(grid, &average(grid, u)?)?;
    grid.norm(&u.sub(&ext), NormKind::L2)
}

/// `|(∇u, ∇η̄)_{L²(Ω_ε)} - ε (g ∇_Γ M_ε u, ∇_Γ η)_{L²(Γ)}|`.
pub fn dirichlet_form_defect(grid: &ThinGrid, u: &ThinField, eta: &SurfaceField) -> Result<f64> {
    check_components(u.components(), eta.components())?;
    let thin = grid.dirichlet_form(u, &extend(grid, eta)?)?;
    let surface = grid.epsilon() * grid.surface().dirichlet_form(&average(grid, u)?, eta, &grid.domain().profile)?;
    Ok((thin - surface).abs())
}

/// `|(|u|² u, ζ̄)_{L²(Ω_ε)} - ε (g |M_ε u|² M_ε u, ζ)_{L²(Γ)}|`.
pub fn cubic_pairing_defect(grid: &ThinGrid, u: &ThinField, zeta: &SurfaceField) -> Result<f64> {
    check_components(u.components(), zeta.components())?;
    let cube = |mag2: f64, v: f64| mag2 * v;
    let (nc, m, s) = u.shape();
    let mut uc = ThinField::zeros(nc, m, s);
    for j in 0..m {
        for k in 0..s {
            let m2 = u.magnitude(j, k).powi(2);
            for c in 0..nc {
                uc.values[[c, j, k]] = cube(m2, u.values[[c, j, k]]);
            }
        }
    }
    let thin = grid.inner(&uc, &extend(grid, zeta)?);
    let mu = average(grid, u)?;
    let mut mc = SurfaceField::zeros(nc, m);
    for j in 0..m {
        let m2 = mu.magnitude(j).powi(2);
        for c in 0..nc {
            mc.values[[c, j]] = cube(m2, mu.values[[c, j]]);
        }
    }
    let surface = grid.epsilon() * grid.surface().inner(&mc, zeta, Some(grid.g_values()));
    Ok((thin - surface).abs())
}

/// `‖∇η̄ - extend(∇_Γ η)‖_{L²(Ω_ε)}`.
pub fn extension_gradient_defect(grid: &ThinGrid, eta: &SurfaceField) -> Result<f64> {
    let grad = grid.gradient(&extend(grid, eta)?)?;
    let surf = extend(grid, &grid.surface().tangential_derivative(eta))?;
    let diff = ThinGradient {
        tangential: &grad.tangential - &surf.values,
        normal: grad.normal,
    };
    Ok(grid.gradient_inner(&diff, &diff).max(0.0).sqrt())
}

/// `‖∇_Γ M_ε u - M_ε(P ∇u)‖_{L²(Γ)}`.
pub fn tangential_average_defect(grid: &ThinGrid, u: &ThinField) -> Result<f64> {
    let du = grid.gradient(u)?;
    let tangential = ThinField { values: du.tangential };
    let d = average_gradient_differenced(grid, u)?.sub(&average(grid, &tangential)?);
    Ok(grid.surface().norm(&d, NormKind::L2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PlaneCurve, ProfileFn, ThicknessProfile, ThinDomain};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn circle_grid(eps: f64, g1: ProfileFn, m: usize, s: usize) -> ThinGrid {
        let d = ThinDomain::new(
            PlaneCurve::circle(1.0).unwrap(),
            ThicknessProfile::new(ProfileFn::Constant(0.0), g1).unwrap(),
            eps,
        )
        .unwrap();
        ThinGrid::new(&d, m, s).unwrap()
    }

    fn flat_grid(eps: f64, m: usize, s: usize) -> ThinGrid {
        let d = ThinDomain::new(
            PlaneCurve::flat(2.0 * std::f64::consts::PI).unwrap(),
            ThicknessProfile::constant(-0.5, 1.0).unwrap(),
            eps,
        )
        .unwrap();
        ThinGrid::new(&d, m, s).unwrap()
    }

    fn random_thin(grid: &ThinGrid, n: usize, rng: &mut ChaCha8Rng) -> ThinField {
        let mut f = ThinField::zeros(n, grid.m_theta(), grid.m_sigma());
        f.values.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        f
    }

    fn random_surface(grid: &ThinGrid, n: usize, rng: &mut ChaCha8Rng) -> SurfaceField {
        let mut f = SurfaceField::zeros(n, grid.m_theta());
        f.values.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        f
    }

    #[test]
    fn average_examples() {
        let flat = flat_grid(0.1, 32, 8);
        let c = flat.sample(2, |_, _, _| vec![2.5, -1.0]);
        let a = average(&flat, &c).unwrap();
        assert!(a.values.row(0).iter().all(|v| (v - 2.5).abs() < 1e-14));
        let grid = circle_grid(0.1, ProfileFn::Constant(1.0), 32, 8);
        let one = grid.sample(1, |_, _, _| vec![1.0]);
        let a = average(&grid, &one).unwrap();
        assert!(a.values.iter().all(|v| (v - 1.05).abs() < 1e-14));
        let f = grid.sample(1, |_, t, _| vec![t.sin()]);
        let af = average(&grid, &f).unwrap();
        for j in 0..32 {
            assert_abs_diff_eq!(af.values[[0, j]], grid.surface().theta(j).sin() * 1.05, epsilon = 1e-14);
        }
    }

    #[test]
    fn extend_examples() {
        let flat = flat_grid(0.1, 16, 5);
        let one = flat.surface().sample(1, |_| vec![1.0]);
        let back = average(&flat, &extend(&flat, &one).unwrap()).unwrap();
        assert!(back.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let v = flat.surface().sample(1, |t| vec![t.cos()]);
        let ext = extend(&flat, &v).unwrap();
        for k in 0..5 {
            assert_eq!(ext.restrict_sigma(k), v);
        }
    }

    #[test]
    fn extension_norm_ratio_tends_to_one() {
        let mut pts = Vec::new();
        for eps in [0.2, 0.1, 0.05, 0.025] {
            let grid = circle_grid(eps, ProfileFn::Cosine { c0: 1.0, c1: 0.3, k: 1 }, 128, 16);
            let v = grid.surface().sample(1, |t| vec![1.0 + 0.5 * (2.0 * t).sin()]);
            let thin = grid.norm(&extend(&grid, &v).unwrap(), NormKind::L2).unwrap().powi(2);
            let surf = eps * grid.surface().inner(&v, &v, Some(grid.g_values()));
            pts.push((eps, (thin / surf - 1.0).abs()));
        }
        let fit = crate::experiments::fit_rate(&pts).unwrap();
        assert!(fit.slope >= 0.9, "{fit:?}");
    }

    #[test]
    fn pairing_identity_on_random_fields() {
        let grid = circle_grid(0.1, ProfileFn::Cosine { c0: 1.0, c1: 0.3, k: 1 }, 64, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let u = random_thin(&grid, 2, &mut rng);
            let eta = random_surface(&grid, 2, &mut rng);
            let d = pairing_defect(&grid, &u, &eta).unwrap();
            assert!(d.relative() <= 1e-12, "{d:?}");
            let d3 = pairing_defect(&grid, &u.scaled(3.0), &eta).unwrap();
            assert!((d3.thin - 3.0 * d.thin).abs() <= 1e-12 * d.scale);
        }
        let zero = ThinField::zeros(2, 64, 8);
        let eta = random_surface(&grid, 2, &mut rng);
        assert_eq!(pairing_defect(&grid, &zero, &eta).unwrap().defect(), 0.0);
    }

    #[test]
    fn explicit_gradient_vanishes_for_constants_on_flat_band() {
        let flat = flat_grid(0.1, 32, 6);
        let c = flat.sample(1, |_, _, _| vec![1.3]);
        let du = flat.gradient(&c).unwrap();
        let g = average_gradient_explicit(&flat, &c, &du).unwrap();
        assert!(g.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn explicit_gradient_of_extension_on_flat_band() {
        let flat = flat_grid(0.1, 64, 6);
        let eta = flat.surface().sample(1, |t| vec![t.sin() + 0.3 * (2.0 * t).cos()]);
        let u = extend(&flat, &eta).unwrap();
        let du = flat.gradient(&u).unwrap();
        let g = average_gradient_explicit(&flat, &u, &du).unwrap();
        let direct = flat.surface().tangential_derivative(&eta);
        assert!(g.sub(&direct).values.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn explicit_gradient_matches_differenced_average() {
        let mut errs = Vec::new();
        for (m, s) in [(64, 8), (128, 16), (256, 32)] {
            let d = ThinDomain::new(
                PlaneCurve::fourier(1.0, vec![0.1, 0.15], vec![0.0, 0.05]).unwrap(),
                ThicknessProfile::new(
                    ProfileFn::Cosine { c0: -0.5, c1: 0.2, k: 2 },
                    ProfileFn::Cosine { c0: 1.0, c1: 0.3, k: 1 },
                )
                .unwrap(),
                0.1,
            )
            .unwrap();
            let grid = ThinGrid::new(&d, m, s).unwrap();
            let u = grid.sample(1, |x, _, _| vec![(x[0] + 0.5 * x[1]).sin() + x[1] * x[1]]);
            let du = grid.gradient(&u).unwrap();
            let a = average_gradient_explicit(&grid, &u, &du).unwrap();
            let b = average_gradient_differenced(&grid, &u).unwrap();
            errs.push(grid.surface().norm(&a.sub(&b), NormKind::Sup));
        }
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order >= 1.9, "{errs:?} order {order}");
    }

    #[test]
    fn defects_vanish_where_exact() {
        let flat = flat_grid(0.1, 64, 8);
        let v = flat.surface().sample(2, |t| vec![t.cos(), 0.5 * (2.0 * t).sin()]);
        let u = extend(&flat, &v).unwrap();
        assert!(average_square_defect(&flat, &u).unwrap() < 1e-13);
        assert!(normal_deviation(&flat, &u).unwrap() < 1e-13);
        assert!(cubic_pairing_defect(&flat, &u, &v).unwrap() < 1e-13);
        assert!(dirichlet_form_defect(&flat, &u, &v).unwrap() < 1e-12);
        let zero = ThinField::zeros(2, 64, 8);
        assert_eq!(average_square_defect(&flat, &zero).unwrap(), 0.0);
        assert_eq!(dirichlet_form_defect(&flat, &zero, &v).unwrap(), 0.0);
        assert_eq!(cubic_pairing_defect(&flat, &zero, &v).unwrap(), 0.0);
    }

    #[test]
    fn normal_deviation_of_extension_on_circle() {
        let grid = circle_grid(0.1, ProfileFn::Constant(1.0), 64, 8);
        let v = grid.surface().sample(1, |t| vec![1.0 + t.cos()]);
        let u = extend(&grid, &v).unwrap();
        // M_ε 1 = 1 + ε/2 exactly, so u - extend(M_ε u) = -(ε/2) u.
        let expected = 0.05 * grid.norm(&u, NormKind::L2).unwrap();
        assert_abs_diff_eq!(normal_deviation(&grid, &u).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn average_square_defect_rate_on_flat_band() {
        let mut pts = Vec::new();
        for eps in [0.2, 0.1, 0.05, 0.025] {
            let flat = flat_grid(eps, 64, 16);
            let u = flat.sample(1, |_, t, s| vec![t.sin() + eps * (std::f64::consts::PI * s).cos()]);
            pts.push((eps, average_square_defect(&flat, &u).unwrap()));
        }
        let fit = crate::experiments::fit_rate(&pts).unwrap();
        assert!(fit.slope >= 1.4, "{fit:?}");
    }

    #[test]
    fn measured_gradient_term_constants_are_bounded() {
        let mut consts = Vec::new();
        for eps in [0.2, 0.1, 0.05] {
            let d = ThinDomain::new(
                PlaneCurve::ellipse(1.3, 0.8).unwrap(),
                ThicknessProfile::new(ProfileFn::Constant(-0.2), ProfileFn::Cosine { c0: 1.0, c1: 0.3, k: 1 }).unwrap(),
                eps,
            )
            .unwrap();
            let grid = ThinGrid::new(&d, 64, 8).unwrap();
            consts.push(AverageGradientTerms::new(&grid).measured_constants(eps));
        }
        for w in consts.windows(2) {
            assert!((w[0].0 - w[1].0).abs() < 1e-9 * w[0].0.max(1.0));
            assert!(w[1].1 <= 1.5 * w[0].1 && w[0].1 <= 1.5 * w[1].1, "{consts:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn pairing_identity_is_exact(seed in any::<u64>(), eps in 0.02f64..0.3) {
            let grid = circle_grid(eps, ProfileFn::Cosine { c0: 1.0, c1: 0.3, k: 2 }, 16, 5);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_thin(&grid, 3, &mut rng);
            let eta = random_surface(&grid, 3, &mut rng);
            prop_assert!(pairing_defect(&grid, &u, &eta).unwrap().relative() <= 1e-12);
        }

        #[test]
        fn average_commutes_with_time_differences(seed in any::<u64>()) {
            let grid = circle_grid(0.1, ProfileFn::Constant(1.0), 16, 5);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_thin(&grid, 2, &mut rng);
            let b = random_thin(&grid, 2, &mut rng);
            let lhs = average(&grid, &b).unwrap().sub(&average(&grid, &a).unwrap());
            let rhs = average(&grid, &b.sub(&a)).unwrap();
            prop_assert!(lhs.sub(&rhs).values.iter().all(|v| v.abs() < 1e-14));
        }
    }
}
