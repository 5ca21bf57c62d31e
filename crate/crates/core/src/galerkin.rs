//! Galerkin backend for the limit equation: real Fourier modes
//! orthonormalized in `(g·,·)_{L²(Γ)}`, the reaction projected by quadrature
//! on the θ-grid, and the coefficient ODE integrated with classical RK4.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::banded::{BandCholesky, SymBandMatrix};
use crate::discretization::{GLParams, SurfaceField, SurfaceGrid};
use crate::error::{Error, Result};
use crate::geometry::ThicknessProfile;
use crate::reaction::gl_term;

/// Inner product used for the Gram–Schmidt pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BasisWeighting {
    /// `(g·,·)_{L²(Γ)}`; the mass matrix is the identity.
    #[default]
    Weighted,
    /// Plain `L²(Γ)`; the weighted mass matrix is then inverted each stage.
    Unweighted,
}

#[derive(Debug, Clone)]
pub struct GalerkinBasis {
    modes: usize,
    weighting: BasisWeighting,
    grid: SurfaceGrid,
    /// `g(θ_j) m(θ_j) Δθ`.
    gweights: Vec<f64>,
    /// Basis values `(2L+1, M)` and θ-derivatives.
    values: Array2<f64>,
    derivs: Array2<f64>,
    /// Row `i` holds the coefficients of basis function `i` in the raw modes
    /// `1, cos θ, sin θ, cos 2θ, ...`.
    coeffs: Array2<f64>,
    mass: Array2<f64>,
    stiffness: Array2<f64>,
    mass_factor: BandCholesky,
}

fn raw_mode(l: usize, theta: f64) -> (f64, f64) {
    if l == 0 {
        return (1.0, 0.0);
    }
    let k = l.div_ceil(2) as f64;
    let (s, c) = (k * theta).sin_cos();
    if l % 2 == 1 {
        (c, -k * s)
    } else {
        (s, k * c)
    }
}

impl GalerkinBasis {
    pub fn new(
        grid: &SurfaceGrid,
        profile: &ThicknessProfile,
        modes: usize,
        weighting: BasisWeighting,
    ) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidParameter("Galerkin mode count must be at least 1".into()));
        }
        let m = grid.m_theta();
        if 4 * modes + 2 > m {
            return Err(Error::Aliasing { modes, m_theta: m });
        }
        let n = 2 * modes + 1;
        let g = grid.sample_scalar(|t| profile.g(t));
        let gweights: Vec<f64> = (0..m).map(|j| g[j] * grid.weight(j)).collect();
        let ortho: Vec<f64> = match weighting {
            BasisWeighting::Weighted => gweights.clone(),
            BasisWeighting::Unweighted => (0..m).map(|j| grid.weight(j)).collect(),
        };
        let mut raw = Array2::zeros((n, m));
        let mut raw_d = Array2::zeros((n, m));
        for l in 0..n {
            for j in 0..m {
                let (v, d) = raw_mode(l, grid.theta(j));
                raw[[l, j]] = v;
                raw_d[[l, j]] = d;
            }
        }
        let inner = |a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>| -> f64 {
            a.iter().zip(b).zip(&ortho).map(|((x, y), w)| w * x * y).sum()
        };
        let mut values: Array2<f64> = Array2::zeros((n, m));
        let mut coeffs: Array2<f64> = Array2::zeros((n, n));
        for i in 0..n {
            let mut v = raw.row(i).to_owned();
            let mut c = Array1::zeros(n);
            c[i] = 1.0;
            for _pass in 0..2 {
                for l in 0..i {
                    let h = inner(v.view(), values.row(l));
                    v.scaled_add(-h, &values.row(l));
                    c.scaled_add(-h, &coeffs.row(l));
                }
            }
            let norm = inner(v.view(), v.view()).sqrt();
            if !(norm > 1e-12) {
                return Err(Error::LinearSolver(format!("Gram-Schmidt breakdown at mode {i}")));
            }
            values.row_mut(i).assign(&(v / norm));
            coeffs.row_mut(i).assign(&(c / norm));
        }
        let derivs = coeffs.dot(&raw_d);
        let mut mass = Array2::zeros((n, n));
        let mut stiffness = Array2::zeros((n, n));
        for i in 0..n {
            for l in 0..=i {
                let (mut a, mut k) = (0.0, 0.0);
                for j in 0..m {
                    let metric = grid.metric(j);
                    a += gweights[j] * values[[i, j]] * values[[l, j]];
                    k += gweights[j] * derivs[[i, j]] * derivs[[l, j]] / (metric * metric);
                }
                mass[[i, l]] = a;
                mass[[l, i]] = a;
                stiffness[[i, l]] = k;
                stiffness[[l, i]] = k;
            }
        }
        let mut dense = SymBandMatrix::zeros(n, n - 1);
        for i in 0..n {
            for l in 0..=i {
                dense.add(i, l, mass[[i, l]]);
            }
        }
        let mass_factor = dense.cholesky()?;
        Ok(GalerkinBasis {
            modes,
            weighting,
            grid: grid.clone(),
            gweights,
            values,
            derivs,
            coeffs,
            mass,
            stiffness,
            mass_factor,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn size(&self) -> usize {
        2 * self.modes + 1
    }

    pub fn weighting(&self) -> BasisWeighting {
        self.weighting
    }

    pub fn grid(&self) -> &SurfaceGrid {
        &self.grid
    }

    /// Gram matrix in the product used for orthonormalization.
    pub fn gram(&self) -> Array2<f64> {
        match self.weighting {
            BasisWeighting::Weighted => self.mass.clone(),
            BasisWeighting::Unweighted => {
                let n = self.size();
                Array2::from_shape_fn((n, n), |(i, l)| {
                    (0..self.grid.m_theta())
                        .map(|j| self.grid.weight(j) * self.values[[i, j]] * self.values[[l, j]])
                        .sum()
                })
            }
        }
    }

    /// `(g φ_i, φ_l)`.
    pub fn mass(&self) -> &Array2<f64> {
        &self.mass
    }

    /// `(g ∇_Γ φ_i, ∇_Γ φ_l)`.
    pub fn stiffness(&self) -> &Array2<f64> {
        &self.stiffness
    }

    pub fn coefficients(&self) -> &Array2<f64> {
        &self.coeffs
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn derivatives(&self) -> &Array2<f64> {
        &self.derivs
    }

    fn solve_mass(&self, rhs: &mut Array2<f64>) {
        if self.weighting == BasisWeighting::Weighted {
            return;
        }
        for mut row in rhs.rows_mut() {
            let mut v = row.to_vec();
            self.mass_factor.solve_in_place(&mut v);
            row.assign(&Array1::from(v));
        }
    }

    /// `(g v, φ_i)` for every component (rows) and basis function (columns).
    fn load(&self, v: &Array2<f64>) -> Array2<f64> {
        let w = Array1::from(self.gweights.clone());
        (v * &w).dot(&self.values.t())
    }

    /// Coefficients of the `(g·,·)`-orthogonal projection, shape `(N, 2L+1)`.
    pub fn project(&self, v: &SurfaceField) -> Result<Array2<f64>> {
        self.grid.check(v)?;
        let mut alpha = self.load(&v.values);
        self.solve_mass(&mut alpha);
        Ok(alpha)
    }

    pub fn evaluate(&self, alpha: &Array2<f64>) -> SurfaceField {
        SurfaceField {
            values: alpha.dot(&self.values),
        }
    }

    /// `α' = M⁻¹(-K α - λ (g f(v), φ))`.
    fn rhs(&self, alpha: &Array2<f64>, params: &GLParams) -> Array2<f64> {
        let mut out = -alpha.dot(&self.stiffness);
        if params.reaction {
            let v = alpha.dot(&self.values);
            let mut f = Array2::zeros(v.raw_dim());
            let comps = v.nrows();
            let (mut a, mut b) = (vec![0.0; comps], vec![0.0; comps]);
            for j in 0..v.ncols() {
                for c in 0..comps {
                    a[c] = v[[c, j]];
                }
                gl_term(&a, &mut b);
                for c in 0..comps {
                    f[[c, j]] = b[c];
                }
            }
            out.scaled_add(-params.lambda, &self.load(&f));
        }
        self.solve_mass(&mut out);
        out
    }

    pub(crate) fn rk4_step(&self, alpha: &Array2<f64>, params: &GLParams, dt: f64) -> Array2<f64> {
        let k1 = self.rhs(alpha, params);
        let k2 = self.rhs(&(alpha + &(&k1 * (0.5 * dt))), params);
        let k3 = self.rhs(&(alpha + &(&k2 * (0.5 * dt))), params);
        let k4 = self.rhs(&(alpha + &(&k3 * dt)), params);
        alpha + &((k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
    }

    /// Largest eigenvalue of `M⁻¹ K` by power iteration.
    pub fn spectral_radius(&self) -> f64 {
        let n = self.size();
        let mut x = Array2::from_shape_fn((1, n), |(_, i)| 1.0 + 0.1 * i as f64);
        let mut lam = 0.0;
        for _ in 0..200 {
            let mut y = x.dot(&self.stiffness);
            self.solve_mass(&mut y);
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            lam = norm / x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x = y / norm;
        }
        lam
    }

    /// `(‖v‖²_g, (g∇v,∇v), ∫g|v|⁴, sup|v|)` of the represented field.
    pub(crate) fn energy(&self, alpha: &Array2<f64>) -> (f64, f64, f64, f64) {
        let l2sq: f64 = alpha.rows().into_iter().map(|a| a.dot(&self.mass.dot(&a))).sum();
        let dir: f64 = alpha.rows().into_iter().map(|a| a.dot(&self.stiffness.dot(&a))).sum();
        let v = alpha.dot(&self.values);
        let (mut l4, mut sup) = (0.0, 0.0f64);
        for j in 0..v.ncols() {
            let s: f64 = v.column(j).iter().map(|x| x * x).sum();
            l4 += self.gweights[j] * s * s;
            sup = sup.max(s);
        }
        (l2sq, dir, l4, sup.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PlaneCurve, ProfileFn};
    use approx::assert_abs_diff_eq;

    fn setup(modes: usize, weighting: BasisWeighting) -> GalerkinBasis {
        let grid = SurfaceGrid::new(&PlaneCurve::ellipse(1.2, 0.8).unwrap(), 128).unwrap();
        let profile =
            ThicknessProfile::new(ProfileFn::Constant(0.0), ProfileFn::Cosine { c0: 1.0, c1: 0.3, k: 1 }).unwrap();
        GalerkinBasis::new(&grid, &profile, modes, weighting).unwrap()
    }

    #[test]
    fn weighted_basis_is_orthonormal() {
        let b = setup(12, BasisWeighting::Weighted);
        let gram = b.gram();
        for i in 0..b.size() {
            for l in 0..b.size() {
                let e = if i == l { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[[i, l]], e, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn unweighted_basis_is_orthonormal_in_plain_l2() {
        let b = setup(8, BasisWeighting::Unweighted);
        let gram = b.gram();
        for i in 0..b.size() {
            assert_abs_diff_eq!(gram[[i, i]], 1.0, epsilon = 1e-10);
        }
        // The g-weighted mass is then not the identity.
        assert!(b.mass()[[0, 1]].abs().max(b.mass()[[0, 2]].abs()) > 1e-2);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = setup(4, BasisWeighting::Weighted);
        let grid = b.grid().clone();
        for i in 0..b.size() {
            let f = SurfaceField {
                values: b.values().row(i).to_owned().insert_axis(ndarray::Axis(0)),
            };
            let d = grid.tangential_derivative(&f);
            for j in 0..grid.m_theta() {
                let exact = b.derivatives()[[i, j]] / grid.metric(j);
                assert!((d.values[[0, j]] - exact).abs() < 2e-2 * (1.0 + exact.abs()));
            }
        }
    }

    #[test]
    fn projection_reproduces_span_members() {
        let b = setup(6, BasisWeighting::Weighted);
        let v = b.grid().sample(2, |t| vec![(2.0 * t).cos() + 0.5, (3.0 * t).sin()]);
        let back = b.evaluate(&b.project(&v).unwrap());
        assert!(v.sub(&back).values.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn aliasing_is_rejected() {
        let grid = SurfaceGrid::new(&PlaneCurve::circle(1.0).unwrap(), 32).unwrap();
        let profile = ThicknessProfile::constant(0.0, 1.0).unwrap();
        assert!(GalerkinBasis::new(&grid, &profile, 7, BasisWeighting::Weighted).is_ok());
        assert!(matches!(
            GalerkinBasis::new(&grid, &profile, 8, BasisWeighting::Weighted),
            Err(Error::Aliasing { .. })
        ));
    }

    #[test]
    fn circle_spectrum_is_mode_squared() {
        let grid = SurfaceGrid::new(&PlaneCurve::circle(1.0).unwrap(), 64).unwrap();
        let profile = ThicknessProfile::constant(0.0, 1.0).unwrap();
        let b = GalerkinBasis::new(&grid, &profile, 5, BasisWeighting::Weighted).unwrap();
        assert_abs_diff_eq!(b.spectral_radius(), 25.0, epsilon = 1e-8);
    }
}
