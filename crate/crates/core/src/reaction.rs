//! The Ginzburg–Landau reaction term `λ (|u|² - 1) u` and the scalar facts
//! about it used by the solvers and the invariant checks.

/// `(|a|² - 1) a` written into `out`.
#[inline]
pub fn gl_term(a: &[f64], out: &mut [f64]) {
    let s: f64 = a.iter().map(|v| v * v).sum::<f64>() - 1.0;
    for (o, v) in out.iter_mut().zip(a) {
        *o = s * v;
    }
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// The two gaps of the monotonicity chain
/// `(|a|²a - |b|²b)·(a - b) >= (|a|³ - |b|³)(|a| - |b|) >= 0`,
/// returned as `(left - middle, middle)`, together with the scale
/// `(|a| + |b|)⁴` that bounds every term.
pub fn monotonicity_gaps(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    assert_eq!(a.len(), b.len());
    let (na, nb) = (norm(a), norm(b));
    let left: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (na * na * x - nb * nb * y) * (x - y))
        .sum();
    let middle = (na.powi(3) - nb.powi(3)) * (na - nb);
    (left - middle, middle, (na + nb).powi(4))
}

/// Largest step for which the explicit cubic stays stable:
/// `0.5 / (λ (3 max(1, sup|u0|)² + 1))`.
pub fn stability_dt_max(lambda: f64, sup_u0: f64) -> f64 {
    let s = sup_u0.max(1.0);
    0.5 / (lambda * (3.0 * s * s + 1.0))
}

/// Exact `w(t) = |u(t)|²` for spatially constant data, solving `w' = 2λ w (1 - w)`.
pub fn logistic_w(w0: f64, lambda: f64, t: f64) -> f64 {
    let e = (2.0 * lambda * t).exp();
    w0 * e / (1.0 - w0 + w0 * e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gl_term_vanishes_on_unit_sphere_and_origin() {
        let mut out = [0.0; 2];
        gl_term(&[0.6, 0.8], &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-15));
        gl_term(&[0.0, 0.0], &mut out);
        assert_eq!(out, [0.0, 0.0]);
        gl_term(&[2.0, 0.0], &mut out);
        assert_eq!(out, [6.0, 0.0]);
    }

    #[test]
    fn logistic_limits() {
        assert_eq!(logistic_w(0.0, 1.0, 3.0), 0.0);
        assert!((logistic_w(1.0, 1.0, 3.0) - 1.0).abs() < 1e-15);
        assert!((logistic_w(0.25, 1.0, 50.0) - 1.0).abs() < 1e-12);
        // Small-time derivative 2λw(1-w).
        let h = 1e-6;
        let d = (logistic_w(0.25, 2.0, h) - 0.25) / h;
        assert!((d - 2.0 * 2.0 * 0.25 * 0.75).abs() < 1e-4);
    }

    #[test]
    fn stability_limit_example() {
        assert!((stability_dt_max(1.0, 1.5) - 0.5 / 7.75).abs() < 1e-15);
        assert_eq!(stability_dt_max(2.0, 0.3), stability_dt_max(2.0, 1.0));
    }

    proptest! {
        #[test]
        fn monotonicity_chain_holds(
            a in prop::collection::vec(-10.0f64..10.0, 1..4),
            seed in prop::collection::vec(-10.0f64..10.0, 3),
        ) {
            let b = &seed[..a.len()];
            let (g1, g2, scale) = monotonicity_gaps(&a, b);
            prop_assert!(g1 >= -1e-12 * scale);
            prop_assert!(g2 >= -1e-12 * scale);
        }
    }
}
