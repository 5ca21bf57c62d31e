//! Per-step energy records and the discrete energy / maximum-principle checks.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    /// `‖u(t)‖²_{L²}`.
    pub l2sq: f64,
    /// `∫₀ᵗ ‖∇u‖²_{L²} ds`.
    pub cum_dirichlet: f64,
    /// `∫₀ᵗ ‖u‖⁴_{L⁴} ds`.
    pub cum_l4: f64,
    /// `‖u(t)‖_{L^∞}`.
    pub sup: f64,
}

impl TraceRecord {
    pub fn is_finite(&self) -> bool {
        [self.t, self.l2sq, self.cum_dirichlet, self.cum_l4, self.sup]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyTrace {
    pub records: Vec<TraceRecord>,
}

/// Outcome of comparing a trace against
/// `‖u(t)‖² + 2∫‖∇u‖² + 2λ∫‖u‖⁴_{L⁴} ≤ e^{2λt} ‖u₀‖² · slack`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCheck {
    /// Largest ratio of the left side to `e^{2λt}‖u₀‖²`.
    pub max_ratio: f64,
    pub slack: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxPrincipleCheck {
    pub bound: f64,
    pub max_sup: f64,
    pub overshoot: f64,
    pub passed: bool,
}

impl EnergyTrace {
    pub fn push(&mut self, r: TraceRecord) {
        self.records.push(r);
    }

    pub fn first(&self) -> Option<&TraceRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.records.iter().all(|r| r.is_finite())
    }

    pub fn max_sup(&self) -> f64 {
        self.records.iter().map(|r| r.sup).fold(0.0, f64::max)
    }

    pub fn energy_check(&self, lambda: f64, slack: f64) -> EnergyCheck {
        let Some(first) = self.first() else {
            return EnergyCheck {
                max_ratio: 0.0,
                slack,
                passed: true,
            };
        };
        let u0 = first.l2sq;
        let mut max_ratio: f64 = 0.0;
        let mut finite = true;
        for r in &self.records {
            if !r.is_finite() {
                finite = false;
                max_ratio = f64::INFINITY;
                break;
            }
            let lhs = r.l2sq + 2.0 * r.cum_dirichlet + 2.0 * lambda * r.cum_l4;
            let rhs = (2.0 * lambda * r.t).exp() * u0;
            let ratio = if rhs > 0.0 {
                lhs / rhs
            } else if lhs > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            max_ratio = max_ratio.max(ratio);
        }
        EnergyCheck {
            max_ratio,
            slack,
            passed: finite && max_ratio <= slack,
        }
    }

    /// `sup_t ‖u(t)‖_∞ ≤ max(1, ‖u₀‖_∞) + tol`.
    pub fn max_principle_check(&self, tol: f64) -> MaxPrincipleCheck {
        let bound = self.first().map_or(1.0, |r| r.sup.max(1.0));
        let max_sup = if self.is_finite() { self.max_sup() } else { f64::INFINITY };
        let overshoot = (max_sup - bound).max(0.0);
        MaxPrincipleCheck {
            bound,
            max_sup,
            overshoot,
            passed: overshoot <= tol,
        }
    }
}
