//! Extension with a free, unambiguous expert signal `dx = θ dt + γ dW`.
//!
//! The signal keeps the belief diffusing even while the safe arm is pulled,
//! so the value function solves a second-order ODE on both sides of the
//! cutoff `p̃`:
//!
//! ```text
//! ṽ(p) = r + c₁ p^{λ₁} (1−p)^{1−λ₁}                   p < p̃
//! ṽ(p) = m(p) − σ²δ/(2α) + c₂ p^{1−λ₂} (1−p)^{λ₂}      p ≥ p̃
//! ```
//!
//! Value matching, smooth pasting and super contact at `p̃` pin `(c₁, c₂, p̃)`.

use serde::Serialize;

use crate::error::ModelError;
use crate::model::{beta_kernel, cutoff, decay_exponent, phi_of, Belief, ClosedForm, ModelParams};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpertClosedForm {
    #[serde(skip)]
    baseline: ClosedForm,
    #[serde(skip)]
    gamma: f64,
    /// `r − m(p̃) + σ²δ/(2α)`, the value-matching gap at the cutoff.
    #[serde(skip)]
    gap: f64,
    #[serde(skip)]
    ratio: f64,
    /// Exponent of the safe-region solution.
    pub lambda1: f64,
    /// Exponent of the exploration-region solution.
    pub lambda2: f64,
    /// `Λ = 1 + λ₁σ²/γ² + (λ₂−1)(1+σ²/γ²)`.
    pub big_lambda: f64,
    pub p_tilde: f64,
    /// Absent when `p̃ ∈ {0, 1}`. May overflow to `inf` for a nearly
    /// uninformative expert; values are evaluated relative to `p̃` instead.
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub phi_gamma: f64,
    pub phi_sigma: f64,
    /// Set when `r − m(p̃) + σ²δ/(2α) < 0`; the constants are then negative
    /// and the solution is outside the region where it was derived.
    pub outside_derivation: bool,
}

impl ExpertClosedForm {
    /// Requires `params.gamma`; assumes the params are otherwise valid.
    pub fn derive(params: &ModelParams) -> Result<Self> {
        let gamma = params.gamma.ok_or(ModelError::MissingGamma)?;
        let baseline = ClosedForm::derive(params);
        let phi_sigma = phi_of(params, params.sigma);
        let phi_gamma = phi_of(params, gamma);
        let lambda1 = decay_exponent(params.delta, phi_gamma * phi_gamma);
        let lambda2 = decay_exponent(params.delta, phi_sigma * phi_sigma + phi_gamma * phi_gamma);
        let ratio = (params.sigma / gamma).powi(2);
        let big_lambda = 1.0 + lambda1 * ratio + (lambda2 - 1.0) * (1.0 + ratio);
        let p_tilde = cutoff(big_lambda, baseline.eta);

        let gap = params.r - params.mean_at(p_tilde) + params.ambiguity_cost();
        let interior = p_tilde > 0.0 && p_tilde < 1.0;
        let c1 = interior.then(|| ratio * gap / beta_kernel(p_tilde, lambda1, 1.0 - lambda1));
        let c2 =
            interior.then(|| (1.0 + ratio) * gap / beta_kernel(p_tilde, 1.0 - lambda2, lambda2));

        Ok(Self {
            baseline,
            gamma,
            gap,
            ratio,
            lambda1,
            lambda2,
            big_lambda,
            p_tilde,
            c1,
            c2,
            phi_gamma,
            phi_sigma,
            outside_derivation: interior && gap < 0.0,
        })
    }

    pub fn baseline(&self) -> &ClosedForm {
        &self.baseline
    }

    pub fn params(&self) -> ModelParams {
        self.baseline.params().with_gamma(self.gamma)
    }

    /// `ṽ(p)`.
    pub fn value(&self, p: Belief) -> f64 {
        self.value_at(p.get())
    }

    pub(crate) fn value_at(&self, p: f64) -> f64 {
        let params = self.baseline.params();
        let cost = self.baseline.ambiguity_cost;
        match (self.c1, self.c2) {
            (Some(_), Some(_)) => {
                if p < self.p_tilde {
                    params.r + self.safe_term(p)
                } else if p >= 1.0 {
                    params.theta_high - cost
                } else {
                    params.mean_at(p) - cost + self.explore_term(p)
                }
            }
            // Clamped cutoff: the expert signal cannot change the action, so it has no value.
            _ if self.p_tilde >= 1.0 => params.r,
            _ => params.mean_at(p) - cost,
        }
    }

    /// The two branches evaluated at `p` regardless of the cutoff, `(safe, explore)`.
    pub fn branches(&self, p: Belief) -> Option<(f64, f64)> {
        let params = self.baseline.params();
        self.c1?;
        self.c2?;
        let p = p.get();
        Some((
            params.r + self.safe_term(p),
            params.mean_at(p) - self.baseline.ambiguity_cost + self.explore_term(p),
        ))
    }

    /// `c₁ p^{λ₁}(1−p)^{1−λ₁}`, written relative to `p̃` so it stays finite
    /// when `λ₁` is huge.
    fn safe_term(&self, p: f64) -> f64 {
        self.ratio * self.gap * kernel_ratio(p, self.p_tilde, self.lambda1, 1.0 - self.lambda1)
    }

    fn explore_term(&self, p: f64) -> f64 {
        (1.0 + self.ratio)
            * self.gap
            * kernel_ratio(p, self.p_tilde, 1.0 - self.lambda2, self.lambda2)
    }

    pub fn allocation(&self, p: Belief) -> f64 {
        crate::model::allocation_at(self.p_tilde, p.get())
    }
}

/// `p^a(1−p)^b / (q^a(1−q)^b)` for interior `q`.
fn kernel_ratio(p: f64, q: f64, a: f64, b: f64) -> f64 {
    if p == q {
        return 1.0;
    }
    let log_part = |x: f64, y: f64, e: f64| {
        if e == 0.0 {
            0.0
        } else if x == 0.0 {
            if e > 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        } else {
            e * (x / y).ln()
        }
    };
    (log_part(p, q, a) + log_part(1.0 - p, 1.0 - q, b)).exp()
}

/// `ṽ(p) − v(p)`: what the expert signal is worth at belief `p`.
pub fn surplus(ecf: &ExpertClosedForm, p: Belief) -> f64 {
    ecf.value(p) - ecf.baseline().value(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurplusPeak {
    pub belief: f64,
    pub surplus: f64,
    /// Whether the peak lies strictly above the baseline cutoff `p̄`.
    pub above_baseline_cutoff: bool,
}

/// Dense scan of the surplus over `grid_size` evenly spaced beliefs on `[0, 1]`.
/// Ties resolve to the smallest belief.
pub fn surplus_argmax(ecf: &ExpertClosedForm, grid_size: usize) -> Result<SurplusPeak> {
    if grid_size < 3 {
        return Err(ModelError::InvalidGrid(format!(
            "surplus scan needs at least 3 points, got {grid_size}"
        )));
    }
    let last = (grid_size - 1) as f64;
    let (belief, value) = (0..grid_size)
        .map(|i| {
            let p = i as f64 / last;
            (p, surplus(ecf, Belief::saturating(p)))
        })
        .fold((0.0, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    Ok(SurplusPeak {
        belief,
        surplus: value,
        above_baseline_cutoff: belief > ecf.baseline().p_bar,
    })
}
