//! Model primitives, the baseline closed-form solution and equilibrium policies.
//!
//! On the exploration region `(p̄, 1]` the value function solves
//!
//! ```text
//! v(p) = m(p) − σ²δ/(2α) + Φ(p) v''(p) / (2δ),   Φ(p) = (θ̄−θ̲)² p² (1−p)² / σ²
//! ```
//!
//! whose bounded solution is `m(p) − σ²δ/(2α) + c·p^{1−λ}(1−p)^λ` with
//! `λ = (1 + √(1 + 4δ/φ²))/2`, `φ = (θ̄−θ̲)/(σ√2)`. Value matching `v(p̄) = r`
//! fixes `c`, smooth pasting fixes `p̄ = (λ−1)η/(λ−η)`.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, ParamViolation};
use crate::Result;

/// Primitive constants of the experimentation model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Safe-arm return rate.
    pub r: f64,
    pub theta_low: f64,
    pub theta_high: f64,
    /// Volatility of the ambiguous arm.
    pub sigma: f64,
    /// Discount rate.
    pub delta: f64,
    /// Multiplier on the entropy penalty (inverse ambiguity aversion).
    pub alpha: f64,
    /// Volatility of the unambiguous expert signal, if one is available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl ModelParams {
    /// Returns `self` unchanged if every invariant holds, otherwise one
    /// diagnostic per violated invariant.
    pub fn validate(self) -> Result<Self> {
        let mut bad = Vec::new();
        let mut push =
            |field: &'static str, message: String| bad.push(ParamViolation { field, message });

        for (field, value) in [
            ("r", self.r),
            ("theta_low", self.theta_low),
            ("theta_high", self.theta_high),
            ("sigma", self.sigma),
            ("delta", self.delta),
            ("alpha", self.alpha),
        ] {
            if !value.is_finite() {
                push(field, format!("must be finite, got {value}"));
            }
        }
        if self.theta_low.is_finite() && self.theta_high.is_finite() {
            if self.theta_low >= self.theta_high {
                push(
                    "theta_high",
                    format!(
                        "degenerate return range: theta_low ({}) must be < theta_high ({})",
                        self.theta_low, self.theta_high
                    ),
                );
            }
            if self.r.is_finite() && !(self.theta_low <= self.r && self.r <= self.theta_high) {
                push(
                    "r",
                    format!(
                        "safe return {} must lie in [theta_low, theta_high] = [{}, {}]",
                        self.r, self.theta_low, self.theta_high
                    ),
                );
            }
        }
        for (field, value) in [
            ("sigma", self.sigma),
            ("delta", self.delta),
            ("alpha", self.alpha),
        ] {
            if value.is_finite() && value <= 0.0 {
                push(field, format!("must be strictly positive, got {value}"));
            }
        }
        if let Some(gamma) = self.gamma {
            if !(gamma.is_finite() && gamma > 0.0) {
                push(
                    "gamma",
                    format!("must be finite and strictly positive when present, got {gamma}"),
                );
            }
        }

        if bad.is_empty() {
            Ok(self)
        } else {
            Err(ModelError::InvalidParams(bad))
        }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        Self {
            gamma: Some(gamma),
            ..self
        }
    }

    pub fn without_gamma(self) -> Self {
        Self {
            gamma: None,
            ..self
        }
    }

    /// `θ̄ − θ̲`.
    pub fn spread(&self) -> f64 {
        self.theta_high - self.theta_low
    }

    /// Constant flow penalty `σ²δ/(2α)` paid while pulling the ambiguous arm.
    pub fn ambiguity_cost(&self) -> f64 {
        self.sigma * self.sigma * self.delta / (2.0 * self.alpha)
    }

    /// Interior-cutoff index; an interior cutoff exists iff `η < 1`.
    pub fn eta(&self) -> f64 {
        (self.r - self.theta_low) / self.spread() + self.ambiguity_cost() / self.spread()
    }

    /// `m(p) = pθ̄ + (1−p)θ̲`.
    pub fn conditional_mean(&self, p: Belief) -> f64 {
        self.mean_at(p.get())
    }

    /// `Φ(p) = (θ̄−θ̲)² p² (1−p)² / σ²`, the belief variance rate while exploring.
    pub fn diffusion_coefficient(&self, p: Belief) -> f64 {
        self.phi_at(p.get(), self.sigma)
    }

    /// Nature's equilibrium drift distortion `h* = −σδ√μ/α`.
    pub fn worst_case_drift(&self, mu: f64) -> f64 {
        -self.sigma * self.delta * mu.sqrt() / self.alpha
    }

    pub(crate) fn mean_at(&self, p: f64) -> f64 {
        p * self.theta_high + (1.0 - p) * self.theta_low
    }

    /// `Φ(p; s)` for an observation channel of volatility `s`.
    pub(crate) fn phi_at(&self, p: f64, vol: f64) -> f64 {
        let q = self.spread() * p * (1.0 - p) / vol;
        q * q
    }

    /// Flow payoff `(1−μ)r + μ(m(p) − σ²δ/(2α))` once nature plays `h*`.
    pub(crate) fn equilibrium_flow(&self, p: f64, mu: f64) -> f64 {
        (1.0 - mu) * self.r + mu * (self.mean_at(p) - self.ambiguity_cost())
    }
}

/// Posterior probability that the ambiguous arm pays `θ̄`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Belief(f64);

impl Belief {
    pub fn new(p: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&p) {
            Ok(Belief(p))
        } else {
            Err(ModelError::InvalidBelief(p))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Clamps a finite value into `[0, 1]`; NaN maps to 0.
    pub fn saturating(p: f64) -> Self {
        Belief(if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) })
    }
}

impl TryFrom<f64> for Belief {
    type Error = ModelError;

    fn try_from(p: f64) -> Result<Self> {
        Belief::new(p)
    }
}

impl From<Belief> for f64 {
    fn from(b: Belief) -> f64 {
        b.0
    }
}

/// Derived constants of the baseline closed-form solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedForm {
    #[serde(skip)]
    params: ModelParams,
    pub eta: f64,
    /// `φ = (θ̄−θ̲)/(σ√2)`.
    pub phi: f64,
    pub lambda: f64,
    pub p_bar: f64,
    /// Multiplier of `p^{1−λ}(1−p)^λ`; absent when `p̄ ∈ {0, 1}`.
    pub coeff: Option<f64>,
    pub ambiguity_cost: f64,
}

impl ClosedForm {
    /// Assumes `params` already passed [`ModelParams::validate`]; `gamma` is ignored.
    pub fn derive(params: &ModelParams) -> Self {
        let eta = params.eta();
        let phi = phi_of(params, params.sigma);
        let lambda = decay_exponent(params.delta, phi * phi);
        let p_bar = cutoff(lambda, eta);
        let cost = params.ambiguity_cost();
        let coeff = (p_bar > 0.0 && p_bar < 1.0).then(|| {
            (params.r - params.mean_at(p_bar) + cost) / beta_kernel(p_bar, 1.0 - lambda, lambda)
        });
        Self {
            params: params.without_gamma(),
            eta,
            phi,
            lambda,
            p_bar,
            coeff,
            ambiguity_cost: cost,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// True when the safe arm is pulled at every belief (`η ≥ 1`).
    pub fn never_explores(&self) -> bool {
        self.p_bar >= 1.0
    }

    /// `v(p)`: `r` on `[0, p̄]`, the exploration branch on `(p̄, 1]`.
    pub fn value(&self, p: Belief) -> f64 {
        self.value_at(p.get())
    }

    pub(crate) fn value_at(&self, p: f64) -> f64 {
        let params = self.params();
        let Some(coeff) = self.coeff else {
            return if self.p_bar >= 1.0 {
                params.r
            } else {
                // p̄ = 0: explore everywhere, no option term survives.
                params.mean_at(p) - self.ambiguity_cost
            };
        };
        if p <= self.p_bar {
            params.r
        } else if p >= 1.0 {
            params.theta_high - self.ambiguity_cost
        } else {
            params.mean_at(p) - self.ambiguity_cost
                + coeff * beta_kernel(p, 1.0 - self.lambda, self.lambda)
        }
    }

    /// Static lower bound `max{r, m(p) − σ²δ/(2α)}`.
    pub fn lower_bound(&self, p: Belief) -> f64 {
        let params = self.params();
        params
            .r
            .max(params.conditional_mean(p) - self.ambiguity_cost)
    }
}

/// Equilibrium allocation to the ambiguous arm: 1 above `p̄`, 0 at or below it.
pub fn optimal_allocation(cf: &ClosedForm, p: Belief) -> f64 {
    allocation_at(cf.p_bar, p.get())
}

pub(crate) fn allocation_at(cutoff: f64, p: f64) -> f64 {
    if p > cutoff {
        1.0
    } else {
        0.0
    }
}

/// `φ(s) = (θ̄−θ̲)/(s√2)`.
pub(crate) fn phi_of(params: &ModelParams, vol: f64) -> f64 {
    params.spread() / (vol * std::f64::consts::SQRT_2)
}

/// Larger root of `x(x−1) = δ/φ²`.
pub(crate) fn decay_exponent(delta: f64, phi_sq: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * delta / phi_sq).sqrt())
}

/// `(e−1)η/(e−η)`, clamped to 1 when `η ≥ 1` and to 0 when `e ≤ η`.
pub(crate) fn cutoff(exponent: f64, eta: f64) -> f64 {
    if eta >= 1.0 {
        1.0
    } else if eta <= 0.0 || exponent <= eta {
        0.0
    } else {
        ((exponent - 1.0) * eta / (exponent - eta)).clamp(0.0, 1.0)
    }
}

/// `p^a (1−p)^b` through `exp`/`ln`, with the endpoint limits taken explicitly.
pub(crate) fn beta_kernel(p: f64, a: f64, b: f64) -> f64 {
    fn edge(exponent: f64) -> f64 {
        if exponent > 0.0 {
            0.0
        } else if exponent == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    }
    if p <= 0.0 {
        edge(a)
    } else if p >= 1.0 {
        edge(b)
    } else {
        (a * p.ln() + b * (1.0 - p).ln()).exp()
    }
}
