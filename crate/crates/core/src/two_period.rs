//! Brute-force solver for the two-period robust bandit.
//!
//! Fixed example: safe return 1, `θ ∈ {0, 2}`, unit shock variance and
//! nature's mean shift `h ∈ {−0.5, 0.5}`. The first-period observation is
//! `y = μ₁θ + √μ₁·ε`, `ε ~ N(h, 1)`. In the second period nature always
//! plays `−0.5`, so `v₂(p₂) = max{1, 2p₂ − 0.5}`.
//!
//! The expectation over `y` is taken per `θ` component with Gauss–Legendre
//! quadrature on `mean ± 8.5 sd`, split at the `v₂` kink so each piece has a
//! smooth integrand.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::Result;

pub const SAFE_RETURN: f64 = 1.0;
pub const THETA_HIGH: f64 = 2.0;
pub const THETA_LOW: f64 = 0.0;
/// Nature's candidate mean shifts, in tie-break order.
pub const SHIFTS: [f64; 2] = [-0.5, 0.5];
/// Second-period switch point of `v₂`.
pub const SWITCH_BELIEF: f64 = 0.75;

/// Half-width of the integration window in standard deviations.
const WINDOW: f64 = 8.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPeriodConfig {
    pub p1: f64,
    /// Discount factor in `(0, 1]`.
    pub discount: f64,
    pub mu_grid: usize,
    pub quad_nodes: usize,
}

impl TwoPeriodConfig {
    pub fn new(p1: f64, discount: f64) -> Self {
        Self {
            p1,
            discount,
            mu_grid: 1001,
            quad_nodes: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(ModelError::InvalidTwoPeriodConfig(m));
        if !(0.0..=1.0).contains(&self.p1) {
            return fail(format!("p1 must lie in [0, 1], got {}", self.p1));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return fail(format!(
                "discount must lie in (0, 1], got {}",
                self.discount
            ));
        }
        if self.mu_grid < 2 {
            return fail(format!("mu_grid must be at least 2, got {}", self.mu_grid));
        }
        if self.quad_nodes < 8 {
            return fail(format!(
                "quad_nodes must be at least 8, got {}",
                self.quad_nodes
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoPeriodResult {
    /// Max-min value: DM moves first, nature responds.
    pub v1: f64,
    pub mu1_star: f64,
    /// Nature's minimising shift against `mu1_star`.
    pub h_star: f64,
    /// Min-max value: nature commits first, DM best-responds.
    pub minmax_v1: f64,
    /// Nature's commitment in the min-max order.
    pub minmax_h: f64,
    pub minmax_mu1: f64,
}

/// Posterior `P(θ = 2)` after observing `y` under allocation `mu1` and shift `h`.
pub fn posterior_update(p1: f64, mu1: f64, h: f64, y: f64) -> f64 {
    if mu1 <= 0.0 || p1 <= 0.0 || p1 >= 1.0 {
        return p1;
    }
    let odds = (1.0 - p1) / p1 * (2.0 * (mu1.sqrt() * h + mu1 - y)).exp();
    (1.0 / (1.0 + odds)).clamp(0.0, 1.0)
}

pub fn second_period_value(p2: f64) -> f64 {
    SAFE_RETURN.max(2.0 * p2 - 0.5)
}

/// First-period payoff `(1−μ₁) + 2μ₁p₁ + √μ₁·h` plus the discounted continuation.
pub fn objective(p1: f64, mu1: f64, h: f64, discount: f64, quad: &Quadrature) -> f64 {
    (1.0 - mu1) * SAFE_RETURN
        + THETA_HIGH * mu1 * p1
        + mu1.sqrt() * h
        + discount * quad.expected_continuation(p1, mu1, h)
}

/// Reusable Gauss–Legendre rule for `E^h[v₂(p₂)]`.
pub struct Quadrature {
    rule: GaussLegendre,
}

impl Quadrature {
    pub fn new(nodes: usize) -> Result<Self> {
        let degree = NonZeroUsize::new(nodes)
            .filter(|n| n.get() >= 2)
            .ok_or_else(|| {
                ModelError::InvalidTwoPeriodConfig(format!("need at least 2 nodes, got {nodes}"))
            })?;
        Ok(Self {
            rule: GaussLegendre::new(degree),
        })
    }

    /// `E^h[v₂(p₂^h)]` with `θ ~ p₁` and `y | θ ~ N(μ₁θ + √μ₁h, μ₁)`.
    pub fn expected_continuation(&self, p1: f64, mu1: f64, h: f64) -> f64 {
        if mu1 <= 0.0 || p1 <= 0.0 || p1 >= 1.0 {
            return second_period_value(p1);
        }
        let sd = mu1.sqrt();
        // p₂(y) = 0.75 here; p₂ increases in y.
        let kink = sd * h + mu1 + 0.5 * (3.0 * (1.0 - p1) / p1).ln();
        [(THETA_HIGH, p1), (THETA_LOW, 1.0 - p1)]
            .into_iter()
            .map(|(theta, weight)| {
                let mean = mu1 * theta + sd * h;
                let integrand = |z: f64| {
                    second_period_value(posterior_update(p1, mu1, h, mean + sd * z))
                        * std_normal_pdf(z)
                };
                let kz = (kink - mean) / sd;
                let integral = if kz > -WINDOW && kz < WINDOW {
                    self.rule.integrate(-WINDOW, kz, integrand)
                        + self.rule.integrate(kz, WINDOW, integrand)
                } else {
                    self.rule.integrate(-WINDOW, WINDOW, integrand)
                };
                weight * integral
            })
            .sum()
    }
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Grid search over `μ₁` for both orders of play.
pub fn solve_two_period(cfg: &TwoPeriodConfig) -> Result<TwoPeriodResult> {
    cfg.validate()?;
    let quad = Quadrature::new(cfg.quad_nodes)?;
    let last = (cfg.mu_grid - 1) as f64;
    // table[i][j] = objective at μ₁ = i/last, h = SHIFTS[j]
    let table: Vec<(f64, [f64; 2])> = (0..cfg.mu_grid)
        .map(|i| {
            let mu = i as f64 / last;
            (
                mu,
                SHIFTS.map(|h| objective(cfg.p1, mu, h, cfg.discount, &quad)),
            )
        })
        .collect();

    // Max-min; nature's ties go to the first shift, the DM's to the smallest μ₁.
    let mut best = (f64::NEG_INFINITY, 0.0, SHIFTS[0]);
    for &(mu, vals) in &table {
        let j = if vals[1] < vals[0] { 1 } else { 0 };
        if vals[j] > best.0 {
            best = (vals[j], mu, SHIFTS[j]);
        }
    }

    // Min-max.
    let mut minmax = (f64::INFINITY, SHIFTS[0], 0.0);
    for (j, &h) in SHIFTS.iter().enumerate() {
        let (mu, val) = table.iter().map(|&(mu, vals)| (mu, vals[j])).fold(
            (0.0, f64::NEG_INFINITY),
            |acc, cur| if cur.1 > acc.1 { cur } else { acc },
        );
        if val < minmax.0 {
            minmax = (val, h, mu);
        }
    }

    Ok(TwoPeriodResult {
        v1: best.0,
        mu1_star: best.1,
        h_star: best.2,
        minmax_v1: minmax.0,
        minmax_h: minmax.1,
        minmax_mu1: minmax.2,
    })
}

/// Second differences of the max-min value over evenly spaced initial beliefs.
/// Returned for inspection only; no sign is expected.
pub fn value_second_differences(
    discount: f64,
    beliefs: usize,
    mu_grid: usize,
    quad_nodes: usize,
) -> Result<Vec<(f64, f64)>> {
    if beliefs < 3 {
        return Err(ModelError::InvalidTwoPeriodConfig(format!(
            "need at least 3 beliefs, got {beliefs}"
        )));
    }
    let step = 1.0 / (beliefs - 1) as f64;
    let values = (0..beliefs)
        .map(|i| {
            solve_two_period(&TwoPeriodConfig {
                p1: i as f64 * step,
                discount,
                mu_grid,
                quad_nodes,
            })
            .map(|r| r.v1)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(values
        .windows(3)
        .enumerate()
        .map(|(i, w)| {
            (
                (i + 1) as f64 * step,
                (w[0] - 2.0 * w[1] + w[2]) / (step * step),
            )
        })
        .collect())
}
