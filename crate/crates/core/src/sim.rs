//! Monte-Carlo simulation of the equilibrium belief diffusion.
//!
//! Under the worst-case measure the belief is a bounded martingale,
//! `dp = √(μΦ(p)) dW`, and the payoff reduces to
//! `δ∫e^{−δt}[(1−μ)r + μ(m(p) − σ²δ/(2α))]dt`. Nature's discounted entropy is
//! `½∫e^{−δt}h*(μ)²dt`. Paths are Euler–Maruyama with the allocation frozen
//! over each step and the belief clamped to `[0, 1]`.
//!
//! Randomness: path `i` draws from ChaCha8 keyed by `seed` (expanded with
//! `SeedableRng::seed_from_u64`) on stream `i`; normals come from the
//! `rand_distr` ziggurat sampler. Results do not depend on thread scheduling
//! and per-path results are reduced in path order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{allocation_at, Belief, ClosedForm, ModelParams};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    /// Truncation time `T`.
    pub horizon: f64,
    pub seed: u64,
    pub initial_belief: Belief,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(ModelError::InvalidSimConfig(
                "n_paths must be at least 1".into(),
            ));
        }
        if !(self.dt.is_finite()
            && self.horizon.is_finite()
            && 0.0 < self.dt
            && self.dt < self.horizon)
        {
            return Err(ModelError::InvalidSimConfig(format!(
                "need 0 < dt < horizon, got dt = {}, horizon = {}",
                self.dt, self.horizon
            )));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimResult {
    /// Truncated payoff `δ∫_0^T e^{−δt}·flow dt`.
    pub payoff_mean: f64,
    pub payoff_se: f64,
    /// Truncated entropy `½∫_0^T e^{−δt}h² dt`.
    pub entropy_mean: f64,
    pub entropy_se: f64,
    pub terminal_belief_mean: f64,
    /// Fraction of paths at or below the exploration cutoff at `T`.
    pub absorption_frac: f64,
    /// Bound on the payoff omitted past `T`: `e^{−δT}·max|flow|`.
    pub payoff_truncation_bound: f64,
    /// Bound on the entropy omitted past `T`: `e^{−δT}·max h²/(2δ)`.
    pub entropy_truncation_bound: f64,
    pub n_paths: usize,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MartingaleDiagnostic {
    /// Mean of `p_T − p_0` across paths.
    pub mean: f64,
    pub se: f64,
    /// `|mean| ≤ 4·se`.
    pub passes: bool,
}

#[derive(Clone, Copy)]
enum Policy {
    /// Cutoff rule; paths at or below the cutoff stop and collect `r` analytically.
    Cutoff(f64),
    Forced(f64),
}

struct PathOutcome {
    payoff: f64,
    entropy: f64,
    terminal: f64,
}

/// Simulates the equilibrium: explore above `cf.p_bar`, safe arm otherwise.
pub fn simulate_equilibrium(
    params: &ModelParams,
    cf: &ClosedForm,
    cfg: &SimConfig,
) -> Result<SimResult> {
    run(params, Policy::Cutoff(cf.p_bar), cfg)
}

/// Diagnostic mode with a constant allocation `mu ∈ [0, 1]` and `h = h*(mu)`.
pub fn simulate_forced(params: &ModelParams, mu: f64, cfg: &SimConfig) -> Result<SimResult> {
    check_mu(mu)?;
    run(params, Policy::Forced(mu), cfg)
}

/// Tests that `p_T − p_0` has mean zero under a constant allocation.
pub fn martingale_check(
    params: &ModelParams,
    cfg: &SimConfig,
    forced_mu: f64,
) -> Result<MartingaleDiagnostic> {
    check_mu(forced_mu)?;
    let params = params.validate()?;
    cfg.validate()?;
    let p0 = cfg.initial_belief.get();
    let drifts: Vec<f64> = paths(&params, Policy::Forced(forced_mu), cfg)
        .map(|o| o.terminal - p0)
        .collect();
    let (mean, se) = mean_se(&drifts);
    Ok(MartingaleDiagnostic {
        mean,
        se,
        passes: mean.abs() <= 4.0 * se,
    })
}

/// One belief bin of [`quadratic_variation_bins`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QvBin {
    pub centre: f64,
    /// Mean of `(Δp)²/dt` over steps starting in the bin.
    pub observed: f64,
    /// Mean of `Φ(p)` over the same steps.
    pub predicted: f64,
    pub se: f64,
    pub count: usize,
}

/// Empirical quadratic variation per belief bin under constant allocation
/// `mu = 1`. Bins with fewer than two steps are skipped.
pub fn quadratic_variation_bins(
    params: &ModelParams,
    cfg: &SimConfig,
    bins: usize,
) -> Result<Vec<QvBin>> {
    let params = params.validate()?;
    cfg.validate()?;
    let mut acc = vec![(0.0, 0.0, 0.0, 0usize); bins];
    let sqrt_dt = cfg.dt.sqrt();
    for path in 0..cfg.n_paths {
        let mut rng = path_rng(cfg.seed, path);
        let mut p = cfg.initial_belief.get();
        for _ in 0..cfg.n_steps() {
            let phi = params.phi_at(p, params.sigma);
            let z: f64 = StandardNormal.sample(&mut rng);
            let next = (p + phi.sqrt() * sqrt_dt * z).clamp(0.0, 1.0);
            let bin = ((p * bins as f64) as usize).min(bins - 1);
            let q = (next - p).powi(2) / cfg.dt;
            let slot = &mut acc[bin];
            slot.0 += q;
            slot.1 += q * q;
            slot.2 += phi;
            slot.3 += 1;
            p = next;
        }
    }
    Ok(acc
        .into_iter()
        .enumerate()
        .filter(|(_, a)| a.3 > 1)
        .map(|(i, (s, s2, phi, n))| {
            let nf = n as f64;
            let mean = s / nf;
            let var = ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
            QvBin {
                centre: (i as f64 + 0.5) / bins as f64,
                observed: mean,
                predicted: phi / nf,
                se: (var / nf).sqrt(),
                count: n,
            }
        })
        .collect())
}

fn check_mu(mu: f64) -> Result<()> {
    if (0.0..=1.0).contains(&mu) {
        Ok(())
    } else {
        Err(ModelError::InvalidSimConfig(format!(
            "forced allocation must lie in [0, 1], got {mu}"
        )))
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

fn run(params: &ModelParams, policy: Policy, cfg: &SimConfig) -> Result<SimResult> {
    let params = params.validate()?;
    cfg.validate()?;
    let outcomes: Vec<PathOutcome> = paths(&params, policy, cfg).collect();

    let payoffs: Vec<f64> = outcomes.iter().map(|o| o.payoff).collect();
    let entropies: Vec<f64> = outcomes.iter().map(|o| o.entropy).collect();
    let (payoff_mean, payoff_se) = mean_se(&payoffs);
    let (entropy_mean, entropy_se) = mean_se(&entropies);
    let n = outcomes.len() as f64;
    let terminal_belief_mean = outcomes.iter().map(|o| o.terminal).sum::<f64>() / n;
    let cut = match policy {
        Policy::Cutoff(c) => c,
        Policy::Forced(_) => f64::NAN,
    };
    let absorbed = outcomes.iter().filter(|o| o.terminal <= cut).count();

    let cost = params.ambiguity_cost();
    let max_flow = [params.r, params.theta_low - cost, params.theta_high - cost]
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max);
    let h_max = match policy {
        Policy::Cutoff(_) => params.worst_case_drift(1.0),
        Policy::Forced(mu) => params.worst_case_drift(mu),
    };
    let tail = (-params.delta * cfg.horizon).exp();

    Ok(SimResult {
        payoff_mean,
        payoff_se,
        entropy_mean,
        entropy_se,
        terminal_belief_mean,
        absorption_frac: absorbed as f64 / n,
        payoff_truncation_bound: tail * max_flow,
        entropy_truncation_bound: tail * h_max * h_max / (2.0 * params.delta),
        n_paths: cfg.n_paths,
        n_steps: cfg.n_steps(),
    })
}

fn paths<'a>(
    params: &'a ModelParams,
    policy: Policy,
    cfg: &'a SimConfig,
) -> impl IndexedParallelIterator<Item = PathOutcome> + 'a {
    (0..cfg.n_paths)
        .into_par_iter()
        .map(move |i| simulate_path(params, policy, cfg, &mut path_rng(cfg.seed, i)))
}

fn simulate_path(
    params: &ModelParams,
    policy: Policy,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> PathOutcome {
    let delta = params.delta;
    let n_steps = cfg.n_steps();
    let sqrt_dt = cfg.dt.sqrt();
    let step_decay = (-delta * cfg.dt).exp();
    let end_discount = (-delta * n_steps as f64 * cfg.dt).exp();
    // δ∫ over one step of e^{−δs} ds, relative to the discount at the step start.
    let step_weight = 1.0 - step_decay;

    let mut p = cfg.initial_belief.get();
    let mut discount = 1.0;
    let mut payoff = 0.0;
    let mut entropy = 0.0;

    for _ in 0..n_steps {
        let mu = match policy {
            Policy::Cutoff(cut) => {
                let mu = allocation_at(cut, p);
                if mu == 0.0 {
                    // The belief is frozen on the safe arm: collect r for the rest of [t, T].
                    payoff += params.r * (discount - end_discount);
                    return PathOutcome {
                        payoff,
                        entropy,
                        terminal: p,
                    };
                }
                mu
            }
            Policy::Forced(mu) => mu,
        };
        let h = params.worst_case_drift(mu);
        let w = discount * step_weight;
        payoff += w * params.equilibrium_flow(p, mu);
        entropy += 0.5 * h * h * w / delta;

        let vol = (mu * params.phi_at(p, params.sigma)).sqrt();
        if vol > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            p = (p + vol * sqrt_dt * z).clamp(0.0, 1.0);
        }
        discount *= step_decay;
    }
    PathOutcome {
        payoff,
        entropy,
        terminal: p,
    }
}

/// Sample mean and standard error (`n − 1` denominator; zero for one sample).
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 || xs.iter().all(|&x| x == xs[0]) {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig() -> ModelParams {
        ModelParams {
            r: 0.2,
            theta_low: 0.0,
            theta_high: 1.0,
            sigma: 0.4,
            delta: 0.9,
            alpha: 0.14,
            gamma: None,
        }
    }

    fn cfg(p0: f64, n_paths: usize, horizon: f64) -> SimConfig {
        SimConfig {
            n_paths,
            dt: 1e-3,
            horizon,
            seed: 7,
            initial_belief: Belief::new(p0).unwrap(),
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.5, 0, 1.0).validate().is_err());
        assert!(SimConfig {
            dt: 2.0,
            ..cfg(0.5, 1, 1.0)
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            dt: 0.0,
            ..cfg(0.5, 1, 1.0)
        }
        .validate()
        .is_err());
        assert_eq!(cfg(0.5, 1, 30.0).n_steps(), 30_000);
        assert!(simulate_forced(&fig(), 1.5, &cfg(0.5, 1, 1.0)).is_err());
    }

    #[test]
    fn absorbed_start_is_deterministic() {
        let p = fig();
        let cf = ClosedForm::derive(&p);
        let res = simulate_equilibrium(&p, &cf, &cfg(0.2, 50, 30.0)).unwrap();
        let expected = 0.2 * (1.0 - (-0.9f64 * 30.0).exp());
        assert!((res.payoff_mean - expected).abs() < 1e-15);
        assert_eq!(res.payoff_se, 0.0);
        assert_eq!(res.entropy_mean, 0.0);
        assert_eq!(res.absorption_frac, 1.0);
        assert!(res.payoff_truncation_bound < 2e-12);
    }

    #[test]
    fn zero_allocation_freezes_belief() {
        let d = martingale_check(&fig(), &cfg(0.37, 20, 1.0), 0.0).unwrap();
        assert_eq!(d.mean, 0.0);
        assert_eq!(d.se, 0.0);
        assert!(d.passes);
    }

    #[test]
    fn endpoint_beliefs_are_absorbing() {
        for p0 in [0.0, 1.0] {
            let d = martingale_check(&fig(), &cfg(p0, 20, 1.0), 1.0).unwrap();
            assert_eq!(d.mean, 0.0);
            assert_eq!(d.se, 0.0);
        }
    }

    #[test]
    fn mean_se_basics() {
        assert_eq!(mean_se(&[3.0]), (3.0, 0.0));
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
