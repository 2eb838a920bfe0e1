//! Finite-difference solver for the variational HJB equations.
//!
//! Works directly on the discretised obstacle problem and never consults the
//! closed forms, so it serves as an independent check on them. At interior
//! node `i` with step `h`,
//!
//! ```text
//! v_i = max_μ { flow_μ(p_i) + k_μ(p_i) (v_{i+1} − 2v_i + v_{i−1}) },   k_μ = diffusion_μ / (2δh²)
//! ```
//!
//! where `μ ∈ {0, 1}` and `diffusion_μ = μΦ(p; σ) [+ Φ(p; γ)]`. The belief
//! endpoints are Dirichlet data. Central differences with nonnegative `k`
//! give an M-matrix for every policy, so Howard policy iteration is monotone
//! and terminates; a Gauss–Seidel value iteration is kept as a fallback.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::ModelError;
use crate::model::ModelParams;
use crate::Result;

/// Uniform belief grid of `n` interior points `p_i = i/(n+1)`, `i = 1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(ModelError::InvalidGrid(format!(
                "need at least 3 interior points, got {n}"
            )));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.n + 1) as f64
    }

    /// Belief at interior index `i` (0-based).
    pub fn point(&self, i: usize) -> f64 {
        (i + 1) as f64 / (self.n + 1) as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.point(i))
    }

    /// The grid with half the step: `2(n+1) − 1` interior points.
    pub fn refined(&self) -> Self {
        Self {
            n: 2 * (self.n + 1) - 1,
        }
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self { n: 999 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    PolicyIteration,
    /// Policy iteration revisited an earlier policy and the solve finished
    /// with damped Gauss–Seidel value iteration.
    ValueIterationFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSolution {
    pub grid: Grid,
    /// Value at each interior grid point.
    pub values: Vec<f64>,
    /// Allocation `μ ∈ {0, 1}` at each interior grid point.
    pub policy: Vec<u8>,
    /// Midpoint between the last safe node and the first exploring node;
    /// 1 when no node explores.
    pub free_boundary: f64,
    /// Max violation of the discrete variational inequality, in the
    /// normalised form `v_i − max_μ (flow_μ + k_μ(v_{i−1}+v_{i+1}))/(1+2k_μ)`.
    pub residual: f64,
    pub iterations: usize,
    pub method: SolveMethod,
    pub lower_boundary: f64,
    pub upper_boundary: f64,
}

impl GridSolution {
    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        self.grid.points()
    }

    /// Policy is `0…0 1…1`.
    pub fn is_threshold(&self) -> bool {
        self.policy.windows(2).all(|w| w[0] <= w[1])
    }

    /// `max_i |values_i − f(p_i)|`.
    pub fn max_error(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points()
            .zip(&self.values)
            .map(|(p, v)| (v - f(p)).abs())
            .fold(0.0, f64::max)
    }

    /// Value with the Dirichlet endpoints attached, on `n + 2` points.
    pub fn full_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len() + 2);
        out.push(self.lower_boundary);
        out.extend_from_slice(&self.values);
        out.push(self.upper_boundary);
        out
    }
}

/// Solves `v = max{r, m(p) − σ²δ/(2α) + Φ(p)v''/(2δ)}` on `grid`.
pub fn solve_baseline(
    params: &ModelParams,
    grid: Grid,
    opts: SolverOptions,
) -> Result<GridSolution> {
    Problem::new(params, None, grid)?.solve(opts)
}

/// Solves the two-region equation where the expert signal keeps the belief
/// diffusing under both actions. Requires `params.gamma`.
pub fn solve_expert(params: &ModelParams, grid: Grid, opts: SolverOptions) -> Result<GridSolution> {
    let gamma = params.gamma.ok_or(ModelError::MissingGamma)?;
    Problem::new(params, Some(gamma), grid)?.solve(opts)
}

struct Problem {
    grid: Grid,
    /// Per node: (flow, k) for μ = 0 and μ = 1.
    safe: Vec<(f64, f64)>,
    explore: Vec<(f64, f64)>,
    lower: f64,
    upper: f64,
}

impl Problem {
    fn new(params: &ModelParams, expert_vol: Option<f64>, grid: Grid) -> Result<Self> {
        let params = params.validate()?;
        let h = grid.step();
        let scale = 1.0 / (2.0 * params.delta * h * h);
        let cost = params.ambiguity_cost();
        let mut safe = Vec::with_capacity(grid.len());
        let mut explore = Vec::with_capacity(grid.len());
        for p in grid.points() {
            let free = expert_vol.map_or(0.0, |g| params.phi_at(p, g));
            let own = params.phi_at(p, params.sigma);
            safe.push((params.r, free * scale));
            explore.push((params.mean_at(p) - cost, (own + free) * scale));
        }
        Ok(Self {
            grid,
            safe,
            explore,
            lower: params.r.max(params.theta_low - cost),
            upper: params.r.max(params.theta_high - cost),
        })
    }

    fn coeffs(&self, i: usize, mu: u8) -> (f64, f64) {
        if mu == 1 {
            self.explore[i]
        } else {
            self.safe[i]
        }
    }

    fn neighbours(&self, values: &[f64], i: usize) -> (f64, f64) {
        let left = if i == 0 { self.lower } else { values[i - 1] };
        let right = if i + 1 == values.len() {
            self.upper
        } else {
            values[i + 1]
        };
        (left, right)
    }

    /// Gauss–Seidel form of the action-`mu` equation at node `i`.
    fn fixed_point(&self, values: &[f64], i: usize, mu: u8) -> f64 {
        let (flow, k) = self.coeffs(i, mu);
        let (l, r) = self.neighbours(values, i);
        (flow + k * (l + r)) / (1.0 + 2.0 * k)
    }

    fn residual(&self, values: &[f64]) -> f64 {
        (0..values.len())
            .map(|i| {
                let best = self
                    .fixed_point(values, i, 0)
                    .max(self.fixed_point(values, i, 1));
                (values[i] - best).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Solves the linear system `(1+2k_i)v_i − k_i(v_{i−1}+v_{i+1}) = flow_i` for a fixed policy.
    fn evaluate(&self, policy: &[u8]) -> Vec<f64> {
        let n = policy.len();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let (flow, k) = self.coeffs(i, policy[i]);
            diag[i] = 1.0 + 2.0 * k;
            rhs[i] = flow;
            if i == 0 {
                rhs[i] += k * self.lower;
            } else {
                sub[i] = -k;
            }
            if i + 1 == n {
                rhs[i] += k * self.upper;
            } else {
                sup[i] = -k;
            }
        }
        solve_tridiagonal(&sub, &diag, &sup, &rhs)
    }

    /// Switches a node's action only when the alternative is strictly better.
    fn improve(&self, values: &[f64], policy: &[u8]) -> Vec<u8> {
        (0..values.len())
            .map(|i| {
                let (l, r) = self.neighbours(values, i);
                let second = l - 2.0 * values[i] + r;
                let gain = |mu| {
                    let (flow, k) = self.coeffs(i, mu);
                    flow + k * second
                };
                let current = policy[i];
                let other = 1 - current;
                if gain(other) > gain(current) {
                    other
                } else {
                    current
                }
            })
            .collect()
    }

    fn solve(&self, opts: SolverOptions) -> Result<GridSolution> {
        let n = self.grid.len();
        let mut policy = vec![0u8; n];
        let mut values = self.evaluate(&policy);
        let mut seen: HashSet<Vec<u8>> = HashSet::new();
        seen.insert(policy.clone());
        let mut last_change = f64::INFINITY;

        for iteration in 1..=opts.max_iter {
            let next = self.improve(&values, &policy);
            if next == policy {
                return Ok(self.finish(values, policy, iteration, SolveMethod::PolicyIteration));
            }
            if !seen.insert(next.clone()) {
                return self.value_iteration(values, opts, iteration);
            }
            let updated = self.evaluate(&next);
            last_change = sup_distance(&updated, &values);
            values = updated;
            policy = next;
            if last_change < opts.tol {
                let policy = self.improve(&values, &policy);
                return Ok(self.finish(values, policy, iteration, SolveMethod::PolicyIteration));
            }
        }
        Err(ModelError::NotConverged {
            iterations: opts.max_iter,
            last_change,
            residual: self.residual(&values),
        })
    }

    fn value_iteration(
        &self,
        mut values: Vec<f64>,
        opts: SolverOptions,
        spent: usize,
    ) -> Result<GridSolution> {
        let mut change = f64::INFINITY;
        for sweep in 1..=opts.max_iter {
            change = 0.0;
            for i in 0..values.len() {
                let next = self
                    .fixed_point(&values, i, 0)
                    .max(self.fixed_point(&values, i, 1));
                change = f64::max(change, (next - values[i]).abs());
                values[i] = next;
            }
            if change < opts.tol {
                let policy = self.greedy(&values);
                return Ok(self.finish(
                    values,
                    policy,
                    spent + sweep,
                    SolveMethod::ValueIterationFallback,
                ));
            }
        }
        Err(ModelError::NotConverged {
            iterations: spent + opts.max_iter,
            last_change: change,
            residual: self.residual(&values),
        })
    }

    /// Greedy policy; ties go to the safe arm.
    fn greedy(&self, values: &[f64]) -> Vec<u8> {
        self.improve(values, &vec![0; values.len()])
    }

    fn finish(
        &self,
        values: Vec<f64>,
        policy: Vec<u8>,
        iterations: usize,
        method: SolveMethod,
    ) -> GridSolution {
        let free_boundary = match policy.iter().position(|&mu| mu == 1) {
            None => 1.0,
            Some(0) => 0.5 * self.grid.point(0),
            Some(first) => 0.5 * (self.grid.point(first - 1) + self.grid.point(first)),
        };
        GridSolution {
            grid: self.grid,
            residual: self.residual(&values),
            values,
            policy,
            free_boundary,
            iterations,
            method,
            lower_boundary: self.lower,
            upper_boundary: self.upper,
        }
    }
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Thomas algorithm; `sub[0]` and `sup[n-1]` are ignored.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}
