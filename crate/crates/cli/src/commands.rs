use anyhow::{bail, ensure};
use clap::{Args, ValueEnum};
use robust_bandit::two_period::value_second_differences;
use robust_bandit::{
    optimal_allocation, simulate_equilibrium, simulate_forced, solve_baseline, solve_expert,
    solve_two_period, surplus, surplus_argmax, Belief, ClosedForm, ExpertClosedForm, Grid,
    GridSolution, ModelParams, SimConfig, SolverOptions, TwoPeriodConfig,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{float_cell, Report, RunManifest};
use crate::params::{ParamArgs, Preset};

/// Error allowance on top of three standard errors when comparing a
/// simulated payoff with the closed form (Euler and monitoring bias).
const PAYOFF_BIAS_ALLOWANCE: f64 = 2e-3;
/// Largest accepted `error(h/2) / error(h)` in `verify`.
const REFINEMENT_RATIO: f64 = 0.6;
/// Errors below this are round-off; the refinement ratio is not meaningful.
const ROUNDOFF: f64 = 1e-10;

#[derive(Debug, Clone, Args)]
pub struct ValueArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Comma-separated beliefs; overrides --grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p: Vec<f64>,
    /// Number of evenly spaced beliefs on [0, 1].
    #[arg(long, default_value_t = 1001)]
    pub grid: usize,
}

pub fn value(args: &ValueArgs) -> anyhow::Result<Report> {
    let params = args.params.resolve()?;
    let beliefs: Vec<Belief> = if args.p.is_empty() {
        ensure!(
            args.grid >= 2,
            "--grid must be at least 2 for a belief grid"
        );
        let last = (args.grid - 1) as f64;
        (0..args.grid)
            .map(|i| Belief::saturating(i as f64 / last))
            .collect()
    } else {
        args.p
            .iter()
            .map(|&p| Belief::new(p))
            .collect::<Result<_, _>>()?
    };
    let cf = ClosedForm::derive(&params);
    let expert = params
        .gamma
        .map(|_| ExpertClosedForm::derive(&params))
        .transpose()?;

    let mut header = vec!["p", "v"];
    if expert.is_some() {
        header.extend(["v_tilde", "surplus"]);
    }
    let mut rows = Vec::with_capacity(beliefs.len());
    let mut json_rows = Vec::with_capacity(beliefs.len());
    for &b in &beliefs {
        let mut row = vec![b.get(), cf.value(b)];
        if let Some(e) = &expert {
            row.extend([e.value(b), surplus(e, b)]);
        }
        json_rows.push(Value::Object(
            header
                .iter()
                .map(|h| h.to_string())
                .zip(row.iter().map(|&x| json!(x)))
                .collect(),
        ));
        rows.push(row.into_iter().map(float_cell).collect());
    }

    let mut manifest = RunManifest::new(
        "value",
        Some(params),
        json!({ "beliefs": if args.p.is_empty() { json!({ "grid": args.grid }) } else { json!(args.p) } }),
    );
    let mut body = json!({ "p_bar": cf.p_bar, "rows": json_rows });
    if let Some(e) = &expert {
        body["p_tilde"] = json!(e.p_tilde);
        if beliefs.len() >= 3 && args.p.is_empty() {
            let peak = surplus_argmax(e, beliefs.len())?;
            body["surplus_peak"] = serde_json::to_value(peak)?;
            manifest.check("surplus_nonnegative", rows_nonnegative(&json_rows));
        }
    }
    Ok(Report {
        manifest,
        body,
        table: Some((header.into_iter().map(String::from).collect(), rows)),
    })
}

fn rows_nonnegative(rows: &[Value]) -> bool {
    rows.iter()
        .all(|r| r["surplus"].as_f64().is_none_or(|s| s >= -1e-12))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    Alpha,
    Sigma,
    Gamma,
    Delta,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Parameter to vary; defaults to alpha.
    #[arg(long, value_enum)]
    pub var: Option<SweepVar>,
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<f64>,
    /// Number of evenly spaced values, endpoints included.
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
}

#[derive(Debug, Serialize)]
struct SweepRow {
    value: f64,
    eta: f64,
    lambda: f64,
    p_bar: f64,
    /// `η ≥ 1`: the cutoff is clamped to 1 and the arm is never explored.
    clamped: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    big_lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_tilde: Option<f64>,
}

pub fn sweep(args: &SweepArgs) -> anyhow::Result<Report> {
    let var = args.var.unwrap_or(SweepVar::Alpha);
    // The cut-off figure sweeps alpha over the range it plots.
    let fig_range = (args.params.preset == Some(Preset::FigCutoffs) && var == SweepVar::Alpha)
        .then_some((0.08, 0.5));
    let (from, to) = match (args.from, args.to, fig_range) {
        (Some(a), Some(b), _) => (a, b),
        (None, None, Some(r)) => r,
        _ => bail!("--from and --to are required"),
    };
    ensure!(args.steps >= 2, "--steps must be at least 2");
    ensure!(
        from.is_finite() && to.is_finite() && from != to,
        "sweep range must be finite and nonempty"
    );

    let mut base = args.params.clone();
    if var == SweepVar::Gamma {
        // The swept value fills gamma even when the base set has none.
        base.gamma = Some(from);
        base.no_gamma = false;
    }
    let base = base.resolve()?;
    let mut rows = Vec::with_capacity(args.steps);
    for i in 0..args.steps {
        let x = from + (to - from) * i as f64 / (args.steps - 1) as f64;
        let params = set_var(base, var, x)
            .validate()
            .map_err(|e| anyhow::anyhow!("row {i} ({} = {x}): {e}", var_name(var)))?;
        let cf = ClosedForm::derive(&params);
        let expert = params
            .gamma
            .map(|_| ExpertClosedForm::derive(&params))
            .transpose()?;
        rows.push(SweepRow {
            value: x,
            eta: cf.eta,
            lambda: cf.lambda,
            p_bar: cf.p_bar,
            clamped: cf.never_explores(),
            big_lambda: expert.map(|e| e.big_lambda),
            p_tilde: expert.map(|e| e.p_tilde),
        });
    }

    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut manifest = RunManifest::new(
        "sweep",
        Some(base),
        json!({ "var": var, "from": from, "to": to, "steps": args.steps }),
    );
    match var {
        SweepVar::Alpha => {
            manifest.check(
                "p_bar_decreasing_in_alpha",
                decreasing(&sorted, |r| r.p_bar),
            );
            if base.gamma.is_some() {
                manifest.check(
                    "p_tilde_decreasing_in_alpha",
                    decreasing(&sorted, |r| r.p_tilde.unwrap()),
                );
            }
        }
        SweepVar::Delta => {
            manifest.check(
                "lambda_increasing_in_delta",
                sorted.windows(2).all(|w| w[1].lambda > w[0].lambda),
            );
        }
        SweepVar::Sigma | SweepVar::Gamma => {}
    }
    if base.gamma.is_some() {
        manifest.check(
            "p_tilde_at_least_p_bar",
            rows.iter().all(|r| r.p_tilde.unwrap() >= r.p_bar - 1e-12),
        );
    }
    let clamped_rows: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.clamped)
        .map(|(i, _)| i)
        .collect();

    let mut header = vec!["value", "eta", "lambda", "p_bar", "clamped"];
    if base.gamma.is_some() {
        header.extend(["big_lambda", "p_tilde"]);
    }
    let table = rows
        .iter()
        .map(|r| {
            let mut cells = vec![
                float_cell(r.value),
                float_cell(r.eta),
                float_cell(r.lambda),
                float_cell(r.p_bar),
                r.clamped.to_string(),
            ];
            if let (Some(bl), Some(pt)) = (r.big_lambda, r.p_tilde) {
                cells.extend([float_cell(bl), float_cell(pt)]);
            }
            cells
        })
        .collect();
    Ok(Report {
        manifest,
        body: json!({ "var": var, "clamped_rows": clamped_rows, "rows": rows }),
        table: Some((header.into_iter().map(String::from).collect(), table)),
    })
}

fn var_name(var: SweepVar) -> String {
    var.to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_owned()
}

fn set_var(p: ModelParams, var: SweepVar, x: f64) -> ModelParams {
    match var {
        SweepVar::Alpha => ModelParams { alpha: x, ..p },
        SweepVar::Sigma => ModelParams { sigma: x, ..p },
        SweepVar::Gamma => p.with_gamma(x),
        SweepVar::Delta => ModelParams { delta: x, ..p },
    }
}

/// Nonincreasing overall and strictly decreasing between unclamped rows.
fn decreasing(rows: &[&SweepRow], f: impl Fn(&SweepRow) -> f64) -> bool {
    rows.windows(2).all(|w| {
        let (a, b) = (f(w[0]), f(w[1]));
        if w[1].clamped || w[0].clamped {
            b <= a
        } else {
            b < a
        }
    })
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Interior grid points.
    #[arg(long, default_value_t = 999)]
    pub grid: usize,
    /// Solver residual tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Largest accepted max-norm error against the closed form.
    #[arg(long, default_value_t = 5e-4)]
    pub max_error: f64,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    grid: usize,
    step: f64,
    max_error: f64,
    free_boundary: f64,
    closed_form_cutoff: f64,
    boundary_gap: f64,
    residual: f64,
    iterations: usize,
    method: robust_bandit::SolveMethod,
    refined_grid: usize,
    refined_max_error: f64,
    /// `refined_max_error / max_error`; 0 when the coarse error is round-off.
    error_ratio: f64,
}

pub fn verify(args: &VerifyArgs) -> anyhow::Result<Report> {
    let params = args.params.resolve()?;
    let grid = Grid::new(args.grid)?;
    let opts = SolverOptions {
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let mut manifest = RunManifest::new(
        "verify",
        Some(params),
        json!({ "grid": args.grid, "tol": args.tol, "max_iter": args.max_iter, "max_error": args.max_error }),
    );

    let cf = ClosedForm::derive(&params);
    let base = compare(
        |g| solve_baseline(&params, g, opts),
        |p| cf.value(Belief::saturating(p)),
        cf.p_bar,
        grid,
    )?;
    record(&mut manifest, "baseline", &base, args.max_error);
    let mut body = json!({ "baseline": base });

    if params.gamma.is_some() {
        let e = ExpertClosedForm::derive(&params)?;
        let rep = compare(
            |g| solve_expert(&params, g, opts),
            |p| e.value(Belief::saturating(p)),
            e.p_tilde,
            grid,
        )?;
        record(&mut manifest, "expert", &rep, args.max_error);
        body["expert"] = serde_json::to_value(&rep)?;
    }
    Ok(Report {
        manifest,
        body,
        table: None,
    })
}

fn compare(
    solve: impl Fn(Grid) -> robust_bandit::Result<GridSolution>,
    exact: impl Fn(f64) -> f64 + Copy,
    cutoff: f64,
    grid: Grid,
) -> anyhow::Result<VerifyReport> {
    let sol = solve(grid)?;
    let fine = solve(grid.refined())?;
    let (e1, e2) = (sol.max_error(exact), fine.max_error(exact));
    Ok(VerifyReport {
        grid: grid.len(),
        step: grid.step(),
        max_error: e1,
        free_boundary: sol.free_boundary,
        closed_form_cutoff: cutoff,
        boundary_gap: (sol.free_boundary - cutoff).abs(),
        residual: sol.residual,
        iterations: sol.iterations,
        method: sol.method,
        refined_grid: fine.grid.len(),
        refined_max_error: e2,
        error_ratio: if e1 > ROUNDOFF { e2 / e1 } else { 0.0 },
    })
}

fn record(manifest: &mut RunManifest, name: &str, rep: &VerifyReport, max_error: f64) {
    manifest.check(
        &format!("{name}_error_within_tolerance"),
        rep.max_error <= max_error,
    );
    manifest.check(
        &format!("{name}_boundary_within_step"),
        rep.boundary_gap <= rep.step,
    );
    manifest.check(
        &format!("{name}_error_halves_with_step"),
        rep.max_error <= ROUNDOFF || rep.error_ratio <= REFINEMENT_RATIO,
    );
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 0.6)]
    pub p0: f64,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 30.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Constant allocation in [0, 1] instead of the equilibrium cutoff rule.
    #[arg(long)]
    pub forced_mu: Option<f64>,
    /// Compare against the closed form and exit nonzero on mismatch.
    #[arg(long)]
    pub check: bool,
}

pub fn simulate(args: &SimulateArgs) -> anyhow::Result<Report> {
    let params = args.params.resolve()?;
    let cfg = SimConfig {
        n_paths: args.paths,
        dt: args.dt,
        horizon: args.horizon,
        seed: args.seed,
        initial_belief: Belief::new(args.p0)?,
    };
    let mut manifest = RunManifest::new(
        "simulate",
        Some(params),
        json!({ "p0": args.p0, "paths": args.paths, "dt": args.dt, "horizon": args.horizon, "forced_mu": args.forced_mu, "check": args.check }),
    );
    manifest.seed = Some(args.seed);

    let body = match args.forced_mu {
        None => {
            let cf = ClosedForm::derive(&params);
            let res = simulate_equilibrium(&params, &cf, &cfg)?;
            let v = cf.value(cfg.initial_belief);
            let gap = (res.payoff_mean - v).abs();
            let allowance =
                3.0 * res.payoff_se + PAYOFF_BIAS_ALLOWANCE + res.payoff_truncation_bound;
            if args.check {
                manifest.check("payoff_matches_value", gap <= allowance);
            }
            json!({
                "result": res,
                "closed_form_value": v,
                "initial_allocation": optimal_allocation(&cf, cfg.initial_belief),
                "payoff_gap": gap,
                "payoff_allowance": allowance,
            })
        }
        Some(mu) => {
            let res = simulate_forced(&params, mu, &cfg)?;
            let h = params.worst_case_drift(mu);
            let limit = h * h / (2.0 * params.delta);
            let gap = (res.entropy_mean - limit).abs();
            let allowance = 3.0 * res.entropy_se + res.entropy_truncation_bound + 1e-9;
            if args.check {
                manifest.check("entropy_matches_limit", gap <= allowance);
            }
            json!({
                "result": res,
                "worst_case_drift": h,
                "entropy_limit": limit,
                "entropy_gap": gap,
                "entropy_allowance": allowance,
            })
        }
    };
    Ok(Report {
        manifest,
        body,
        table: None,
    })
}

#[derive(Debug, Clone, Args)]
pub struct TwoPeriodArgs {
    #[arg(long, default_value_t = 0.5)]
    pub p1: f64,
    /// Discount factor in (0, 1].
    #[arg(long, alias = "delta", default_value_t = 1.0)]
    pub discount: f64,
    #[arg(long, default_value_t = 1001)]
    pub mu_grid: usize,
    #[arg(long, default_value_t = 64)]
    pub quad_nodes: usize,
    /// Also report second differences of v₁ over this many evenly spaced priors.
    #[arg(long)]
    pub profile: Option<usize>,
    /// Exit nonzero unless max-min ≤ min-max.
    #[arg(long)]
    pub check: bool,
}

pub fn two_period(args: &TwoPeriodArgs) -> anyhow::Result<Report> {
    let cfg = TwoPeriodConfig {
        p1: args.p1,
        discount: args.discount,
        mu_grid: args.mu_grid,
        quad_nodes: args.quad_nodes,
    };
    let res = solve_two_period(&cfg)?;
    let mut manifest = RunManifest::new("two-period", None, cfg);
    if let Some(n) = args.profile {
        manifest.options["profile"] = json!(n);
    }
    if args.check {
        manifest.check("maxmin_at_most_minmax", res.v1 <= res.minmax_v1 + 1e-12);
    }
    let mut body = json!({ "result": res, "duality_gap": res.minmax_v1 - res.v1 });
    if let Some(n) = args.profile {
        let profile = value_second_differences(args.discount, n, args.mu_grid, args.quad_nodes)?;
        body["second_differences"] = json!(profile
            .into_iter()
            .map(|(p, d)| json!({ "p1": p, "second_difference": d }))
            .collect::<Vec<_>>());
    }
    Ok(Report {
        manifest,
        body,
        table: None,
    })
}

#[derive(Debug, Clone, Args)]
pub struct CutoffArgs {
    #[command(flatten)]
    pub params: ParamArgs,
}

pub fn cutoff(args: &CutoffArgs) -> anyhow::Result<Report> {
    let params = args.params.resolve()?;
    let cf = ClosedForm::derive(&params);
    let mut body = serde_json::to_value(cf)?;
    body["never_explore"] = json!(cf.never_explores());
    if cf.never_explores() {
        body["note"] = json!("eta >= 1: never explore, the cutoff is clamped to 1");
    }
    if params.gamma.is_some() {
        body["expert"] = serde_json::to_value(ExpertClosedForm::derive(&params)?)?;
    }
    Ok(Report {
        manifest: RunManifest::new("cutoff", Some(params), json!({})),
        body,
        table: None,
    })
}
