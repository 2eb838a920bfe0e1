//! Model parameter intake: preset, then `--params` file, then individual flags.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use robust_bandit::ModelParams;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Caption parameters of the cut-off figure; sweeps default to alpha.
    FigCutoffs,
    /// Caption parameters of the surplus figure.
    FigSurplus,
}

impl Preset {
    fn params(self) -> PartialParams {
        // Both figures share one caption.
        PartialParams {
            r: Some(0.2),
            theta_low: Some(0.0),
            theta_high: Some(1.0),
            sigma: Some(0.4),
            delta: Some(0.9),
            alpha: Some(0.14),
            gamma: Some(0.3),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta_low: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta_high: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Expert signal volatility; enables the expert-information columns.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// Drop any gamma coming from a preset or parameter file.
    #[arg(long, conflicts_with = "gamma")]
    pub no_gamma: bool,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// JSON object with any of the parameter fields (snake_case).
    #[arg(long = "params", value_name = "FILE")]
    pub params_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialParams {
    r: Option<f64>,
    theta_low: Option<f64>,
    theta_high: Option<f64>,
    sigma: Option<f64>,
    delta: Option<f64>,
    alpha: Option<f64>,
    gamma: Option<f64>,
}

impl PartialParams {
    /// Fields set in `top` win.
    fn overlay(self, top: Self) -> Self {
        Self {
            r: top.r.or(self.r),
            theta_low: top.theta_low.or(self.theta_low),
            theta_high: top.theta_high.or(self.theta_high),
            sigma: top.sigma.or(self.sigma),
            delta: top.delta.or(self.delta),
            alpha: top.alpha.or(self.alpha),
            gamma: top.gamma.or(self.gamma),
        }
    }
}

impl ParamArgs {
    pub fn resolve(&self) -> anyhow::Result<ModelParams> {
        let mut merged = self.preset.map(Preset::params).unwrap_or_default();
        if let Some(path) = &self.params_file {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading parameter file {}", path.display()))?;
            let file: PartialParams = serde_json::from_str(&text)
                .with_context(|| format!("parsing parameter file {}", path.display()))?;
            merged = merged.overlay(file);
        }
        merged = merged.overlay(PartialParams {
            r: self.r,
            theta_low: self.theta_low,
            theta_high: self.theta_high,
            sigma: self.sigma,
            delta: self.delta,
            alpha: self.alpha,
            gamma: self.gamma,
        });
        if self.no_gamma {
            merged.gamma = None;
        }

        let missing: Vec<&str> = [
            ("--r", merged.r),
            ("--theta-low", merged.theta_low),
            ("--theta-high", merged.theta_high),
            ("--sigma", merged.sigma),
            ("--delta", merged.delta),
            ("--alpha", merged.alpha),
        ]
        .into_iter()
        .filter(|(_, v)| v.is_none())
        .map(|(name, _)| name)
        .collect();
        if !missing.is_empty() {
            bail!("missing model parameters: {}", missing.join(", "));
        }
        let params = ModelParams {
            r: merged.r.unwrap(),
            theta_low: merged.theta_low.unwrap(),
            theta_high: merged.theta_high.unwrap(),
            sigma: merged.sigma.unwrap(),
            delta: merged.delta.unwrap(),
            alpha: merged.alpha.unwrap(),
            gamma: merged.gamma,
        };
        Ok(params.validate()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_preset() {
        let args = ParamArgs {
            preset: Some(Preset::FigCutoffs),
            alpha: Some(0.5),
            ..Default::default()
        };
        let p = args.resolve().unwrap();
        assert_eq!(p.alpha, 0.5);
        assert_eq!(p.gamma, Some(0.3));
    }

    #[test]
    fn no_gamma_clears_preset() {
        let args = ParamArgs {
            preset: Some(Preset::FigSurplus),
            no_gamma: true,
            ..Default::default()
        };
        assert_eq!(args.resolve().unwrap().gamma, None);
    }

    #[test]
    fn missing_fields_are_listed() {
        let err = ParamArgs {
            r: Some(0.2),
            ..Default::default()
        }
        .resolve()
        .unwrap_err()
        .to_string();
        assert!(err.contains("--sigma") && err.contains("--alpha") && !err.contains("--r,"));
    }
}
