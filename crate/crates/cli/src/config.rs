//! JSON run configuration.
//!
//! Model parameters, the accrual period and the forward rate have no
//! defaults. Monte-Carlo, grid and fit settings do.

use std::path::Path;

use rfr_sabr::calibration::{FitParameters, ResidualMetric};
use rfr_sabr::mc::McConfig;
use rfr_sabr::{AccrualPeriod, CapletStyle, DecayExponent, SabrParams};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapletConfig {
    pub strike: f64,
    pub style: CapletStyle,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HwConfig {
    pub kappa: f64,
    #[serde(default = "default_xi")]
    pub xi: f64,
    /// Number of points of the comparison grid on `[τ0, τ1]`, both ends included.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_xi() -> f64 {
    0.01
}

fn default_grid_points() -> usize {
    21
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathDumpConfig {
    pub file: std::path::PathBuf,
    #[serde(default = "default_dump_count")]
    pub count: usize,
}

pub(crate) fn default_dump_count() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    pub metric: ResidualMetric,
    pub parameters: FitParameters,
    pub max_iter: usize,
    pub tolerance: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let d = rfr_sabr::calibration::FitOptions::default();
        Self {
            metric: d.metric,
            parameters: d.parameters,
            max_iter: d.max_iter,
            tolerance: d.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: SabrParams,
    pub period: AccrualPeriod,
    /// `R(0)` in decimals per year.
    pub forward_rate: f64,
    /// `P(0, τ1)`.
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default)]
    pub q: Option<DecayExponent>,
    #[serde(default)]
    pub caplet: Option<CapletConfig>,
    /// Defaults to 11 geometric strikes over `[R(0)/2, 2R(0)]`.
    #[serde(default)]
    pub strikes: Option<Vec<f64>>,
    #[serde(default = "default_styles")]
    pub styles: Vec<CapletStyle>,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub hw: Option<HwConfig>,
    #[serde(default)]
    pub path_dump: Option<PathDumpConfig>,
    #[serde(default)]
    pub calibration: CalibrationConfig,
}

fn default_discount() -> f64 {
    1.0
}

fn default_styles() -> Vec<CapletStyle> {
    vec![CapletStyle::Backward]
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<(), CliError> {
        let mut problems: Vec<String> = self
            .model
            .violations()
            .iter()
            .map(|v| v.to_string())
            .collect();
        let s = self.model.shift;
        if !(self.forward_rate + s > 0.0) || !self.forward_rate.is_finite() {
            problems.push(format!(
                "forward_rate + shift must be > 0 (got {})",
                self.forward_rate + s
            ));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            problems.push(format!("discount out of (0,1] (got {})", self.discount));
        }
        if let Some(strikes) = &self.strikes {
            if strikes.is_empty() {
                problems.push("strikes must not be empty".into());
            }
            for (i, k) in strikes.iter().enumerate() {
                if !(k + s > 0.0) || !k.is_finite() {
                    problems.push(format!("strikes[{i}] + shift must be > 0 (got {})", k + s));
                }
            }
        }
        if let Some(c) = &self.caplet {
            if !(c.strike + s > 0.0) || !c.strike.is_finite() {
                problems.push(format!(
                    "caplet.strike + shift must be > 0 (got {})",
                    c.strike + s
                ));
            }
        }
        if self.styles.is_empty() {
            problems.push("styles must not be empty".into());
        }
        if let Some(hw) = &self.hw {
            if !hw.kappa.is_finite() {
                problems.push(format!("hw.kappa must be finite (got {})", hw.kappa));
            }
            if !(hw.xi >= 0.0) {
                problems.push(format!("hw.xi must be >= 0 (got {})", hw.xi));
            }
            if hw.grid_points < 2 {
                problems.push(format!(
                    "hw.grid_points must be >= 2 (got {})",
                    hw.grid_points
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems.join("; ")))
        }
    }

    pub fn require_q(&self) -> Result<DecayExponent, CliError> {
        self.q
            .ok_or_else(|| CliError::Config("q is required for backward-looking caplets".into()))
    }

    /// Sorted, deduplicated strike grid.
    pub fn strike_grid(&self) -> Vec<f64> {
        let mut k = self
            .strikes
            .clone()
            .unwrap_or_else(|| rfr_sabr::mc::default_strike_grid(self.forward_rate));
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    /// Requested styles in canonical order, backward first.
    pub fn style_list(&self) -> Vec<CapletStyle> {
        let mut s = self.styles.clone();
        s.sort();
        s.dedup();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": {"alpha": 0.1, "beta": 1.0, "rho": -0.5, "nu": 0.5},
        "period": {"tau0": 0.5, "tau1": 1.0},
        "forward_rate": 0.05,
        "q": 1.0
    }"#;

    #[test]
    fn minimal_config_gets_explicit_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.discount, 1.0);
        assert_eq!(c.mc.n_paths, 200_000);
        assert_eq!(c.mc.dt, 1.0 / 512.0);
        assert_eq!(c.styles, vec![CapletStyle::Backward]);
        assert_eq!(c.strike_grid().len(), 11);
    }

    #[test]
    fn missing_model_is_an_error() {
        let err =
            RunConfig::from_json(r#"{"period": {"tau0": 0.5, "tau1": 1.0}, "forward_rate": 0.05}"#)
                .unwrap_err();
        assert!(err.to_string().contains("model"));
    }

    #[test]
    fn invalid_values_are_collected() {
        let text = MINIMAL.replace("-0.5", "-1.5").replace("0.05", "-0.05");
        let msg = RunConfig::from_json(&text).unwrap_err().to_string();
        assert!(msg.contains("rho") && msg.contains("forward_rate"), "{msg}");
        let bad_period = MINIMAL.replace("\"tau0\": 0.5", "\"tau0\": 1.5");
        assert!(RunConfig::from_json(&bad_period).is_err());
        let bad_q = MINIMAL.replace("\"q\": 1.0", "\"q\": -1.0");
        assert!(RunConfig::from_json(&bad_q).is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replace("\"q\": 1.0", "\"q\": 1.0, \"strikez\": [0.05]");
        assert!(RunConfig::from_json(&text).is_err());
    }

    #[test]
    fn grid_and_styles_are_canonical() {
        let text = MINIMAL.replace(
            "\"q\": 1.0",
            "\"q\": 1.0, \"strikes\": [0.06, 0.04, 0.06], \"styles\": [\"forward\", \"backward\"]",
        );
        let c = RunConfig::from_json(&text).unwrap();
        assert_eq!(c.strike_grid(), vec![0.04, 0.06]);
        assert_eq!(
            c.style_list(),
            vec![CapletStyle::Backward, CapletStyle::Forward]
        );
    }
}
