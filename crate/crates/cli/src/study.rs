//! TOML study configuration for the `simulate` command.

use serde::{Deserialize, Serialize};

use polycor::simulation::{Estimator, MixtureSpec, Misspecification};
use polycor::Theta;

use crate::error::CliError;

pub const TABLE3: &str = include_str!("../configs/table3.toml");

/// Bundled configurations selectable by name.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "table3" => Some(TABLE3),
        _ => None,
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub n: usize,
    pub replications: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Tuning constant of the robust estimator.
    #[serde(default = "default_c")]
    pub c: f64,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    pub design: Design,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Design {
    pub rho: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub contamination: Option<Contamination>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Contamination {
    BivariateNormal {
        mean: [f64; 2],
        variances: [f64; 2],
        #[serde(default)]
        covariance: f64,
    },
    IndependentGumbel {
        location: f64,
        scale: f64,
    },
}

fn default_seed() -> u64 {
    1
}

fn default_alpha() -> f64 {
    0.05
}

fn default_c() -> f64 {
    0.6
}

fn default_methods() -> Vec<String> {
    ["robust", "ml", "sample-correlation"].map(String::from).to_vec()
}

fn config_error(key: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("config error in `{key}`: {message}"))
}

impl StudyConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Input(format!("config error: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.replications == 0 {
            return Err(config_error("replications", "must be at least 1"));
        }
        if self.n < 3 {
            return Err(config_error("n", "must be at least 3"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(config_error("alpha", format!("{} outside (0, 1)", self.alpha)));
        }
        if !(self.c >= 0.0) {
            return Err(config_error("c", "must be nonnegative"));
        }
        if self.epsilons.is_empty() {
            return Err(config_error("epsilons", "needs at least one value"));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(0.0..0.5).contains(*e)) {
            return Err(config_error("epsilons", format!("{e} outside [0, 0.5)")));
        }
        if self.methods.is_empty() {
            return Err(config_error("methods", "needs at least one method"));
        }
        self.estimators()?;
        for &eps in &self.epsilons {
            self.spec(eps)?;
        }
        Ok(())
    }

    pub fn estimators(&self) -> Result<Vec<Estimator>, CliError> {
        self.methods
            .iter()
            .map(|m| match m.as_str() {
                "robust" => Ok(Estimator::Robust { c: self.c }),
                "ml" => Ok(Estimator::Ml),
                "twostep" | "two-step" => Ok(Estimator::TwoStep),
                "sample-correlation" => Ok(Estimator::SampleCorrelation),
                other => Err(config_error("methods", format!("unknown method '{other}'"))),
            })
            .collect()
    }

    pub fn spec(&self, epsilon: f64) -> Result<MixtureSpec, CliError> {
        let d = &self.design;
        let truth = Theta::new(d.rho, d.a.clone(), d.b.clone()).map_err(|e| config_error("design", e))?;
        let h = match d.contamination {
            None => Misspecification::None,
            Some(Contamination::BivariateNormal { mean, variances, covariance }) => {
                Misspecification::BivariateNormal { mean, variances, covariance }
            }
            Some(Contamination::IndependentGumbel { location, scale }) => {
                Misspecification::IndependentGumbel { location, scale }
            }
        };
        let h = if epsilon == 0.0 { Misspecification::None } else { h };
        MixtureSpec::new(epsilon, truth, h).map_err(|e| config_error("design.contamination", e))
    }
}
