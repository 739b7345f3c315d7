//! Run configuration, read from JSON and resolved into typed model pieces.

use std::path::{Path, PathBuf};

use dm_testlab_core::{DVector, Family, FitOptions, Link, LinkScale, ModelLink, Predictor};
use serde::{Deserialize, Serialize};

use crate::error::AppError;
use crate::sim::{CovariateRule, SimConfig, SimHypothesis};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Fit,
    Test,
    Power,
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    #[default]
    Linear,
    Expcurve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    #[default]
    Rejection,
    Moments,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<HypothesisConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerBlock>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: String,
    pub link: String,
    /// `theta` (default) or `mean`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_scale: Option<String>,
    #[serde(default)]
    pub predictor: PredictorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    /// Needed by fit and test; power only reads covariates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    pub covariates: Vec<String>,
    /// Prepend a column of ones (linear predictors only).
    #[serde(default = "yes")]
    pub intercept: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub n: usize,
    pub p: usize,
    /// Defaults to p minus the number of hypothesized coefficients.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    pub phi: f64,
    /// True β; defaults to ones on the nuisance block and β₂₀ on the tested block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default = "default_levels")]
    pub nominal_levels: Vec<f64>,
    #[serde(default)]
    pub covariates: CovariateRule,
    #[serde(default)]
    pub experiment: Experiment,
}

fn default_reps() -> usize {
    10_000
}

fn default_levels() -> Vec<f64> {
    vec![0.10, 0.05, 0.01]
}

/// Either a subset hypothesis (`indices` with `beta20` or `beta20_grid`) or `phi0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisConfig {
    /// Zero-based positions in β of the tested coefficients.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta20: Option<Vec<f64>>,
    /// Several null values, one test per entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta20_grid: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerBlock {
    /// Parameter point under the null (the tested entries are replaced by β₂₀).
    pub beta: Vec<f64>,
    pub phi: f64,
    /// Offset from β₂₀ (subset) or from φ₀ (precision, one entry).
    pub epsilon: Vec<f64>,
    #[serde(default = "default_levels")]
    pub gammas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// Typed model pieces shared by every command.
#[derive(Debug, Clone)]
pub struct ResolvedModel {
    pub family: Family,
    pub link: ModelLink,
    pub predictor: Predictor,
    pub fit: FitOptions,
}

/// A hypothesis on β, with tested positions and null values.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedHypothesis {
    Subset { indices: Vec<usize>, grid: Vec<Vec<f64>> },
    Precision { phi0: f64 },
}

fn config_err(msg: impl Into<String>) -> AppError {
    AppError::Config(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, AppError> {
        serde_json::from_str(text).map_err(|e| config_err(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Seed after defaults, as embedded in reports.
    pub fn resolved_seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn model(&self) -> Result<ResolvedModel, AppError> {
        let m = &self.model;
        let family: Family = m.family.parse().map_err(|e| config_err(format!("{e}")))?;
        let link: Link = m.link.parse().map_err(|e| config_err(format!("{e}")))?;
        let scale: LinkScale = match &m.link_scale {
            Some(s) => s.parse().map_err(|e| config_err(format!("{e}")))?,
            None => LinkScale::Theta,
        };
        let link = ModelLink { link, scale };
        link.validate(family).map_err(|e| config_err(format!("{e}")))?;
        let predictor = match m.predictor {
            PredictorKind::Linear => Predictor::Linear,
            PredictorKind::Expcurve => Predictor::ExpCurve,
        };
        let mut fit = FitOptions::default();
        if let Some(it) = m.max_iterations {
            if it == 0 {
                return Err(config_err("model.max_iterations must be positive"));
            }
            fit.max_iterations = it;
        }
        Ok(ResolvedModel {
            family,
            link,
            predictor,
            fit,
        })
    }

    pub fn hypothesis(&self) -> Result<ResolvedHypothesis, AppError> {
        let h = self
            .hypothesis
            .as_ref()
            .ok_or_else(|| config_err("this command needs a hypothesis block"))?;
        match (&h.indices, h.phi0) {
            (Some(_), Some(_)) => Err(config_err("hypothesis: give either indices or phi0, not both")),
            (None, Some(phi0)) => {
                if h.beta20.is_some() || h.beta20_grid.is_some() {
                    return Err(config_err("hypothesis: beta20 only applies to subset hypotheses"));
                }
                if !(phi0 > 0.0 && phi0.is_finite()) {
                    return Err(config_err(format!("hypothesis.phi0 must be positive, got {phi0}")));
                }
                Ok(ResolvedHypothesis::Precision { phi0 })
            }
            (Some(indices), None) => {
                if indices.is_empty() {
                    return Err(config_err("hypothesis.indices is empty"));
                }
                let mut sorted = indices.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != indices.len() {
                    return Err(config_err("hypothesis.indices has duplicates"));
                }
                let grid = match (&h.beta20, &h.beta20_grid) {
                    (Some(_), Some(_)) => return Err(config_err("hypothesis: give beta20 or beta20_grid, not both")),
                    (Some(b), None) => vec![b.clone()],
                    (None, Some(g)) if !g.is_empty() => g.clone(),
                    (None, Some(_)) => return Err(config_err("hypothesis.beta20_grid is empty")),
                    (None, None) => vec![vec![0.0; indices.len()]],
                };
                if let Some(bad) = grid.iter().find(|b| b.len() != indices.len()) {
                    return Err(config_err(format!(
                        "hypothesis: {} null values for {} tested coefficients",
                        bad.len(),
                        indices.len()
                    )));
                }
                Ok(ResolvedHypothesis::Subset {
                    indices: indices.clone(),
                    grid,
                })
            }
            (None, None) => Err(config_err("hypothesis needs indices (subset) or phi0 (precision)")),
        }
    }

    /// Simulation configuration for `simulate`. Tested coefficients must be the trailing block.
    pub fn sim_config(&self, model: &ResolvedModel) -> Result<SimConfig, AppError> {
        let s = self
            .sim
            .as_ref()
            .ok_or_else(|| config_err("simulate needs a sim block"))?;
        let hyp = self.hypothesis()?;
        let (hypothesis, q) = match &hyp {
            ResolvedHypothesis::Subset { indices, grid } => {
                if grid.len() != 1 {
                    return Err(config_err("simulate takes a single beta20, not a grid"));
                }
                let k = indices.len();
                if k > s.p {
                    return Err(config_err("more tested coefficients than parameters"));
                }
                let q = s.p - k;
                let mut sorted = indices.clone();
                sorted.sort_unstable();
                if sorted != (q..s.p).collect::<Vec<_>>() {
                    return Err(config_err(format!(
                        "simulate tests the trailing coefficients; use indices {:?}",
                        (q..s.p).collect::<Vec<_>>()
                    )));
                }
                if let Some(sq) = s.q {
                    if sq != q {
                        return Err(config_err(format!("sim.q = {sq} disagrees with the hypothesis (q = {q})")));
                    }
                }
                // Reorder β₂₀ to trailing order.
                let mut beta20 = vec![0.0; k];
                for (pos, &idx) in indices.iter().enumerate() {
                    beta20[idx - q] = grid[0][pos];
                }
                (
                    SimHypothesis::Subset {
                        beta20: DVector::from_vec(beta20),
                    },
                    q,
                )
            }
            ResolvedHypothesis::Precision { phi0 } => (SimHypothesis::Precision { phi0: *phi0 }, s.q.unwrap_or(0)),
        };
        let beta = match &s.beta {
            Some(b) => {
                if b.len() != s.p {
                    return Err(config_err(format!("sim.beta has {} entries, p = {}", b.len(), s.p)));
                }
                DVector::from_vec(b.clone())
            }
            None => {
                let mut b = DVector::from_element(s.p, 1.0);
                if let SimHypothesis::Subset { beta20 } = &hypothesis {
                    b.rows_mut(q, s.p - q).copy_from(beta20);
                }
                b
            }
        };
        Ok(SimConfig {
            family: model.family,
            link: model.link,
            predictor: model.predictor.clone(),
            n: s.n,
            p: s.p,
            q,
            beta,
            phi: s.phi,
            hypothesis,
            nominal_levels: s.nominal_levels.clone(),
            replications: s.replications,
            master_seed: self.resolved_seed(),
            covariates: s.covariates.clone(),
            fit: model.fit.clone(),
        })
    }
}
