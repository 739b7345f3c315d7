//! Monte Carlo experiments: null rejection rates, statistic moments and
//! empirical power with the analytic expansion alongside.
//!
//! Replication `r` draws from a ChaCha20 generator seeded with the master seed
//! on stream `r + 1`; stream 0 generates the covariates. Results are merged in
//! replication order, so a report depends only on the configuration and seed.

use std::collections::BTreeMap;

use dm_testlab_core::expansion::{
    local_power, power_differences, precision_coefficients, precision_power_differences,
    subset_coefficients, subset_inputs, CoefficientTable, PowerComparison,
};
use dm_testlab_core::{
    chisq_quantile, fit_full, fit_restricted, precision_tests, subset_tests, DMatrix, DVector,
    Family, FitOptions, FitResult, ModelLink, Predictor, RegressionSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::sampler::sample;

pub const GENERATOR: &str = "ChaCha20 (rand_chacha), stream = replication + 1, covariates on stream 0";

/// Share of failed replications above which a report is flagged unreliable.
pub const FAILURE_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CovariateRule {
    /// Intercept plus U(0,1) columns for linear predictors, one U(0,1) column
    /// for the exponential curve; drawn once and held fixed.
    #[default]
    Uniform01Fixed,
    /// Covariate matrix given row by row, used as is.
    UserMatrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimHypothesis {
    /// `H₀: β₂ = β₂₀` on the trailing block.
    Subset { beta20: DVector<f64> },
    /// `H₀: φ = φ₀`.
    Precision { phi0: f64 },
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub family: Family,
    pub link: ModelLink,
    pub predictor: Predictor,
    pub n: usize,
    pub p: usize,
    /// Nuisance block size; ignored for precision hypotheses.
    pub q: usize,
    /// True β generating the data.
    pub beta: DVector<f64>,
    /// True φ generating the data.
    pub phi: f64,
    pub hypothesis: SimHypothesis,
    pub nominal_levels: Vec<f64>,
    pub replications: usize,
    pub master_seed: u64,
    pub covariates: CovariateRule,
    pub fit: FitOptions,
}

impl SimConfig {
    /// The §7-style von Mises design: tan-half link, `β₁ = … = β_{p−2} = 1`,
    /// testing that the last two coefficients vanish.
    pub fn von_mises_design(n: usize, p: usize, phi: f64, replications: usize, seed: u64) -> Self {
        let q = p.saturating_sub(2);
        let beta = DVector::from_fn(p, |i, _| if i < q { 1.0 } else { 0.0 });
        SimConfig {
            family: Family::VonMises,
            link: ModelLink::new(dm_testlab_core::Link::TanHalf),
            predictor: Predictor::Linear,
            n,
            p,
            q,
            beta,
            phi,
            hypothesis: SimHypothesis::Subset {
                beta20: DVector::zeros(p - q),
            },
            nominal_levels: vec![0.10, 0.05, 0.01],
            replications,
            master_seed: seed,
            covariates: CovariateRule::Uniform01Fixed,
            fit: FitOptions::default(),
        }
    }

    pub fn df(&self) -> u32 {
        match self.hypothesis {
            SimHypothesis::Subset { .. } => (self.p - self.q) as u32,
            SimHypothesis::Precision { .. } => 1,
        }
    }

    /// Whether the data are generated under the null.
    pub fn null_is_true(&self) -> bool {
        match &self.hypothesis {
            SimHypothesis::Subset { beta20 } => self.beta.rows(self.q, self.p - self.q) == *beta20,
            SimHypothesis::Precision { phi0 } => self.phi == *phi0,
        }
    }

    /// The parameter point the hypothesis pins down (β with β₂ replaced by β₂₀).
    pub fn null_beta(&self) -> DVector<f64> {
        let mut b = self.beta.clone();
        if let SimHypothesis::Subset { beta20 } = &self.hypothesis {
            b.rows_mut(self.q, self.p - self.q).copy_from(beta20);
        }
        b
    }

    fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Setup(m));
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.beta.len() != self.p {
            return bad(format!("beta has length {}, p = {}", self.beta.len(), self.p));
        }
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return bad(format!("phi must be positive, got {}", self.phi));
        }
        if self.nominal_levels.is_empty() || self.nominal_levels.iter().any(|&g| !(g > 0.0 && g < 1.0)) {
            return bad("nominal levels must lie in (0, 1)".into());
        }
        match &self.hypothesis {
            SimHypothesis::Subset { beta20 } => {
                if self.q >= self.p || beta20.len() != self.p - self.q {
                    return bad(format!(
                        "subset hypothesis needs q < p and p - q values (q = {}, p = {}, given {})",
                        self.q,
                        self.p,
                        beta20.len()
                    ));
                }
            }
            SimHypothesis::Precision { phi0 } => {
                if !(*phi0 > 0.0 && phi0.is_finite()) {
                    return bad(format!("phi0 must be positive, got {phi0}"));
                }
                if self.family.pdm().is_none() {
                    return Err(SimError::Model(dm_testlab_core::Error::Unsupported {
                        family: self.family.name(),
                        operation: "precision test",
                    }));
                }
            }
        }
        if matches!(
            self.family,
            Family::GeneralizedHyperbolicSecant | Family::ReciprocalInverseGaussian
        ) {
            return Err(SimError::UnsupportedSampler(self.family.name()));
        }
        self.link.validate(self.family)?;
        Ok(())
    }

    /// Plain-data echo for report metadata.
    pub fn echo(&self) -> serde_json::Value {
        let (hyp, value) = match &self.hypothesis {
            SimHypothesis::Subset { beta20 } => ("subset", serde_json::json!(beta20.as_slice())),
            SimHypothesis::Precision { phi0 } => ("precision", serde_json::json!(phi0)),
        };
        serde_json::json!({
            "family": self.family.name(),
            "link": self.link.link.to_string(),
            "link_scale": self.link.scale.name(),
            "predictor": self.predictor.name(),
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "beta": self.beta.as_slice(),
            "phi": self.phi,
            "hypothesis": { "kind": hyp, "value": value },
            "nominal_levels": self.nominal_levels,
            "replications": self.replications,
            "master_seed": self.master_seed,
            "covariates": self.covariates,
        })
    }
}

pub fn replication_rng(master_seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Intercept plus U(0,1) columns (linear) or one U(0,1) column (exponential
/// curve), drawn from stream 0 of the master seed.
pub fn uniform_design(predictor: &Predictor, n: usize, p: usize, master_seed: u64) -> Result<DMatrix<f64>, SimError> {
    let mut rng = replication_rng(master_seed, 0);
    let (cols, intercept) = match predictor {
        Predictor::Linear => (p, true),
        Predictor::ExpCurve => (1, false),
        Predictor::Custom(_) => {
            return Err(SimError::Setup("custom predictors need a user covariate matrix".into()))
        }
    };
    let mut x = DMatrix::zeros(n, cols);
    // Row-major draws keep earlier rows unchanged when n grows.
    for i in 0..n {
        for j in 0..cols {
            x[(i, j)] = if intercept && j == 0 { 1.0 } else { rng.random::<f64>() };
        }
    }
    Ok(x)
}

/// Covariates under the configured rule.
pub fn design_matrix(cfg: &SimConfig) -> Result<DMatrix<f64>, SimError> {
    match &cfg.covariates {
        CovariateRule::Uniform01Fixed => uniform_design(&cfg.predictor, cfg.n, cfg.p, cfg.master_seed),
        CovariateRule::UserMatrix(rows) => {
            if rows.len() != cfg.n {
                return Err(SimError::Setup(format!(
                    "covariate matrix has {} rows, n = {}",
                    rows.len(),
                    cfg.n
                )));
            }
            let cols = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != cols) {
                return Err(SimError::Setup("covariate matrix rows differ in length".into()));
            }
            Ok(DMatrix::from_fn(cfg.n, cols, |i, j| rows[i][j]))
        }
    }
}

/// Prepared experiment: fixed design and the θ of every observation.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: RegressionSpec,
    pub theta: DVector<f64>,
}

pub fn prepare(cfg: &SimConfig) -> Result<Prepared, SimError> {
    cfg.validate()?;
    let x = design_matrix(cfg)?;
    let q = match cfg.hypothesis {
        SimHypothesis::Subset { .. } => cfg.q,
        SimHypothesis::Precision { .. } => 0,
    };
    let spec = RegressionSpec::new(cfg.predictor.clone(), x, q)?;
    if spec.p() != cfg.p {
        return Err(SimError::Setup(format!(
            "predictor has {} parameters, p = {}",
            spec.p(),
            cfg.p
        )));
    }
    let eval = spec.evaluate(&cfg.beta)?;
    let mut theta = DVector::zeros(cfg.n);
    for l in 0..cfg.n {
        let d = cfg.link.theta_derivs(cfg.family, eval.eta[l])?;
        cfg.family.check_theta(l, d.theta)?;
        theta[l] = d.theta;
    }
    Ok(Prepared { spec, theta })
}

/// Statistics of one replication, or the reason it failed.
pub fn replicate(cfg: &SimConfig, prep: &Prepared, rep: usize) -> Result<[f64; 4], String> {
    let mut rng = replication_rng(cfg.master_seed, rep as u64 + 1);
    let y = DVector::from_iterator(
        cfg.n,
        prep.theta
            .iter()
            .map(|&th| sample(cfg.family, th, cfg.phi, &mut rng))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?,
    );
    let quartet = match &cfg.hypothesis {
        SimHypothesis::Subset { beta20 } => {
            let full = fit_with_fallback(cfg, prep, &y)?;
            let b1 = full.beta_hat.rows(0, cfg.q).into_owned();
            let restricted = fit_restricted(cfg.family, &cfg.link, &prep.spec, &y, beta20, Some(&b1), &cfg.fit)
                .or_else(|_| {
                    let b1 = cfg.beta.rows(0, cfg.q).into_owned();
                    fit_restricted(cfg.family, &cfg.link, &prep.spec, &y, beta20, Some(&b1), &cfg.fit)
                })
                .map_err(|e| failure_reason("restricted fit", &e))?;
            subset_tests(&full, &restricted).map_err(|e| failure_reason("statistics", &e))?
        }
        SimHypothesis::Precision { phi0 } => {
            let full = fit_with_fallback(cfg, prep, &y)?;
            precision_tests(cfg.family, &y, &full, *phi0).map_err(|e| failure_reason("statistics", &e))?
        }
    };
    let v = quartet.values();
    if v.iter().all(|s| s.is_finite()) {
        Ok(v)
    } else {
        Err("statistics: non-finite value".into())
    }
}

// Default start first, then the generating β; the data are never redrawn.
fn fit_with_fallback(
    cfg: &SimConfig,
    prep: &Prepared,
    y: &DVector<f64>,
) -> Result<FitResult, String> {
    fit_full(cfg.family, &cfg.link, &prep.spec, y, None, &cfg.fit)
        .or_else(|_| fit_full(cfg.family, &cfg.link, &prep.spec, y, Some(&cfg.beta), &cfg.fit))
        .map_err(|e| failure_reason("full fit", &e))
}

fn failure_reason(stage: &str, e: &dm_testlab_core::Error) -> String {
    use dm_testlab_core::Error as E;
    let what = match e {
        E::NotConverged { .. } => "not converged",
        E::DomainExit { .. } => "left the parameter space",
        E::RankDeficient { .. } => "rank deficient",
        E::NotPositiveDefinite(_) => "information not positive definite",
        E::PhiNoRoot { .. } => "no precision estimate",
        E::ThetaOutOfDomain { .. } => "theta out of domain",
        _ => "error",
    };
    format!("{stage}: {what}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRates {
    pub gamma: f64,
    pub critical_value: f64,
    /// Rejection rates in percent, ordered LR, Wald, score, gradient.
    pub rates_percent: [f64; 4],
    /// `100·√(r(1−r)/reps)`.
    pub mc_standard_errors: [f64; 4],
    /// False with a single successful replication, where the standard error is not informative.
    pub se_defined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Moments {
    pub mean: [f64; 4],
    pub variance: [f64; 4],
    pub reference_mean: f64,
    pub reference_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct FailureSummary {
    pub count: usize,
    pub reasons: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimMetadata {
    pub master_seed: u64,
    pub generator: &'static str,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticLevel {
    pub gamma: f64,
    pub power_percent: [f64; 4],
    pub clamped: [bool; 4],
    pub k: [f64; 12],
    pub ordering: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticOverlay {
    pub lambda: f64,
    pub df: u32,
    pub coefficients: [[f64; 4]; 4],
    pub levels: Vec<AnalyticLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub experiment: &'static str,
    pub replications: usize,
    pub successes: usize,
    pub df: u32,
    pub rejection_rates: Vec<LevelRates>,
    pub moments: Moments,
    pub failures: FailureSummary,
    pub unreliable: bool,
    pub metadata: SimMetadata,
    pub analytic: Option<AnalyticOverlay>,
}

impl SimReport {
    pub fn rates_at(&self, gamma: f64) -> Option<&LevelRates> {
        self.rejection_rates.iter().find(|r| (r.gamma - gamma).abs() < 1e-12)
    }
}

/// Runs every replication on the current rayon pool, in index order.
pub fn run_replications(cfg: &SimConfig) -> Result<(Vec<Result<[f64; 4], String>>, Prepared), SimError> {
    let prep = prepare(cfg)?;
    let out = (0..cfg.replications)
        .into_par_iter()
        .map(|r| replicate(cfg, &prep, r))
        .collect();
    Ok((out, prep))
}

fn aggregate(cfg: &SimConfig, experiment: &'static str, results: &[Result<[f64; 4], String>]) -> Result<SimReport, SimError> {
    let df = cfg.df();
    let ok: Vec<[f64; 4]> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let mut failures = FailureSummary::default();
    for r in results {
        if let Err(reason) = r {
            failures.count += 1;
            *failures.reasons.entry(reason.clone()).or_default() += 1;
        }
    }
    let m = ok.len();
    let mut rejection_rates = Vec::with_capacity(cfg.nominal_levels.len());
    for &gamma in &cfg.nominal_levels {
        let x = chisq_quantile(1.0 - gamma, df)?;
        let mut rates = [0.0; 4];
        let mut ses = [0.0; 4];
        for i in 0..4 {
            let hits = ok.iter().filter(|s| s[i] > x).count();
            let r = if m == 0 { f64::NAN } else { hits as f64 / m as f64 };
            rates[i] = 100.0 * r;
            ses[i] = if m > 1 { 100.0 * (r * (1.0 - r) / m as f64).sqrt() } else { 0.0 };
        }
        rejection_rates.push(LevelRates {
            gamma,
            critical_value: x,
            rates_percent: rates,
            mc_standard_errors: ses,
            se_defined: m > 1,
        });
    }
    let mut mean = [0.0; 4];
    let mut variance = [0.0; 4];
    for i in 0..4 {
        let mu = ok.iter().map(|s| s[i]).sum::<f64>() / m as f64;
        mean[i] = mu;
        variance[i] = if m > 1 {
            ok.iter().map(|s| (s[i] - mu).powi(2)).sum::<f64>() / (m - 1) as f64
        } else {
            f64::NAN
        };
    }
    Ok(SimReport {
        experiment,
        replications: cfg.replications,
        successes: m,
        df,
        rejection_rates,
        moments: Moments {
            mean,
            variance,
            reference_mean: df as f64,
            reference_variance: 2.0 * df as f64,
        },
        unreliable: failures.count as f64 > FAILURE_LIMIT * cfg.replications as f64,
        failures,
        metadata: SimMetadata {
            master_seed: cfg.master_seed,
            generator: GENERATOR,
            config: cfg.echo(),
        },
        analytic: None,
    })
}

/// Null rejection rates (or raw rejection rates when the null is false).
pub fn rejection_experiment(cfg: &SimConfig) -> Result<SimReport, SimError> {
    let (results, _) = run_replications(cfg)?;
    aggregate(cfg, "rejection", &results)
}

/// Means and variances of the statistics under a true null.
pub fn moments_experiment(cfg: &SimConfig) -> Result<SimReport, SimError> {
    if !cfg.null_is_true() {
        return Err(SimError::Setup("moments experiment needs data generated under the null".into()));
    }
    let (results, _) = run_replications(cfg)?;
    aggregate(cfg, "moments", &results)
}

/// Empirical power plus the local power expansion at the same configuration.
pub fn power_experiment(cfg: &SimConfig) -> Result<SimReport, SimError> {
    let (results, prep) = run_replications(cfg)?;
    let mut report = aggregate(cfg, "power", &results)?;
    report.analytic = Some(analytic_overlay(cfg, &prep)?);
    Ok(report)
}

/// Expansion-based power at the simulated configuration.
pub fn analytic_overlay(cfg: &SimConfig, prep: &Prepared) -> Result<AnalyticOverlay, SimError> {
    let (table, comparisons): (CoefficientTable, Vec<PowerComparison>) = match &cfg.hypothesis {
        SimHypothesis::Subset { beta20 } => {
            let eps = cfg.beta.rows(cfg.q, cfg.p - cfg.q) - beta20;
            let inputs = subset_inputs(cfg.family, &cfg.link, &prep.spec, &cfg.null_beta(), cfg.phi, &eps)?;
            let cmp = cfg
                .nominal_levels
                .iter()
                .map(|&g| power_differences(&inputs, g))
                .collect::<Result<Vec<_>, _>>()?;
            (subset_coefficients(&inputs), cmp)
        }
        SimHypothesis::Precision { phi0 } => {
            let table = precision_coefficients(cfg.family, cfg.n, cfg.p, *phi0, cfg.phi - phi0)?;
            let cmp = cfg
                .nominal_levels
                .iter()
                .map(|&g| precision_power_differences(cfg.family, cfg.n, cfg.phi, *phi0, g))
                .collect::<Result<Vec<_>, _>>()?;
            (table, cmp)
        }
    };
    let mut levels = Vec::new();
    for (&gamma, cmp) in cfg.nominal_levels.iter().zip(comparisons) {
        let lp = local_power(&table, gamma)?;
        levels.push(AnalyticLevel {
            gamma,
            power_percent: lp.power.map(|p| 100.0 * p),
            clamped: lp.clamped,
            k: cmp.k,
            ordering: cmp.ordering,
        });
    }
    Ok(AnalyticOverlay {
        lambda: table.lambda,
        df: table.df,
        coefficients: table.b,
        levels,
    })
}
