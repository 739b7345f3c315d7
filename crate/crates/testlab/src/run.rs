//! The four commands: fit, test, power and simulate.

use std::path::{Path, PathBuf};

use dm_testlab_core::expansion::{
    local_power, power_differences, precision_coefficients, precision_power_differences,
    subset_coefficients, subset_inputs, CoefficientTable, PowerComparison, Verdict,
};
use dm_testlab_core::{
    fit_full, fit_restricted, precision_tests, subset_tests, DMatrix, DVector, FitResult, Predictor,
    RegressionSpec, TestQuartet,
};

use crate::config::{Command, Experiment, Format, ResolvedHypothesis, ResolvedModel, RunConfig};
use crate::error::AppError;
use crate::ingest::{ingest_csv, prepare_response};
use crate::report::{
    CommandResult, FitReport, PairReport, PowerLevel, PowerReport, Report, TestPoint, TestReport,
};
use crate::sim::{self, uniform_design};

pub const THREADS_ENV: &str = "DM_TESTLAB_THREADS";

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
}

/// Applies overrides and fills defaults so the result can be re-run as is.
/// Relative data paths are taken relative to `base_dir`.
pub fn resolve(mut cfg: RunConfig, ov: &Overrides, base_dir: Option<&Path>) -> RunConfig {
    if let Some(s) = ov.seed {
        cfg.seed = Some(s);
    }
    cfg.seed = Some(cfg.resolved_seed());
    if let Some(o) = &ov.output {
        cfg.output.path = Some(o.clone());
    }
    if let Some(f) = ov.format {
        cfg.output.format = f;
    }
    if ov.threads.is_some() {
        cfg.threads = ov.threads;
    }
    if let (Some(base), Some(data)) = (base_dir, cfg.data.as_mut()) {
        if data.path.is_relative() {
            data.path = base.join(&data.path);
        }
    }
    cfg
}

/// Runs a resolved configuration. Failures become error reports.
pub fn run(cfg: RunConfig) -> Report {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build();
    let outcome = match pool {
        Ok(pool) => pool.install(|| execute(&cfg)),
        Err(e) => Err(AppError::Config(format!("cannot start worker threads: {e}"))),
    };
    match outcome {
        Ok((result, warnings)) => Report::success(cfg, warnings, result),
        Err(e) => Report::failure(Some(cfg), Vec::new(), &e),
    }
}

pub fn execute(cfg: &RunConfig) -> Result<(CommandResult, Vec<String>), AppError> {
    let model = cfg.model()?;
    let mut warnings = Vec::new();
    let result = match cfg.command {
        Command::Fit => CommandResult::Fit(cmd_fit(cfg, &model, &mut warnings)?),
        Command::Test => CommandResult::Test(cmd_test(cfg, &model, &mut warnings)?),
        Command::Power => CommandResult::Power(cmd_power(cfg, &model, &mut warnings)?),
        Command::Simulate => {
            let sc = cfg.sim_config(&model)?;
            let experiment = cfg.sim.as_ref().map(|s| s.experiment).unwrap_or_default();
            let report = match experiment {
                Experiment::Rejection => sim::rejection_experiment(&sc)?,
                Experiment::Moments => sim::moments_experiment(&sc)?,
                Experiment::Power => sim::power_experiment(&sc)?,
            };
            if report.unreliable {
                warnings.push(format!(
                    "{} of {} replications failed; rates are unreliable",
                    report.failures.count, report.replications
                ));
            }
            CommandResult::Simulate(report)
        }
    };
    Ok((result, warnings))
}

struct Data {
    y: Option<DVector<f64>>,
    x: DMatrix<f64>,
    names: Vec<String>,
}

fn load_data(cfg: &RunConfig, model: &ResolvedModel, need_y: bool, warnings: &mut Vec<String>) -> Result<Data, AppError> {
    let d = cfg
        .data
        .as_ref()
        .ok_or_else(|| AppError::Config(format!("{:?} needs a data block", cfg.command).to_lowercase()))?;
    if need_y && d.response.is_none() {
        return Err(AppError::Config("data.response is required for this command".into()));
    }
    let mut ds = ingest_csv(&d.path, d.response.as_deref(), &d.covariates)?;
    if let (Some(y), Some(col)) = (ds.y.as_mut(), d.response.as_deref()) {
        prepare_response(model.family, y, col, warnings)?;
    }
    let (x, names) = match model.predictor {
        Predictor::Linear if d.intercept => {
            let mut x = DMatrix::from_element(ds.n, ds.x.ncols() + 1, 1.0);
            x.columns_mut(1, ds.x.ncols()).copy_from(&ds.x);
            let mut names = vec!["(intercept)".to_string()];
            names.extend(d.covariates.iter().cloned());
            (x, names)
        }
        Predictor::Linear => (ds.x.clone(), d.covariates.clone()),
        _ => {
            if ds.x.ncols() != 1 {
                return Err(AppError::Config("expcurve takes exactly one covariate".into()));
            }
            (ds.x.clone(), vec!["beta1".into(), "beta2".into(), "beta3".into()])
        }
    };
    Ok(Data { y: ds.y, x, names })
}

fn spec_for(model: &ResolvedModel, x: DMatrix<f64>, q: usize) -> Result<RegressionSpec, AppError> {
    RegressionSpec::new(model.predictor.clone(), x, q).map_err(|e| AppError::Config(e.to_string()))
}

fn fit_report(fit: &FitResult, names: &[String], order: &[usize]) -> Result<FitReport, AppError> {
    let (se, se_phi) = fit.standard_errors()?;
    let p = fit.p();
    let mut beta = vec![0.0; p];
    let mut ses = vec![0.0; p];
    for (j, &orig) in order.iter().enumerate() {
        beta[orig] = fit.beta_hat[j];
        ses[orig] = se[j];
    }
    Ok(FitReport {
        family: fit.family.name().into(),
        link: fit.link.to_string(),
        predictor: fit.spec.predictor.name().into(),
        n: fit.n(),
        p,
        parameters: names.to_vec(),
        beta,
        standard_errors: ses,
        phi: fit.phi_hat,
        phi_standard_error: se_phi,
        loglik: fit.loglik,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

fn cmd_fit(cfg: &RunConfig, model: &ResolvedModel, warnings: &mut Vec<String>) -> Result<FitReport, AppError> {
    let data = load_data(cfg, model, true, warnings)?;
    let y = data.y.expect("response checked");
    let spec = spec_for(model, data.x, 0)?;
    let fit = fit_full(model.family, &model.link, &spec, &y, None, &model.fit)?;
    let order: Vec<usize> = (0..spec.p()).collect();
    fit_report(&fit, &data.names, &order)
}

/// Column order putting the tested coefficients last, and the null values
/// (and offsets) sorted to match.
struct Partition {
    order: Vec<usize>,
    q: usize,
    grid: Vec<Vec<f64>>,
}

fn partition(model: &ResolvedModel, p: usize, indices: &[usize], grid: &[Vec<f64>]) -> Result<Partition, AppError> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= p) {
        return Err(AppError::Config(format!("hypothesis index {bad} out of range (p = {p})")));
    }
    let mut sorted: Vec<usize> = (0..indices.len()).collect();
    sorted.sort_by_key(|&m| indices[m]);
    let tested: Vec<usize> = sorted.iter().map(|&m| indices[m]).collect();
    let q = p - tested.len();
    let mut order: Vec<usize> = (0..p).filter(|i| !tested.contains(i)).collect();
    order.extend(&tested);
    if !matches!(model.predictor, Predictor::Linear) && order != (0..p).collect::<Vec<_>>() {
        return Err(AppError::Config(format!(
            "for nonlinear predictors the tested coefficients must be the trailing ones {:?}",
            (q..p).collect::<Vec<_>>()
        )));
    }
    let grid = grid
        .iter()
        .map(|b| sorted.iter().map(|&m| b[m]).collect())
        .collect();
    Ok(Partition { order, q, grid })
}

fn permute_columns(model: &ResolvedModel, x: &DMatrix<f64>, order: &[usize]) -> DMatrix<f64> {
    match model.predictor {
        Predictor::Linear => DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, order[j])]),
        _ => x.clone(),
    }
}

fn point(q: TestQuartet, beta20: Option<Vec<f64>>, phi0: Option<f64>) -> TestPoint {
    TestPoint {
        beta20,
        phi0,
        statistics: q.values().into(),
        pvalues: q.pvalues.into(),
        notes: q.notes,
    }
}

fn cmd_test(cfg: &RunConfig, model: &ResolvedModel, warnings: &mut Vec<String>) -> Result<TestReport, AppError> {
    let data = load_data(cfg, model, true, warnings)?;
    let y = data.y.expect("response checked");
    match cfg.hypothesis()? {
        ResolvedHypothesis::Subset { indices, grid } => {
            let p = spec_for(model, data.x.clone(), 0)?.p();
            let part = partition(model, p, &indices, &grid)?;
            let spec = spec_for(model, permute_columns(model, &data.x, &part.order), part.q)?;
            let full = fit_full(model.family, &model.link, &spec, &y, None, &model.fit)?;
            let b1 = full.beta_hat.rows(0, part.q).into_owned();
            let mut points = Vec::new();
            for (given, sorted) in grid.iter().zip(&part.grid) {
                let beta20 = DVector::from_vec(sorted.clone());
                let restricted = fit_restricted(model.family, &model.link, &spec, &y, &beta20, Some(&b1), &model.fit)
                    .or_else(|_| fit_restricted(model.family, &model.link, &spec, &y, &beta20, None, &model.fit))?;
                let q = subset_tests(&full, &restricted)?;
                points.push(point(q, Some(given.clone()), None));
            }
            Ok(TestReport {
                hypothesis: "subset",
                indices: Some(indices),
                df: (p - part.q) as u32,
                full_fit: fit_report(&full, &data.names, &part.order)?,
                points,
            })
        }
        ResolvedHypothesis::Precision { phi0 } => {
            let spec = spec_for(model, data.x, 0)?;
            let full = fit_full(model.family, &model.link, &spec, &y, None, &model.fit)?;
            let q = precision_tests(model.family, &y, &full, phi0)?;
            let order: Vec<usize> = (0..spec.p()).collect();
            Ok(TestReport {
                hypothesis: "precision",
                indices: None,
                df: 1,
                full_fit: fit_report(&full, &data.names, &order)?,
                points: vec![point(q, None, Some(phi0))],
            })
        }
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Greater => "greater",
        Verdict::Less => "less",
        Verdict::Equal => "equal",
        Verdict::Indeterminate => "indeterminate",
    }
}

fn power_level(table: &CoefficientTable, cmp: PowerComparison, gamma: f64) -> Result<PowerLevel, AppError> {
    let lp = local_power(table, gamma)?;
    Ok(PowerLevel {
        gamma,
        critical_value: lp.critical_value,
        first_order_power: lp.first_order,
        power: lp.power.into(),
        clamped: lp.clamped,
        pairs: cmp
            .pairs
            .iter()
            .map(|pc| PairReport {
                pair: format!("Π{} - Π{}", pc.i + 1, pc.j + 1),
                coef_g4: pc.coef_g4,
                coef_g6: pc.coef_g6,
                difference: pc.difference,
                verdict: verdict_name(pc.verdict),
            })
            .collect(),
        ordering: cmp.ordering,
    })
}

fn cmd_power(cfg: &RunConfig, model: &ResolvedModel, warnings: &mut Vec<String>) -> Result<PowerReport, AppError> {
    let pw = cfg
        .power
        .as_ref()
        .ok_or_else(|| AppError::Config("power needs a power block".into()))?;
    if pw.gammas.is_empty() || pw.gammas.iter().any(|&g| !(g > 0.0 && g < 1.0)) {
        return Err(AppError::Config("power.gammas must lie in (0, 1)".into()));
    }
    let x = match (&cfg.data, &cfg.sim) {
        (Some(_), _) => load_data(cfg, model, false, warnings)?.x,
        (None, Some(s)) => uniform_design(&model.predictor, s.n, s.p, cfg.resolved_seed())?,
        (None, None) => return Err(AppError::Config("power needs a data or sim block for the design".into())),
    };
    let n = x.nrows();
    let p = spec_for(model, x.clone(), 0)?.p();
    match cfg.hypothesis()? {
        ResolvedHypothesis::Subset { indices, grid } => {
            if grid.len() != 1 {
                return Err(AppError::Config("power takes a single beta20".into()));
            }
            if pw.beta.len() != p || pw.epsilon.len() != indices.len() {
                return Err(AppError::Config(format!(
                    "power.beta needs {p} entries and power.epsilon {} entries",
                    indices.len()
                )));
            }
            let part = partition(model, p, &indices, &[grid[0].clone(), pw.epsilon.clone()])?;
            let spec = spec_for(model, permute_columns(model, &x, &part.order), part.q)?;
            let mut beta = DVector::from_iterator(p, part.order.iter().map(|&i| pw.beta[i]));
            beta.rows_mut(part.q, p - part.q).copy_from(&DVector::from_vec(part.grid[0].clone()));
            let eps = DVector::from_vec(part.grid[1].clone());
            let inputs = subset_inputs(model.family, &model.link, &spec, &beta, pw.phi, &eps)?;
            let table = subset_coefficients(&inputs);
            let mut levels = Vec::new();
            let mut k = [0.0; 12];
            for &g in &pw.gammas {
                let cmp = power_differences(&inputs, g)?;
                k = cmp.k;
                levels.push(power_level(&table, cmp, g)?);
            }
            Ok(power_report("subset", n, p, &table, k, levels))
        }
        ResolvedHypothesis::Precision { phi0 } => {
            if pw.epsilon.len() != 1 {
                return Err(AppError::Config("precision power takes one epsilon (phi - phi0)".into()));
            }
            let eps = pw.epsilon[0];
            let table = precision_coefficients(model.family, n, p, phi0, eps)?;
            let mut levels = Vec::new();
            let mut k = [0.0; 12];
            for &g in &pw.gammas {
                let cmp = precision_power_differences(model.family, n, phi0 + eps, phi0, g)?;
                k = cmp.k;
                levels.push(power_level(&table, cmp, g)?);
            }
            Ok(power_report("precision", n, p, &table, k, levels))
        }
    }
}

fn power_report(
    hypothesis: &'static str,
    n: usize,
    p: usize,
    table: &CoefficientTable,
    k: [f64; 12],
    levels: Vec<PowerLevel>,
) -> PowerReport {
    PowerReport {
        hypothesis,
        n,
        p,
        df: table.df,
        lambda: table.lambda,
        lambda_convention: "Poisson mixture weights with mean lambda/2; lambda = eps' K eps with phi-inclusive information",
        coefficients: table.b,
        k,
        levels,
    }
}
