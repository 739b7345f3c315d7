//! Report documents and their JSON / CSV renderings.

use std::io::Write;

use serde::Serialize;

use crate::config::{Command, Format, RunConfig};
use crate::error::AppError;
use crate::sim::SimReport;

pub const TOOL: &str = "dm-testlab";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartet {
    pub likelihood_ratio: f64,
    pub wald: f64,
    pub score: f64,
    pub gradient: f64,
}

impl From<[f64; 4]> for Quartet {
    fn from(v: [f64; 4]) -> Self {
        Quartet {
            likelihood_ratio: v[0],
            wald: v[1],
            score: v[2],
            gradient: v[3],
        }
    }
}

impl Quartet {
    fn values(&self) -> [f64; 4] {
        [self.likelihood_ratio, self.wald, self.score, self.gradient]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub family: String,
    pub link: String,
    pub predictor: String,
    pub n: usize,
    pub p: usize,
    pub parameters: Vec<String>,
    pub beta: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub phi: f64,
    /// Absent for families without a separable precision term.
    pub phi_standard_error: Option<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestPoint {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta20: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi0: Option<f64>,
    pub statistics: Quartet,
    pub pvalues: Quartet,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    /// `subset` or `precision`.
    pub hypothesis: &'static str,
    /// Zero-based tested positions in β (subset hypotheses).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
    pub df: u32,
    pub full_fit: FitReport,
    pub points: Vec<TestPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    /// For instance `Π1 - Π4`.
    pub pair: String,
    pub coef_g4: f64,
    pub coef_g6: f64,
    pub difference: f64,
    pub verdict: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerLevel {
    pub gamma: f64,
    pub critical_value: f64,
    pub first_order_power: f64,
    pub power: Quartet,
    pub clamped: [bool; 4],
    pub pairs: Vec<PairReport>,
    pub ordering: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerReport {
    pub hypothesis: &'static str,
    pub n: usize,
    pub p: usize,
    pub df: u32,
    pub lambda: f64,
    /// How λ enters the noncentral χ² (Poisson weights with mean λ/2).
    pub lambda_convention: &'static str,
    /// `b[i][k]`, rows LR, Wald, score, gradient; columns k = 0..3.
    pub coefficients: [[f64; 4]; 4],
    pub k: [f64; 12],
    pub levels: Vec<PowerLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum CommandResult {
    Fit(FitReport),
    Test(TestReport),
    Power(PowerReport),
    Simulate(SimReport),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorObject {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl From<&AppError> for ErrorObject {
    fn from(e: &AppError) -> Self {
        ErrorObject {
            kind: e.kind(),
            message: e.to_string(),
            exit_code: e.exit_code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    /// `ok` or `error`.
    pub status: &'static str,
    pub command: Option<Command>,
    /// Resolved configuration; re-running it reproduces the report.
    pub config: Option<RunConfig>,
    pub warnings: Vec<String>,
    pub result: Option<CommandResult>,
    pub error: Option<ErrorObject>,
}

impl Report {
    pub fn success(config: RunConfig, warnings: Vec<String>, result: CommandResult) -> Self {
        Report {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            status: "ok",
            command: Some(config.command),
            config: Some(config),
            warnings,
            result: Some(result),
            error: None,
        }
    }

    pub fn failure(config: Option<RunConfig>, warnings: Vec<String>, err: &AppError) -> Self {
        Report {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            status: "error",
            command: config.as_ref().map(|c| c.command),
            config,
            warnings,
            result: None,
            error: Some(err.into()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(0, |e| e.exit_code)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Table rendering; the configuration and status go in leading `#` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# tool: {} {}\n", self.tool, self.version));
        out.push_str(&format!("# status: {}\n", self.status));
        if let Some(cfg) = &self.config {
            out.push_str(&format!("# config: {}\n", serde_json::to_string(cfg).expect("config serializes")));
        }
        for w in &self.warnings {
            out.push_str(&format!("# warning: {w}\n"));
        }
        let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
        let rows = match (&self.result, &self.error) {
            (_, Some(e)) => vec![
                svec(&["kind", "exit_code", "message"]),
                vec![e.kind.to_string(), e.exit_code.to_string(), e.message.clone()],
            ],
            (Some(r), None) => csv_rows(r),
            (None, None) => Vec::new(),
        };
        for r in rows {
            wtr.write_record(&r).expect("in-memory csv");
        }
        out.push_str(&String::from_utf8(wtr.into_inner().expect("in-memory csv")).expect("utf-8"));
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }

    /// Writes to `path`, or stdout when `None`.
    pub fn write(&self, format: Format, path: Option<&std::path::Path>) -> Result<(), AppError> {
        let text = self.render(format);
        match path {
            Some(p) => std::fs::write(p, text).map_err(|source| AppError::Output {
                path: p.display().to_string(),
                source,
            }),
            None => std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|source| AppError::Output {
                    path: "<stdout>".into(),
                    source,
                }),
        }
    }
}

fn svec(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}

fn csv_rows(r: &CommandResult) -> Vec<Vec<String>> {
    match r {
        CommandResult::Fit(f) => {
            let mut rows = vec![svec(&["parameter", "estimate", "std_error"])];
            for (i, name) in f.parameters.iter().enumerate() {
                rows.push(vec![name.clone(), num(f.beta[i]), num(f.standard_errors[i])]);
            }
            rows.push(vec![
                "phi".into(),
                num(f.phi),
                f.phi_standard_error.map(num).unwrap_or_default(),
            ]);
            rows.push(vec!["loglik".into(), num(f.loglik), String::new()]);
            rows
        }
        CommandResult::Test(t) => {
            let mut rows = vec![svec(&[
                "null", "lr", "wald", "score", "gradient", "p_lr", "p_wald", "p_score", "p_gradient",
            ])];
            for pt in &t.points {
                let null = match (&pt.beta20, pt.phi0) {
                    (Some(b), _) => join(b),
                    (None, Some(phi0)) => num(phi0),
                    _ => String::new(),
                };
                let mut row = vec![null];
                row.extend(pt.statistics.values().iter().map(|v| num(*v)));
                row.extend(pt.pvalues.values().iter().map(|v| num(*v)));
                rows.push(row);
            }
            rows
        }
        CommandResult::Power(p) => {
            let mut rows = vec![svec(&[
                "gamma", "lambda", "critical_value", "pi_lr", "pi_wald", "pi_score", "pi_gradient", "ordering",
            ])];
            for l in &p.levels {
                let mut row = vec![num(l.gamma), num(p.lambda), num(l.critical_value)];
                row.extend(l.power.values().iter().map(|v| num(*v)));
                row.push(l.ordering.clone().unwrap_or_default());
                rows.push(row);
            }
            rows
        }
        CommandResult::Simulate(s) => {
            let mut header = svec(&[
                "gamma", "rate_lr", "rate_wald", "rate_score", "rate_gradient", "se_lr", "se_wald", "se_score",
                "se_gradient",
            ]);
            if s.analytic.is_some() {
                header.extend(svec(&["pi_lr", "pi_wald", "pi_score", "pi_gradient"]));
            }
            let mut rows = vec![header];
            for (i, l) in s.rejection_rates.iter().enumerate() {
                let mut row = vec![num(l.gamma)];
                row.extend(l.rates_percent.iter().map(|v| num(*v)));
                row.extend(l.mc_standard_errors.iter().map(|v| num(*v)));
                if let Some(a) = &s.analytic {
                    row.extend(a.levels[i].power_percent.iter().map(|v| num(*v)));
                }
                rows.push(row);
            }
            rows
        }
    }
}
