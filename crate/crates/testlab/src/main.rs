use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use dm_testlab::config::{Format, RunConfig};
use dm_testlab::report::Report;
use dm_testlab::run::{resolve, run, Overrides, THREADS_ENV};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

/// Fit dispersion-model regressions, run likelihood ratio / Wald / score /
/// gradient tests, evaluate local power expansions and Monte Carlo studies.
#[derive(Debug, Parser)]
#[command(name = "dm-testlab", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Report destination (default: config output.path, else stdout).
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Master seed for simulations and generated designs.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for simulations (0 = all cores).
    #[arg(long, value_name = "N", env = THREADS_ENV)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        seed: cli.seed,
        output: cli.output.clone(),
        format: cli.format.map(|f| match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }),
        threads: cli.threads,
    };
    let (report, format, dest) = match RunConfig::load(&cli.config) {
        Ok(cfg) => {
            let base = cli.config.parent().map(|p| p.to_path_buf());
            let cfg = resolve(cfg, &overrides, base.as_deref());
            let format = cfg.output.format;
            let dest = cfg.output.path.clone();
            (run(cfg), format, dest)
        }
        Err(e) => (
            Report::failure(None, Vec::new(), &e),
            overrides.format.unwrap_or_default(),
            overrides.output.clone(),
        ),
    };
    if let Some(err) = &report.error {
        eprintln!("dm-testlab: {}", err.message);
    }
    for w in &report.warnings {
        eprintln!("dm-testlab: warning: {w}");
    }
    let code = report.exit_code();
    if let Err(e) = report.write(format, dest.as_deref()) {
        eprintln!("dm-testlab: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(code as u8)
}
