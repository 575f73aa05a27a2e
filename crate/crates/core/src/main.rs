use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, ValueEnum};

use ampsi::experiment::{
    emit_report, gnuplot_script, run_experiment, ExperimentConfig, LambdaMode, Measurements,
    ModelKind, ReportFormat, DEFAULT_SE_SAMPLES,
};
use ampsi::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Model {
    Gg,
    Bg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LambdaSourceArg {
    Se,
    Empirical,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Run AMP with side information on synthetic problems and compare its MSE with state evolution.
#[derive(Debug, Parser)]
#[command(name = "ampsi", version)]
#[command(group(ArgGroup::new("measurements").required(true).args(["m", "delta"])))]
#[command(group(ArgGroup::new("noise").required(true).args(["sigma_w", "sigma_w2"])))]
#[command(group(ArgGroup::new("si_noise").required(true).args(["sigma_si", "sigma_si2"])))]
#[command(group(ArgGroup::new("signal").args(["sigma_x", "sigma_x2"])))]
struct Cli {
    /// Signal / side-information model.
    #[arg(long, value_enum)]
    model: Model,
    /// Signal length.
    #[arg(long)]
    n: usize,
    /// Number of measurements.
    #[arg(long)]
    m: Option<usize>,
    /// Measurement rate; m = round(delta * n).
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// Measurement noise standard deviation.
    #[arg(long, allow_negative_numbers = true)]
    sigma_w: Option<f64>,
    /// Measurement noise variance.
    #[arg(long, allow_negative_numbers = true)]
    sigma_w2: Option<f64>,
    /// Side-information noise standard deviation.
    #[arg(long, allow_negative_numbers = true)]
    sigma_si: Option<f64>,
    /// Side-information noise variance.
    #[arg(long, allow_negative_numbers = true)]
    sigma_si2: Option<f64>,
    /// Signal standard deviation (gg only, default 1).
    #[arg(long, allow_negative_numbers = true)]
    sigma_x: Option<f64>,
    /// Signal variance (gg only, default 1).
    #[arg(long, allow_negative_numbers = true)]
    sigma_x2: Option<f64>,
    /// Probability of a nonzero entry (bg only).
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    iters: usize,
    #[arg(long)]
    seed: u64,
    /// Monte-Carlo samples per state-evolution step (bg only).
    #[arg(long, default_value_t = DEFAULT_SE_SAMPLES)]
    se_samples: usize,
    #[arg(long, value_enum, default_value = "se")]
    lambda_source: LambdaSourceArg,
    /// Worker threads for trials; defaults to all cores. Does not affect results.
    #[arg(long)]
    threads: Option<usize>,
    /// Report destination.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Also write a gnuplot script for the CSV report to this path.
    #[arg(long)]
    gnuplot: Option<PathBuf>,
}

fn square(v: Option<f64>) -> Option<f64> {
    v.map(|s| s * s)
}

fn config_from(cli: &Cli) -> ExperimentConfig {
    let measurements = match (cli.m, cli.delta) {
        (Some(m), _) => Measurements::Count(m),
        (None, Some(delta)) => Measurements::Rate(delta),
        (None, None) => unreachable!("clap enforces the measurements group"),
    };
    ExperimentConfig {
        model: match cli.model {
            Model::Gg => ModelKind::Gg,
            Model::Bg => ModelKind::Bg,
        },
        n: cli.n,
        measurements,
        sigma_w2: square(cli.sigma_w).or(cli.sigma_w2).unwrap_or_default(),
        sigma_si2: square(cli.sigma_si).or(cli.sigma_si2).unwrap_or_default(),
        sigma_x2: square(cli.sigma_x).or(cli.sigma_x2).unwrap_or(1.0),
        epsilon: cli.epsilon,
        trials: cli.trials,
        iters: cli.iters,
        seed: cli.seed,
        se_samples: cli.se_samples,
        lambda_source: match cli.lambda_source {
            LambdaSourceArg::Se => LambdaMode::Se,
            LambdaSourceArg::Empirical => LambdaMode::Empirical,
        },
        threads: cli.threads,
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    for (flag, value) in [("sigma_w", cli.sigma_w), ("sigma_si", cli.sigma_si), ("sigma_x", cli.sigma_x)] {
        if let Some(v) = value {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    field: flag,
                    reason: format!("standard deviation must be finite and >= 0, got {v}"),
                });
            }
        }
    }
    let config = config_from(cli);
    if cli.gnuplot.is_some() && matches!(cli.format, FormatArg::Json) {
        return Err(Error::Config("--gnuplot requires --format csv".into()));
    }
    let report = run_experiment(&config)?;
    let format = match cli.format {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Json => ReportFormat::Json,
    };
    emit_report(&report, format, &cli.out)?;
    if let Some(script) = &cli.gnuplot {
        let body = gnuplot_script(&cli.out.to_string_lossy(), &report.header);
        std::fs::write(script, body).map_err(|e| Error::Io {
            path: script.clone(),
            source: e,
        })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
