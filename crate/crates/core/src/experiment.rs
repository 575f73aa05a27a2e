//! Multi-trial experiments comparing empirical AMP error with the state-evolution prediction.
//!
//! Trial `k` uses instance seed `seed + k` (wrapping). The Monte-Carlo state evolution, when
//! needed, is seeded with `seed ^ SE_SEED_SALT`. Results are aggregated in trial order, so a
//! report is a pure function of its [`ExperimentConfig`] regardless of the thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::amp::{run_amp, AmpConfig};
use crate::error::{Error, Result};
use crate::linear_model::{generate_instance, ModelConfig, MAX_MATRIX_ENTRIES};
use crate::metrics::relative_gap;
use crate::prior::{BgPrior, GgPrior, Prior};
use crate::state_evolution::{run_se, SeBackend, SeTrace};

/// XORed into the experiment seed to seed the Monte-Carlo state evolution.
pub const SE_SEED_SALT: u64 = 0x5EED_0F5E_A3B1_C2D4;

/// Default Monte-Carlo sample count for state evolution.
pub const DEFAULT_SE_SAMPLES: usize = 1_000_000;

/// CSV column names, in order.
pub const CSV_COLUMNS: [&str; 8] = [
    "t",
    "empirical_mse_mean",
    "empirical_mse_std",
    "se_lambda2",
    "se_predicted_mse",
    "eff_obs_loss_mean",
    "residual_loss_mean",
    "rel_gap",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gg,
    Bg,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Gg => "gg",
            ModelKind::Bg => "bg",
        }
    }
}

/// Measurement count, given directly or as a rate `δ` with `m = round(δ·n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measurements {
    Count(usize),
    Rate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaMode {
    /// `λ_t²` from state evolution.
    Se,
    /// `λ_t²` estimated as `‖r^t‖²/m`.
    Empirical,
}

impl LambdaMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            LambdaMode::Se => "se",
            LambdaMode::Empirical => "empirical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub n: usize,
    pub measurements: Measurements,
    /// Measurement noise variance `σ_w²`.
    pub sigma_w2: f64,
    /// Side-information noise variance `σ²`.
    pub sigma_si2: f64,
    /// Signal variance for the GG model.
    pub sigma_x2: f64,
    /// Nonzero probability for the BG model.
    pub epsilon: Option<f64>,
    pub trials: usize,
    pub iters: usize,
    pub seed: u64,
    pub se_samples: usize,
    pub lambda_source: LambdaMode,
    /// Worker threads for running trials; `None` uses all available cores.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// GG experiment with `σ_x² = 1`, ten trials and thirty iterations.
    pub fn gg(n: usize, measurements: Measurements, sigma_w: f64, sigma_si: f64) -> Self {
        Self {
            model: ModelKind::Gg,
            n,
            measurements,
            sigma_w2: sigma_w * sigma_w,
            sigma_si2: sigma_si * sigma_si,
            sigma_x2: 1.0,
            epsilon: None,
            trials: 10,
            iters: AmpConfig::DEFAULT_MAX_ITERS,
            seed: 0,
            se_samples: DEFAULT_SE_SAMPLES,
            lambda_source: LambdaMode::Se,
            threads: None,
        }
    }

    /// BG experiment with ten trials and thirty iterations.
    pub fn bg(n: usize, measurements: Measurements, sigma_w: f64, sigma_si: f64, epsilon: f64) -> Self {
        Self {
            model: ModelKind::Bg,
            epsilon: Some(epsilon),
            ..Self::gg(n, measurements, sigma_w, sigma_si)
        }
    }

    /// `m` after resolving a rate.
    pub fn m(&self) -> usize {
        match self.measurements {
            Measurements::Count(m) => m,
            Measurements::Rate(delta) => (delta * self.n as f64).round() as usize,
        }
    }

    pub fn prior(&self) -> Result<Prior> {
        match self.model {
            ModelKind::Gg => {
                if self.epsilon.is_some() {
                    return Err(Error::invalid("epsilon", "only applies to the bg model"));
                }
                GgPrior::new(self.sigma_x2, self.sigma_si2)
                    .map(Prior::Gg)
                    .map_err(rename_field)
            }
            ModelKind::Bg => {
                let eps = self
                    .epsilon
                    .ok_or_else(|| Error::invalid("epsilon", "required for the bg model"))?;
                BgPrior::new(eps, self.sigma_si2)
                    .map(Prior::Bg)
                    .map_err(rename_field)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if let Measurements::Rate(delta) = self.measurements {
            if !(delta.is_finite() && delta > 0.0) {
                return Err(Error::invalid("delta", format!("must be finite and > 0, got {delta}")));
            }
        }
        let m = self.m();
        if m == 0 {
            return Err(Error::invalid("m", "must be at least 1 (check delta * n)"));
        }
        match self.n.checked_mul(m) {
            Some(e) if e <= MAX_MATRIX_ENTRIES => {}
            _ => {
                return Err(Error::invalid(
                    "m",
                    format!("{m} x {} matrix exceeds the limit of {MAX_MATRIX_ENTRIES} entries", self.n),
                ))
            }
        }
        if !(self.sigma_w2.is_finite() && self.sigma_w2 >= 0.0) {
            return Err(Error::invalid("sigma_w", format!("must be finite and >= 0, got variance {}", self.sigma_w2)));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        if self.iters == 0 {
            return Err(Error::invalid("iters", "must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads", "must be at least 1"));
        }
        self.prior()?;
        if self.model == ModelKind::Bg && self.se_samples < crate::state_evolution::MIN_MC_SAMPLES {
            return Err(Error::invalid(
                "se_samples",
                format!("need at least {}", crate::state_evolution::MIN_MC_SAMPLES),
            ));
        }
        Ok(())
    }

    pub fn se_seed(&self) -> u64 {
        self.seed ^ SE_SEED_SALT
    }

    pub fn trial_seeds(&self) -> Vec<u64> {
        (0..self.trials as u64).map(|k| self.seed.wrapping_add(k)).collect()
    }

    fn se_backend(&self) -> SeBackend {
        match self.model {
            ModelKind::Gg => SeBackend::ClosedForm,
            ModelKind::Bg => SeBackend::MonteCarlo {
                samples: self.se_samples,
                seed: self.se_seed(),
                common_random_numbers: true,
            },
        }
    }
}

// Prior constructors name their own fields; report the flag-level names instead.
fn rename_field(e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::InvalidParameter {
            field: match field {
                "sigma_si2" => "sigma_si",
                "sigma_x2" => "sigma_x",
                other => other,
            },
            reason,
        },
        other => other,
    }
}

/// Echo of everything needed to rerun an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportHeader {
    pub version: String,
    pub model: ModelKind,
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    pub sigma_w2: f64,
    pub sigma_si2: f64,
    pub sigma_x2: Option<f64>,
    pub epsilon: Option<f64>,
    pub trials: usize,
    pub iters: usize,
    pub seed: u64,
    pub se_backend: SeBackend,
    pub lambda_source: LambdaMode,
    pub trial_seeds: Vec<u64>,
}

/// One report row; statistics are over all trials at iteration `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportRow {
    pub t: usize,
    /// Mean of `(1/n)‖x^t − x‖²`.
    pub empirical_mse_mean: f64,
    /// Sample standard deviation of `(1/n)‖x^t − x‖²` (zero for a single trial).
    pub empirical_mse_std: f64,
    pub se_lambda2: f64,
    /// `δ·(λ_t² − σ_w²)`.
    pub se_predicted_mse: f64,
    /// Mean of `(1/n)‖s^t − x‖²`.
    pub eff_obs_loss_mean: f64,
    /// Mean of `(1/m)‖r^t − w‖²`.
    pub residual_loss_mean: f64,
    pub rel_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub header: ReportHeader,
    pub rows: Vec<ReportRow>,
    /// The state-evolution trace the rows were compared against.
    #[serde(skip)]
    pub trace: SeTrace,
    /// `(1/n)‖x^t − x‖²` per trial, in trial order.
    #[serde(skip)]
    pub trial_mse: Vec<Vec<f64>>,
}

impl ExperimentReport {
    /// Largest `rel_gap` over rows `1..=t_max`.
    pub fn max_rel_gap(&self, t_max: usize) -> f64 {
        self.rows
            .iter()
            .skip(1)
            .take(t_max)
            .map(|r| r.rel_gap)
            .fold(0.0, f64::max)
    }
}

struct TrialSeries {
    mse: Vec<f64>,
    eff_obs_loss: Vec<f64>,
    residual_loss: Vec<f64>,
}

/// Runs every trial of `config` and aggregates the per-iteration statistics.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let prior = config.prior()?;
    let (n, m) = (config.n, config.m());
    let delta = m as f64 / n as f64;
    let trace = run_se(&prior, delta, config.sigma_w2, config.iters, config.se_backend())?;
    let amp_config = match config.lambda_source {
        LambdaMode::Se => AmpConfig::prescribed(trace.lambda2[..config.iters].to_vec(), config.iters),
        LambdaMode::Empirical => AmpConfig::empirical(config.iters),
    };

    let seeds = config.trial_seeds();
    let run_trial = |seed: &u64| -> Result<TrialSeries> {
        let instance = generate_instance(&ModelConfig::new(n, m, config.sigma_w2, prior, *seed)?)?;
        let run = run_amp(&instance, &amp_config)?;
        Ok(TrialSeries {
            mse: run.mse,
            eff_obs_loss: run.eff_obs_loss,
            residual_loss: run.residual_loss,
        })
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(threads) = config.threads {
        builder = builder.num_threads(threads);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Resource(format!("cannot start worker threads: {e}")))?;
    let trials: Vec<TrialSeries> = pool.install(|| {
        seeds
            .par_iter()
            .map(run_trial)
            .collect::<Result<Vec<_>>>()
    })?;

    let rows = (0..=config.iters)
        .map(|t| {
            let (mse_mean, mse_std) = mean_std(trials.iter().map(|s| s.mse[t]));
            let (eff_mean, _) = mean_std(trials.iter().map(|s| s.eff_obs_loss[t]));
            let (res_mean, _) = mean_std(trials.iter().map(|s| s.residual_loss[t]));
            let predicted = trace.estimate_mse(t);
            ReportRow {
                t,
                empirical_mse_mean: mse_mean,
                empirical_mse_std: mse_std,
                se_lambda2: trace.lambda2[t],
                se_predicted_mse: predicted,
                eff_obs_loss_mean: eff_mean,
                residual_loss_mean: res_mean,
                rel_gap: relative_gap(mse_mean, predicted),
            }
        })
        .collect();

    let header = ReportHeader {
        version: env!("CARGO_PKG_VERSION").to_string(),
        model: config.model,
        n,
        m,
        delta,
        sigma_w2: config.sigma_w2,
        sigma_si2: config.sigma_si2,
        sigma_x2: (config.model == ModelKind::Gg).then_some(config.sigma_x2),
        epsilon: config.epsilon,
        trials: config.trials,
        iters: config.iters,
        seed: config.seed,
        se_backend: trace.backend,
        lambda_source: config.lambda_source,
        trial_seeds: seeds,
    };
    Ok(ExperimentReport {
        header,
        rows,
        trace,
        trial_mse: trials.into_iter().map(|s| s.mse).collect(),
    })
}

/// Mean and sample standard deviation, summed in iteration order.
fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let count = values.clone().count();
    let mean = values.clone().sum::<f64>() / count as f64;
    if count < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1) as f64;
    (mean, var.sqrt())
}

/// 17 significant digits, which round-trips every `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// The command line that reproduces `header`.
pub fn rerun_command(header: &ReportHeader) -> String {
    let mut cmd = format!(
        "ampsi --model {} --n {} --m {} --sigma-w2 {} --sigma-si2 {}",
        header.model.as_str(),
        header.n,
        header.m,
        header.sigma_w2,
        header.sigma_si2
    );
    if let Some(sx2) = header.sigma_x2 {
        let _ = write!(cmd, " --sigma-x2 {sx2}");
    }
    if let Some(eps) = header.epsilon {
        let _ = write!(cmd, " --epsilon {eps}");
    }
    let _ = write!(
        cmd,
        " --trials {} --iters {} --seed {}",
        header.trials, header.iters, header.seed
    );
    if let SeBackend::MonteCarlo { samples, .. } = header.se_backend {
        let _ = write!(cmd, " --se-samples {samples}");
    }
    let _ = write!(cmd, " --lambda-source {}", header.lambda_source.as_str());
    cmd
}

/// CSV rendering: `#` comment lines echoing the configuration, a header row, one row per `t`.
pub fn to_csv(report: &ExperimentReport) -> String {
    let h = &report.header;
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line("# ampsi experiment report".into());
    line(format!("# version={}", h.version));
    line(format!("# model={}", h.model.as_str()));
    line(format!("# n={}", h.n));
    line(format!("# m={}", h.m));
    line(format!("# delta={}", fmt_f64(h.delta)));
    line(format!("# sigma_w2={}", fmt_f64(h.sigma_w2)));
    line(format!("# sigma_si2={}", fmt_f64(h.sigma_si2)));
    if let Some(sx2) = h.sigma_x2 {
        line(format!("# sigma_x2={}", fmt_f64(sx2)));
    }
    if let Some(eps) = h.epsilon {
        line(format!("# epsilon={}", fmt_f64(eps)));
    }
    line(format!("# trials={}", h.trials));
    line(format!("# iters={}", h.iters));
    line(format!("# seed={}", h.seed));
    match h.se_backend {
        SeBackend::ClosedForm => line("# se_backend=closed-form".into()),
        SeBackend::MonteCarlo {
            samples,
            seed,
            common_random_numbers,
        } => {
            line("# se_backend=monte-carlo".into());
            line(format!("# se_samples={samples}"));
            line(format!("# se_seed={seed}"));
            line(format!("# se_common_draws={common_random_numbers}"));
        }
    }
    line(format!("# lambda_source={}", h.lambda_source.as_str()));
    line(format!(
        "# trial_seeds={}",
        h.trial_seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(" ")
    ));
    line(format!("# rerun: {}", rerun_command(h)));
    line(CSV_COLUMNS.join(","));
    for r in &report.rows {
        line(format!(
            "{},{},{},{},{},{},{},{}",
            r.t,
            fmt_f64(r.empirical_mse_mean),
            fmt_f64(r.empirical_mse_std),
            fmt_f64(r.se_lambda2),
            fmt_f64(r.se_predicted_mse),
            fmt_f64(r.eff_obs_loss_mean),
            fmt_f64(r.residual_loss_mean),
            fmt_f64(r.rel_gap),
        ));
    }
    out
}

pub fn to_json(report: &ExperimentReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// Writes `report` to `path` in `format`.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    let body = match format {
        ReportFormat::Csv => to_csv(report),
        ReportFormat::Json => to_json(report)?,
    };
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// A gnuplot script plotting empirical MSE against the state-evolution prediction from `csv_path`.
pub fn gnuplot_script(csv_path: &str, header: &ReportHeader) -> String {
    format!(
        "set datafile separator ','\n\
         set datafile commentschars '#'\n\
         set key autotitle columnhead\n\
         set logscale y\n\
         set xlabel 'iteration t'\n\
         set ylabel 'MSE'\n\
         set title '{} model, n={}, m={}, {} trials'\n\
         plot '{csv}' using 1:2:3 with yerrorbars title 'empirical MSE', \\\n     \
         '{csv}' using 1:5 with lines title 'SE prediction'\n",
        header.model.as_str(),
        header.n,
        header.m,
        header.trials,
        csv = csv_path.replace('\'', "''"),
    )
}
