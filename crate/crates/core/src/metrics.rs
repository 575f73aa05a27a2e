//! Coordinate-averaged losses and their state-evolution predictions.
//!
//! For a scalar loss `φ`, `φ_m(a, b) = (1/m)·Σ φ(a_i, b_i)`; for `ψ`,
//! `ψ_n(x, y, z) = (1/n)·Σ ψ(x_i, y_i, z_i)`. Along an AMP run these converge to
//! state-evolution quantities:
//!
//! * `(1/n)‖s^t − x‖² → λ_t²`
//! * `(1/n)‖x^t − x‖² → δ·(λ_t² − σ_w²)`
//! * `(1/m)‖r^t − w‖² → λ_t² − σ_w²`

use serde::Serialize;

use crate::amp::AmpRun;
use crate::error::{Error, Result};
use crate::state_evolution::SeTrace;

/// Denominator floor for [`relative_gap`].
pub const GAP_FLOOR: f64 = 1e-12;

/// `(1/m)·Σ φ(a_i, b_i)`.
pub fn averaged_loss2<F>(phi: F, a: &[f64], b: &[f64]) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "averaged loss arguments",
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::invalid("vectors", "averaged loss over empty vectors"));
    }
    Ok(a.iter().zip(b).map(|(x, y)| phi(*x, *y)).sum::<f64>() / a.len() as f64)
}

/// `(1/n)·Σ ψ(x_i, y_i, z_i)`.
pub fn averaged_loss3<F>(psi: F, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64>
where
    F: Fn(f64, f64, f64) -> f64,
{
    for other in [y.len(), z.len()] {
        if other != x.len() {
            return Err(Error::DimensionMismatch {
                context: "averaged loss arguments",
                expected: x.len(),
                found: other,
            });
        }
    }
    if x.is_empty() {
        return Err(Error::invalid("vectors", "averaged loss over empty vectors"));
    }
    Ok(x.iter()
        .zip(y)
        .zip(z)
        .map(|((a, b), c)| psi(*a, *b, *c))
        .sum::<f64>()
        / x.len() as f64)
}

/// `|empirical − predicted| / max(|predicted|, 1e-12)`.
pub fn relative_gap(empirical: f64, predicted: f64) -> f64 {
    (empirical - predicted).abs() / predicted.abs().max(GAP_FLOOR)
}

/// Empirical losses at iteration `t` next to their predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pl2Row {
    pub t: usize,
    /// `(1/n)‖s^t − x‖²`.
    pub eff_obs_loss: f64,
    /// `(1/n)‖x^t − x‖²`.
    pub estimate_loss: f64,
    /// `(1/m)‖r^t − w‖²`.
    pub residual_loss: f64,
    /// `λ_t²`.
    pub se_lambda2: f64,
    /// `δ·(λ_t² − σ_w²)`.
    pub se_estimate_mse: f64,
    /// `λ_t² − σ_w²`.
    pub se_residual: f64,
}

impl Pl2Row {
    pub fn eff_obs_gap(&self) -> f64 {
        relative_gap(self.eff_obs_loss, self.se_lambda2)
    }

    pub fn estimate_gap(&self) -> f64 {
        relative_gap(self.estimate_loss, self.se_estimate_mse)
    }

    pub fn residual_gap(&self) -> f64 {
        relative_gap(self.residual_loss, self.se_residual)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pl2Report {
    pub rows: Vec<Pl2Row>,
}

impl Pl2Report {
    /// Largest estimate-loss gap over rows `t ≥ 1` (row 0 is `x⁰ = 0`).
    pub fn max_estimate_gap(&self) -> f64 {
        self.rows
            .iter()
            .skip(1)
            .map(Pl2Row::estimate_gap)
            .fold(0.0, f64::max)
    }
}

/// Pairs the losses recorded in `run` with `trace`, one row per iteration present in both.
pub fn corollary_checks(run: &AmpRun, trace: &SeTrace) -> Result<Pl2Report> {
    let rows_in_run = run.mse.len();
    if trace.lambda2.len() < rows_in_run {
        return Err(Error::Config(format!(
            "state-evolution trace has {} entries, run has {} iterates",
            trace.lambda2.len(),
            rows_in_run
        )));
    }
    let rows = (0..rows_in_run)
        .map(|t| {
            let lambda2 = trace.lambda2[t];
            Pl2Row {
                t,
                eff_obs_loss: run.eff_obs_loss[t],
                estimate_loss: run.mse[t],
                residual_loss: run.residual_loss[t],
                se_lambda2: lambda2,
                se_estimate_mse: trace.estimate_mse(t),
                se_residual: lambda2 - trace.sigma_w2,
            }
        })
        .collect();
    Ok(Pl2Report { rows })
}
