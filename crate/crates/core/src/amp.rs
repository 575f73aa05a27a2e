//! Separable AMP with side information.
//!
//! Starting from `x⁰ = 0` and `r⁰ = y`, one step maps iteration `t` to `t + 1`:
//!
//! ```text
//! x^{t+1}_i = η_t(s^t_i, x̃_i)
//! r^{t+1}   = y − A·x^{t+1} + r^t · (1/m)·Σ_i η_t'(s^t_i, x̃_i)
//! s^{t+1}   = x^{t+1} + Aᵀ·r^{t+1}
//! ```
//!
//! The Onsager coefficient `(1/m)·Σ η'` equals `(1/δ)·(1/n)·Σ η'`.

use crate::denoise::{DenoiserContext, ScalarDenoiser};
use crate::error::{Error, Result};
use crate::linear_model::ProblemInstance;

/// Where each iteration's `λ_t²` comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSource {
    /// `λ_t²` taken from a state-evolution schedule; entry `t` is used by `η_t`.
    Prescribed(Vec<f64>),
    /// `λ_t² ≈ ‖r^t‖²/m`, estimated from the current residual.
    EmpiricalResidual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpConfig {
    pub max_iters: usize,
    pub lambda_source: LambdaSource,
    /// Disabling the Onsager term turns AMP into plain iterative thresholding.
    pub onsager: bool,
    /// Stop once `|λ_t² − λ_{t−1}²| / λ_{t−1}²` drops below this value.
    pub early_stop: Option<f64>,
}

impl AmpConfig {
    pub const DEFAULT_MAX_ITERS: usize = 30;
    pub const DEFAULT_EARLY_STOP: f64 = 1e-8;

    pub fn prescribed(schedule: Vec<f64>, max_iters: usize) -> Self {
        Self {
            max_iters,
            lambda_source: LambdaSource::Prescribed(schedule),
            onsager: true,
            early_stop: None,
        }
    }

    pub fn empirical(max_iters: usize) -> Self {
        Self {
            max_iters,
            lambda_source: LambdaSource::EmpiricalResidual,
            onsager: true,
            early_stop: None,
        }
    }
}

/// Iterate `(x^t, r^t, s^t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    pub t: usize,
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    /// Effective observation `x^t + Aᵀ·r^t`.
    pub s: Vec<f64>,
    /// Empirical `‖r^t‖²/m` for every iterate reached so far.
    pub lambda2_track: Vec<f64>,
}

impl AmpState {
    /// `x⁰ = 0`, `r⁰ = y`, `s⁰ = Aᵀy`.
    pub fn init(instance: &ProblemInstance) -> Result<Self> {
        let x = vec![0.0; instance.n()];
        let r = instance.y.clone();
        let s = instance.a.adjoint(&r)?;
        let lambda2_track = vec![mean_square(&r)];
        Ok(Self {
            t: 0,
            x,
            r,
            s,
            lambda2_track,
        })
    }

    /// Advances to `t + 1` using `denoiser` as `η_t`.
    pub fn step<D: ScalarDenoiser + ?Sized>(
        &mut self,
        instance: &ProblemInstance,
        denoiser: &D,
        onsager: bool,
    ) -> Result<()> {
        let coeff = if onsager {
            onsager_coefficient(denoiser, &self.s, &instance.x_tilde, instance.m())
        } else {
            0.0
        };
        for ((xi, si), bi) in self.x.iter_mut().zip(&self.s).zip(&instance.x_tilde) {
            *xi = denoiser.eta(*si, *bi);
        }
        let next = self.t + 1;
        if !self.x.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                iteration: next,
                quantity: "estimate",
            });
        }

        let mut ax = vec![0.0; instance.m()];
        instance.a.forward_into(&self.x, &mut ax)?;
        for ((ri, yi), axi) in self.r.iter_mut().zip(&instance.y).zip(&ax) {
            *ri = yi - axi + coeff * *ri;
        }
        if !self.r.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                iteration: next,
                quantity: "residual",
            });
        }

        instance.a.adjoint_into(&self.r, &mut self.s)?;
        for (si, xi) in self.s.iter_mut().zip(&self.x) {
            *si += xi;
        }
        if !self.s.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                iteration: next,
                quantity: "effective observation",
            });
        }
        self.t = next;
        self.lambda2_track.push(mean_square(&self.r));
        Ok(())
    }
}

/// `(1/m)·Σ_i η'(s_i, x̃_i)`.
pub fn onsager_coefficient<D: ScalarDenoiser + ?Sized>(
    denoiser: &D,
    s: &[f64],
    x_tilde: &[f64],
    m: usize,
) -> f64 {
    let sum: f64 = s
        .iter()
        .zip(x_tilde)
        .map(|(a, b)| denoiser.eta_prime(*a, *b))
        .sum();
    sum / m as f64
}

/// Per-iteration trajectory of one AMP run. Index `t` runs over `0..=iterations`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpRun {
    pub final_state: AmpState,
    /// `(1/n)‖x^t − x‖²`.
    pub mse: Vec<f64>,
    /// `(1/n)‖s^t − x‖²`.
    pub eff_obs_loss: Vec<f64>,
    /// `(1/m)‖r^t − w‖²`.
    pub residual_loss: Vec<f64>,
    /// `λ_t²` handed to `η_t`, for `t < iterations`.
    pub lambda2_used: Vec<f64>,
}

impl AmpRun {
    pub fn iterations(&self) -> usize {
        self.final_state.t
    }
}

/// Runs AMP with MMSE denoisers for the instance's own prior.
pub fn run_amp(instance: &ProblemInstance, config: &AmpConfig) -> Result<AmpRun> {
    if config.max_iters == 0 {
        return Err(Error::invalid("max_iters", "must be at least 1"));
    }
    if let LambdaSource::Prescribed(schedule) = &config.lambda_source {
        if schedule.len() < config.max_iters {
            return Err(Error::Config(format!(
                "lambda schedule has {} entries but {} iterations were requested",
                schedule.len(),
                config.max_iters
            )));
        }
    }
    let prior = instance.config.prior;
    run_amp_with(
        instance,
        config.max_iters,
        config.onsager,
        config.early_stop,
        |t, state| {
            let lambda2 = match &config.lambda_source {
                LambdaSource::Prescribed(schedule) => schedule[t],
                LambdaSource::EmpiricalResidual => {
                    state.lambda2_track[t].max(f64::MIN_POSITIVE)
                }
            };
            Ok((DenoiserContext::new(lambda2, prior)?, lambda2))
        },
    )
}

/// Runs up to `max_iters` steps, asking `denoiser_for(t, state)` for `η_t` and its `λ_t²`.
pub fn run_amp_with<D, F>(
    instance: &ProblemInstance,
    max_iters: usize,
    onsager: bool,
    early_stop: Option<f64>,
    mut denoiser_for: F,
) -> Result<AmpRun>
where
    D: ScalarDenoiser,
    F: FnMut(usize, &AmpState) -> Result<(D, f64)>,
{
    let mut state = AmpState::init(instance)?;
    let mut run = AmpRun {
        final_state: state.clone(),
        mse: Vec::with_capacity(max_iters + 1),
        eff_obs_loss: Vec::with_capacity(max_iters + 1),
        residual_loss: Vec::with_capacity(max_iters + 1),
        lambda2_used: Vec::with_capacity(max_iters),
    };
    record(&mut run, &state, instance);
    for t in 0..max_iters {
        let (denoiser, lambda2) = denoiser_for(t, &state)?;
        if let (Some(tol), Some(&prev)) = (early_stop, run.lambda2_used.last()) {
            if (lambda2 - prev).abs() / prev < tol {
                break;
            }
        }
        state.step(instance, &denoiser, onsager)?;
        run.lambda2_used.push(lambda2);
        record(&mut run, &state, instance);
    }
    run.final_state = state;
    Ok(run)
}

fn record(run: &mut AmpRun, state: &AmpState, instance: &ProblemInstance) {
    run.mse.push(mean_square_diff(&state.x, &instance.x));
    run.eff_obs_loss.push(mean_square_diff(&state.s, &instance.x));
    run.residual_loss.push(mean_square_diff(&state.r, &instance.w));
}

fn mean_square(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64
}

fn mean_square_diff(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / u.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_model::{generate_instance, ModelConfig};
    use crate::prior::{GgPrior, Prior};

    struct Zero;
    impl ScalarDenoiser for Zero {
        fn eta(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn eta_prime(&self, _: f64, _: f64) -> f64 {
            0.0
        }
    }

    struct Identity;
    impl ScalarDenoiser for Identity {
        fn eta(&self, a: f64, _: f64) -> f64 {
            a
        }
        fn eta_prime(&self, _: f64, _: f64) -> f64 {
            1.0
        }
    }

    struct Explode;
    impl ScalarDenoiser for Explode {
        fn eta(&self, _: f64, _: f64) -> f64 {
            f64::NAN
        }
        fn eta_prime(&self, _: f64, _: f64) -> f64 {
            0.0
        }
    }

    fn instance(n: usize, m: usize, s2: f64, sigma_w2: f64, seed: u64) -> ProblemInstance {
        let prior = Prior::Gg(GgPrior::new(1.0, s2).unwrap());
        generate_instance(&ModelConfig::new(n, m, sigma_w2, prior, seed).unwrap()).unwrap()
    }

    #[test]
    fn init_starts_from_zero() {
        let inst = instance(20, 8, 0.04, 0.01, 1);
        let st = AmpState::init(&inst).unwrap();
        assert_eq!(st.t, 0);
        assert!(st.x.iter().all(|v| *v == 0.0));
        assert_eq!(st.r, inst.y);
        assert_eq!(st.s, inst.a.adjoint(&inst.y).unwrap());
    }

    #[test]
    fn zero_denoiser_is_a_fixed_point() {
        let inst = instance(30, 12, 0.04, 0.01, 2);
        let mut st = AmpState::init(&inst).unwrap();
        for _ in 0..4 {
            st.step(&inst, &Zero, true).unwrap();
            assert!(st.x.iter().all(|v| *v == 0.0));
            assert_eq!(st.r, inst.y);
        }
        assert_eq!(st.t, 4);
    }

    #[test]
    fn identity_denoiser_onsager_coefficient_is_inverse_rate() {
        let inst = instance(40, 10, 0.04, 0.01, 3);
        let st = AmpState::init(&inst).unwrap();
        let c = onsager_coefficient(&Identity, &st.s, &inst.x_tilde, inst.m());
        assert!((c - 1.0 / inst.delta()).abs() < 1e-15);
    }

    #[test]
    fn nan_is_reported_as_divergence() {
        let inst = instance(10, 5, 0.04, 0.01, 4);
        let mut st = AmpState::init(&inst).unwrap();
        match st.step(&inst, &Explode, true) {
            Err(Error::Divergence { iteration, .. }) => assert_eq!(iteration, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn perfect_side_information_recovers_in_one_step() {
        let inst = instance(200, 60, 0.0, 0.0, 5);
        let cfg = AmpConfig::prescribed(vec![1.0; 3], 3);
        let run = run_amp(&inst, &cfg).unwrap();
        assert!(run.mse[1] < 1e-28, "mse after one step {}", run.mse[1]);
    }

    #[test]
    fn short_schedule_is_rejected() {
        let inst = instance(10, 5, 0.04, 0.01, 6);
        let cfg = AmpConfig::prescribed(vec![1.0; 2], 3);
        assert!(matches!(run_amp(&inst, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn early_stop_on_flat_schedule() {
        let inst = instance(50, 20, 0.04, 0.01, 7);
        let mut cfg = AmpConfig::prescribed(vec![2.0, 1.0, 1.0, 1.0, 1.0], 5);
        cfg.early_stop = Some(AmpConfig::DEFAULT_EARLY_STOP);
        let run = run_amp(&inst, &cfg).unwrap();
        assert_eq!(run.iterations(), 2);
        assert_eq!(run.mse.len(), 3);
    }

    #[test]
    fn runs_are_deterministic() {
        let inst = instance(100, 30, 0.04, 0.01, 8);
        let cfg = AmpConfig::empirical(6);
        let a = run_amp(&inst, &cfg).unwrap();
        let b = run_amp(&inst, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mse.len(), 7);
        assert_eq!(a.lambda2_used.len(), 6);
    }
}
