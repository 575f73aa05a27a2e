//! State evolution: the scalar recursion for the effective noise level `λ_t²`.
//!
//! `λ_0² = σ_w² + E[X²]/δ` and
//! `λ_t² = σ_w² + (1/δ)·E[(η_{t−1}(X + λ_{t−1}Z, X̃) − X)²]`.
//!
//! The GG expectation has a closed form. Every other prior goes through a seeded
//! Monte-Carlo estimate of the same expectation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::denoise::DenoiserContext;
use crate::error::{Error, Result};
use crate::prior::{GgPrior, Prior};

/// Smallest sample count accepted by [`mc_se_step`].
pub const MIN_MC_SAMPLES: usize = 1_000;

/// How the expectation in each step is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "backend", rename_all = "kebab-case")]
pub enum SeBackend {
    /// Exact GG recursion.
    ClosedForm,
    /// Sample average over `samples` draws of `(X, X̃, Z)`.
    MonteCarlo {
        samples: usize,
        seed: u64,
        /// Reuse the same draws at every step instead of fresh ones.
        common_random_numbers: bool,
    },
}

/// A Monte-Carlo estimate of `λ_t²` and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// `λ_0² = σ_w² + E[X²]/δ`.
pub fn se_init(prior: &Prior, delta: f64, sigma_w2: f64) -> f64 {
    sigma_w2 + prior.second_moment() / delta
}

/// One exact GG step: `σ_w² + (1/δ)·σ_x²σ²λ² / (σ_x²(σ² + λ²) + σ²λ²)`.
pub fn gg_se_step(lambda2_prev: f64, prior: &GgPrior, delta: f64, sigma_w2: f64) -> f64 {
    let (sx2, s2) = (prior.sigma_x2(), prior.sigma_si2());
    let mmse = sx2 * s2 * lambda2_prev / (sx2 * (s2 + lambda2_prev) + s2 * lambda2_prev);
    sigma_w2 + mmse / delta
}

/// One Monte-Carlo step with fresh draws from `rng`.
pub fn mc_se_step<R: Rng + ?Sized>(
    lambda2_prev: f64,
    prior: &Prior,
    delta: f64,
    sigma_w2: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    check_samples(n_samples)?;
    let ctx = DenoiserContext::new(lambda2_prev, *prior)?;
    let lambda = lambda2_prev.sqrt();
    let mut acc = Welford::default();
    for _ in 0..n_samples {
        let (x, xt) = prior.sample_pair(rng);
        let z: f64 = rng.sample(StandardNormal);
        let err = ctx.denoise(x + lambda * z, xt) - x;
        acc.push(err * err);
    }
    Ok(acc.estimate(delta, sigma_w2))
}

/// Fixed draws `(x, x̃, z)` reused across steps.
struct CommonDraws {
    x: Vec<f64>,
    x_tilde: Vec<f64>,
    z: Vec<f64>,
}

impl CommonDraws {
    fn sample<R: Rng + ?Sized>(prior: &Prior, n: usize, rng: &mut R) -> Self {
        let mut x = Vec::with_capacity(n);
        let mut x_tilde = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        for _ in 0..n {
            let (xi, ti) = prior.sample_pair(rng);
            x.push(xi);
            x_tilde.push(ti);
            z.push(rng.sample(StandardNormal));
        }
        Self { x, x_tilde, z }
    }

    fn step(&self, lambda2_prev: f64, prior: &Prior, delta: f64, sigma_w2: f64) -> Result<McEstimate> {
        let ctx = DenoiserContext::new(lambda2_prev, *prior)?;
        let lambda = lambda2_prev.sqrt();
        let mut acc = Welford::default();
        for ((x, xt), z) in self.x.iter().zip(&self.x_tilde).zip(&self.z) {
            let err = ctx.denoise(x + lambda * z, *xt) - x;
            acc.push(err * err);
        }
        Ok(acc.estimate(delta, sigma_w2))
    }
}

#[derive(Default)]
struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.count += 1;
        let d = v - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (v - self.mean);
    }

    fn estimate(&self, delta: f64, sigma_w2: f64) -> McEstimate {
        let n = self.count as f64;
        let var = if self.count > 1 { self.m2 / (n - 1.0) } else { 0.0 };
        McEstimate {
            value: sigma_w2 + self.mean / delta,
            std_error: (var / n).sqrt() / delta,
        }
    }
}

fn check_samples(n: usize) -> Result<()> {
    if n < MIN_MC_SAMPLES {
        return Err(Error::invalid(
            "se_samples",
            format!("need at least {MIN_MC_SAMPLES} Monte-Carlo samples, got {n}"),
        ));
    }
    Ok(())
}

/// A state-evolution trace `λ_0², …, λ_T²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeTrace {
    pub lambda2: Vec<f64>,
    /// Monte-Carlo standard error of each `λ_t²` (zero for exact entries).
    pub std_error: Vec<f64>,
    /// `δ·(λ_{t+1}² − σ_w²)`, the predicted MSE of `x^{t+1}`, for `t < T`.
    pub predicted_mse: Vec<f64>,
    pub delta: f64,
    pub sigma_w2: f64,
    pub prior: Prior,
    pub backend: SeBackend,
}

impl SeTrace {
    /// Number of recursion steps `T`.
    pub fn steps(&self) -> usize {
        self.lambda2.len() - 1
    }

    /// Predicted `(1/n)‖x^t − x‖² = δ·(λ_t² − σ_w²)`. At `t = 0` this is `E[X²]`.
    pub fn estimate_mse(&self, t: usize) -> f64 {
        self.delta * (self.lambda2[t] - self.sigma_w2)
    }

    /// First `t ≥ 1` with `|λ_t² − λ_{t−1}²| / λ_{t−1}² < tol`.
    pub fn converged_at(&self, tol: f64) -> Option<usize> {
        (1..self.lambda2.len()).find(|&t| {
            let prev = self.lambda2[t - 1];
            (self.lambda2[t] - prev).abs() / prev < tol
        })
    }

    /// `λ_t² ≥ σ_w²` for every `t`.
    pub fn respects_noise_floor(&self) -> bool {
        self.lambda2.iter().all(|&l| l >= self.sigma_w2)
    }

    /// `λ_t² ≤ λ_{t−1}² + slack·(se_t + se_{t−1})` for every `t`.
    pub fn is_non_increasing(&self, slack: f64) -> bool {
        self.lambda2.windows(2).zip(self.std_error.windows(2)).all(|(l, se)| {
            l[1] <= l[0] + slack * (se[0] + se[1])
        })
    }
}

/// Runs `steps` iterations of the recursion.
pub fn run_se(
    prior: &Prior,
    delta: f64,
    sigma_w2: f64,
    steps: usize,
    backend: SeBackend,
) -> Result<SeTrace> {
    if steps == 0 {
        return Err(Error::invalid("steps", "state evolution needs at least one step"));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid("delta", format!("must be finite and > 0, got {delta}")));
    }
    if !(sigma_w2.is_finite() && sigma_w2 >= 0.0) {
        return Err(Error::invalid("sigma_w2", format!("must be finite and >= 0, got {sigma_w2}")));
    }
    let mut lambda2 = Vec::with_capacity(steps + 1);
    let mut std_error = Vec::with_capacity(steps + 1);
    lambda2.push(se_init(prior, delta, sigma_w2));
    std_error.push(0.0);

    match backend {
        SeBackend::ClosedForm => {
            let Prior::Gg(gg) = prior else {
                return Err(Error::Config(format!(
                    "closed-form state evolution is only available for the GG model, not {}",
                    prior.tag()
                )));
            };
            for t in 0..steps {
                lambda2.push(gg_se_step(lambda2[t], gg, delta, sigma_w2));
                std_error.push(0.0);
            }
        }
        SeBackend::MonteCarlo {
            samples,
            seed,
            common_random_numbers,
        } => {
            check_samples(samples)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let common = common_random_numbers.then(|| CommonDraws::sample(prior, samples, &mut rng));
            for t in 0..steps {
                let est = match &common {
                    Some(draws) => draws.step(lambda2[t], prior, delta, sigma_w2)?,
                    None => mc_se_step(lambda2[t], prior, delta, sigma_w2, samples, &mut rng)?,
                };
                lambda2.push(est.value);
                std_error.push(est.std_error);
            }
        }
    }

    let predicted_mse = lambda2[1..]
        .iter()
        .map(|l| delta * (l - sigma_w2))
        .collect();
    Ok(SeTrace {
        lambda2,
        std_error,
        predicted_mse,
        delta,
        sigma_w2,
        prior: *prior,
        backend,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::BgPrior;

    fn gg(sx2: f64, s2: f64) -> GgPrior {
        GgPrior::new(sx2, s2).unwrap()
    }

    #[test]
    fn initialization_values() {
        let g = Prior::Gg(gg(1.0, 0.04));
        assert!((se_init(&g, 0.3, 0.01) - 3.343_333_333_333_333).abs() < 1e-12);
        let b = Prior::Bg(BgPrior::new(0.2, 0.04).unwrap());
        assert!((se_init(&b, 0.3, 0.01) - 0.676_666_666_666_666_6).abs() < 1e-12);
    }

    #[test]
    fn gg_step_reference_value() {
        let l1 = gg_se_step(3.34333, &gg(1.0, 0.04), 0.3, 0.01);
        let hand = 0.01 + (0.04 * 3.34333) / (1.0 * (0.04 + 3.34333) + 0.04 * 3.34333) / 0.3;
        assert!((l1 - hand).abs() < 1e-15);
        assert!((l1 - 0.136748).abs() < 1e-6, "{l1}");
    }

    #[test]
    fn perfect_si_collapses_to_noise_floor() {
        assert_eq!(gg_se_step(2.0, &gg(1.0, 0.0), 0.3, 0.01), 0.01);
    }

    #[test]
    fn trace_bookkeeping() {
        let p = Prior::Gg(gg(1.0, 0.04));
        let tr = run_se(&p, 0.3, 0.01, 1, SeBackend::ClosedForm).unwrap();
        assert_eq!(tr.lambda2.len(), 2);
        assert_eq!(tr.predicted_mse.len(), 1);
        assert_eq!(tr.predicted_mse[0], 0.3 * (tr.lambda2[1] - 0.01));
        assert!((tr.estimate_mse(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gg_reference_trace_is_monotone() {
        let p = Prior::Gg(gg(1.0, 0.04));
        let tr = run_se(&p, 0.3, 0.01, 20, SeBackend::ClosedForm).unwrap();
        assert!((tr.lambda2[0] - 3.34333).abs() < 1e-5);
        assert!((tr.lambda2[1] - 0.136748).abs() < 1e-6);
        assert!(tr.respects_noise_floor());
        assert!(tr.is_non_increasing(0.0));
        assert!(tr.converged_at(1e-8).is_some());
    }

    #[test]
    fn closed_form_rejects_bg() {
        let p = Prior::Bg(BgPrior::new(0.2, 0.04).unwrap());
        assert!(matches!(
            run_se(&p, 0.3, 0.01, 3, SeBackend::ClosedForm),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn too_few_samples_rejected() {
        let p = Prior::Gg(gg(1.0, 0.04));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(mc_se_step(1.0, &p, 0.3, 0.01, 999, &mut rng).is_err());
    }

    #[test]
    fn gg_step_is_increasing_in_lambda() {
        let p = gg(1.0, 0.04);
        let grid: Vec<f64> = (1..400).map(|k| k as f64 * 0.01).collect();
        for w in grid.windows(2) {
            assert!(gg_se_step(w[1], &p, 0.3, 0.01) > gg_se_step(w[0], &p, 0.3, 0.01));
        }
    }

    #[test]
    fn mc_tracks_closed_form_for_gg() {
        let g = gg(1.0, 0.04);
        let p = Prior::Gg(g);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for &l in &[3.34333, 0.5, 0.1] {
            let est = mc_se_step(l, &p, 0.3, 0.01, 1_000_000, &mut rng).unwrap();
            let exact = gg_se_step(l, &g, 0.3, 0.01);
            assert!((est.value - exact).abs() < 4.0 * est.std_error, "{l}: {est:?} vs {exact}");
        }
    }

    #[test]
    fn mc_near_perfect_si() {
        let p = Prior::Gg(gg(1.0, 1e-8));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let est = mc_se_step(1.0, &p, 0.3, 0.01, 100_000, &mut rng).unwrap();
        assert!((est.value - 0.01).abs() < 1e-6, "{est:?}");
    }

    #[test]
    fn mc_standard_error_shrinks_like_root_n() {
        let p = Prior::Bg(BgPrior::new(0.2, 0.04).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let small = mc_se_step(0.5, &p, 0.3, 0.01, 1_000, &mut rng).unwrap();
        let big = mc_se_step(0.5, &p, 0.3, 0.01, 1_000_000, &mut rng).unwrap();
        assert!(big.std_error < 1.5 * small.std_error / 30.0, "{small:?} {big:?}");
    }

    #[test]
    fn mc_trace_is_seed_deterministic() {
        let p = Prior::Bg(BgPrior::new(0.2, 0.04).unwrap());
        let backend = SeBackend::MonteCarlo {
            samples: 10_000,
            seed: 3,
            common_random_numbers: false,
        };
        let a = run_se(&p, 0.3, 0.01, 5, backend).unwrap();
        let b = run_se(&p, 0.3, 0.01, 5, backend).unwrap();
        assert_eq!(a, b);
    }
}
