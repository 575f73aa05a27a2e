//! Joint laws of the signal `X` and its side information `X̃ = X + σ·Z`.
//!
//! Two models are supported:
//!
//! * **GG**: `X ~ N(0, σ_x²)`.
//! * **BG**: `X ~ ε·N(0, 1) + (1 − ε)·δ₀`, a sparse Bernoulli-Gaussian signal.
//!
//! In both cases the side information is the signal observed through an
//! independent additive Gaussian channel of variance `σ²`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussian signal with Gaussian-noise side information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GgPrior {
    sigma_x2: f64,
    sigma_si2: f64,
}

impl GgPrior {
    /// `sigma_x2 > 0` is the signal variance, `sigma_si2 ≥ 0` the side-information noise variance.
    pub fn new(sigma_x2: f64, sigma_si2: f64) -> Result<Self> {
        if !(sigma_x2.is_finite() && sigma_x2 > 0.0) {
            return Err(Error::invalid("sigma_x2", format!("must be finite and > 0, got {sigma_x2}")));
        }
        if !(sigma_si2.is_finite() && sigma_si2 >= 0.0) {
            return Err(Error::invalid("sigma_si2", format!("must be finite and >= 0, got {sigma_si2}")));
        }
        Ok(Self { sigma_x2, sigma_si2 })
    }

    pub fn sigma_x2(&self) -> f64 {
        self.sigma_x2
    }

    pub fn sigma_si2(&self) -> f64 {
        self.sigma_si2
    }
}

/// Bernoulli-Gaussian signal (unit-variance nonzeros) with Gaussian-noise side information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BgPrior {
    epsilon: f64,
    sigma_si2: f64,
}

impl BgPrior {
    /// `epsilon ∈ (0, 1]` is the probability of a nonzero entry. `sigma_si2` must be strictly
    /// positive: with noiseless side information the posterior is degenerate.
    pub fn new(epsilon: f64, sigma_si2: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::invalid("epsilon", format!("must lie in (0, 1], got {epsilon}")));
        }
        if !(sigma_si2.is_finite() && sigma_si2 > 0.0) {
            return Err(Error::invalid(
                "sigma_si2",
                format!("must be finite and > 0 for the BG model, got {sigma_si2}"),
            ));
        }
        Ok(Self { epsilon, sigma_si2 })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sigma_si2(&self) -> f64 {
        self.sigma_si2
    }
}

/// Joint law of `(X, X̃)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Prior {
    Gg(GgPrior),
    Bg(BgPrior),
}

impl From<GgPrior> for Prior {
    fn from(p: GgPrior) -> Self {
        Prior::Gg(p)
    }
}

impl From<BgPrior> for Prior {
    fn from(p: BgPrior) -> Self {
        Prior::Bg(p)
    }
}

impl Prior {
    /// Short model tag, `"gg"` or `"bg"`.
    pub fn tag(&self) -> &'static str {
        match self {
            Prior::Gg(_) => "gg",
            Prior::Bg(_) => "bg",
        }
    }

    /// `E[X²]`.
    pub fn second_moment(&self) -> f64 {
        match self {
            Prior::Gg(p) => p.sigma_x2,
            Prior::Bg(p) => p.epsilon,
        }
    }

    /// Variance of the side-information channel, `σ²`.
    pub fn si_noise_var(&self) -> f64 {
        match self {
            Prior::Gg(p) => p.sigma_si2,
            Prior::Bg(p) => p.sigma_si2,
        }
    }

    /// `E[X̃²] = E[X²] + σ²`.
    pub fn si_second_moment(&self) -> f64 {
        self.second_moment() + self.si_noise_var()
    }

    /// `E[X·X̃] = E[X²]`, the side-information noise being independent of `X`.
    pub fn cross_moment(&self) -> f64 {
        self.second_moment()
    }

    /// Draws a single `(x, x̃)` pair.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let x = match self {
            Prior::Gg(p) => p.sigma_x2.sqrt() * rng.sample::<f64, _>(StandardNormal),
            Prior::Bg(p) => {
                // Bernoulli mask first, so zeros are exact.
                if rng.random::<f64>() < p.epsilon {
                    rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                }
            }
        };
        let z: f64 = rng.sample(StandardNormal);
        (x, x + self.si_noise_var().sqrt() * z)
    }

    /// Draws `n` i.i.d. pairs, returned as `(signal, side_information)`.
    pub fn sample_joint<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let mut signal = Vec::with_capacity(n);
        let mut si = Vec::with_capacity(n);
        for _ in 0..n {
            let (x, xt) = self.sample_pair(rng);
            signal.push(x);
            si.push(xt);
        }
        (signal, si)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_invalid_parameters() {
        assert!(GgPrior::new(0.0, 0.1).is_err());
        assert!(GgPrior::new(1.0, -0.1).is_err());
        assert!(GgPrior::new(f64::NAN, 0.1).is_err());
        assert!(BgPrior::new(0.0, 0.1).is_err());
        assert!(BgPrior::new(1.5, 0.1).is_err());
        // perfect SI is degenerate for BG
        assert!(BgPrior::new(0.2, 0.0).is_err());
        assert!(BgPrior::new(1.0, 0.04).is_ok());
    }

    #[test]
    fn second_moments() {
        assert_eq!(Prior::from(GgPrior::new(1.0, 0.04).unwrap()).second_moment(), 1.0);
        assert_eq!(Prior::from(BgPrior::new(0.2, 0.04).unwrap()).second_moment(), 0.2);
        assert_eq!(Prior::from(BgPrior::new(1.0, 0.04).unwrap()).second_moment(), 1.0);
    }

    #[test]
    fn zero_si_noise_copies_the_signal() {
        let prior = Prior::from(GgPrior::new(1.0, 0.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (x, xt) = prior.sample_joint(4, &mut rng);
        assert_eq!(x, xt);
    }

    #[test]
    fn dense_bg_has_no_exact_zeros() {
        let prior = Prior::from(BgPrior::new(1.0, 0.04).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (x, _) = prior.sample_joint(100_000, &mut rng);
        assert_eq!(x.iter().filter(|v| **v == 0.0).count(), 0);
    }

    #[test]
    fn bg_sparsity_and_energy() {
        let prior = Prior::from(BgPrior::new(0.2, 0.04).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let (x, xt) = prior.sample_joint(n, &mut rng);
        let nonzero = x.iter().filter(|v| **v != 0.0).count() as f64 / n as f64;
        let energy = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((nonzero - 0.2).abs() < 0.002, "nonzero fraction {nonzero}");
        assert!((energy - 0.2).abs() < 0.005, "E[X^2] {energy}");
        assert!(x.iter().chain(xt.iter()).all(|v| v.is_finite()));
    }

    #[test]
    fn gg_joint_covariance() {
        let (sx2, s2) = (1.5, 0.25);
        let prior = Prior::from(GgPrior::new(sx2, s2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 1_000_000;
        let (x, xt) = prior.sample_joint(n, &mut rng);
        let nf = n as f64;
        let mx = x.iter().sum::<f64>() / nf;
        let mt = xt.iter().sum::<f64>() / nf;
        let vx = x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / nf;
        let vt = xt.iter().map(|v| (v - mt).powi(2)).sum::<f64>() / nf;
        let cxt = x.iter().zip(&xt).map(|(a, b)| (a - mx) * (b - mt)).sum::<f64>() / nf;
        // standard errors of Gaussian (co)variance estimates
        let se_vx = sx2 * (2.0 / nf).sqrt();
        let se_vt = (sx2 + s2) * (2.0 / nf).sqrt();
        let se_c = ((sx2 * (sx2 + s2) + sx2 * sx2) / nf).sqrt();
        assert!((vx - sx2).abs() < 3.0 * se_vx, "Var(X) {vx}");
        assert!((vt - (sx2 + s2)).abs() < 3.0 * se_vt, "Var(X~) {vt}");
        assert!((cxt - sx2).abs() < 3.0 * se_c, "Cov {cxt}");
    }

    #[test]
    fn energy_concentrates_with_n() {
        let prior = Prior::from(BgPrior::new(0.2, 0.04).unwrap());
        let deviation = |n: usize| {
            (0..50u64)
                .map(|seed| {
                    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                    let (x, _) = prior.sample_joint(n, &mut rng);
                    (x.iter().map(|v| v * v).sum::<f64>() / n as f64 - 0.2).abs()
                })
                .sum::<f64>()
                / 50.0
        };
        let (d2, d3, d4) = (deviation(100), deviation(1_000), deviation(10_000));
        assert!(d4 < d2, "{d4} vs {d2}");
        assert!(d4 < d3, "{d4} vs {d3}");
    }
}
