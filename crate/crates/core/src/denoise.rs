//! Conditional-MMSE scalar denoisers `η_t(a, b) = E[X | X + λ_t·Z = a, X̃ = b]`.
//!
//! For the GG model the posterior mean is linear in `(a, b)`. For the BG model it is the
//! posterior nonzero probability `(1 + T_{a,b})⁻¹` times the Gaussian-branch mean `f_{a,b}`.
//! `T_{a,b}` is a likelihood ratio whose exponent grows like `(σ²a + λ²b)²`, so it is only
//! ever handled through its logarithm.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::prior::{BgPrior, GgPrior, Prior};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// A separable denoiser and its derivative in the first argument, as used by AMP.
pub trait ScalarDenoiser {
    fn eta(&self, a: f64, b: f64) -> f64;
    /// `∂η/∂a`.
    fn eta_prime(&self, a: f64, b: f64) -> f64;
}

/// Scalar-channel noise level `λ_t²` paired with the prior it denoises for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiserContext {
    lambda2: f64,
    prior: Prior,
}

impl DenoiserContext {
    pub fn new(lambda2: f64, prior: Prior) -> Result<Self> {
        if !(lambda2.is_finite() && lambda2 > 0.0) {
            return Err(Error::invalid(
                "lambda2",
                format!("must be finite and > 0, got {lambda2}"),
            ));
        }
        Ok(Self { lambda2, prior })
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn denoise(&self, a: f64, b: f64) -> f64 {
        match &self.prior {
            Prior::Gg(p) => gg_denoise(p, self.lambda2, a, b),
            Prior::Bg(p) => bg_denoise(p, self.lambda2, a, b),
        }
    }

    /// Like [`denoise`](Self::denoise) but rejects non-finite inputs.
    pub fn checked_denoise(&self, a: f64, b: f64) -> Result<f64> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::NonFiniteInput { a, b });
        }
        Ok(self.denoise(a, b))
    }

    pub fn deriv_a(&self, a: f64, b: f64) -> f64 {
        match &self.prior {
            Prior::Gg(p) => gg_deriv_a(p, self.lambda2),
            Prior::Bg(p) => bg_deriv_a(p, self.lambda2, a, b),
        }
    }

    pub fn deriv_b(&self, a: f64, b: f64) -> f64 {
        match &self.prior {
            Prior::Gg(p) => gg_deriv_b(p, self.lambda2),
            Prior::Bg(p) => bg_deriv_b(p, self.lambda2, a, b),
        }
    }
}

impl ScalarDenoiser for DenoiserContext {
    fn eta(&self, a: f64, b: f64) -> f64 {
        self.denoise(a, b)
    }

    fn eta_prime(&self, a: f64, b: f64) -> f64 {
        self.deriv_a(a, b)
    }
}

#[inline]
fn gg_denominator(p: &GgPrior, lambda2: f64) -> f64 {
    let (sx2, s2) = (p.sigma_x2(), p.sigma_si2());
    sx2 * (s2 + lambda2) + s2 * lambda2
}

/// GG posterior mean, linear in `(a, b)`.
pub fn gg_denoise(p: &GgPrior, lambda2: f64, a: f64, b: f64) -> f64 {
    let (sx2, s2) = (p.sigma_x2(), p.sigma_si2());
    (sx2 * s2 * a + sx2 * lambda2 * b) / gg_denominator(p, lambda2)
}

/// `∂η/∂a` for GG; constant in `(a, b)` and in `[0, 1]`.
pub fn gg_deriv_a(p: &GgPrior, lambda2: f64) -> f64 {
    p.sigma_x2() * p.sigma_si2() / gg_denominator(p, lambda2)
}

/// `∂η/∂b` for GG; constant in `(a, b)` and in `[0, 1]`.
pub fn gg_deriv_b(p: &GgPrior, lambda2: f64) -> f64 {
    p.sigma_x2() * lambda2 / gg_denominator(p, lambda2)
}

/// Quantities shared by the BG denoiser and its derivatives at one `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BgIntermediates {
    /// `ln T_{a,b}`.
    pub log_t: f64,
    /// Posterior mean given `X ≠ 0`.
    pub f_ab: f64,
    /// `ν_t = σ²λ²(σ² + λ² + σ²λ²)`.
    pub nu_t: f64,
    /// `Pr(X ≠ 0 | a, b) = 1 / (1 + T_{a,b})`.
    pub p_nonzero: f64,
    /// `Pr(X = 0 | a, b)`, computed separately so it keeps full relative precision near 0.
    pub p_zero: f64,
    /// `s = σ²a + λ²b`.
    pub s: f64,
    /// `σ² + λ² + σ²λ²`.
    pub denom: f64,
}

#[inline]
fn log_gaussian_density(x: f64, var: f64) -> f64 {
    -0.5 * x * x / var - 0.5 * var.ln() - HALF_LN_2PI
}

/// Returns `(1/(1+e^t), e^t/(1+e^t))` without overflow.
#[inline]
fn logistic_pair(log_t: f64) -> (f64, f64) {
    if log_t > 0.0 {
        let e = (-log_t).exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    } else {
        let e = log_t.exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    }
}

pub fn bg_intermediates(p: &BgPrior, lambda2: f64, a: f64, b: f64) -> BgIntermediates {
    let (eps, s2) = (p.epsilon(), p.sigma_si2());
    let denom = s2 + lambda2 + s2 * lambda2;
    let nu_t = s2 * lambda2 * denom;
    let s = s2 * a + lambda2 * b;
    let f_ab = s / denom;
    // ln((1-ε)/ε) is -inf at ε = 1, which gives p_nonzero = 1 exactly.
    let log_prior_odds = (1.0 - eps).ln() - eps.ln();
    let log_t = log_prior_odds + (nu_t.ln() + HALF_LN_2PI - (lambda2 * s2).ln())
        + log_gaussian_density(s, nu_t);
    let (p_nonzero, p_zero) = logistic_pair(log_t);
    BgIntermediates {
        log_t,
        f_ab,
        nu_t,
        p_nonzero,
        p_zero,
        s,
        denom,
    }
}

/// `ln T_{a,b}`.
pub fn bg_log_t(p: &BgPrior, lambda2: f64, a: f64, b: f64) -> f64 {
    bg_intermediates(p, lambda2, a, b).log_t
}

/// `Pr(X ≠ 0 | a, b)`.
pub fn bg_posterior_nonzero(p: &BgPrior, lambda2: f64, a: f64, b: f64) -> f64 {
    bg_intermediates(p, lambda2, a, b).p_nonzero
}

/// BG posterior mean `(1 + T_{a,b})⁻¹ · f_{a,b}`.
pub fn bg_denoise(p: &BgPrior, lambda2: f64, a: f64, b: f64) -> f64 {
    let im = bg_intermediates(p, lambda2, a, b);
    im.p_nonzero * im.f_ab
}

/// BG posterior mean with `T_{a,b}` evaluated directly rather than in log space.
///
/// Overflows to a wrong answer once `(σ²a + λ²b)²/ν` leaves the range of `exp`; kept as
/// a cross-check for [`bg_denoise`].
pub fn bg_denoise_direct(p: &BgPrior, lambda2: f64, a: f64, b: f64) -> f64 {
    let (eps, s2) = (p.epsilon(), p.sigma_si2());
    let denom = s2 + lambda2 + s2 * lambda2;
    let nu = s2 * lambda2 * denom;
    let s = s2 * a + lambda2 * b;
    let rho = (-s * s / (2.0 * nu)).exp() / (2.0 * std::f64::consts::PI * nu).sqrt();
    let t = (1.0 - eps) / eps * nu * (2.0 * std::f64::consts::PI).sqrt() / (lambda2 * s2) * rho;
    s / denom / (1.0 + t)
}

// With p = 1/(1+T) and q = T/(1+T), differentiating p·f gives
//   ∂η/∂a = p·σ²/D + p·q·σ²·s·f/ν,   ∂η/∂b = p·λ²/D + p·q·λ²·s·f/ν,
// where D = σ² + λ² + σ²λ². Both terms are nonnegative.

/// `∂η/∂a` for BG.
pub fn bg_deriv_a(p: &BgPrior, lambda2: f64, a: f64, b: f64) -> f64 {
    let im = bg_intermediates(p, lambda2, a, b);
    let s2 = p.sigma_si2();
    im.p_nonzero * s2 / im.denom + im.p_nonzero * im.p_zero * s2 * im.s * im.f_ab / im.nu_t
}

/// `∂η/∂b` for BG.
pub fn bg_deriv_b(p: &BgPrior, lambda2: f64, a: f64, b: f64) -> f64 {
    let im = bg_intermediates(p, lambda2, a, b);
    im.p_nonzero * lambda2 / im.denom
        + im.p_nonzero * im.p_zero * lambda2 * im.s * im.f_ab / im.nu_t
}

/// Upper bound on `|∂η/∂a|` for BG when `λ ≥ σ_w`: `1 + 2(1 − ε)/(σ_w·ε)`.
pub fn bg_deriv_a_bound(p: &BgPrior, sigma_w: f64) -> f64 {
    1.0 + 2.0 * (1.0 - p.epsilon()) / (sigma_w * p.epsilon())
}

/// Upper bound on `|∂η/∂b|` for BG: `1 + 2(1 − ε)/(σ·ε)`.
pub fn bg_deriv_b_bound(p: &BgPrior) -> f64 {
    1.0 + 2.0 * (1.0 - p.epsilon()) / (p.sigma_si2().sqrt() * p.epsilon())
}
