//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Posterior summary of the BG model computed by numerical integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadraturePosterior {
    pub mean: f64,
    pub p_nonzero: f64,
}

fn ln_normal(x: f64, var: f64) -> f64 {
    -0.5 * x * x / var - 0.5 * (2.0 * PI * var).ln()
}

/// `E[X | a, b]` and `Pr(X ≠ 0 | a, b)` for `X ~ ε·N(0,1) + (1−ε)·δ₀`, `a = X + N(0, λ²)`,
/// `b = X + N(0, σ²)`, by quadrature over `x ∈ [−12, 12]` with the atom at zero added
/// analytically. Everything is rescaled by the largest log-density so nothing underflows.
pub fn bg_posterior_quadrature(eps: f64, sigma2: f64, lambda2: f64, a: f64, b: f64) -> QuadraturePosterior {
    let log_joint = |x: f64| ln_normal(x, 1.0) + ln_normal(a - x, lambda2) + ln_normal(b - x, sigma2);
    let log_atom = (1.0 - eps).ln() + ln_normal(a, lambda2) + ln_normal(b, sigma2);

    let (lo, hi) = (-12.0, 12.0);
    let scan_steps = 4_800;
    let peak = (0..=scan_steps)
        .map(|k| log_joint(lo + (hi - lo) * k as f64 / scan_steps as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    let reference = (peak + eps.ln()).max(log_atom);

    let panels = 96;
    let width = (hi - lo) / panels as f64;
    let mut mass = 0.0;
    let mut first_moment = 0.0;
    for k in 0..panels {
        let (l, r) = (lo + k as f64 * width, lo + (k + 1) as f64 * width);
        let weight = |x: f64| (eps.ln() + log_joint(x) - reference).exp();
        mass += quadrature::integrate(weight, l, r, 1e-15).integral;
        first_moment += quadrature::integrate(|x| x * weight(x), l, r, 1e-15).integral;
    }
    let atom = (log_atom - reference).exp();
    QuadraturePosterior {
        mean: first_moment / (mass + atom),
        p_nonzero: mass / (mass + atom),
    }
}

/// Root of `λ² = σ_w² + (1/δ)·σ_x²σ²λ² / (σ_x²(σ² + λ²) + σ²λ²)` on `[lo, hi]` by bisection.
pub fn gg_fixed_point_bisection(sx2: f64, s2: f64, delta: f64, sigma_w2: f64, lo: f64, hi: f64) -> f64 {
    let g = |l: f64| sigma_w2 + sx2 * s2 * l / (sx2 * (s2 + l) + s2 * l) / delta - l;
    let (mut lo, mut hi) = (lo, hi);
    assert!(g(lo) > 0.0 && g(hi) < 0.0, "root not bracketed");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Central finite difference with step `h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// AMP written directly from the recursion, without cached effective observations:
///
/// ```text
/// r^t     = y − A x^t + (r^{t−1}/δ)·(1/n)·Σ η'_{t−1}([x^{t−1} + Aᵀr^{t−1}]_i, x̃_i)
/// x^{t+1} = η_t(x^t + Aᵀr^t, x̃)
/// ```
///
/// `eta(λ², u, v)` and `eta_prime(λ², u, v)` are the denoiser and its derivative in `u`.
/// `a` is row-major `m × n`. Returns `(1/n)‖x^t − x‖²` for `t = 0..=iters`.
#[allow(clippy::too_many_arguments)]
pub fn naive_amp(
    a: &[f64],
    m: usize,
    n: usize,
    y: &[f64],
    x_true: &[f64],
    x_tilde: &[f64],
    eta: impl Fn(f64, f64, f64) -> f64,
    eta_prime: impl Fn(f64, f64, f64) -> f64,
    lambda2: &[f64],
    iters: usize,
) -> Vec<f64> {
    let delta = m as f64 / n as f64;
    let at_times = |r: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|j| (0..m).map(|i| a[i * n + j] * r[i]).sum())
            .collect()
    };
    let a_times = |v: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|i| (0..n).map(|j| a[i * n + j] * v[j]).sum())
            .collect()
    };
    let mse = |x: &[f64]| x.iter().zip(x_true).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / n as f64;

    let mut x_prev = vec![0.0; n];
    let mut r_prev = vec![0.0; m];
    let mut x = vec![0.0; n];
    let mut out = vec![mse(&x)];
    for t in 0..iters {
        let ax = a_times(&x);
        let mut r: Vec<f64> = y.iter().zip(&ax).map(|(yi, v)| yi - v).collect();
        if t > 0 {
            let prev_obs = at_times(&r_prev);
            let div: f64 = (0..n)
                .map(|i| eta_prime(lambda2[t - 1], x_prev[i] + prev_obs[i], x_tilde[i]))
                .sum::<f64>()
                / n as f64;
            for (ri, rp) in r.iter_mut().zip(&r_prev) {
                *ri += rp / delta * div;
            }
        }
        let obs = at_times(&r);
        let next: Vec<f64> = (0..n).map(|i| eta(lambda2[t], x[i] + obs[i], x_tilde[i])).collect();
        x_prev = std::mem::replace(&mut x, next);
        r_prev = r;
        out.push(mse(&x));
    }
    out
}
