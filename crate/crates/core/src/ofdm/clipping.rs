//! Bussgang statistics of a Gaussian signal biased at `i_max / 2` and
//! clipped to `[0, i_max]`.

use crate::quadrature::integrate;
use serde::{Deserialize, Serialize};
use libm::erfc;
use std::f64::consts::PI;

const QUAD_TOL: f64 = 1e-11;
const TAIL_SIGMAS: f64 = 40.0;

/// How the clipping-noise variance is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClipNoiseModel {
    /// Exact variance of the distortion `clip(s) - mu - alpha (s - mu)`
    /// for `s ~ N(i_max/2, sigma_s^2)`; the term that makes the
    /// decomposition `clip(s) = alpha (s - mu) + mu + d` exact.
    #[default]
    Bussgang,
    /// Tail integrals `(alpha x)^2` below zero and `(alpha x - i_max)^2`
    /// above `i_max`, weighted by the density of `alpha * s`
    /// (mean `alpha i_max / 2`, std `alpha sigma_s`).
    AsWritten,
}

/// Scale factor and distortion variance of the clipped signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClippingStats {
    pub alpha: f64,
    pub clip_var: f64,
    pub signal_var: f64,
}

impl ClippingStats {
    pub fn new(i_max: f64, sigma_s: f64, model: ClipNoiseModel) -> Self {
        let alpha = bussgang_alpha(i_max, sigma_s);
        Self {
            alpha,
            clip_var: clipping_noise_variance(i_max, sigma_s, alpha, model),
            signal_var: sigma_s * sigma_s,
        }
    }
}

/// `alpha = 1 - erfc(i_max / sqrt(8 sigma_s^2))`; 1 when `sigma_s = 0`.
pub fn bussgang_alpha(i_max: f64, sigma_s: f64) -> f64 {
    if sigma_s <= 0.0 {
        return 1.0;
    }
    1.0 - erfc(i_max / (8.0 * sigma_s * sigma_s).sqrt())
}

pub fn clipping_noise_variance(i_max: f64, sigma_s: f64, alpha: f64, model: ClipNoiseModel) -> f64 {
    if sigma_s <= 0.0 {
        return 0.0;
    }
    match model {
        ClipNoiseModel::AsWritten => {
            let (lo, hi) = as_written_tails(i_max, sigma_s, alpha);
            lo + hi
        }
        ClipNoiseModel::Bussgang => bussgang_regions(i_max, sigma_s, alpha).iter().sum(),
    }
}

fn gaussian(mean: f64, sd: f64) -> impl Fn(f64) -> f64 {
    let norm = 1.0 / (sd * (2.0 * PI).sqrt());
    move |x| {
        let z = (x - mean) / sd;
        norm * (-0.5 * z * z).exp()
    }
}

/// Integrates `g * pdf` over `[a, b]` intersected with `mean ± 40 sd`.
fn weighted(g: impl Fn(f64) -> f64, mean: f64, sd: f64, a: f64, b: f64) -> f64 {
    let lo = a.max(mean - TAIL_SIGMAS * sd);
    let hi = b.min(mean + TAIL_SIGMAS * sd);
    if lo >= hi {
        return 0.0;
    }
    let pdf = gaussian(mean, sd);
    integrate(|x| g(x) * pdf(x), lo, hi, QUAD_TOL)
}

pub(crate) fn as_written_tails(i_max: f64, sigma_s: f64, alpha: f64) -> (f64, f64) {
    let mean = alpha * i_max / 2.0;
    let sd = alpha * sigma_s;
    if sd <= 0.0 {
        return (0.0, 0.0);
    }
    let lower = weighted(|x| (alpha * x).powi(2), mean, sd, f64::NEG_INFINITY, 0.0);
    let upper = weighted(|x| (alpha * x - i_max).powi(2), mean, sd, i_max, f64::INFINITY);
    (lower, upper)
}

/// Distortion energy below zero, inside the linear region, and above `i_max`.
pub(crate) fn bussgang_regions(i_max: f64, sigma_s: f64, alpha: f64) -> [f64; 3] {
    let mu = i_max / 2.0;
    let lower = weighted(|x| (-mu - alpha * (x - mu)).powi(2), mu, sigma_s, f64::NEG_INFINITY, 0.0);
    let middle = weighted(|x| ((1.0 - alpha) * (x - mu)).powi(2), mu, sigma_s, 0.0, i_max);
    let upper = weighted(|x| (mu - alpha * (x - mu)).powi(2), mu, sigma_s, i_max, f64::INFINITY);
    [lower, middle, upper]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `E[X^k ; X > c]` for `X ~ N(m, s^2)`, k = 0, 1, 2.
    fn upper_moments(m: f64, s: f64, c: f64) -> (f64, f64, f64) {
        let z = (c - m) / s;
        let q = 0.5 * erfc(z / std::f64::consts::SQRT_2);
        let phi = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        (q, m * q + s * phi, (m * m + s * s) * q + s * (m + c) * phi)
    }

    #[test]
    fn alpha_limits() {
        assert!((bussgang_alpha(1e6, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(bussgang_alpha(0.0, 1.0), 0.0);
        assert_eq!(bussgang_alpha(3.0, 0.0), 1.0);
        // erfc(1) = 0.157299207050285130658779364917...
        let a = bussgang_alpha(8f64.sqrt(), 1.0);
        assert!((a - (1.0 - 0.157_299_207_050_285_13)).abs() < 1e-14, "{a:.17}");
    }

    #[test]
    fn alpha_strictly_increasing_in_headroom() {
        let mut prev = -1.0;
        for k in 1..100 {
            let a = bussgang_alpha(k as f64 * 0.1, 1.0);
            assert!(a > prev);
            prev = a;
        }
    }

    #[test]
    fn as_written_matches_truncated_moments() {
        let (i_max, sigma) = (10.0, 2.5);
        let alpha = bussgang_alpha(i_max, sigma);
        let (lo, hi) = as_written_tails(i_max, sigma, alpha);
        let (m, s) = (alpha * i_max / 2.0, alpha * sigma);
        // Lower tail via the mirrored variable -X.
        let (_, _, l2) = upper_moments(-m, s, 0.0);
        let (u0, u1, u2) = upper_moments(m, s, i_max);
        let lo_ref = alpha * alpha * l2;
        let hi_ref = alpha * alpha * u2 - 2.0 * alpha * i_max * u1 + i_max * i_max * u0;
        assert!((lo - lo_ref).abs() < 1e-8 * lo_ref);
        assert!((hi - hi_ref).abs() < 1e-8 * hi_ref);
    }

    #[test]
    fn bussgang_tails_are_symmetric() {
        for (i_max, sigma) in [(10.0, 2.5), (4.0, 1.6), (1.0, 0.1)] {
            let alpha = bussgang_alpha(i_max, sigma);
            let [lo, _, hi] = bussgang_regions(i_max, sigma, alpha);
            assert!((lo - hi).abs() <= 1e-9 * lo.max(1e-300), "{lo} vs {hi}");
        }
    }

    #[test]
    fn bussgang_variance_matches_output_variance() {
        // Var(clip(s)) = alpha^2 sigma^2 + sigma_d^2 for the Bussgang split.
        let (i_max, sigma) = (6.0, 2.0);
        let alpha = bussgang_alpha(i_max, sigma);
        let d = clipping_noise_variance(i_max, sigma, alpha, ClipNoiseModel::Bussgang);
        let mu = i_max / 2.0;
        let pdf = gaussian(mu, sigma);
        let var_out = integrate(
            |x| (x.clamp(0.0, i_max) - mu).powi(2) * pdf(x),
            mu - 40.0 * sigma,
            mu + 40.0 * sigma,
            1e-12,
        );
        assert!((var_out - (alpha * alpha * sigma * sigma + d)).abs() < 1e-9);
    }

    #[test]
    fn vanishing_signal_has_no_clipping_noise() {
        for model in [ClipNoiseModel::AsWritten, ClipNoiseModel::Bussgang] {
            let st = ClippingStats::new(10.0, 0.3, model);
            assert!(st.clip_var < 1e-30, "{model:?}: {}", st.clip_var);
            assert_eq!(ClippingStats::new(10.0, 0.0, model).clip_var, 0.0);
        }
    }
}
