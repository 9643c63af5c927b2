//! LED channel: hard clipping to `[0, I_max]` followed by a first-order
//! lowpass response, plus additive white Gaussian receiver noise.

use crate::error::{invalid, Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Fraction of impulse-response energy a truncated response must retain.
pub const ENERGY_CAPTURE: f64 = 0.9999;

/// First-order lowpass LED with a peak drive limit.
///
/// Currents are in mA; with unity current-to-optical conversion `i_max`
/// is also the peak optical power in mW.
#[derive(Debug, Clone, PartialEq)]
pub struct LedChannel {
    f3db: f64,
    i_max: f64,
    sample_rate: f64,
    impulse: Vec<f64>,
}

impl LedChannel {
    /// Builds a channel whose impulse response is truncated at the shortest
    /// length retaining [`ENERGY_CAPTURE`] of the energy.
    pub fn new(f3db: f64, i_max: f64, sample_rate: f64) -> Result<Self> {
        check_positive("f3db", f3db)?;
        check_positive("sample_rate", sample_rate)?;
        let len = default_length(f3db, sample_rate);
        Self::with_length(f3db, i_max, sample_rate, len)
    }

    /// Builds a channel with an explicit impulse response length.
    pub fn with_length(f3db: f64, i_max: f64, sample_rate: f64, len: usize) -> Result<Self> {
        check_positive("f3db", f3db)?;
        check_positive("i_max", i_max)?;
        check_positive("sample_rate", sample_rate)?;
        if len == 0 {
            return Err(invalid("impulse_len", "must be at least 1"));
        }
        let ratio = decay_ratio(f3db, sample_rate);
        let captured = 1.0 - ratio.powi(2 * len as i32);
        // Slack for the rounding in `default_length` at the exact boundary.
        if captured < ENERGY_CAPTURE - 1e-12 {
            return Err(Error::ImpulseTooShort {
                len,
                captured,
                required: ENERGY_CAPTURE,
            });
        }
        let omega = 2.0 * PI * f3db;
        let mut impulse: Vec<f64> = (0..len)
            .map(|k| omega * (-omega * k as f64 / sample_rate).exp() / sample_rate)
            .collect();
        let total: f64 = impulse.iter().sum();
        impulse.iter_mut().for_each(|h| *h /= total);
        Ok(Self {
            f3db,
            i_max,
            sample_rate,
            impulse,
        })
    }

    pub fn f3db(&self) -> f64 {
        self.f3db
    }

    pub fn i_max(&self) -> f64 {
        self.i_max
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Same LED sampled at a different rate.
    pub fn resampled(&self, sample_rate: f64) -> Result<Self> {
        Self::new(self.f3db, self.i_max, sample_rate)
    }

    /// Same LED with a different peak limit.
    pub fn with_peak(&self, i_max: f64) -> Result<Self> {
        Self::with_length(self.f3db, i_max, self.sample_rate, self.impulse.len())
    }

    /// Continuous-time frequency response `1 / (1 + j f / f3dB)`.
    pub fn frequency_response(&self, f: f64) -> Complex64 {
        frequency_response(self.f3db, f)
    }

    /// Unit-sum sampled impulse response of length `L_h`.
    pub fn impulse_response(&self) -> &[f64] {
        &self.impulse
    }

    pub fn impulse_len(&self) -> usize {
        self.impulse.len()
    }

    /// DFT of the sampled impulse response at `bin` of an `n`-point transform.
    pub fn discrete_gain(&self, bin: usize, n: usize) -> Complex64 {
        self.impulse
            .iter()
            .enumerate()
            .map(|(k, &h)| Complex64::from_polar(h, -2.0 * PI * (bin * k) as f64 / n as f64))
            .sum()
    }

    pub fn clip(&self, signal: &[f64]) -> Vec<f64> {
        clip(signal, self.i_max)
    }
}

/// Receiver noise with one-sided spectral density `n0` (mW/Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    n0: f64,
}

impl NoiseModel {
    pub fn new(n0: f64) -> Result<Self> {
        if !(n0 >= 0.0) || !n0.is_finite() {
            return Err(invalid("n0", format!("must be finite and nonnegative, got {n0}")));
        }
        Ok(Self { n0 })
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    /// Per-sample variance when sampling at `rate` (samples/s).
    pub fn sample_variance(&self, rate: f64) -> f64 {
        self.n0 * rate
    }
}

pub fn frequency_response(f3db: f64, f: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) / Complex64::new(1.0, f / f3db)
}

/// Elementwise projection onto `[0, i_max]`.
pub fn clip(signal: &[f64], i_max: f64) -> Vec<f64> {
    signal.iter().map(|&x| x.clamp(0.0, i_max)).collect()
}

/// Full linear convolution of `x` with `h` truncated to `x.len()` samples.
pub fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for (i, yi) in y.iter_mut().enumerate() {
        let kmax = h.len().min(i + 1);
        *yi = (0..kmax).map(|k| h[k] * x[i - k]).sum();
    }
    y
}

fn decay_ratio(f3db: f64, sample_rate: f64) -> f64 {
    (-2.0 * PI * f3db / sample_rate).exp()
}

fn default_length(f3db: f64, sample_rate: f64) -> usize {
    let ratio = decay_ratio(f3db, sample_rate);
    if ratio <= 0.0 {
        return 1;
    }
    // 1 - r^(2L) >= capture  <=>  L >= ln(1 - capture) / (2 ln r)
    let len = ((1.0 - ENERGY_CAPTURE).ln() / (2.0 * ratio.ln())).ceil();
    (len.max(1.0)) as usize
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and positive, got {v}")))
    }
}
