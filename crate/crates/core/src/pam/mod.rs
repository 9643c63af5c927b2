//! M-PAM over the LED with a box-constrained transmit waveform and a
//! linear MMSE receive equalizer.
//!
//! Symbols take the levels `{0, 1/(M-1), ..., 1}` and scale a waveform of
//! `L_f` samples, so the symbol rate is `R_c / L_f`.

mod design;
mod equalizer;
mod rate;

pub use design::{design_waveform, DesignOptions, DesignResult};
pub use equalizer::{
    build_toeplitz, isi_noise_power, mmse_filter, sigma_matrix, ChannelMatrix, JowEvaluation, JowModel,
    MmseEqualizer, WindowGeometry,
};
pub use rate::{maximize_rate, unequalized_ber, PamOptimum, RateSearch, Scheme};

use crate::error::{invalid, Result};
use libm::erfc;
use serde::{Deserialize, Serialize};

/// Which second-moment coefficients enter `Sigma` and the SINR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    /// True alphabet moments; the filter is the affine MMSE estimator.
    #[default]
    Corrected,
    /// Same-symbol coefficient `(2M^2 - M) / (6M - 6)` and the uncentered
    /// normal equations.
    AsWritten,
}

impl SigmaMode {
    /// Coefficient of `f[u] f[v]` for two samples of the same symbol.
    pub fn same_symbol(self, m: u32) -> f64 {
        let m = m as f64;
        match self {
            SigmaMode::Corrected => (2.0 * m - 1.0) / (6.0 * (m - 1.0)),
            SigmaMode::AsWritten => (2.0 * m * m - m) / (6.0 * m - 6.0),
        }
    }

    /// Coefficient for samples of distinct (independent) symbols.
    pub fn cross_symbol(self) -> f64 {
        0.25
    }
}

/// Variance of the uniform alphabet `{0, 1/(M-1), ..., 1}`.
pub fn alphabet_variance(m: u32) -> f64 {
    let m = m as f64;
    (m + 1.0) / (12.0 * (m - 1.0))
}

/// `k / (M - 1)`.
pub fn level(m: u32, k: u32) -> f64 {
    k as f64 / (m - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PamConfig {
    pub m: u32,
    /// Chip (sample) rate in samples/s.
    pub r_c: f64,
    pub l_f: usize,
    /// Equalizer length, odd.
    pub l_w: usize,
}

impl PamConfig {
    pub fn new(m: u32, r_c: f64, l_f: usize, l_w: usize) -> Result<Self> {
        if m < 2 {
            return Err(invalid("m_pam", format!("{m} < 2")));
        }
        if !(r_c > 0.0) || !r_c.is_finite() {
            return Err(invalid("r_c", "must be positive"));
        }
        if l_f == 0 {
            return Err(invalid("l_f", "must be at least 1"));
        }
        if l_w.is_multiple_of(2) {
            return Err(invalid("l_w", format!("{l_w} is not odd")));
        }
        Ok(Self { m, r_c, l_f, l_w })
    }

    /// Default equalizer length: `2 L_h + 1`, widened to an odd length
    /// covering at least one full symbol.
    pub fn default_l_w(l_h: usize, l_f: usize) -> usize {
        (2 * l_h + 1).max(l_f | 1)
    }

    pub fn symbol_rate(&self) -> f64 {
        self.r_c / self.l_f as f64
    }

    pub fn bits_per_symbol(&self) -> f64 {
        (self.m as f64).log2()
    }

    /// `R_c log2(M) / L_f`.
    pub fn bit_rate(&self) -> f64 {
        self.symbol_rate() * self.bits_per_symbol()
    }
}

/// Transmit pulse, every sample within `[0, i_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    i_max: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, i_max: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("waveform", "must have at least one sample"));
        }
        if let Some(v) = samples.iter().find(|v| !(0.0..=i_max).contains(*v)) {
            return Err(invalid("waveform", format!("sample {v} outside [0, {i_max}]")));
        }
        Ok(Self { samples, i_max })
    }

    /// Full-scale rectangular pulse.
    pub fn rectangular(l_f: usize, i_max: f64) -> Self {
        Self {
            samples: vec![i_max; l_f],
            i_max,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn i_max(&self) -> f64 {
        self.i_max
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// `x[i] = sum_m s[m] f[i - m L_f]` with non-overlapping shifts.
pub fn synthesize(waveform: &Waveform, symbols: &[f64]) -> Vec<f64> {
    let f = waveform.samples();
    symbols.iter().flat_map(|&s| f.iter().map(move |&v| s * v)).collect()
}

/// SINR from an MMSE value. As written: `m2 / mse`. Corrected: unbiased
/// SINR of the MMSE estimate, `(Var / mse - 1) / (8 Var)`, whose scale
/// matches the decision distances assumed by [`pam_ber`].
pub fn sinr(m: u32, mse: f64, mode: SigmaMode) -> f64 {
    if mse <= 0.0 {
        return f64::INFINITY;
    }
    match mode {
        SigmaMode::AsWritten => mode.same_symbol(m) / mse,
        SigmaMode::Corrected => {
            let var = alphabet_variance(m);
            ((var / mse - 1.0) / (8.0 * var)).max(0.0)
        }
    }
}

/// Unbiased SINR `g^2 / (8 sigma_e^2)` of an arbitrary linear receiver
/// with symbol gain `gain` and error power `error_var` around `gain * s`.
pub fn filter_sinr(gain: f64, error_var: f64) -> f64 {
    if error_var <= 0.0 {
        return f64::INFINITY;
    }
    gain * gain / (8.0 * error_var)
}

/// `(M-1) / (M log2 M) * erfc(sqrt(gamma / (M-1)^2))`.
pub fn pam_ber(m: u32, gamma: f64) -> f64 {
    let mf = m as f64;
    let d = mf - 1.0;
    d / (mf * mf.log2()) * erfc((gamma.max(0.0) / (d * d)).sqrt())
}

/// Gray-coded level index for a bit word.
pub fn gray_to_level(word: u32) -> u32 {
    let mut x = word;
    let mut g = word >> 1;
    while g > 0 {
        x ^= g;
        g >>= 1;
    }
    x
}

/// Bit word carried by level index `k`.
pub fn level_to_gray(k: u32) -> u32 {
    k ^ (k >> 1)
}
