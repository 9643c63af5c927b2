//! DC-biased optical OFDM: Hermitian-symmetric modulation, clipping
//! statistics, per-subcarrier SNR and BER, and bit-loading optimization.
//!
//! Data occupies subcarriers `1..N/2`; the DC bin carries the bias and the
//! Nyquist bin is left empty. Subcarriers without loaded bits still carry
//! unit-energy filler symbols so that the signal variance, and hence the
//! clipping statistics, do not depend on the loading.

mod clipping;
mod loading;
mod qam;

pub use clipping::{bussgang_alpha, clipping_noise_variance, ClipNoiseModel, ClippingStats};
pub use loading::{bit_load, bits_for_snr, optimize_ofdm, LoadingOptions, OfdmOptimum, RatePoint};
pub use qam::{qam_ber, SquareQam};

use crate::channel::{LedChannel, NoiseModel};
use crate::error::{invalid, Error, Result};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Bandwidth over which the receiver noise is integrated per time sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseBandwidth {
    /// `N0 * N / T_OFDM`: white noise sampled at the OFDM sample rate, the
    /// same convention as `N0 * R_c` for M-PAM.
    #[default]
    Sample,
    /// `N0 / T_OFDM` per time sample.
    Subcarrier,
}

/// Symbol energy entering the SNR numerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolEnergy {
    /// `E{|X|^2} = 1`.
    #[default]
    Magnitude,
    /// `E{Re(X)^2} = 1/2`.
    InPhase,
}

impl SymbolEnergy {
    pub fn value(self) -> f64 {
        match self {
            SymbolEnergy::Magnitude => 1.0,
            SymbolEnergy::InPhase => 0.5,
        }
    }
}

/// Which channel gain the subcarrier SNR uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubcarrierGain {
    /// DFT of the impulse response sampled at `N / T_OFDM`, the channel
    /// the time-domain link actually sees.
    #[default]
    Sampled,
    /// The analog response `1 / (1 + j f / f3dB)` at `i / T_OFDM`.
    Analog,
}

/// Modeling switches of the analytic OFDM chain.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct OfdmModel {
    pub clip_noise: ClipNoiseModel,
    pub noise_bandwidth: NoiseBandwidth,
    pub symbol_energy: SymbolEnergy,
    pub gain: SubcarrierGain,
}

impl OfdmModel {
    /// `|H_i|` for data subcarriers `1..N/2`, in order.
    pub fn subcarrier_gains(&self, channel: &LedChannel, n: usize, symbol_time: f64) -> Result<Vec<f64>> {
        Ok(match self.gain {
            SubcarrierGain::Analog => (1..n / 2)
                .map(|i| channel.frequency_response(i as f64 / symbol_time).norm())
                .collect(),
            SubcarrierGain::Sampled => {
                let led = channel.resampled(n as f64 / symbol_time)?;
                (1..n / 2).map(|i| led.discrete_gain(i, n).norm()).collect()
            }
        })
    }

    /// Time-domain noise variance per sample.
    pub fn noise_variance(&self, noise: &NoiseModel, n: usize, symbol_time: f64) -> f64 {
        match self.noise_bandwidth {
            NoiseBandwidth::Sample => noise.n0() * n as f64 / symbol_time,
            NoiseBandwidth::Subcarrier => noise.n0() / symbol_time,
        }
    }
}

/// Cyclic prefix policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CyclicPrefix {
    None,
    /// `L_h - 1` samples of the LED response at the OFDM sample rate.
    #[default]
    Auto,
    Fixed(usize),
}

impl CyclicPrefix {
    pub fn length(self, channel: &LedChannel, n: usize, symbol_time: f64) -> Result<usize> {
        Ok(match self {
            CyclicPrefix::None => 0,
            CyclicPrefix::Fixed(len) => len,
            CyclicPrefix::Auto => {
                let rate = n as f64 / symbol_time;
                channel.resampled(rate)?.impulse_len() - 1
            }
        })
    }
}

/// Everything needed to load and modulate one OFDM configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmPlan {
    n: usize,
    symbol_time: f64,
    beta: f64,
    dc_bias: f64,
    bits: Vec<u32>,
    cp_len: usize,
}

impl OfdmPlan {
    /// `bits[k]` is the load of subcarrier `k + 1`.
    pub fn new(
        n: usize,
        symbol_time: f64,
        beta: f64,
        i_max: f64,
        bits: Vec<u32>,
        cp_len: usize,
    ) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(invalid("n_subcarriers", format!("{n} is not a power of two >= 4")));
        }
        if !(symbol_time > 0.0) {
            return Err(invalid("symbol_time", "must be positive"));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(invalid("beta", "must be positive"));
        }
        if !(i_max > 0.0) {
            return Err(invalid("i_max", "must be positive"));
        }
        if bits.len() != n / 2 - 1 {
            return Err(Error::Dimension(format!(
                "{} bit entries for {} data subcarriers",
                bits.len(),
                n / 2 - 1
            )));
        }
        if let Some(b) = bits.iter().find(|&&b| b % 2 == 1) {
            return Err(invalid("bits_per_subcarrier", format!("{b} is odd; only square QAM is supported")));
        }
        Ok(Self {
            n,
            symbol_time,
            beta,
            dc_bias: i_max / 2.0,
            bits,
            cp_len,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_data(&self) -> usize {
        self.n / 2 - 1
    }

    pub fn symbol_time(&self) -> f64 {
        self.symbol_time
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `beta / N`.
    pub fn modulation_index(&self) -> f64 {
        self.beta / self.n as f64
    }

    pub fn dc_bias(&self) -> f64 {
        self.dc_bias
    }

    pub fn i_max(&self) -> f64 {
        2.0 * self.dc_bias
    }

    pub fn bits(&self) -> &[u32] {
        &self.bits
    }

    /// Bits on data subcarrier `i` (1-based).
    pub fn bits_on(&self, i: usize) -> u32 {
        self.bits[i - 1]
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    pub fn sample_rate(&self) -> f64 {
        self.n as f64 / self.symbol_time
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits.iter().sum()
    }

    /// Standard deviation of `s - s_dc`.
    pub fn signal_std(&self) -> f64 {
        signal_std(self.beta, self.n)
    }

    pub fn throughput(&self) -> f64 {
        throughput(self)
    }
}

/// `sigma_s = beta * sqrt(N - 2) / N` for unit-energy symbols on every
/// data subcarrier and its mirror.
pub fn signal_std(beta: f64, n: usize) -> f64 {
    beta * ((n - 2) as f64).sqrt() / n as f64
}

/// Bit rate including cyclic-prefix overhead.
pub fn throughput(plan: &OfdmPlan) -> f64 {
    let n = plan.n as f64;
    plan.bits_per_symbol() as f64 / plan.symbol_time * n / (n + plan.cp_len as f64)
}

/// SNR of data subcarrier `i` under the scalar Bussgang model.
pub fn subcarrier_snr(
    plan: &OfdmPlan,
    channel: &LedChannel,
    noise: &NoiseModel,
    stats: &ClippingStats,
    i: usize,
    model: &OfdmModel,
) -> Result<f64> {
    if i == 0 || i > plan.n_data() {
        return Err(Error::NotDataSubcarrier {
            index: i,
            max: plan.n_data(),
        });
    }
    let gain = model.subcarrier_gains(channel, plan.n, plan.symbol_time)?[i - 1];
    let noise_var = model.noise_variance(noise, plan.n, plan.symbol_time);
    Ok(snr_with_gain(plan.beta, plan.n, gain, noise_var, stats, model.symbol_energy))
}

/// `(beta alpha |H|)^2 E / (N (sigma_n^2 + sigma_clip^2))`.
pub fn snr_with_gain(
    beta: f64,
    n: usize,
    gain: f64,
    noise_var: f64,
    stats: &ClippingStats,
    energy: SymbolEnergy,
) -> f64 {
    let amp = beta * stats.alpha * gain;
    amp * amp * energy.value() / (n as f64 * (noise_var + stats.clip_var))
}

/// Reusable FFT plans for one transform size.
#[derive(Clone)]
pub struct OfdmModem {
    n: usize,
    inverse: Arc<dyn Fft<f64>>,
    forward: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for OfdmModem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OfdmModem").field("n", &self.n).finish()
    }
}

impl OfdmModem {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            inverse: planner.plan_fft_inverse(n),
            forward: planner.plan_fft_forward(n),
        }
    }

    /// Appends one OFDM symbol (cyclic prefix first) built from the
    /// `N/2 - 1` data-subcarrier symbols.
    pub fn modulate_block(&self, plan: &OfdmPlan, data: &[Complex64], out: &mut Vec<f64>) {
        let n = self.n;
        let mut bins = vec![Complex64::new(0.0, 0.0); n];
        for (k, &x) in data.iter().enumerate() {
            bins[k + 1] = x;
            bins[n - k - 1] = x.conj();
        }
        // rustfft's inverse is the unnormalized sum over exp(+j 2 pi k i / N).
        self.inverse.process(&mut bins);
        let scale = plan.beta / n as f64;
        let body: Vec<f64> = bins.iter().map(|c| scale * c.re + plan.dc_bias).collect();
        out.extend_from_slice(&body[n - plan.cp_len..]);
        out.extend_from_slice(&body);
    }

    /// FFT of one received block (prefix already removed); returns the
    /// data-subcarrier bins. A clean channel returns `beta * X_i`.
    pub fn demodulate_block(&self, block: &[f64]) -> Vec<Complex64> {
        let mut bins: Vec<Complex64> = block.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut bins);
        bins[1..self.n / 2].to_vec()
    }
}

/// Modulates consecutive blocks of `N/2 - 1` symbols into a real stream
/// `beta/N * x_OFDM + s_dc`, each block preceded by the cyclic prefix.
pub fn modulate(plan: &OfdmPlan, qam_symbols: &[Complex64]) -> Result<Vec<f64>> {
    let nd = plan.n_data();
    if !qam_symbols.len().is_multiple_of(nd) {
        return Err(Error::Dimension(format!(
            "{} symbols is not a multiple of {nd} data subcarriers",
            qam_symbols.len()
        )));
    }
    let modem = OfdmModem::new(plan.n);
    let mut out = Vec::with_capacity(qam_symbols.len() / nd * (plan.n + plan.cp_len));
    for block in qam_symbols.chunks(nd) {
        modem.modulate_block(plan, block, &mut out);
    }
    Ok(out)
}
