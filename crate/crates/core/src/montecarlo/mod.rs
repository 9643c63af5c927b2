//! Sample-level simulation of both links, used to cross-check the
//! analytic models.
//!
//! Work is split into fixed-size chunks, each driven by its own ChaCha
//! stream keyed by `(seed, stream id)`. Chunks run in parallel and are
//! merged in index order, so results do not depend on scheduling.

use crate::channel::{convolve, LedChannel, NoiseModel};
use crate::error::{Error, Result};
use crate::ofdm::{qam_ber, snr_with_gain, ClippingStats, OfdmModel, OfdmModem, OfdmPlan, SquareQam};
use crate::pam::{
    gray_to_level, level, level_to_gray, pam_ber, synthesize, unequalized_ber, JowModel, MmseEqualizer, Waveform,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Minimum number of expected bit errors for a BER run.
pub const MIN_ERRORS: u64 = 100;

const OFDM_STREAMS: u64 = 1 << 40;
const PAM_STREAMS: u64 = 2 << 40;
const BASELINE_STREAMS: u64 = 3 << 40;
const GAUSS_STREAMS: u64 = 4 << 40;

/// Random generator for one `(seed, stream)` pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian(rng: &mut impl Rng, sd: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    sd * z
}

/// Which chain a run simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimScheme {
    DcoOfdm,
    PamJow,
    PamUnequalized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRun {
    pub seed: u64,
    /// OFDM blocks or PAM symbols.
    pub n_symbols: usize,
    pub scheme: SimScheme,
    /// Target relative standard error of the BER estimate.
    pub confidence: f64,
    /// Expected errors required before simulating; see [`MIN_ERRORS`].
    pub min_errors: u64,
}

impl SimRun {
    pub fn new(seed: u64, n_symbols: usize, scheme: SimScheme) -> Self {
        Self {
            seed,
            n_symbols,
            scheme,
            confidence: 0.1,
            min_errors: MIN_ERRORS,
        }
    }

    /// Run sized so the BER estimate reaches relative standard error
    /// `confidence` at `predicted_ber`, and sees at least [`MIN_ERRORS`].
    pub fn sized_for(seed: u64, scheme: SimScheme, predicted_ber: f64, bits_per_symbol: f64, confidence: f64) -> Self {
        let p = predicted_ber.clamp(1e-300, 0.5);
        let bits = ((1.0 - p) / (p * confidence * confidence)).max(MIN_ERRORS as f64 / p);
        Self {
            seed,
            n_symbols: (bits / bits_per_symbol).ceil() as usize,
            scheme,
            confidence,
            min_errors: MIN_ERRORS,
        }
    }

    fn guard(&self, expected_errors: f64) -> Result<()> {
        if expected_errors < self.min_errors as f64 {
            return Err(Error::InsufficientErrors {
                expected: expected_errors,
                required: self.min_errors,
            });
        }
        Ok(())
    }
}

/// Bit error count with a 95% Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerEstimate {
    pub errors: u64,
    pub bits: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl BerEstimate {
    pub fn new(errors: u64, bits: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, bits, 1.959_963_984_540_054);
        Self {
            errors,
            bits,
            ber: if bits == 0 { 0.0 } else { errors as f64 / bits as f64 },
            ci_low,
            ci_high,
        }
    }
}

pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn chunks(total: usize, size: usize) -> Vec<(u64, usize)> {
    (0..total.div_ceil(size))
        .map(|c| (c as u64, size.min(total - c * size)))
        .collect()
}

/// Least-squares Bussgang fit of `clip(s) - mu` against `s - mu`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BussgangFit {
    sxy: f64,
    sxx: f64,
    syy: f64,
    n: u64,
}

impl BussgangFit {
    pub fn push(&mut self, s: f64, clipped: f64, mu: f64) {
        let x = s - mu;
        let y = clipped - mu;
        self.sxy += x * y;
        self.sxx += x * x;
        self.syy += y * y;
        self.n += 1;
    }

    pub fn merge(&mut self, o: &Self) {
        self.sxy += o.sxy;
        self.sxx += o.sxx;
        self.syy += o.syy;
        self.n += o.n;
    }

    pub fn alpha(&self) -> f64 {
        self.sxy / self.sxx
    }

    /// Mean square of the residual `clip(s) - mu - alpha (s - mu)`.
    pub fn distortion_var(&self) -> f64 {
        let a = self.alpha();
        (self.syy - 2.0 * a * self.sxy + a * a * self.sxx) / self.n as f64
    }

    pub fn samples(&self) -> u64 {
        self.n
    }
}

/// Bussgang fit on i.i.d. Gaussian samples `N(i_max/2, sigma_s^2)`.
pub fn bussgang_regression(i_max: f64, sigma_s: f64, n: usize, seed: u64) -> BussgangFit {
    let mu = i_max / 2.0;
    let parts: Vec<BussgangFit> = chunks(n, 1 << 16)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = stream_rng(seed, GAUSS_STREAMS + c);
            let mut fit = BussgangFit::default();
            for _ in 0..len {
                let s = mu + gaussian(&mut rng, sigma_s);
                fit.push(s, s.clamp(0.0, i_max), mu);
            }
            fit
        })
        .collect();
    parts.iter().fold(BussgangFit::default(), |mut a, p| {
        a.merge(p);
        a
    })
}

/// Monte Carlo value of the tail integrals `(a x)^2` below 0 and
/// `(a x - i_max)^2` above `i_max`, with `x ~ N(a i_max / 2, (a sigma_s)^2)`.
pub fn mc_clip_tails(i_max: f64, sigma_s: f64, alpha: f64, n: usize, seed: u64) -> f64 {
    let mean = alpha * i_max / 2.0;
    let sd = alpha * sigma_s;
    let parts: Vec<f64> = chunks(n, 1 << 16)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = stream_rng(seed, GAUSS_STREAMS + (1 << 32) + c);
            let mut acc = 0.0;
            for _ in 0..len {
                let x = mean + gaussian(&mut rng, sd);
                if x < 0.0 {
                    acc += (alpha * x).powi(2);
                } else if x > i_max {
                    acc += (alpha * x - i_max).powi(2);
                }
            }
            acc
        })
        .collect();
    parts.iter().sum::<f64>() / n as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierResult {
    /// Data subcarrier index (1-based).
    pub index: usize,
    pub bits: u32,
    pub ber: BerEstimate,
    pub predicted_ber: f64,
    /// `E|X|^2 / E|X_hat - X|^2` after scalar equalization.
    pub snr: f64,
    pub predicted_snr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmSimResult {
    pub subcarriers: Vec<SubcarrierResult>,
    pub total: BerEstimate,
    pub predicted_ber: f64,
    pub alpha_hat: f64,
    pub clip_var_hat: f64,
    /// `sum (s - clip(s))^2 / sum s^2` over the drive samples.
    pub clipped_energy: f64,
}

#[derive(Default, Clone)]
struct OfdmAcc {
    errors: Vec<u64>,
    err_energy: Vec<f64>,
    fit: BussgangFit,
    energy: f64,
    clipped: f64,
}

impl OfdmAcc {
    fn new(nd: usize) -> Self {
        Self {
            errors: vec![0; nd],
            err_energy: vec![0.0; nd],
            ..Default::default()
        }
    }

    fn merge(&mut self, o: &Self) {
        self.errors.iter_mut().zip(&o.errors).for_each(|(a, b)| *a += b);
        self.err_energy.iter_mut().zip(&o.err_energy).for_each(|(a, b)| *a += b);
        self.fit.merge(&o.fit);
        self.energy += o.energy;
        self.clipped += o.clipped;
    }
}

const OFDM_CHUNK: usize = 128;

/// End-to-end DCO-OFDM: random bits, QAM, modulate, clip, LED filter at
/// `N / T_OFDM`, noise, FFT, scalar equalization by `alpha beta H_i`,
/// slicing. Unloaded subcarriers carry random 4-QAM filler.
pub fn simulate_ofdm(
    plan: &OfdmPlan,
    channel: &LedChannel,
    noise: &NoiseModel,
    run: &SimRun,
    model: &OfdmModel,
) -> Result<OfdmSimResult> {
    let n = plan.n();
    let nd = plan.n_data();
    let led = channel.resampled(plan.sample_rate())?.with_peak(plan.i_max())?;
    let h = led.impulse_response().to_vec();
    let stats = ClippingStats::new(plan.i_max(), plan.signal_std(), model.clip_noise);
    let noise_var = model.noise_variance(noise, n, plan.symbol_time());
    let sd = noise_var.sqrt();

    let gains = model.subcarrier_gains(&led, n, plan.symbol_time())?;
    let mut predicted = Vec::with_capacity(nd);
    for (i, &gain) in (1..=nd).zip(&gains) {
        let gamma = snr_with_gain(plan.beta(), n, gain, noise_var, &stats, model.symbol_energy);
        let b = plan.bits_on(i);
        let ber = if b > 0 { qam_ber(1u64 << b, gamma) } else { 0.0 };
        predicted.push((gamma, ber));
    }
    let expected_errors: f64 = (1..=nd)
        .map(|i| predicted[i - 1].1 * plan.bits_on(i) as f64 * run.n_symbols as f64)
        .sum();
    run.guard(expected_errors)?;

    let modem = OfdmModem::new(n);
    let consts: Vec<SquareQam> = (1..=nd)
        .map(|i| SquareQam::new(plan.bits_on(i).max(2)))
        .collect();
    let eq: Vec<Complex64> = (1..=nd)
        .map(|i| led.discrete_gain(i, n) * stats.alpha * plan.beta())
        .collect();
    let block_len = n + plan.cp_len();
    let warm = h.len().div_ceil(block_len);

    let parts: Vec<OfdmAcc> = chunks(run.n_symbols, OFDM_CHUNK)
        .into_par_iter()
        .map(|(c, blocks)| {
            let mut rng = stream_rng(run.seed, OFDM_STREAMS + c);
            let total = blocks + warm;
            let mut words = Vec::with_capacity(total * nd);
            let mut syms = Vec::with_capacity(total * nd);
            for _ in 0..total {
                for q in &consts {
                    let w = rng.random_range(0..q.size() as u32);
                    words.push(w);
                    syms.push(q.map(w));
                }
            }
            let mut s = Vec::with_capacity(total * block_len);
            for b in syms.chunks(nd) {
                modem.modulate_block(plan, b, &mut s);
            }
            let mut acc = OfdmAcc::new(nd);
            let mu = plan.dc_bias();
            let clipped: Vec<f64> = s.iter().map(|&v| v.clamp(0.0, plan.i_max())).collect();
            for (&a, &b) in s.iter().zip(&clipped).skip(warm * block_len) {
                acc.fit.push(a, b, mu);
                acc.energy += a * a;
                acc.clipped += (a - b).powi(2);
            }
            let mut y = convolve(&clipped, &h);
            y.iter_mut().for_each(|v| *v += gaussian(&mut rng, sd));
            for blk in warm..total {
                let start = blk * block_len + plan.cp_len();
                let bins = modem.demodulate_block(&y[start..start + n]);
                for k in 0..nd {
                    let x_hat = bins[k] / eq[k];
                    let idx = blk * nd + k;
                    acc.err_energy[k] += (x_hat - syms[idx]).norm_sqr();
                    if plan.bits_on(k + 1) > 0 {
                        let d = consts[k].demap(x_hat);
                        acc.errors[k] += (d ^ words[idx]).count_ones() as u64;
                    }
                }
            }
            acc
        })
        .collect();
    let mut acc = OfdmAcc::new(nd);
    parts.iter().for_each(|p| acc.merge(p));

    let blocks = run.n_symbols as u64;
    let subcarriers: Vec<SubcarrierResult> = (1..=nd)
        .map(|i| {
            let bits = plan.bits_on(i);
            SubcarrierResult {
                index: i,
                bits,
                ber: BerEstimate::new(acc.errors[i - 1], blocks * bits as u64),
                predicted_ber: predicted[i - 1].1,
                snr: model.symbol_energy.value() * blocks as f64 / acc.err_energy[i - 1],
                predicted_snr: predicted[i - 1].0,
            }
        })
        .collect();
    let errors: u64 = acc.errors.iter().sum();
    let bits = blocks * plan.bits_per_symbol() as u64;
    let predicted_ber = expected_errors / bits.max(1) as f64;
    Ok(OfdmSimResult {
        subcarriers,
        total: BerEstimate::new(errors, bits),
        predicted_ber,
        alpha_hat: acc.fit.alpha(),
        clip_var_hat: acc.fit.distortion_var(),
        clipped_energy: acc.clipped / acc.energy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PamSimResult {
    pub ber: BerEstimate,
    pub predicted_ber: f64,
    /// Empirical `E{(w^T y + b - s)^2}`.
    pub mse: f64,
    /// Empirical symbol gain and error power around it.
    pub gain: f64,
    pub error_var: f64,
}

#[derive(Default, Clone, Copy)]
struct PamAcc {
    errors: u64,
    se: f64,
    n: u64,
    sxy: f64,
    sxx: f64,
    sx: f64,
    sy: f64,
    syy: f64,
}

impl PamAcc {
    fn merge(&mut self, o: &Self) {
        self.errors += o.errors;
        self.se += o.se;
        self.n += o.n;
        self.sxy += o.sxy;
        self.sxx += o.sxx;
        self.sx += o.sx;
        self.sy += o.sy;
        self.syy += o.syy;
    }

    fn push(&mut self, s: f64, est: f64) {
        self.se += (est - s).powi(2);
        self.n += 1;
        self.sx += s;
        self.sy += est;
        self.sxx += s * s;
        self.sxy += s * est;
        self.syy += est * est;
    }

    fn gain(&self) -> (f64, f64) {
        let n = self.n as f64;
        let cxx = self.sxx / n - (self.sx / n).powi(2);
        let cxy = self.sxy / n - self.sx * self.sy / (n * n);
        let cyy = self.syy / n - (self.sy / n).powi(2);
        let g = cxy / cxx;
        (g, cyy - g * g * cxx)
    }
}

const PAM_CHUNK: usize = 1 << 14;

fn nearest_level(m: u32, v: f64) -> u32 {
    (v * (m - 1) as f64).round().clamp(0.0, (m - 1) as f64) as u32
}

fn random_symbols(rng: &mut ChaCha8Rng, m: u32, count: usize) -> (Vec<u32>, Vec<f64>) {
    let ks: Vec<u32> = (0..count).map(|_| gray_to_level(rng.random_range(0..m))).collect();
    let s = ks.iter().map(|&k| level(m, k)).collect();
    (ks, s)
}

/// End-to-end M-PAM with the MMSE receiver of `model`: Gray-coded symbols,
/// synthesis, LED filter, noise `N_0 R_c` per sample, equalizer at the
/// symbol-centred taps, unbias by the symbol gain, nearest-level slicing.
pub fn simulate_pam(
    model: &JowModel,
    waveform: &Waveform,
    eq: &MmseEqualizer,
    run: &SimRun,
) -> Result<PamSimResult> {
    let cfg = *model.config();
    let m = cfg.m;
    let ev = model.evaluate_filter(waveform.samples(), eq)?;
    let predicted = pam_ber(m, crate::pam::filter_sinr(ev.gain, ev.error_var));
    let bits_per = (m as f64).log2();
    run.guard(predicted * run.n_symbols as f64 * bits_per)?;
    let geom = *model.geometry();
    let h = model.impulse().to_vec();
    let sd = model.noise_var().sqrt();
    let l_f = cfg.l_f as i64;
    let lead = ((geom.center + geom.l_w as i64) / l_f + 2) as usize;
    let tail = lead;
    let gain = ev.gain;

    let parts: Vec<PamAcc> = chunks(run.n_symbols, PAM_CHUNK)
        .into_par_iter()
        .map(|(c, count)| {
            let mut rng = stream_rng(run.seed, PAM_STREAMS + c);
            let total = lead + count + tail;
            let (ks, s) = random_symbols(&mut rng, m, total);
            let x = synthesize(waveform, &s);
            let mut y = convolve(&x, &h);
            y.iter_mut().for_each(|v| *v += gaussian(&mut rng, sd));
            let mut acc = PamAcc::default();
            for sym in lead..lead + count {
                let base = sym as i64 * l_f + geom.first_tap();
                let est = eq.b
                    + eq
                        .w
                        .iter()
                        .enumerate()
                        .map(|(j, w)| w * y[(base + j as i64) as usize])
                        .sum::<f64>();
                acc.push(s[sym], est);
                let unbiased = if gain > 0.0 { (est - 0.5) / gain + 0.5 } else { 0.5 };
                let d = nearest_level(m, unbiased);
                acc.errors += (level_to_gray(d) ^ level_to_gray(ks[sym])).count_ones() as u64;
            }
            acc
        })
        .collect();
    let mut acc = PamAcc::default();
    parts.iter().for_each(|p| acc.merge(p));
    let (g, e) = acc.gain();
    Ok(PamSimResult {
        ber: BerEstimate::new(acc.errors, acc.n * bits_per as u64),
        predicted_ber: predicted,
        mse: acc.se / acc.n as f64,
        gain: g,
        error_var: e,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineResult {
    pub analytic_ber: f64,
    pub simulated: BerEstimate,
}

/// Rectangular full-scale pulse with an integrate-over-symbol receiver
/// and fixed midpoint thresholds. `channel` must be sampled at the chip rate.
pub fn unequalized_pam_baseline(
    m: u32,
    l_f: usize,
    channel: &LedChannel,
    noise: &NoiseModel,
    run: &SimRun,
) -> Result<BaselineResult> {
    let h = channel.impulse_response().to_vec();
    let i_max = channel.i_max();
    let noise_var = noise.sample_variance(channel.sample_rate());
    let analytic = unequalized_ber(m, l_f, &h, i_max, noise_var);
    let bits_per = (m as f64).log2();
    run.guard(analytic * run.n_symbols as f64 * bits_per)?;
    let sd = noise_var.sqrt();
    let lead = h.len().div_ceil(l_f) + 1;
    let rect = Waveform::rectangular(l_f, i_max);
    let norm = i_max * l_f as f64;

    let parts: Vec<(u64, u64)> = chunks(run.n_symbols, PAM_CHUNK)
        .into_par_iter()
        .map(|(c, count)| {
            let mut rng = stream_rng(run.seed, BASELINE_STREAMS + c);
            let (ks, s) = random_symbols(&mut rng, m, lead + count);
            let x = synthesize(&rect, &s);
            let mut y = convolve(&x, &h);
            y.iter_mut().for_each(|v| *v += gaussian(&mut rng, sd));
            let mut errors = 0;
            for sym in lead..lead + count {
                let z: f64 = y[sym * l_f..(sym + 1) * l_f].iter().sum::<f64>() / norm;
                let d = nearest_level(m, z);
                errors += (level_to_gray(d) ^ level_to_gray(ks[sym])).count_ones() as u64;
            }
            (errors, count as u64)
        })
        .collect();
    let errors = parts.iter().map(|p| p.0).sum();
    let symbols: u64 = parts.iter().map(|p| p.1).sum();
    Ok(BaselineResult {
        analytic_ber: analytic,
        simulated: BerEstimate::new(errors, symbols * bits_per as u64),
    })
}
