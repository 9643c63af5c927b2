//! Per-subcarrier bit loading under a BER cap and grid search over the
//! modulation scale and symbol time.

use super::{qam_ber, signal_std, snr_with_gain, ClippingStats, CyclicPrefix, OfdmModel, OfdmPlan};
use crate::channel::{LedChannel, NoiseModel};
use crate::error::{invalid, Error, Result};
use rayon::prelude::*;

/// Knobs shared by [`bit_load`] and [`optimize_ofdm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadingOptions {
    pub model: OfdmModel,
    pub cyclic_prefix: CyclicPrefix,
    /// Largest per-subcarrier load considered (12 bits = 4096-QAM).
    pub max_bits: u32,
}

impl Default for LoadingOptions {
    fn default() -> Self {
        Self {
            model: OfdmModel::default(),
            cyclic_prefix: CyclicPrefix::Auto,
            max_bits: 12,
        }
    }
}

/// Largest even load in `2..=max_bits` whose BER stays below `b_max`, or 0.
pub fn bits_for_snr(gamma: f64, b_max: f64, max_bits: u32) -> u32 {
    (1..=max_bits / 2)
        .map(|k| 2 * k)
        .filter(|&b| qam_ber(1u64 << b, gamma) < b_max)
        .max()
        .unwrap_or(0)
}

fn check_b_max(b_max: f64) -> Result<()> {
    if b_max > 0.0 && b_max < 0.5 {
        Ok(())
    } else {
        Err(invalid("b_max", format!("must lie in (0, 0.5), got {b_max}")))
    }
}

#[allow(clippy::too_many_arguments)]
fn load_with_stats(
    channel: &LedChannel,
    noise: &NoiseModel,
    n: usize,
    beta: f64,
    symbol_time: f64,
    b_max: f64,
    stats: &ClippingStats,
    opts: &LoadingOptions,
) -> Result<OfdmPlan> {
    let noise_var = opts.model.noise_variance(noise, n, symbol_time);
    let bits = opts
        .model
        .subcarrier_gains(channel, n, symbol_time)?
        .into_iter()
        .map(|gain| {
            let gamma = snr_with_gain(beta, n, gain, noise_var, stats, opts.model.symbol_energy);
            bits_for_snr(gamma, b_max, opts.max_bits)
        })
        .collect();
    let cp = opts.cyclic_prefix.length(channel, n, symbol_time)?;
    OfdmPlan::new(n, symbol_time, beta, channel.i_max(), bits, cp)
}

/// Independently loads each data subcarrier with the largest square QAM
/// meeting `b_max`. The peak limit is taken from `channel`.
pub fn bit_load(
    channel: &LedChannel,
    noise: &NoiseModel,
    n: usize,
    beta: f64,
    symbol_time: f64,
    b_max: f64,
    opts: &LoadingOptions,
) -> Result<OfdmPlan> {
    check_b_max(b_max)?;
    if n < 4 || !n.is_power_of_two() {
        return Err(invalid("n_subcarriers", format!("{n} is not a power of two >= 4")));
    }
    let stats = ClippingStats::new(channel.i_max(), signal_std(beta, n), opts.model.clip_noise);
    load_with_stats(channel, noise, n, beta, symbol_time, b_max, &stats, opts)
}

/// One evaluated `(beta, T_OFDM)` grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub beta: f64,
    pub symbol_time: f64,
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct OfdmOptimum {
    pub plan: OfdmPlan,
    pub rate: f64,
    /// Best rate over the symbol-time grid for each `beta`, in grid order.
    pub curve: Vec<RatePoint>,
}

/// Exhaustive search over `betas x symbol_times`. Ties go to the smaller
/// `beta`, then the smaller symbol time.
pub fn optimize_ofdm(
    channel: &LedChannel,
    noise: &NoiseModel,
    b_max: f64,
    n: usize,
    betas: &[f64],
    symbol_times: &[f64],
    opts: &LoadingOptions,
) -> Result<OfdmOptimum> {
    check_b_max(b_max)?;
    if betas.is_empty() {
        return Err(Error::EmptyGrid("beta"));
    }
    if symbol_times.is_empty() {
        return Err(Error::EmptyGrid("symbol_time"));
    }
    let mut betas = betas.to_vec();
    betas.sort_by(f64::total_cmp);
    let mut times = symbol_times.to_vec();
    times.sort_by(f64::total_cmp);

    let per_beta: Vec<(RatePoint, OfdmPlan)> = betas
        .par_iter()
        .map(|&beta| {
            let stats = ClippingStats::new(channel.i_max(), signal_std(beta, n), opts.model.clip_noise);
            let mut best: Option<(RatePoint, OfdmPlan)> = None;
            for &t in &times {
                let plan = load_with_stats(channel, noise, n, beta, t, b_max, &stats, opts)?;
                let rate = plan.throughput();
                if best.as_ref().is_none_or(|(p, _)| rate > p.rate) {
                    let point = RatePoint {
                        beta,
                        symbol_time: t,
                        rate,
                    };
                    best = Some((point, plan));
                }
            }
            Ok(best.expect("non-empty symbol-time grid"))
        })
        .collect::<Result<_>>()?;

    let mut winner = 0;
    for (k, (p, _)) in per_beta.iter().enumerate() {
        if p.rate > per_beta[winner].0.rate {
            winner = k;
        }
    }
    let (point, plan) = per_beta[winner].clone();
    Ok(OfdmOptimum {
        plan,
        rate: point.rate,
        curve: per_beta.into_iter().map(|(p, _)| p).collect(),
    })
}
