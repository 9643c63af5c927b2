//! Bit-rate maximization over constellation size and chip rate, and the
//! unequalized rectangular-pulse baseline.

use super::{
    alphabet_variance, design_waveform, level, level_to_gray, pam_ber, DesignOptions, JowModel, PamConfig,
    SigmaMode, Waveform,
};
use crate::channel::{convolve, LedChannel, NoiseModel};
use crate::error::{invalid, Error, Result};
use libm::erfc;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest number of symbol patterns enumerated exactly by [`unequalized_ber`].
const MAX_PATTERNS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Designed waveform with MMSE equalization.
    Jow,
    /// Full-scale rectangular pulse with MMSE equalization.
    MmseOnly,
    /// Full-scale rectangular pulse, integrate-and-threshold receiver.
    Unequalized,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Jow => "mpam-jow",
            Scheme::MmseOnly => "mpam-mmse",
            Scheme::Unequalized => "mpam-unequalized",
        }
    }
}

/// Search grid and receiver settings for [`maximize_rate`].
#[derive(Debug, Clone, PartialEq)]
pub struct RateSearch {
    pub m_grid: Vec<u32>,
    pub r_c_grid: Vec<f64>,
    pub l_f: usize,
    /// Equalizer length; `None` selects [`PamConfig::default_l_w`].
    pub l_w: Option<usize>,
    pub mode: SigmaMode,
    pub design: DesignOptions,
}

#[derive(Debug, Clone)]
pub struct PamOptimum {
    pub scheme: Scheme,
    /// `None` when no grid point meets the BER cap.
    pub config: Option<PamConfig>,
    pub waveform: Option<Waveform>,
    pub rate: f64,
    pub sinr: f64,
    pub ber: f64,
    pub kkt_residual: f64,
    pub diagnostic: Option<String>,
}

impl PamOptimum {
    pub fn feasible(&self) -> bool {
        self.config.is_some()
    }
}

struct Candidate {
    m: u32,
    r_c: f64,
    rate: f64,
}

struct Outcome {
    config: PamConfig,
    waveform: Waveform,
    sinr: f64,
    ber: f64,
    kkt: f64,
}

fn evaluate(
    channel: &LedChannel,
    noise: &NoiseModel,
    search: &RateSearch,
    scheme: Scheme,
    b_max: f64,
    cand: &Candidate,
) -> Result<Option<Outcome>> {
    let led = channel.resampled(cand.r_c)?;
    let h = led.impulse_response();
    let l_w = search.l_w.unwrap_or_else(|| PamConfig::default_l_w(h.len(), search.l_f));
    let config = PamConfig::new(cand.m, cand.r_c, search.l_f, l_w)?;
    let noise_var = noise.sample_variance(cand.r_c);
    let i_max = channel.i_max();
    let rect = Waveform::rectangular(search.l_f, i_max);
    let (waveform, sinr, kkt) = match scheme {
        Scheme::Unequalized => {
            let ber = unequalized_ber(cand.m, search.l_f, h, i_max, noise_var);
            return Ok((ber < b_max).then_some(Outcome {
                config,
                waveform: rect,
                sinr: f64::NAN,
                ber,
                kkt: 0.0,
            }));
        }
        Scheme::MmseOnly | Scheme::Jow => {
            let model = JowModel::new(h, config, search.mode, noise_var)?;
            if search.mode == SigmaMode::Corrected && pam_ber(cand.m, model.sinr_upper_bound(i_max)) >= b_max {
                return Ok(None);
            }
            if scheme == Scheme::MmseOnly {
                let sinr = model.evaluate(rect.samples())?.sinr;
                (rect, sinr, 0.0)
            } else {
                let d = design_waveform(&model, i_max, &search.design)?;
                (d.waveform, d.sinr, d.kkt_residual)
            }
        }
    };
    let ber = pam_ber(cand.m, sinr);
    Ok((ber < b_max).then_some(Outcome {
        config,
        waveform,
        sinr,
        ber,
        kkt,
    }))
}

/// Returns the highest-rate grid point whose BER is strictly below
/// `b_max`; equal rates prefer the smaller `M`.
pub fn maximize_rate(
    channel: &LedChannel,
    noise: &NoiseModel,
    b_max: f64,
    search: &RateSearch,
    scheme: Scheme,
) -> Result<PamOptimum> {
    if search.m_grid.is_empty() {
        return Err(Error::EmptyGrid("m_pam"));
    }
    if search.r_c_grid.is_empty() {
        return Err(Error::EmptyGrid("r_c"));
    }
    if !(b_max > 0.0 && b_max < 0.5) {
        return Err(invalid("b_max", format!("must lie in (0, 0.5), got {b_max}")));
    }
    let mut cands: Vec<Candidate> = search
        .m_grid
        .iter()
        .flat_map(|&m| {
            search.r_c_grid.iter().map(move |&r_c| Candidate {
                m,
                r_c,
                rate: r_c * (m as f64).log2() / search.l_f as f64,
            })
        })
        .collect();
    cands.sort_by(|a, b| b.rate.total_cmp(&a.rate).then(a.m.cmp(&b.m)));

    let chunk = rayon::current_num_threads().max(1);
    for group in cands.chunks(chunk) {
        let outcomes: Vec<Option<Outcome>> = group
            .par_iter()
            .map(|c| evaluate(channel, noise, search, scheme, b_max, c))
            .collect::<Result<_>>()?;
        if let Some((cand, out)) = group.iter().zip(outcomes).find_map(|(c, o)| o.map(|o| (c, o))) {
            return Ok(PamOptimum {
                scheme,
                config: Some(out.config),
                waveform: Some(out.waveform),
                rate: cand.rate,
                sinr: out.sinr,
                ber: out.ber,
                kkt_residual: out.kkt,
                diagnostic: None,
            });
        }
    }
    Ok(PamOptimum {
        scheme,
        config: None,
        waveform: None,
        rate: 0.0,
        sinr: 0.0,
        ber: f64::NAN,
        kkt_residual: 0.0,
        diagnostic: Some(format!("no grid point meets BER < {b_max:e}")),
    })
}

/// Normalized decision-statistic taps of the unequalized receiver: the
/// receiver sums the `L_f` samples of a symbol and divides by `i_max L_f`,
/// so tap `j` is the share of symbol `m - j` in that sum.
pub fn unequalized_taps(l_f: usize, h: &[f64]) -> Vec<f64> {
    let mut pulse = vec![1.0; l_f];
    pulse.resize(l_f + h.len() - 1, 0.0);
    let p = convolve(&pulse, h);
    p.chunks(l_f).map(|c| c.iter().sum::<f64>() / l_f as f64).collect()
}

/// Analytic Gray-coded BER of the unequalized receiver with fixed
/// midpoint thresholds. The leading ISI taps are enumerated exactly (up to
/// 4096 patterns); the remaining ones are folded into a Gaussian term.
pub fn unequalized_ber(m: u32, l_f: usize, h: &[f64], i_max: f64, noise_var: f64) -> f64 {
    let taps = unequalized_taps(l_f, h);
    let isi = &taps[1..];
    let mut k = 0;
    while k < isi.len() && (m as usize).pow(k as u32 + 1) <= MAX_PATTERNS {
        k += 1;
    }
    let (exact, rest) = isi.split_at(k);
    let var = alphabet_variance(m);
    let rest_mean: f64 = 0.5 * rest.iter().sum::<f64>();
    let rest_var: f64 = var * rest.iter().map(|c| c * c).sum::<f64>();
    let total_var = noise_var / (i_max * i_max * l_f as f64) + rest_var;
    let sd = total_var.sqrt();
    let thresholds: Vec<f64> = (0..m - 1).map(|j| (j as f64 + 0.5) / (m - 1) as f64).collect();
    let bits = (m as f64).log2();

    let patterns = (m as usize).pow(k as u32);
    let mut acc = 0.0;
    for pat in 0..patterns {
        let mut idx = pat;
        let mut offset = rest_mean;
        for c in exact {
            offset += c * level(m, (idx % m as usize) as u32);
            idx /= m as usize;
        }
        for sent in 0..m {
            let mean = taps[0] * level(m, sent) + offset;
            // P(decide l) from the Gaussian mass between thresholds.
            let cdf = |t: f64| {
                if sd == 0.0 {
                    if mean < t { 1.0 } else { 0.0 }
                } else {
                    0.5 * erfc((mean - t) / (sd * std::f64::consts::SQRT_2))
                }
            };
            let mut lower = 0.0;
            for decided in 0..m {
                let upper = if decided + 1 < m { cdf(thresholds[decided as usize]) } else { 1.0 };
                let p = (upper - lower).max(0.0);
                lower = upper;
                if decided != sent {
                    acc += p * (level_to_gray(decided) ^ level_to_gray(sent)).count_ones() as f64;
                }
            }
        }
    }
    acc / (patterns as f64 * m as f64 * bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn search(l_f: usize) -> RateSearch {
        RateSearch {
            m_grid: vec![2, 4, 8],
            r_c_grid: (1..=24).map(|k| 25e6 * k as f64).collect(),
            l_f,
            l_w: None,
            mode: SigmaMode::Corrected,
            design: DesignOptions::default(),
        }
    }

    fn table(i_max: f64) -> (LedChannel, NoiseModel) {
        (
            LedChannel::new(20e6, i_max, 100e6).unwrap(),
            NoiseModel::new(3e-9).unwrap(),
        )
    }

    #[test]
    fn taps_sum_to_one() {
        let led = LedChannel::new(20e6, 1.0, 200e6).unwrap();
        let taps = unequalized_taps(4, led.impulse_response());
        assert!((taps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(unequalized_taps(3, &[1.0]), vec![1.0]);
    }

    #[test]
    fn unequalized_awgn_limit() {
        // Memoryless channel: exact M-PAM in white noise, Gray coded.
        let noise_var = 0.02;
        let i_max = 1.0;
        for m in [2u32, 4] {
            let ber = unequalized_ber(m, 1, &[1.0], i_max, noise_var);
            let gamma = 1.0 / (8.0 * noise_var);
            let approx = pam_ber(m, gamma);
            assert!(ber / approx > 0.5 && ber / approx < 2.0, "{ber} vs {approx}");
        }
        let exact = unequalized_ber(2, 1, &[1.0], 1.0, 0.02);
        assert!((exact - 0.5 * erfc(0.5 / (0.04f64).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn unequalized_saturates_under_heavy_isi() {
        let led = LedChannel::new(20e6, 10.0, 2e9).unwrap();
        let ber = unequalized_ber(4, 1, led.impulse_response(), 10.0, 1e-12);
        assert!(ber > 0.2, "{ber}");
    }

    #[test]
    fn single_point_grid_is_returned() {
        let (led, noise) = table(8.0);
        let s = RateSearch {
            m_grid: vec![2],
            r_c_grid: vec![50e6],
            ..search(2)
        };
        let opt = maximize_rate(&led, &noise, 1e-3, &s, Scheme::MmseOnly).unwrap();
        assert!(opt.feasible());
        assert_eq!(opt.rate, 25e6);
        assert!(opt.ber < 1e-3);
    }

    #[test]
    fn infeasible_grid_reports_zero_rate() {
        let (led, noise) = table(1e-3);
        let opt = maximize_rate(&led, &noise, 1e-3, &search(2), Scheme::Jow).unwrap();
        assert!(!opt.feasible());
        assert_eq!(opt.rate, 0.0);
        assert!(opt.diagnostic.is_some());
    }

    #[test]
    fn looser_cap_never_lowers_rate() {
        let (led, noise) = table(4.0);
        for scheme in [Scheme::MmseOnly, Scheme::Unequalized] {
            let tight = maximize_rate(&led, &noise, 1e-4, &search(2), scheme).unwrap();
            let loose = maximize_rate(&led, &noise, 1e-2, &search(2), scheme).unwrap();
            assert!(loose.rate >= tight.rate);
        }
    }

    #[test]
    fn empty_grids_rejected() {
        let (led, noise) = table(4.0);
        let s = RateSearch {
            m_grid: vec![],
            ..search(2)
        };
        assert_eq!(
            maximize_rate(&led, &noise, 1e-3, &s, Scheme::Jow).unwrap_err(),
            Error::EmptyGrid("m_pam")
        );
    }
}
