//! Invariant suite: each check reports a measured value against its limit.

use super::config::ExperimentConfig;
use super::sweeps::{best_ofdm, channel_at, noise, rate_search};
use crate::channel::{LedChannel, NoiseModel, ENERGY_CAPTURE};
use crate::error::Result;
use crate::montecarlo::{bussgang_regression, mc_clip_tails, simulate_ofdm, simulate_pam, SimRun, SimScheme};
use crate::ofdm::{
    bussgang_alpha, clipping_noise_variance, qam_ber, signal_std, subcarrier_snr, ClipNoiseModel, ClippingStats,
    OfdmModel, OfdmPlan,
};
use crate::pam::{
    build_toeplitz, design_waveform, filter_sinr, isi_noise_power, maximize_rate, pam_ber, sigma_matrix,
    DesignOptions, JowModel, MmseEqualizer, PamConfig, Scheme, SigmaMode,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Reported but never failing.
    Info,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: String,
    pub limit: String,
    pub status: Status,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        };
        write!(f, "{tag} {}: {} (limit {})", self.name, self.measured, self.limit)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    fn add(&mut self, name: impl Into<String>, measured: String, limit: impl Into<String>, ok: bool) {
        self.checks.push(Check {
            name: name.into(),
            measured,
            limit: limit.into(),
            status: if ok { Status::Pass } else { Status::Fail },
        });
    }

    fn info(&mut self, name: impl Into<String>, measured: String, limit: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            measured,
            limit: limit.into(),
            status: Status::Info,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.checks.iter().filter(|c| c.status == Status::Fail).count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn channel_checks(cfg: &ExperimentConfig, r: &mut Report) -> Result<()> {
    let led = LedChannel::new(cfg.channel.f3db_hz, cfg.channel.peak_power_mw, 8.0 * cfg.channel.f3db_hz)?;
    let dc: f64 = led.impulse_response().iter().sum();
    r.add("channel.dc_gain", format!("{dc:.12}"), "|g - 1| < 1e-9", (dc - 1.0).abs() < 1e-9);
    let h3 = led.frequency_response(cfg.channel.f3db_hz).norm_sqr();
    r.add("channel.half_power_at_f3db", format!("{h3:.12}"), "|g - 0.5| < 1e-9", (h3 - 0.5).abs() < 1e-9);
    let x: Vec<f64> = (0..200).map(|k| ((k * 37) % 23) as f64 - 6.0).collect();
    let once = led.clip(&x);
    let idempotent = led.clip(&once) == once && once.iter().all(|v| (0.0..=led.i_max()).contains(v));
    r.add("channel.clip_projection", idempotent.to_string(), "idempotent, in range", idempotent);
    let ratio = (-2.0 * std::f64::consts::PI * led.f3db() / led.sample_rate()).exp();
    let captured = 1.0 - ratio.powi(2 * led.impulse_len() as i32);
    r.add(
        "channel.energy_capture",
        format!("{captured:.6} with {} taps", led.impulse_len()),
        format!(">= {ENERGY_CAPTURE}"),
        captured >= ENERGY_CAPTURE - 1e-12,
    );
    Ok(())
}

fn clipping_checks(cfg: &ExperimentConfig, r: &mut Report) {
    let i_max = cfg.channel.peak_power_mw;
    let seed = cfg.montecarlo.seed;
    for (k, ratio) in [0.1, 0.25, 0.4].into_iter().enumerate() {
        let sigma = ratio * i_max;
        let fit = bussgang_regression(i_max, sigma, 1_000_000, seed.wrapping_add(k as u64));
        let alpha = bussgang_alpha(i_max, sigma);
        let d = (fit.alpha() - alpha).abs();
        r.add(
            format!("ofdm.bussgang_alpha[sigma/i_max={ratio}]"),
            format!("fit {:.6} vs {alpha:.6}", fit.alpha()),
            "|diff| <= 0.01",
            d <= 0.01,
        );
        if k == 2 {
            let model = clipping_noise_variance(i_max, sigma, alpha, ClipNoiseModel::Bussgang);
            let e = rel(fit.distortion_var(), model);
            r.add(
                format!("ofdm.distortion_variance[sigma/i_max={ratio}]"),
                format!("fit {:.6e} vs {model:.6e}", fit.distortion_var()),
                "rel <= 0.02",
                e <= 0.02,
            );
        }
    }
    let sigma = 0.4 * i_max;
    let alpha = bussgang_alpha(i_max, sigma);
    let quad = clipping_noise_variance(i_max, sigma, alpha, ClipNoiseModel::AsWritten);
    let mc = mc_clip_tails(i_max, sigma, alpha, 10_000_000, seed);
    r.add(
        "ofdm.clip_integral_vs_monte_carlo",
        format!("quadrature {quad:.6e} vs {mc:.6e}"),
        "rel <= 0.01",
        rel(mc, quad) <= 0.01,
    );
}

fn ofdm_checks(cfg: &ExperimentConfig, r: &mut Report) -> Result<()> {
    let mut maxima = Vec::new();
    for &n in &cfg.ofdm.n_subcarriers {
        let opt = best_ofdm(cfg, n, cfg.channel.peak_power_mw)?;
        let first = opt.curve.first().map_or(0.0, |p| p.rate);
        let last = opt.curve.last().map_or(0.0, |p| p.rate);
        let interior = opt.rate > 0.0 && first < 0.8 * opt.rate && last < 0.8 * opt.rate;
        r.add(
            format!("ofdm.interior_maximum[N={n}]"),
            format!("ends {:.3} / {:.3} of peak", first / opt.rate, last / opt.rate),
            "< 0.8",
            interior,
        );
        maxima.push((n, opt));
    }
    if maxima.len() > 1 {
        let rates: Vec<f64> = maxima.iter().map(|(_, o)| o.rate).collect();
        let hi = rates.iter().cloned().fold(f64::MIN, f64::max);
        let lo = rates.iter().cloned().fold(f64::MAX, f64::min);
        r.add("ofdm.n_invariance", format!("spread {:.4}", hi / lo - 1.0), "<= 0.10", hi / lo - 1.0 <= 0.10);
    }

    // End-to-end check of the optimum of the first N.
    let (_, opt) = &maxima[0];
    let channel = channel_at(cfg, cfg.channel.peak_power_mw)?;
    let noise = noise(cfg)?;
    let model = cfg.ofdm.model();
    let run = SimRun {
        min_errors: 0,
        ..SimRun::new(cfg.montecarlo.seed, 2000, SimScheme::DcoOfdm)
    };
    let sim = simulate_ofdm(&opt.plan, &channel, &noise, &run, &model)?;
    r.add(
        "ofdm.clipped_energy_at_optimum",
        format!("{:.4}%", 100.0 * sim.clipped_energy),
        "< 0.1%",
        sim.clipped_energy < 1e-3,
    );
    let worst = sim
        .subcarriers
        .iter()
        .map(|s| rel(s.snr, s.predicted_snr))
        .fold(0.0, f64::max);
    r.add(
        "ofdm.subcarrier_snr_vs_simulation",
        format!("max rel {worst:.4}"),
        "<= 0.15",
        worst <= 0.15,
    );
    ber_check_ofdm(cfg, r)
}

/// Uniform 16-QAM loading with the noise tuned for a predicted BER of 1e-3.
fn ber_check_ofdm(cfg: &ExperimentConfig, r: &mut Report) -> Result<()> {
    let n = 64;
    let i_max = cfg.channel.peak_power_mw;
    let symbol_time = n as f64 / (5.0 * cfg.channel.f3db_hz);
    let beta = 0.15 * i_max * n as f64 / ((n - 2) as f64).sqrt();
    let channel = channel_at(cfg, i_max)?;
    let model = OfdmModel::default();
    let cp = cfg.cyclic_prefix().length(&channel, n, symbol_time)?;
    let plan = OfdmPlan::new(n, symbol_time, beta, i_max, vec![4; n / 2 - 1], cp)?;
    let stats = ClippingStats::new(i_max, signal_std(beta, n), model.clip_noise);
    let mean_ber = |n0: f64| -> Result<f64> {
        let noise = NoiseModel::new(n0)?;
        let mut s = 0.0;
        for i in 1..n / 2 {
            s += qam_ber(16, subcarrier_snr(&plan, &channel, &noise, &stats, i, &model)?);
        }
        Ok(s / (n / 2 - 1) as f64)
    };
    let n0 = bisect_log(1e-14, 1e-3, |n0| mean_ber(n0).map(|b| b - 1e-3))?;
    let predicted = mean_ber(n0)?;
    let run = SimRun::sized_for(cfg.montecarlo.seed, SimScheme::DcoOfdm, predicted, plan.bits_per_symbol() as f64, 0.05);
    let sim = simulate_ofdm(&plan, &channel, &NoiseModel::new(n0)?, &run, &model)?;
    let ratio = sim.total.ber / sim.predicted_ber;
    r.add(
        "ofdm.ber_vs_simulation",
        format!(
            "sim {:.4e} vs {:.4e} ({} errors)",
            sim.total.ber, sim.predicted_ber, sim.total.errors
        ),
        "ratio in [0.5, 2], >= 100 errors",
        (0.5..=2.0).contains(&ratio) && sim.total.errors >= 100,
    );
    Ok(())
}

/// Root of an increasing `f` on a log-spaced bracket.
fn bisect_log(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    for _ in 0..80 {
        let mid = (lo * hi).sqrt();
        if f(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Random normalized dispersive response of length `len`.
pub fn random_channel(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let decay: f64 = rng.random_range(0.3..0.8);
    let h: Vec<f64> = (0..len).map(|k| decay.powi(k as i32) * rng.random_range(0.5..1.5)).collect();
    let s: f64 = h.iter().sum();
    h.into_iter().map(|v| v / s).collect()
}

fn mmse_checks(cfg: &ExperimentConfig, r: &mut Report) -> Result<()> {
    let mode = cfg.pam.sigma_mode;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.montecarlo.seed ^ 0xa11ce);
    let mut worst: f64 = 0.0;
    let mut worst_step: f64 = f64::INFINITY;
    for k in 0..5 {
        let len = rng.random_range(4..10);
        let h = random_channel(&mut rng, len);
        let l_f = rng.random_range(2..5);
        let l_w = PamConfig::default_l_w(h.len(), l_f);
        let config = PamConfig::new(4, 1e8, l_f, l_w)?;
        let noise_var = 10f64.powf(rng.random_range(-3.0..-1.5));
        let jm = JowModel::new(&h, config, mode, noise_var)?;
        let f: Vec<f64> = (0..l_f).map(|_| rng.random_range(0.3..1.0)).collect();
        let waveform = crate::pam::Waveform::new(f.clone(), 1.0)?;
        let eq = jm.equalizer(&f)?;
        let ev = jm.evaluate(&f)?;
        let run = SimRun {
            min_errors: 0,
            ..SimRun::new(cfg.montecarlo.seed.wrapping_add(k), 400_000, SimScheme::PamJow)
        };
        let sim = simulate_pam(&jm, &waveform, &eq, &run)?;
        worst = worst.max(rel(sim.mse, ev.mse));

        let hm = build_toeplitz(&h, l_w)?;
        let mom = sigma_matrix(jm.geometry(), &f, 4, mode);
        let base = isi_noise_power(&eq, &hm, &mom, noise_var)?;
        for _ in 0..20 {
            let mut d = DVector::from_fn(l_w, |_, _| rng.random_range(-1.0..1.0));
            d /= d.norm();
            let pert = MmseEqualizer {
                w: &eq.w + d * 1e-3,
                ..eq.clone()
            };
            worst_step = worst_step.min(isi_noise_power(&pert, &hm, &mom, noise_var)? - base);
        }
    }
    let name = "pam.mmse_vs_simulation";
    let measured = format!("max rel {worst:.4}");
    if mode == SigmaMode::Corrected {
        r.add(name, measured, "<= 0.02", worst <= 0.02);
    } else {
        r.info(name, measured, "informational in as-written mode");
    }
    r.add(
        "pam.mmse_stationary",
        format!("min change {worst_step:.3e}"),
        ">= -1e-9",
        worst_step >= -1e-9,
    );
    Ok(())
}

fn pam_ber_check(cfg: &ExperimentConfig, r: &mut Report) -> Result<()> {
    let r_c = 20.0 * cfg.channel.f3db_hz;
    let led = LedChannel::new(cfg.channel.f3db_hz, 1.0, r_c)?;
    let h = led.impulse_response().to_vec();
    let l_f = 4;
    let config = PamConfig::new(4, r_c, l_f, PamConfig::default_l_w(h.len(), l_f))?;
    let waveform = crate::pam::Waveform::rectangular(l_f, 1.0);
    let predicted = |nv: f64| -> Result<f64> {
        let jm = JowModel::new(&h, config, SigmaMode::Corrected, nv)?;
        let ev = jm.evaluate_filter(waveform.samples(), &jm.equalizer(waveform.samples())?)?;
        Ok(pam_ber(4, filter_sinr(ev.gain, ev.error_var)))
    };
    let nv = bisect_log(1e-9, 10.0, |nv| predicted(nv).map(|b| b - 1e-3))?;
    let jm = JowModel::new(&h, config, SigmaMode::Corrected, nv)?;
    let eq = jm.equalizer(waveform.samples())?;
    let run = SimRun::sized_for(cfg.montecarlo.seed, SimScheme::PamJow, predicted(nv)?, 2.0, 0.05);
    let sim = simulate_pam(&jm, &waveform, &eq, &run)?;
    let ratio = sim.ber.ber / sim.predicted_ber;
    r.add(
        "pam.ber_vs_simulation",
        format!(
            "sim {:.4e} vs {:.4e} ({} errors)",
            sim.ber.ber, sim.predicted_ber, sim.ber.errors
        ),
        "ratio in [0.5, 2], >= 100 errors",
        (0.5..=2.0).contains(&ratio) && sim.ber.errors >= 100,
    );
    Ok(())
}

fn design_checks(cfg: &ExperimentConfig, r: &mut Report) -> Result<()> {
    let opts = DesignOptions {
        seed: cfg.pam.design_seed,
        ..Default::default()
    };
    let i_max = 2.0;
    let flat = JowModel::new(&[1.0], PamConfig::new(2, 1e8, 4, 3)?, SigmaMode::Corrected, 0.5)?;
    let d = design_waveform(&flat, i_max, &opts)?;
    let dev = d.waveform.samples().iter().map(|v| (v - i_max).abs()).fold(0.0, f64::max);
    r.add(
        "pam.design_memoryless_full_scale",
        format!("max dev {:.3e} i_max", dev / i_max),
        "<= 1e-3",
        dev <= 1e-3 * i_max,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.montecarlo.seed ^ 0xd351);
    let mut margin = f64::INFINITY;
    for _ in 0..3 {
        let len = rng.random_range(4..10);
        let h = random_channel(&mut rng, len);
        let l_f = rng.random_range(2..5);
        let config = PamConfig::new(4, 1e8, l_f, PamConfig::default_l_w(h.len(), l_f))?;
        let jm = JowModel::new(&h, config, cfg.pam.sigma_mode, 10f64.powf(rng.random_range(-3.0..-1.0)))?;
        let d = design_waveform(&jm, 1.0, &opts)?;
        margin = margin.min(d.sinr - d.rect_sinr);
    }
    r.add(
        "pam.design_dominates_rectangular",
        format!("min gain {margin:.3e}"),
        ">= 0",
        margin >= 0.0,
    );
    Ok(())
}

fn ordering_check(cfg: &ExperimentConfig, r: &mut Report) -> Result<()> {
    let p = cfg.channel.peak_power_mw;
    let channel = channel_at(cfg, p)?;
    let noise = noise(cfg)?;
    let search = rate_search(cfg);
    let rates: Vec<f64> = [Scheme::Jow, Scheme::MmseOnly, Scheme::Unequalized]
        .into_iter()
        .map(|s| maximize_rate(&channel, &noise, cfg.b_max, &search, s).map(|o| o.rate))
        .collect::<Result<_>>()?;
    let f3 = cfg.channel.f3db_hz;
    r.add(
        "pam.scheme_ordering",
        format!(
            "jow {:.3}, mmse {:.3}, unequalized {:.3} f3dB",
            rates[0] / f3,
            rates[1] / f3,
            rates[2] / f3
        ),
        "jow >= mmse >= unequalized",
        rates[0] >= rates[1] && rates[1] >= rates[2],
    );
    Ok(())
}

/// Runs every check; computational errors abort the report.
pub fn validate(cfg: &ExperimentConfig) -> Result<Report> {
    let mut r = Report::default();
    channel_checks(cfg, &mut r)?;
    clipping_checks(cfg, &mut r);
    ofdm_checks(cfg, &mut r)?;
    mmse_checks(cfg, &mut r)?;
    pam_ber_check(cfg, &mut r)?;
    design_checks(cfg, &mut r)?;
    ordering_check(cfg, &mut r)?;
    Ok(r)
}
