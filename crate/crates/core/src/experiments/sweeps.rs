//! The fig3, fig4, bitload and design-waveform runs.

use super::config::ExperimentConfig;
use super::output::{sci, CsvTable};
use crate::channel::{LedChannel, NoiseModel};
use crate::error::Result;
use crate::montecarlo::{simulate_ofdm, simulate_pam, unequalized_pam_baseline, BerEstimate, SimRun, SimScheme};
use crate::ofdm::{optimize_ofdm, qam_ber, signal_std, subcarrier_snr, ClippingStats, LoadingOptions, OfdmModel, OfdmPlan};
use crate::pam::{maximize_rate, DesignOptions, JowModel, PamConfig, PamOptimum, RateSearch, Scheme, Waveform};

/// Base rate for channels that are resampled before use.
const REFERENCE_RATE: f64 = 1e9;

pub fn channel_at(cfg: &ExperimentConfig, peak_mw: f64) -> Result<LedChannel> {
    LedChannel::new(cfg.channel.f3db_hz, peak_mw, REFERENCE_RATE)
}

pub fn noise(cfg: &ExperimentConfig) -> Result<NoiseModel> {
    NoiseModel::new(cfg.noise.n0)
}

pub fn loading_options(cfg: &ExperimentConfig) -> LoadingOptions {
    LoadingOptions {
        model: cfg.ofdm.model(),
        cyclic_prefix: cfg.cyclic_prefix(),
        max_bits: cfg.ofdm.max_bits,
    }
}

pub fn rate_search(cfg: &ExperimentConfig) -> RateSearch {
    RateSearch {
        m_grid: cfg.pam.m.clone(),
        r_c_grid: cfg.pam.chip_rate_hz.values(),
        l_f: cfg.pam.l_f,
        l_w: (cfg.pam.l_w != 0).then_some(cfg.pam.l_w),
        mode: cfg.pam.sigma_mode,
        design: DesignOptions {
            seed: cfg.pam.design_seed,
            ..Default::default()
        },
    }
}

fn betas(cfg: &ExperimentConfig, n: usize) -> Vec<f64> {
    cfg.ofdm.modulation_index.values().iter().map(|m| m * n as f64).collect()
}

/// Best loaded OFDM plan for `n` subcarriers at peak power `peak_mw`.
pub fn best_ofdm(cfg: &ExperimentConfig, n: usize, peak_mw: f64) -> Result<crate::ofdm::OfdmOptimum> {
    optimize_ofdm(
        &channel_at(cfg, peak_mw)?,
        &noise(cfg)?,
        cfg.b_max,
        n,
        &betas(cfg, n),
        &cfg.ofdm.symbol_time_s.values(),
        &loading_options(cfg),
    )
}

pub const FIG3_HEADER: [&str; 7] = [
    "n_subcarriers",
    "modulation_index",
    "beta",
    "symbol_time_s",
    "rb_bits_per_s",
    "rb_over_f3db",
    "is_max",
];

/// Throughput against modulation index at `channel.peak_power_mw`, one
/// row per `(N, beta)`; the best symbol time is chosen per row.
pub fn run_fig3_sweep(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let mut t = CsvTable::new(&FIG3_HEADER);
    for &n in &cfg.ofdm.n_subcarriers {
        let opt = best_ofdm(cfg, n, cfg.channel.peak_power_mw)?;
        for p in &opt.curve {
            t.push(vec![
                n.to_string(),
                sci(p.beta / n as f64),
                sci(p.beta),
                sci(p.symbol_time),
                sci(p.rate),
                sci(p.rate / cfg.channel.f3db_hz),
                (p.beta == opt.plan.beta() && opt.rate > 0.0).to_string(),
            ]);
        }
    }
    Ok(t)
}

/// Bit-weighted mean of the predicted subcarrier BERs.
pub fn predicted_ofdm_ber(plan: &OfdmPlan, channel: &LedChannel, noise: &NoiseModel, model: &OfdmModel) -> Result<f64> {
    let stats = ClippingStats::new(plan.i_max(), signal_std(plan.beta(), plan.n()), model.clip_noise);
    let mut weighted = 0.0;
    for i in 1..=plan.n_data() {
        let b = plan.bits_on(i);
        if b > 0 {
            let gamma = subcarrier_snr(plan, channel, noise, &stats, i, model)?;
            weighted += b as f64 * qam_ber(1u64 << b, gamma);
        }
    }
    let total = plan.bits_per_symbol();
    Ok(if total > 0 { weighted / total as f64 } else { f64::NAN })
}

/// One row of the fig4 table.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig4Point {
    pub peak_power_mw: f64,
    pub scheme: &'static str,
    pub rate: f64,
    pub analytic_ber: f64,
    pub simulated: Option<BerEstimate>,
    pub diagnostic: String,
}

impl Fig4Point {
    pub fn feasible(&self) -> bool {
        self.rate > 0.0
    }
}

pub const FIG4_HEADER: [&str; 10] = [
    "peak_power_mw",
    "scheme",
    "rb_bits_per_s",
    "rb_over_f3db",
    "analytic_ber",
    "simulated_ber",
    "ber_ci_low",
    "ber_ci_high",
    "feasible",
    "diagnostic",
];

pub fn fig4_table(cfg: &ExperimentConfig, points: &[Fig4Point]) -> CsvTable {
    let mut t = CsvTable::new(&FIG4_HEADER);
    for p in points {
        let (sim, lo, hi) = p.simulated.map_or((f64::NAN, f64::NAN, f64::NAN), |b| (b.ber, b.ci_low, b.ci_high));
        t.push(vec![
            sci(p.peak_power_mw),
            p.scheme.into(),
            sci(p.rate),
            sci(p.rate / cfg.channel.f3db_hz),
            sci(p.analytic_ber),
            sci(sim),
            sci(lo),
            sci(hi),
            p.feasible().to_string(),
            p.diagnostic.clone(),
        ]);
    }
    t
}

/// Sizes a simulation for `predicted` BER, or explains why it is skipped.
fn plan_run(
    cfg: &ExperimentConfig,
    seed: u64,
    scheme: SimScheme,
    predicted: f64,
    bits_per_symbol: f64,
) -> std::result::Result<SimRun, String> {
    if !cfg.montecarlo.simulate {
        return Err("simulation disabled".into());
    }
    if !(predicted > 0.0) {
        return Err("no errors predicted; simulation skipped".into());
    }
    let run = SimRun::sized_for(seed, scheme, predicted, bits_per_symbol, cfg.montecarlo.confidence);
    let bits = run.n_symbols as f64 * bits_per_symbol;
    if bits > cfg.montecarlo.max_bits {
        return Err(format!("simulation skipped: needs {bits:.3e} bits"));
    }
    Ok(run)
}

fn point_seed(cfg: &ExperimentConfig, point: usize, scheme: usize) -> u64 {
    cfg.montecarlo.seed.wrapping_mul(1_000_003).wrapping_add((point * 8 + scheme) as u64)
}

fn ofdm_point(cfg: &ExperimentConfig, k: usize, peak: f64) -> Result<Fig4Point> {
    let n = cfg.ofdm.n_subcarriers[0];
    let channel = channel_at(cfg, peak)?;
    let noise = noise(cfg)?;
    let opt = best_ofdm(cfg, n, peak)?;
    let mut point = Fig4Point {
        peak_power_mw: peak,
        scheme: "dco-ofdm",
        rate: opt.rate,
        analytic_ber: f64::NAN,
        simulated: None,
        diagnostic: String::new(),
    };
    if opt.rate <= 0.0 {
        point.diagnostic = format!("no loading meets BER < {:e}", cfg.b_max);
        return Ok(point);
    }
    let model = cfg.ofdm.model();
    point.analytic_ber = predicted_ofdm_ber(&opt.plan, &channel, &noise, &model)?;
    let bps = opt.plan.bits_per_symbol() as f64;
    match plan_run(cfg, point_seed(cfg, k, 0), SimScheme::DcoOfdm, point.analytic_ber, bps) {
        Ok(run) => point.simulated = Some(simulate_ofdm(&opt.plan, &channel, &noise, &run, &model)?.total),
        Err(d) => point.diagnostic = d,
    }
    Ok(point)
}

/// Rebuilds the MMSE model at an optimum's operating point.
pub fn jow_model_at(cfg: &ExperimentConfig, channel: &LedChannel, config: &PamConfig) -> Result<JowModel> {
    let led = channel.resampled(config.r_c)?;
    let noise_var = noise(cfg)?.sample_variance(config.r_c);
    JowModel::new(led.impulse_response(), *config, cfg.pam.sigma_mode, noise_var)
}

fn pam_point(cfg: &ExperimentConfig, k: usize, peak: f64, scheme: Scheme, slot: usize) -> Result<Fig4Point> {
    let channel = channel_at(cfg, peak)?;
    let noise = noise(cfg)?;
    let opt: PamOptimum = maximize_rate(&channel, &noise, cfg.b_max, &rate_search(cfg), scheme)?;
    let mut point = Fig4Point {
        peak_power_mw: peak,
        scheme: scheme.name(),
        rate: opt.rate,
        analytic_ber: opt.ber,
        simulated: None,
        diagnostic: opt.diagnostic.clone().unwrap_or_default(),
    };
    let (Some(config), Some(waveform)) = (opt.config, opt.waveform.as_ref()) else {
        return Ok(point);
    };
    let seed = point_seed(cfg, k, slot);
    let bps = config.bits_per_symbol();
    if scheme == Scheme::Unequalized {
        match plan_run(cfg, seed, SimScheme::PamUnequalized, opt.ber, bps) {
            Ok(run) => {
                let led = channel.resampled(config.r_c)?;
                point.simulated = Some(unequalized_pam_baseline(config.m, config.l_f, &led, &noise, &run)?.simulated);
            }
            Err(d) => point.diagnostic = d,
        }
    } else {
        match plan_run(cfg, seed, SimScheme::PamJow, opt.ber, bps) {
            Ok(run) => {
                let model = jow_model_at(cfg, &channel, &config)?;
                let eq = model.equalizer(waveform.samples())?;
                point.simulated = Some(simulate_pam(&model, waveform, &eq, &run)?.ber);
            }
            Err(d) => point.diagnostic = d,
        }
    }
    if let Some(r) = opt.kkt_residual.is_finite().then_some(opt.kkt_residual).filter(|r| *r > 1e-4) {
        let note = format!("waveform KKT residual {r:.2e}");
        point.diagnostic = if point.diagnostic.is_empty() {
            note
        } else {
            format!("{}; {note}", point.diagnostic)
        };
    }
    Ok(point)
}

pub const FIG4_SCHEMES: [&str; 4] = ["dco-ofdm", "mpam-jow", "mpam-mmse", "mpam-unequalized"];

/// Optimized throughput of all four schemes at each sweep power, with
/// an optional Monte Carlo check of every feasible point.
pub fn run_fig4_points(cfg: &ExperimentConfig) -> Result<Vec<Fig4Point>> {
    let mut out = Vec::new();
    for (k, &p) in cfg.sweep.peak_power_mw.iter().enumerate() {
        out.push(ofdm_point(cfg, k, p)?);
        for (slot, scheme) in [Scheme::Jow, Scheme::MmseOnly, Scheme::Unequalized].into_iter().enumerate() {
            out.push(pam_point(cfg, k, p, scheme, slot + 1)?);
        }
    }
    Ok(out)
}

pub fn run_fig4_sweep(cfg: &ExperimentConfig) -> Result<CsvTable> {
    Ok(fig4_table(cfg, &run_fig4_points(cfg)?))
}

pub const BITLOAD_HEADER: [&str; 5] = ["subcarrier", "frequency_hz", "snr", "bits", "predicted_ber"];

/// Optimized loading table for the first configured `N` at
/// `channel.peak_power_mw`.
pub fn run_bitload(cfg: &ExperimentConfig) -> Result<(OfdmPlan, CsvTable)> {
    let n = cfg.ofdm.n_subcarriers[0];
    let channel = channel_at(cfg, cfg.channel.peak_power_mw)?;
    let noise = noise(cfg)?;
    let plan = best_ofdm(cfg, n, cfg.channel.peak_power_mw)?.plan;
    let model = cfg.ofdm.model();
    let stats = ClippingStats::new(plan.i_max(), plan.signal_std(), model.clip_noise);
    let mut t = CsvTable::new(&BITLOAD_HEADER);
    for i in 1..=plan.n_data() {
        let gamma = subcarrier_snr(&plan, &channel, &noise, &stats, i, &model)?;
        let b = plan.bits_on(i);
        t.push(vec![
            i.to_string(),
            sci(i as f64 / plan.symbol_time()),
            sci(gamma),
            b.to_string(),
            sci(if b > 0 { qam_ber(1u64 << b, gamma) } else { f64::NAN }),
        ]);
    }
    Ok((plan, t))
}

pub const WAVEFORM_HEADER: [&str; 3] = ["sample", "amplitude_ma", "fraction_of_peak"];

/// JOW-optimal waveform at `channel.peak_power_mw`.
pub fn run_design_waveform(cfg: &ExperimentConfig) -> Result<(PamOptimum, CsvTable)> {
    let channel = channel_at(cfg, cfg.channel.peak_power_mw)?;
    let opt = maximize_rate(&channel, &noise(cfg)?, cfg.b_max, &rate_search(cfg), Scheme::Jow)?;
    let mut t = CsvTable::new(&WAVEFORM_HEADER);
    if let Some(w) = opt.waveform.as_ref() {
        write_waveform(&mut t, w);
    }
    Ok((opt, t))
}

fn write_waveform(t: &mut CsvTable, w: &Waveform) {
    for (j, &v) in w.samples().iter().enumerate() {
        t.push(vec![j.to_string(), sci(v), sci(v / w.i_max())]);
    }
}
