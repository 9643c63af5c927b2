//! The ten acceptance criteria. Runs as a plain binary so that every
//! criterion prints its own PASS/FAIL line; exits nonzero if any fails.

use ledlink::experiments::sweeps::{best_ofdm, predicted_ofdm_ber};
use ledlink::experiments::{run_fig3_sweep, run_fig4_points, ExperimentConfig, Fig4Point};
use ledlink::montecarlo::{simulate_ofdm, simulate_pam, SimRun, SimScheme};
use ledlink::ofdm::{
    bussgang_alpha, clipping_noise_variance, ClipNoiseModel, CyclicPrefix, OfdmModel, OfdmPlan,
};
use ledlink::pam::{
    build_toeplitz, design_waveform, filter_sinr, isi_noise_power, pam_ber, sigma_matrix, DesignOptions, JowModel,
    MmseEqualizer, PamConfig, SigmaMode, Waveform,
};
use ledlink::{LedChannel, NoiseModel};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::process::Command;
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn defaults() -> ExperimentConfig {
    ExperimentConfig::default()
}

fn fig3_shape() -> Outcome {
    let mut cfg = defaults();
    cfg.ofdm.n_subcarriers = vec![64];
    let t = run_fig3_sweep(&cfg).unwrap();
    let rates: Vec<f64> = t.column("rb_bits_per_s").unwrap().iter().map(|v| v.parse().unwrap()).collect();
    let peak = rates.iter().cloned().fold(0.0, f64::max);
    let (first, last) = (rates[0], *rates.last().unwrap());
    let flagged = t.column("is_max").unwrap().iter().filter(|v| **v == "true").count();
    outcome(
        peak > 0.0 && first < 0.8 * peak && last < 0.8 * peak && flagged == 1,
        format!(
            "peak {:.4} f3dB, ends at {:.3} and {:.3} of peak",
            peak / cfg.channel.f3db_hz,
            first / peak,
            last / peak
        ),
    )
}

fn n_invariance() -> Outcome {
    let cfg = defaults();
    let r64 = best_ofdm(&cfg, 64, 10.0).unwrap().rate;
    let r128 = best_ofdm(&cfg, 128, 10.0).unwrap().rate;
    let spread = (r64 - r128).abs() / r64.max(r128);
    outcome(
        spread <= 0.10,
        format!("N=64 {:.4e} b/s, N=128 {:.4e} b/s, spread {:.4}", r64, r128, spread),
    )
}

fn analytic_fig4() -> Vec<Fig4Point> {
    let mut cfg = defaults();
    cfg.montecarlo.simulate = false;
    run_fig4_points(&cfg).unwrap()
}

fn rate_of(points: &[Fig4Point], p: f64, scheme: &str) -> f64 {
    points
        .iter()
        .find(|x| x.peak_power_mw == p && x.scheme == scheme)
        .map(|x| x.rate)
        .unwrap()
}

fn headline_ratio(points: &[Fig4Point]) -> Outcome {
    let cfg = defaults();
    let mut pass = true;
    let mut parts = Vec::new();
    for &p in &cfg.sweep.peak_power_mw {
        let ratio = rate_of(points, p, "mpam-jow") / rate_of(points, p, "dco-ofdm");
        pass &= (1.4..=2.4).contains(&ratio);
        parts.push(format!("{p} mW {ratio:.3}"));
    }
    outcome(pass, format!("JOW/OFDM: {} (target [1.4, 2.4])", parts.join(", ")))
}

fn baseline_ratio() -> Outcome {
    let mut cfg = defaults();
    cfg.montecarlo.simulate = false;
    cfg.sweep.peak_power_mw = vec![8.0];
    let points = run_fig4_points(&cfg).unwrap();
    let ratio = rate_of(&points, 8.0, "dco-ofdm") / rate_of(&points, 8.0, "mpam-unequalized");
    outcome(ratio >= 3.0, format!("OFDM/unequalized at 8 mW {ratio:.3} (target >= 3)"))
}

fn bussgang_oracle() -> Outcome {
    let i_max = 10.0;
    let mu = i_max / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst: f64 = 0.0;
    for ratio in [0.1, 0.25, 0.4] {
        let sigma = ratio * i_max;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for _ in 0..1_000_000 {
            let z: f64 = rng.sample(StandardNormal);
            let x = sigma * z;
            let y = (mu + x).clamp(0.0, i_max) - mu;
            sxy += x * y;
            sxx += x * x;
        }
        worst = worst.max((sxy / sxx - bussgang_alpha(i_max, sigma)).abs());
    }
    outcome(worst <= 0.01, format!("max |alpha_hat - alpha| {worst:.2e} (target 1e-2)"))
}

fn clip_variance_oracle() -> Outcome {
    let i_max = 10.0;
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst: f64 = 0.0;
    for ratio in [0.25, 0.4] {
        let sigma = ratio * i_max;
        let alpha = bussgang_alpha(i_max, sigma);
        let quad = clipping_noise_variance(i_max, sigma, alpha, ClipNoiseModel::AsWritten);
        let n = 10_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            let x = alpha * (i_max / 2.0 + sigma * z);
            if x < 0.0 {
                acc += (alpha * x).powi(2);
            } else if x > i_max {
                acc += (alpha * x - i_max).powi(2);
            }
        }
        worst = worst.max((acc / n as f64 - quad).abs() / quad);
    }
    outcome(worst <= 0.01, format!("max relative gap {worst:.2e} (target 1e-2)"))
}

fn random_channel(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let len = rng.random_range(4..10);
    let decay: f64 = rng.random_range(0.3..0.8);
    let h: Vec<f64> = (0..len).map(|k| decay.powi(k) * rng.random_range(0.5..1.5)).collect();
    let s: f64 = h.iter().sum();
    h.into_iter().map(|v| v / s).collect()
}

fn mmse_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst_mse: f64 = 0.0;
    let mut worst_step = f64::INFINITY;
    for k in 0..5 {
        let h = random_channel(&mut rng);
        let l_f = rng.random_range(2..5);
        let l_w = PamConfig::default_l_w(h.len(), l_f);
        let noise_var = 10f64.powf(rng.random_range(-3.0..-1.5));
        let jm = JowModel::new(&h, PamConfig::new(4, 1e8, l_f, l_w).unwrap(), SigmaMode::Corrected, noise_var).unwrap();
        let f: Vec<f64> = (0..l_f).map(|_| rng.random_range(0.3..1.0)).collect();
        let eq = jm.equalizer(&f).unwrap();
        let analytic = jm.evaluate(&f).unwrap().mse;
        let run = SimRun {
            min_errors: 0,
            ..SimRun::new(900 + k, 400_000, SimScheme::PamJow)
        };
        let sim = simulate_pam(&jm, &Waveform::new(f.clone(), 1.0).unwrap(), &eq, &run).unwrap();
        worst_mse = worst_mse.max((sim.mse - analytic).abs() / analytic);

        let hm = build_toeplitz(&h, l_w).unwrap();
        let mom = sigma_matrix(jm.geometry(), &f, 4, SigmaMode::Corrected);
        let base = isi_noise_power(&eq, &hm, &mom, noise_var).unwrap();
        for _ in 0..20 {
            let mut d = DVector::from_fn(l_w, |_, _| rng.random_range(-1.0..1.0));
            d /= d.norm();
            let pert = MmseEqualizer {
                w: &eq.w + d * 1e-3,
                ..eq.clone()
            };
            worst_step = worst_step.min(isi_noise_power(&pert, &hm, &mom, noise_var).unwrap() - base);
        }
    }
    outcome(
        worst_mse <= 0.02 && worst_step >= -1e-9,
        format!("max MSE gap {worst_mse:.2e} (target 2e-2), min perturbation change {worst_step:.2e} (target >= -1e-9)"),
    )
}

fn bisect_log(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..80 {
        let mid = (lo * hi).sqrt();
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo * hi).sqrt()
}

fn ber_validation() -> Outcome {
    // OFDM: uniform 16-QAM on a dispersive LED link, noise set for 1e-3.
    let n = 64;
    let i_max = 10.0;
    let symbol_time = n as f64 / 100e6;
    let beta = 0.15 * i_max * n as f64 / ((n - 2) as f64).sqrt();
    let channel = LedChannel::new(20e6, i_max, 1e9).unwrap();
    let model = OfdmModel::default();
    let cp = CyclicPrefix::Auto.length(&channel, n, symbol_time).unwrap();
    let plan = OfdmPlan::new(n, symbol_time, beta, i_max, vec![4; n / 2 - 1], cp).unwrap();
    let ber_at = |n0: f64| predicted_ofdm_ber(&plan, &channel, &NoiseModel::new(n0).unwrap(), &model).unwrap();
    let n0 = bisect_log(1e-14, 1e-3, |n0| ber_at(n0) - 1e-3);
    let run = SimRun::sized_for(5, SimScheme::DcoOfdm, ber_at(n0), plan.bits_per_symbol() as f64, 0.05);
    let o = simulate_ofdm(&plan, &channel, &NoiseModel::new(n0).unwrap(), &run, &model).unwrap();
    let r_ofdm = o.total.ber / o.predicted_ber;

    // PAM: designed waveform and MMSE receiver on the LED at 16 f3dB.
    let r_c = 320e6;
    let led = LedChannel::new(20e6, 1.0, r_c).unwrap();
    let h = led.impulse_response().to_vec();
    let l_f = 4;
    let config = PamConfig::new(4, r_c, l_f, PamConfig::default_l_w(h.len(), l_f)).unwrap();
    let design_at = |nv: f64| {
        let jm = JowModel::new(&h, config, SigmaMode::Corrected, nv).unwrap();
        let d = design_waveform(&jm, 1.0, &DesignOptions::default()).unwrap();
        (jm, d.waveform)
    };
    let predicted = |nv: f64| {
        let (jm, w) = design_at(nv);
        let ev = jm.evaluate_filter(w.samples(), &jm.equalizer(w.samples()).unwrap()).unwrap();
        pam_ber(4, filter_sinr(ev.gain, ev.error_var))
    };
    let nv = bisect_log(1e-8, 1.0, |nv| predicted(nv) - 1e-3);
    let (jm, w) = design_at(nv);
    let eq = jm.equalizer(w.samples()).unwrap();
    let run = SimRun::sized_for(6, SimScheme::PamJow, predicted(nv), 2.0, 0.05);
    let p = simulate_pam(&jm, &w, &eq, &run).unwrap();
    let r_pam = p.ber.ber / p.predicted_ber;

    let ok = |r: f64| (0.5..=2.0).contains(&r);
    outcome(
        ok(r_ofdm) && ok(r_pam) && o.total.errors >= 100 && p.ber.errors >= 100,
        format!(
            "OFDM sim/pred {r_ofdm:.3} ({} errors, pred {:.2e}); PAM sim/pred {r_pam:.3} ({} errors, pred {:.2e})",
            o.total.errors, o.predicted_ber, p.ber.errors, p.predicted_ber
        ),
    )
}

fn reproducibility() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let cfg_path = root.path().join("exp.toml");
    std::fs::write(&cfg_path, "[sweep]\npeak_power_mw = [4.0, 8.0]\n").unwrap();
    let mut bad = Vec::new();
    for (cmd, file) in [
        ("fig3", "fig3.csv"),
        ("fig4", "fig4.csv"),
        ("bitload", "bitload.csv"),
        ("design-waveform", "waveform.csv"),
        ("validate", ""),
    ] {
        let mut outs = Vec::new();
        for k in 0..2 {
            let dir = root.path().join(format!("{cmd}-{k}"));
            let out = Command::new(env!("CARGO_BIN_EXE_ledlink"))
                .arg(cmd)
                .arg("--config")
                .arg(&cfg_path)
                .env("LEDLINK_OUTPUT_DIR", &dir)
                .output()
                .unwrap();
            let bytes = if file.is_empty() {
                out.stdout
            } else {
                std::fs::read(dir.join(file)).unwrap_or_default()
            };
            outs.push((out.status.code(), bytes));
        }
        if outs[0] != outs[1] || outs[0].1.is_empty() || outs[0].0 != Some(0) {
            bad.push(cmd);
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            "fig3, fig4, bitload, design-waveform, validate identical across runs".into()
        } else {
            format!("differing or failing: {}", bad.join(", "))
        },
    )
}

fn design_sanity() -> Outcome {
    let opts = DesignOptions::default();
    let i_max = 3.0;
    let flat = JowModel::new(&[1.0], PamConfig::new(4, 1e8, 5, 3).unwrap(), SigmaMode::Corrected, 0.2).unwrap();
    let d = design_waveform(&flat, i_max, &opts).unwrap();
    let dev = d.waveform.samples().iter().map(|v| (v - i_max).abs()).fold(0.0, f64::max);

    let mut channels: Vec<(Vec<f64>, usize, f64)> = Vec::new();
    for (r_c, l_f) in [(80e6, 2), (160e6, 4), (320e6, 8)] {
        channels.push((LedChannel::new(20e6, 1.0, r_c).unwrap().impulse_response().to_vec(), l_f, 1e-2));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    for _ in 0..3 {
        let l_f = rng.random_range(2..5);
        let nv = 10f64.powf(rng.random_range(-3.0..-1.0));
        channels.push((random_channel(&mut rng), l_f, nv));
    }
    let mut margin = f64::INFINITY;
    for (h, l_f, nv) in &channels {
        let cfg = PamConfig::new(4, 1e8, *l_f, PamConfig::default_l_w(h.len(), *l_f)).unwrap();
        let jm = JowModel::new(h, cfg, SigmaMode::Corrected, *nv).unwrap();
        let d = design_waveform(&jm, 1.0, &opts).unwrap();
        margin = margin.min(d.sinr - d.rect_sinr);
    }
    outcome(
        dev <= 1e-3 * i_max && margin >= 0.0,
        format!(
            "memoryless max deviation {:.2e} i_max; min SINR gain over rectangle {margin:.3e} on {} channels",
            dev / i_max,
            channels.len()
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, limit: Duration, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let elapsed = t.elapsed();
        let in_time = elapsed <= limit;
        let pass = o.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "criterion {id:>2} {}: {name}: {}; {:.1}s (limit {}s{})",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", exceeded" }
        );
    };
    let s = Duration::from_secs;
    report(1, "fig3 interior maximum", s(60), &mut fig3_shape);
    report(2, "N invariance", s(120), &mut n_invariance);
    let mut fig4 = Vec::new();
    report(3, "headline rate ratio", s(600), &mut || {
        fig4 = analytic_fig4();
        headline_ratio(&fig4)
    });
    report(4, "baseline rate ratio", s(120), &mut baseline_ratio);
    report(5, "Bussgang oracle", s(10), &mut bussgang_oracle);
    report(6, "clipping-variance oracle", s(30), &mut clip_variance_oracle);
    report(7, "MMSE correctness", s(60), &mut mmse_correctness);
    report(8, "BER formula validation", s(300), &mut ber_validation);
    report(9, "reproducibility", s(600), &mut reproducibility);
    report(10, "waveform design sanity", s(60), &mut design_sanity);
    println!("{failed} of 10 criteria failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
