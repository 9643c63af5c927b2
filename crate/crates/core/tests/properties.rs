use ledlink::ofdm::{bit_load, qam_ber, CyclicPrefix, LoadingOptions, OfdmModel, OfdmModem, OfdmPlan, SubcarrierGain};
use ledlink::pam::{
    build_toeplitz, design_waveform, maximize_rate, pam_ber, sinr, DesignOptions, JowModel, PamConfig, RateSearch,
    Scheme, SigmaMode,
};
use ledlink::{LedChannel, NoiseModel};
use num_complex::Complex64;
use proptest::prelude::*;

fn led(peak: f64) -> LedChannel {
    LedChannel::new(20e6, peak, 1e9).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loading_respects_cap_and_is_monotone(
        beta_over_n in 0.02f64..0.6,
        t_us in 0.5f64..10.0,
        b_max in 1e-5f64..1e-2,
        analog in any::<bool>(),
    ) {
        let (n, t, ch, noise) = (64, t_us * 1e-6, led(10.0), NoiseModel::new(3e-9).unwrap());
        let opts = LoadingOptions {
            model: OfdmModel {
                gain: if analog { SubcarrierGain::Analog } else { SubcarrierGain::Sampled },
                ..Default::default()
            },
            ..Default::default()
        };
        let beta = beta_over_n * n as f64;
        let tight = bit_load(&ch, &noise, n, beta, t, b_max, &opts).unwrap();
        let loose = bit_load(&ch, &noise, n, beta, t, 2.0 * b_max, &opts).unwrap();
        // The LED is lowpass, so loads never increase with frequency.
        prop_assert!(tight.bits().windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(tight.bits().iter().zip(loose.bits()).all(|(a, b)| a <= b));
        prop_assert!(tight.bits().iter().all(|b| b % 2 == 0));
        prop_assert!(loose.throughput() >= tight.throughput());
    }

    #[test]
    fn modem_round_trips(seed in any::<u64>(), n_exp in 2u32..8) {
        let n = 1usize << n_exp;
        let plan = OfdmPlan::new(n, 1e-6, 3.0, 100.0, vec![2; n / 2 - 1], 1).unwrap();
        let modem = OfdmModem::new(n);
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64) - 0.5
        };
        let data: Vec<Complex64> = (0..n / 2 - 1).map(|_| Complex64::new(next(), next())).collect();
        let mut block = Vec::new();
        modem.modulate_block(&plan, &data, &mut block);
        prop_assert_eq!(block.len(), n + 1);
        prop_assert_eq!(block[0], block[n]);
        let back = modem.demodulate_block(&block[1..]);
        let scale = plan.beta();
        for (x, y) in data.iter().zip(&back) {
            prop_assert!((x * scale - y).norm() < 1e-9);
        }
    }

    #[test]
    fn ber_formulas_decrease_with_snr(m_exp in 1u32..5, g in 0.0f64..200.0, dg in 1e-3f64..50.0) {
        let m = 1u32 << m_exp;
        prop_assert!(pam_ber(m, g + dg) < pam_ber(m, g));
        prop_assert!(qam_ber(16, g + dg) <= qam_ber(16, g));
        let mse = 1.0 / (1.0 + g);
        prop_assert!(sinr(m, mse / 2.0, SigmaMode::AsWritten) > sinr(m, mse, SigmaMode::AsWritten));
    }

    #[test]
    fn toeplitz_matches_convolution(
        h in proptest::collection::vec(0.01f64..1.0, 1..8),
        x in proptest::collection::vec(-1.0f64..1.0, 24),
        half in 0usize..6,
    ) {
        let l_w = 2 * half + 1;
        let hm = build_toeplitz(&h, l_w).unwrap();
        let cols = hm.matrix.ncols();
        prop_assert!(cols <= x.len());
        let window = nalgebra::DVector::from_column_slice(&x[..cols]);
        let y = &hm.matrix * &window;
        let full = ledlink::channel::convolve(&x[..cols], &h);
        for (j, v) in y.iter().enumerate() {
            prop_assert!((v - full[j + h.len() - 1]).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn designed_waveform_is_feasible_and_dominant(
        h in proptest::collection::vec(0.05f64..1.0, 2..8),
        l_f in 1usize..4,
        noise_exp in -3.0f64..-1.0,
        i_max in 0.5f64..3.0,
    ) {
        let s: f64 = h.iter().sum();
        let h: Vec<f64> = h.iter().map(|v| v / s).collect();
        let cfg = PamConfig::new(4, 1e8, l_f, PamConfig::default_l_w(h.len(), l_f)).unwrap();
        let jm = JowModel::new(&h, cfg, SigmaMode::Corrected, 10f64.powf(noise_exp)).unwrap();
        let d = design_waveform(&jm, i_max, &DesignOptions::default()).unwrap();
        prop_assert!(d.waveform.samples().iter().all(|v| (0.0..=i_max).contains(v)));
        prop_assert!(d.sinr >= d.rect_sinr);
    }

    #[test]
    fn looser_ber_cap_never_lowers_pam_rate(b_exp in -5.0f64..-2.5, peak in 2.0f64..10.0) {
        let search = RateSearch {
            m_grid: vec![2, 4],
            r_c_grid: (0..6).map(|k| 1.6e8 * 2f64.powi(k)).collect(),
            l_f: 4,
            l_w: None,
            mode: SigmaMode::Corrected,
            design: DesignOptions::default(),
        };
        let ch = led(peak);
        let noise = NoiseModel::new(3e-9).unwrap();
        let b = 10f64.powf(b_exp);
        for scheme in [Scheme::MmseOnly, Scheme::Unequalized] {
            let tight = maximize_rate(&ch, &noise, b, &search, scheme).unwrap();
            let loose = maximize_rate(&ch, &noise, 3.0 * b, &search, scheme).unwrap();
            prop_assert!(loose.rate >= tight.rate);
            if tight.feasible() {
                prop_assert!(tight.ber < b);
            }
        }
    }
}

#[test]
fn cyclic_prefix_policy() {
    let ch = led(10.0);
    let auto = CyclicPrefix::Auto.length(&ch, 64, 64.0 / 100e6).unwrap();
    assert_eq!(auto, ch.resampled(100e6).unwrap().impulse_len() - 1);
    assert_eq!(CyclicPrefix::None.length(&ch, 64, 1e-6).unwrap(), 0);
}
