//! Box-constrained transmit waveform design by projected gradient ascent
//! on the equalized SINR.

use super::{JowModel, Waveform};
use crate::error::{invalid, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignOptions {
    pub max_iter: usize,
    /// Stop when an accepted step improves the SINR by less than this
    /// relative amount.
    pub rel_tol: f64,
    /// Central-difference step as a fraction of `i_max`.
    pub fd_step: f64,
    /// Tolerance on the normalized projected gradient.
    pub kkt_tol: f64,
    pub seed: u64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            rel_tol: 1e-6,
            fd_step: 1e-6,
            kkt_tol: 1e-4,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DesignResult {
    pub waveform: Waveform,
    pub sinr: f64,
    /// SINR of the full-scale rectangular start.
    pub rect_sinr: f64,
    /// Largest violation of the first-order conditions, scaled by `i_max / sinr`.
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl DesignResult {
    pub fn kkt_satisfied(&self, tol: f64) -> bool {
        self.kkt_residual <= tol
    }
}

struct Ascent {
    f: Vec<f64>,
    sinr: f64,
    grad: Vec<f64>,
    iterations: usize,
}

fn gradient(model: &JowModel, f: &[f64], i_max: f64, h: f64) -> Result<Vec<f64>> {
    let mut x = f.to_vec();
    let mut g = vec![0.0; f.len()];
    for i in 0..f.len() {
        // Shrink the stencil near the bounds so it stays inside the box.
        let up = (i_max - f[i]).min(h);
        let down = f[i].min(h);
        x[i] = f[i] + up;
        let plus = model.evaluate(&x)?.sinr;
        x[i] = f[i] - down;
        let minus = model.evaluate(&x)?.sinr;
        x[i] = f[i];
        g[i] = if up + down > 0.0 { (plus - minus) / (up + down) } else { 0.0 };
    }
    Ok(g)
}

fn project(f: &[f64], i_max: f64) -> Vec<f64> {
    f.iter().map(|v| v.clamp(0.0, i_max)).collect()
}

fn ascend(model: &JowModel, start: Vec<f64>, i_max: f64, opts: &DesignOptions) -> Result<Ascent> {
    let h = opts.fd_step * i_max;
    let mut f = project(&start, i_max);
    let mut sinr = model.evaluate(&f)?.sinr;
    let mut grad = gradient(model, &f, i_max, h)?;
    let mut iterations = 0;
    while iterations < opts.max_iter && sinr.is_finite() {
        iterations += 1;
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax == 0.0 {
            break;
        }
        let mut step = i_max / gmax;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = f.iter().zip(&grad).map(|(x, g)| x + step * g).collect();
            let cand = project(&cand, i_max);
            let moved: f64 = cand.iter().zip(&f).zip(&grad).map(|((c, x), g)| g * (c - x)).sum();
            if moved <= 0.0 {
                break;
            }
            let val = model.evaluate(&cand)?.sinr;
            if val >= sinr + 1e-4 * moved {
                accepted = Some((cand, val));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, val)) = accepted else { break };
        let gain = (val - sinr) / sinr.abs().max(f64::MIN_POSITIVE);
        f = cand;
        sinr = val;
        grad = gradient(model, &f, i_max, h)?;
        if gain < opts.rel_tol {
            break;
        }
    }
    Ok(Ascent {
        f,
        sinr,
        grad,
        iterations,
    })
}

/// First-order optimality residual: interior gradient components must
/// vanish, components at a bound must point out of the box.
pub fn kkt_residual(f: &[f64], grad: &[f64], sinr: f64, i_max: f64) -> f64 {
    if !(sinr > 0.0) || !sinr.is_finite() {
        return 0.0;
    }
    let tol = 1e-12 * i_max;
    f.iter()
        .zip(grad)
        .map(|(&x, &g)| {
            let g = g * i_max / sinr;
            if x <= tol {
                g.max(0.0)
            } else if x >= i_max - tol {
                (-g).max(0.0)
            } else {
                g.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Multi-start projected gradient ascent. Starts: full-scale, 3/4, 1/2
/// and 1/4 rectangular pulses, then one uniform random pulse. Ties keep
/// the earlier start.
pub fn design_waveform(model: &JowModel, i_max: f64, opts: &DesignOptions) -> Result<DesignResult> {
    if !(i_max > 0.0) {
        return Err(invalid("i_max", "must be positive"));
    }
    let l_f = model.config().l_f;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts: Vec<Vec<f64>> = [1.0, 0.75, 0.5, 0.25].iter().map(|s| vec![s * i_max; l_f]).collect();
    starts.push((0..l_f).map(|_| rng.random_range(0.0..=i_max)).collect());

    let rect_sinr = model.evaluate(&starts[0])?.sinr;
    let mut best: Option<Ascent> = None;
    for start in starts {
        let run = ascend(model, start, i_max, opts)?;
        if best.as_ref().is_none_or(|b| run.sinr > b.sinr) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    Ok(DesignResult {
        kkt_residual: kkt_residual(&best.f, &best.grad, best.sinr, i_max),
        waveform: Waveform::new(best.f, i_max)?,
        sinr: best.sinr,
        rect_sinr,
        iterations: best.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pam::{PamConfig, SigmaMode};

    fn model(h: &[f64], l_f: usize, noise: f64) -> JowModel {
        let l_w = PamConfig::default_l_w(h.len(), l_f);
        JowModel::new(h, PamConfig::new(2, 1e8, l_f, l_w).unwrap(), SigmaMode::Corrected, noise).unwrap()
    }

    #[test]
    fn memoryless_design_is_full_scale() {
        let jm = model(&[1.0], 4, 0.5);
        let d = design_waveform(&jm, 2.0, &DesignOptions::default()).unwrap();
        assert!(d.waveform.samples().iter().all(|&v| (v - 2.0).abs() < 2e-3));
        assert!(d.kkt_satisfied(1e-4));
    }

    #[test]
    fn kkt_residual_cases() {
        assert_eq!(kkt_residual(&[1.0, 0.0], &[1.0, -1.0], 1.0, 1.0), 0.0);
        assert_eq!(kkt_residual(&[0.5], &[0.0], 1.0, 1.0), 0.0);
        assert!(kkt_residual(&[0.5], &[0.3], 1.0, 1.0) > 0.2);
        assert!(kkt_residual(&[0.0], &[0.3], 1.0, 1.0) > 0.2);
    }

    #[test]
    fn design_dominates_rectangular_seed() {
        let h: Vec<f64> = {
            let r: f64 = 0.8;
            let v: Vec<f64> = (0..12).map(|k| r.powi(k)).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        };
        let jm = model(&h, 3, 0.05);
        let d = design_waveform(&jm, 1.0, &DesignOptions::default()).unwrap();
        assert!(d.sinr >= d.rect_sinr);
        assert!(d.waveform.samples().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn larger_peak_gives_larger_sinr() {
        let h = [0.5, 0.25, 0.15, 0.1];
        let jm = model(&h, 2, 0.1);
        let a = design_waveform(&jm, 1.0, &DesignOptions::default()).unwrap();
        let b = design_waveform(&jm, 2.0, &DesignOptions::default()).unwrap();
        assert!(b.sinr > a.sinr);
    }
}
