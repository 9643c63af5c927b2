//! Window geometry, channel matrix, second moments and the MMSE equalizer.
//!
//! The equalizer for symbol 0 observes `L_w` received samples centred on
//! the peak of the symbol's pulse response. Those depend on a transmit
//! window of `L_w + L_h - 1` samples, which may straddle several symbols.

use super::{alphabet_variance, PamConfig, SigmaMode};
use crate::error::{invalid, Error, Result};
use nalgebra::{DMatrix, DVector};

const RIDGE: f64 = 1e-12;

/// Index bookkeeping between received taps, transmit samples and symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowGeometry {
    pub l_f: usize,
    pub l_h: usize,
    pub l_w: usize,
    /// Received-sample offset (from the start of symbol 0) of the centre tap.
    pub center: i64,
    /// Transmit-sample offset of the first column of `H`.
    pub tx_start: i64,
}

impl WindowGeometry {
    pub fn new(l_f: usize, l_h: usize, l_w: usize) -> Result<Self> {
        if l_w == 0 || l_w.is_multiple_of(2) {
            return Err(invalid("l_w", format!("{l_w} must be odd and positive")));
        }
        if l_f == 0 || l_h == 0 {
            return Err(invalid("l_f", "waveform and channel lengths must be positive"));
        }
        let center = ((l_f + l_h - 1) / 2) as i64;
        let half = ((l_w - 1) / 2) as i64;
        Ok(Self {
            l_f,
            l_h,
            l_w,
            center,
            tx_start: center - half - (l_h as i64 - 1),
        })
    }

    /// Offset of the first received tap.
    pub fn first_tap(&self) -> i64 {
        self.center - ((self.l_w - 1) / 2) as i64
    }

    pub fn tx_len(&self) -> usize {
        self.l_w + self.l_h - 1
    }

    /// Symbol index and waveform offset of transmit column `col`.
    pub fn sample_of(&self, col: usize) -> (i64, usize) {
        let t = self.tx_start + col as i64;
        let l_f = self.l_f as i64;
        (t.div_euclid(l_f), t.rem_euclid(l_f) as usize)
    }

    /// Symbol indices touched by the transmit window, inclusive.
    pub fn symbol_span(&self) -> (i64, i64) {
        (self.sample_of(0).0, self.sample_of(self.tx_len() - 1).0)
    }
}

/// Banded matrix mapping the transmit window to the received taps, with
/// `n_u` future and `n_l` past interferer samples per tap.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub matrix: DMatrix<f64>,
    pub n_u: usize,
    pub n_l: usize,
}

/// Row `j` holds the reversed impulse response starting at column `j`, so
/// `(H x)[j] = sum_k h[k] x[j + L_h - 1 - k]`.
pub fn build_toeplitz(h: &[f64], l_w: usize) -> Result<ChannelMatrix> {
    if l_w == 0 {
        return Err(invalid("l_w", "must be at least 1"));
    }
    if h.is_empty() {
        return Err(invalid("impulse_response", "must not be empty"));
    }
    let l_h = h.len();
    let mut matrix = DMatrix::zeros(l_w, l_w + l_h - 1);
    for j in 0..l_w {
        for (k, &hk) in h.iter().enumerate() {
            matrix[(j, j + l_h - 1 - k)] = hk;
        }
    }
    Ok(ChannelMatrix {
        matrix,
        n_u: 0,
        n_l: l_h - 1,
    })
}

/// Transmit-window statistics for one waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowMoments {
    /// `E{x x^T}` with the mode's same-symbol coefficient.
    pub sigma: DMatrix<f64>,
    /// `E{x}`.
    pub mean: DVector<f64>,
    /// `E{s_0 x}`.
    pub cross: DVector<f64>,
    /// `E{s^2}` used by the mode.
    pub m2: f64,
    pub mode: SigmaMode,
}

/// `Sigma[u][v] = c f[u] f[v]`, `c` the same- or cross-symbol coefficient.
pub fn sigma_matrix(geom: &WindowGeometry, waveform: &[f64], m: u32, mode: SigmaMode) -> WindowMoments {
    let n = geom.tx_len();
    let m2 = mode.same_symbol(m);
    let cross_c = mode.cross_symbol();
    let cols: Vec<(i64, f64)> = (0..n)
        .map(|c| {
            let (sym, off) = geom.sample_of(c);
            (sym, waveform[off])
        })
        .collect();
    let sigma = DMatrix::from_fn(n, n, |u, v| {
        let c = if cols[u].0 == cols[v].0 { m2 } else { cross_c };
        c * cols[u].1 * cols[v].1
    });
    let mean = DVector::from_iterator(n, cols.iter().map(|&(_, f)| 0.5 * f));
    let cross = DVector::from_iterator(n, cols.iter().map(|&(s, f)| if s == 0 { m2 * f } else { cross_c * f }));
    WindowMoments {
        sigma,
        mean,
        cross,
        m2,
        mode,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmseEqualizer {
    pub w: DVector<f64>,
    pub b: f64,
    /// Set when the system was singular and a relative ridge was added.
    pub regularized: bool,
}

/// Solves `(V + sigma^2 I) w = U` with `V = H Sigma H^T`, `U = H E{s x}`
/// (centred moments in corrected mode), then `b = 1/2 - w^T H E{x}`.
pub fn mmse_filter(h: &ChannelMatrix, mom: &WindowMoments, noise_var: f64) -> Result<MmseEqualizer> {
    let hm = &h.matrix;
    if hm.ncols() != mom.sigma.nrows() {
        return Err(Error::Dimension(format!(
            "H has {} columns but Sigma is {}x{}",
            hm.ncols(),
            mom.sigma.nrows(),
            mom.sigma.nrows()
        )));
    }
    let (sigma, cross) = match mom.mode {
        SigmaMode::AsWritten => (mom.sigma.clone(), mom.cross.clone()),
        SigmaMode::Corrected => (
            &mom.sigma - &mom.mean * mom.mean.transpose(),
            &mom.cross - &mom.mean * 0.5,
        ),
    };
    let l_w = hm.nrows();
    let mut a = hm * sigma * hm.transpose();
    for j in 0..l_w {
        a[(j, j)] += noise_var;
    }
    let u = hm * cross;
    let (w, regularized) = spd_solve(a, &u)?;
    let b = 0.5 - w.dot(&(hm * &mom.mean));
    Ok(MmseEqualizer { w, b, regularized })
}

fn spd_solve(mut a: DMatrix<f64>, u: &DVector<f64>) -> Result<(DVector<f64>, bool)> {
    if let Some(ch) = a.clone().cholesky() {
        let w = ch.solve(u);
        if w.iter().all(|v| v.is_finite()) {
            return Ok((w, false));
        }
    }
    let n = a.nrows();
    let ridge = RIDGE * a.trace().max(f64::MIN_POSITIVE) / n as f64;
    for j in 0..n {
        a[(j, j)] += ridge;
    }
    let ch = a
        .cholesky()
        .ok_or_else(|| Error::Dimension("equalizer system is not positive semidefinite".into()))?;
    Ok((ch.solve(u), true))
}

/// `E{(w^T y + b - s)^2}` for the given moments, including `sigma^2 |w|^2`.
pub fn isi_noise_power(
    eq: &MmseEqualizer,
    h: &ChannelMatrix,
    mom: &WindowMoments,
    noise_var: f64,
) -> Result<f64> {
    let hw = h.matrix.transpose() * &eq.w;
    let quad = hw.dot(&(&mom.sigma * &hw));
    let c = hw.dot(&mom.mean);
    let cross = hw.dot(&mom.cross);
    let b = eq.b;
    let mse = quad + noise_var * eq.w.norm_squared() + 2.0 * b * c - 2.0 * cross + b * b - b + mom.m2;
    check_mse(mse)
}

fn check_mse(mse: f64) -> Result<f64> {
    if mse < -1e-12 || !mse.is_finite() {
        return Err(Error::NegativeMse(mse));
    }
    Ok(mse.max(0.0))
}

/// Performance of one waveform under the MMSE receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JowEvaluation {
    /// MSE under the mode's moments.
    pub mse: f64,
    /// SINR under the mode's convention.
    pub sinr: f64,
    /// MSE under the true alphabet moments.
    pub true_mse: f64,
    /// Response of the equalizer output to its own symbol.
    pub gain: f64,
    /// Residual ISI plus noise power around `gain * s`.
    pub error_var: f64,
}

/// Fast evaluator of the MMSE receiver for many candidate waveforms.
///
/// With `g_p = H f_p` the received pulse of window symbol `p`, every
/// second moment is a small `P x P` matrix in the `g_p`, and the filter
/// lies in their span: `w = G z` with `z = (sigma^2 I + C G^T G)^-1 c`.
#[derive(Debug, Clone)]
pub struct JowModel {
    h: Vec<f64>,
    config: PamConfig,
    geom: WindowGeometry,
    mode: SigmaMode,
    noise_var: f64,
}

struct Solved {
    g: DMatrix<f64>,
    z: DVector<f64>,
    a: DVector<f64>,
    origin: usize,
}

impl JowModel {
    pub fn new(h: &[f64], config: PamConfig, mode: SigmaMode, noise_var: f64) -> Result<Self> {
        let geom = WindowGeometry::new(config.l_f, h.len(), config.l_w)?;
        if !(noise_var >= 0.0) {
            return Err(invalid("noise_var", "must be nonnegative"));
        }
        Ok(Self {
            h: h.to_vec(),
            config,
            geom,
            mode,
            noise_var,
        })
    }

    pub fn geometry(&self) -> &WindowGeometry {
        &self.geom
    }

    pub fn config(&self) -> &PamConfig {
        &self.config
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn mode(&self) -> SigmaMode {
        self.mode
    }

    pub fn impulse(&self) -> &[f64] {
        &self.h
    }

    /// Received pulses `g_p` as the columns of an `L_w x P` matrix, and the
    /// column index of symbol 0.
    pub fn pulses(&self, f: &[f64]) -> (DMatrix<f64>, usize) {
        let (first, last) = self.geom.symbol_span();
        let p = (last - first + 1) as usize;
        let l_h = self.geom.l_h;
        let mut g = DMatrix::zeros(self.geom.l_w, p);
        for col in 0..self.geom.tx_len() {
            let (sym, off) = self.geom.sample_of(col);
            let v = f[off];
            if v == 0.0 {
                continue;
            }
            let pi = (sym - first) as usize;
            // Rows j with 0 <= j + L_h - 1 - col < L_h.
            let lo = (col + 1).saturating_sub(l_h);
            let hi = col.min(self.geom.l_w - 1);
            for j in lo..=hi {
                g[(j, pi)] += self.h[j + l_h - 1 - col] * v;
            }
        }
        (g, (-first) as usize)
    }

    fn coefficients(&self, m2: f64, p: usize, origin: usize, centered: bool) -> (DMatrix<f64>, DVector<f64>) {
        let d = m2 - 0.25;
        let mut c = DMatrix::from_element(p, p, if centered { 0.0 } else { 0.25 });
        for k in 0..p {
            c[(k, k)] += d;
        }
        let mut q = DVector::from_element(p, if centered { 0.0 } else { 0.25 });
        q[origin] += d;
        (c, q)
    }

    fn solve(&self, f: &[f64]) -> Result<Option<Solved>> {
        if self.noise_var <= 0.0 {
            return Ok(None);
        }
        let (g, origin) = self.pulses(f);
        let p = g.ncols();
        let gram = g.transpose() * &g;
        let m2 = self.mode.same_symbol(self.config.m);
        let centered = self.mode == SigmaMode::Corrected;
        let (c, rhs) = self.coefficients(m2, p, origin, centered);
        let mut sys = &c * &gram;
        for k in 0..p {
            sys[(k, k)] += self.noise_var;
        }
        let z = match sys.lu().solve(&rhs) {
            Some(z) if z.iter().all(|v| v.is_finite()) => z,
            _ => return Ok(None),
        };
        let a = &gram * &z;
        Ok(Some(Solved { g, z, a, origin }))
    }

    /// MSE with moments `m2` for a filter described by `a_p = w^T g_p`
    /// and `|w|^2`.
    fn mse_from(&self, a: &DVector<f64>, w_norm2: f64, origin: usize, m2: f64) -> f64 {
        let sum: f64 = a.sum();
        let d = m2 - 0.25;
        let quad = d * a.norm_squared() + 0.25 * sum * sum;
        let cross = d * a[origin] + 0.25 * sum;
        let b = 0.5 - 0.5 * sum;
        quad + self.noise_var * w_norm2 + b * sum - 2.0 * cross + b * b - b + m2
    }

    fn finish(&self, a: &DVector<f64>, w_norm2: f64, origin: usize) -> Result<JowEvaluation> {
        let m = self.config.m;
        let mse = check_mse(self.mse_from(a, w_norm2, origin, self.mode.same_symbol(m)))?;
        let true_mse = check_mse(self.mse_from(a, w_norm2, origin, SigmaMode::Corrected.same_symbol(m)))?;
        let gain = a[origin];
        let var = alphabet_variance(m);
        let error_var = (true_mse - (1.0 - gain).powi(2) * var).max(0.0);
        Ok(JowEvaluation {
            mse,
            sinr: super::sinr(m, mse, self.mode),
            true_mse,
            gain,
            error_var,
        })
    }

    pub fn evaluate(&self, f: &[f64]) -> Result<JowEvaluation> {
        match self.solve(f)? {
            Some(s) => self.finish(&s.a, s.z.dot(&s.a), s.origin),
            None => {
                let eq = self.dense_equalizer(f)?;
                self.evaluate_filter(f, &eq)
            }
        }
    }

    /// Performance of an arbitrary `(w, b)`, with `b` replaced by the
    /// value that removes the output bias.
    pub fn evaluate_filter(&self, f: &[f64], eq: &MmseEqualizer) -> Result<JowEvaluation> {
        let (g, origin) = self.pulses(f);
        let a = g.transpose() * &eq.w;
        self.finish(&a, eq.w.norm_squared(), origin)
    }

    /// Equalizer taps for waveform `f`.
    pub fn equalizer(&self, f: &[f64]) -> Result<MmseEqualizer> {
        match self.solve(f)? {
            Some(s) => {
                let w = &s.g * &s.z;
                let b = 0.5 - 0.5 * s.a.sum();
                Ok(MmseEqualizer {
                    w,
                    b,
                    regularized: false,
                })
            }
            None => self.dense_equalizer(f),
        }
    }

    /// Reference route through the full `L_w x (L_w + L_h - 1)` matrices.
    pub fn dense_equalizer(&self, f: &[f64]) -> Result<MmseEqualizer> {
        let h = build_toeplitz(&self.h, self.config.l_w)?;
        let mom = sigma_matrix(&self.geom, f, self.config.m, self.mode);
        mmse_filter(&h, &mom, self.noise_var)
    }

    /// Matched-filter bound on the corrected SINR over all waveforms in
    /// `[0, i_max]`: no ISI and a full-scale pulse.
    pub fn sinr_upper_bound(&self, i_max: f64) -> f64 {
        if self.noise_var <= 0.0 {
            return f64::INFINITY;
        }
        let f = vec![i_max; self.config.l_f];
        let (g, origin) = self.pulses(&f);
        g.column(origin).norm_squared() / (8.0 * self.noise_var)
    }
}
