//! Gray-coded square QAM with unit average symbol energy.

use num_complex::Complex64;
use libm::erfc;

/// Square QAM constellation carrying an even number of bits per symbol.
#[derive(Debug, Clone)]
pub struct SquareQam {
    bits: u32,
    side: usize,
    scale: f64,
}

impl SquareQam {
    /// # Panics
    /// Panics if `bits` is zero or odd.
    pub fn new(bits: u32) -> Self {
        assert!(bits >= 2 && bits.is_multiple_of(2), "square QAM needs an even, nonzero bit count");
        let m = (1u64 << bits) as f64;
        let side = 1usize << (bits / 2);
        Self {
            bits,
            side,
            scale: (3.0 / (2.0 * (m - 1.0))).sqrt(),
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn size(&self) -> usize {
        self.side * self.side
    }

    /// Maps the low `bits` of `word` to a symbol. The high half selects
    /// the in-phase level, the low half the quadrature level.
    pub fn map(&self, word: u32) -> Complex64 {
        let half = self.bits / 2;
        let mask = (1u32 << half) - 1;
        let i = gray_decode((word >> half) & mask);
        let q = gray_decode(word & mask);
        Complex64::new(self.level(i), self.level(q))
    }

    /// Nearest-point hard decision.
    pub fn demap(&self, y: Complex64) -> u32 {
        let half = self.bits / 2;
        let i = gray_encode(self.slice(y.re));
        let q = gray_encode(self.slice(y.im));
        (i << half) | q
    }

    fn level(&self, idx: u32) -> f64 {
        (2.0 * idx as f64 - (self.side as f64 - 1.0)) * self.scale
    }

    fn slice(&self, a: f64) -> u32 {
        let idx = ((a / self.scale + self.side as f64 - 1.0) / 2.0).round();
        idx.clamp(0.0, self.side as f64 - 1.0) as u32
    }
}

fn gray_encode(x: u32) -> u32 {
    x ^ (x >> 1)
}

fn gray_decode(mut g: u32) -> u32 {
    let mut x = g;
    while g > 1 {
        g >>= 1;
        x ^= g;
    }
    x
}

/// Approximate bit error rate of square `m`-QAM at SNR `gamma`.
pub fn qam_ber(m: u64, gamma: f64) -> f64 {
    let m = m as f64;
    let root = m.sqrt();
    (root - 1.0) / (root * root.log2()) * erfc((3.0 * gamma.max(0.0) / (2.0 * m - 2.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_average_energy() {
        for bits in [2, 4, 6, 8] {
            let qam = SquareQam::new(bits);
            let e: f64 =
                (0..qam.size() as u32).map(|w| qam.map(w).norm_sqr()).sum::<f64>() / qam.size() as f64;
            assert!((e - 1.0).abs() < 1e-12, "bits={bits} energy={e}");
        }
    }

    #[test]
    fn map_demap_and_gray_neighbours() {
        let qam = SquareQam::new(4);
        for w in 0..16 {
            assert_eq!(qam.demap(qam.map(w)), w);
        }
        // Horizontally adjacent points differ in exactly one bit.
        let d = 2.0 * qam.scale;
        for w in 0..16 {
            let p = qam.map(w);
            let right = p + Complex64::new(d, 0.0);
            if right.re < 3.0 * qam.scale + 1e-9 {
                assert_eq!((qam.demap(right) ^ w).count_ones(), 1);
            }
        }
    }

    #[test]
    fn gray_roundtrip() {
        for x in 0..256 {
            assert_eq!(gray_decode(gray_encode(x)), x);
        }
    }

    #[test]
    fn ber_at_zero_snr() {
        assert!((qam_ber(4, 0.0) - 0.5).abs() < 1e-15);
        assert!((qam_ber(16, 0.0) - 3.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn qpsk_reduces_to_gray_form() {
        for g in [0.1, 1.0, 4.0, 9.8, 20.0] {
            let gray = 0.5 * erfc((g / 2.0f64).sqrt());
            assert!((qam_ber(4, g) - gray).abs() < 1e-15);
        }
    }

    #[test]
    fn ber_monotonicity() {
        for m in [4u64, 16, 64, 256] {
            assert!(qam_ber(m, 10.0) < qam_ber(m, 5.0));
            assert!(qam_ber(m, 20.0) < qam_ber(4 * m, 20.0));
        }
    }
}
