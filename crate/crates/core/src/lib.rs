//! Link-level models, optimizers and Monte Carlo validation for
//! intensity-modulated LED links: DC-biased optical OFDM with bit loading
//! and M-PAM with joint transmit-waveform and MMSE-equalizer design.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod experiments;
pub mod montecarlo;
pub mod ofdm;
pub mod pam;
pub mod quadrature;

pub use channel::{LedChannel, NoiseModel};
pub use error::{Error, Result};
