//! Asymptotic and finite-length analysis of LDPC and spatially coupled LDPC
//! codes for compute-and-forward decoding of the XOR at a two-way relay.
//!
//! * [`channel`]: the degraded relay channel, LLRs and information rates.
//! * [`codes`]: regular ensembles, coupled protographs and sampled codes.
//! * [`de`]: population-dynamics density evolution.
//! * [`threshold`]: BP-threshold search, chain-length sweeps and the
//!   large-`L` extrapolation.
//! * [`bpsim`]: sum-product decoding, Monte-Carlo error rates and an
//!   exhaustive ML reference decoder.

pub mod bits;
pub mod bpsim;
pub mod channel;
pub mod codes;
pub mod de;
pub mod error;
pub mod quad;
pub mod rng;
pub mod stats;
pub mod threshold;

pub use error::{Error, Result};

/// Message clipping shared by density evolution and the finite-length
/// decoder.
pub mod clip {
    /// Variable-to-check LLRs are clipped to `[-LLR_MAX, LLR_MAX]`.
    pub const LLR_MAX: f64 = 300.0;
    /// Tanh products are kept within `1 - TANH_MARGIN` of `+-1`.
    pub const TANH_MARGIN: f64 = 1e-15;

    #[inline]
    pub fn llr(m: f64) -> f64 {
        m.clamp(-LLR_MAX, LLR_MAX)
    }

    /// `2 atanh(p)` with `p` pulled away from `+-1`.
    #[inline]
    pub fn two_atanh(p: f64) -> f64 {
        let p = p.clamp(-1.0 + TANH_MARGIN, 1.0 - TANH_MARGIN);
        ((1.0 + p) / (1.0 - p)).ln()
    }
}
