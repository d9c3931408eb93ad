//! The degraded two-way relay channel and its information rates.
//!
//! Both terminals send BPSK symbols `1 - 2x` and the relay observes their sum
//! plus Gaussian noise. Seen from the XOR bit `z = x_A ^ x_B`, the relay
//! output is `N(0, sigma^2)` when `z = 1` and an equal mixture of
//! `N(-2, sigma^2)` and `N(+2, sigma^2)` when `z = 0`.

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad;

/// Absolute tolerance used for the information-rate integrals.
pub const RATE_QUAD_TOL: f64 = 1e-6;

/// A binary-input memoryless channel as seen by the decoder and by density
/// evolution.
pub trait BinaryInputChannel: Sync {
    fn sigma(&self) -> f64;

    /// Output density `p(y | z)`.
    fn likelihood(&self, y: f64, z: u8) -> f64;

    /// `ln p(y|0) / p(y|1)`.
    fn llr(&self, y: f64) -> f64;

    fn sample_output<R: Rng + ?Sized>(&self, z: u8, rng: &mut R) -> f64;

    #[inline]
    fn sample_llr<R: Rng + ?Sized>(&self, z: u8, rng: &mut R) -> f64 {
        self.llr(self.sample_output(z, rng))
    }
}

#[inline]
fn gaussian_pdf(y: f64, mean: f64, sigma: f64) -> f64 {
    let d = (y - mean) / sigma;
    (-0.5 * d * d).exp() / (sigma * (2.0 * PI).sqrt())
}

#[inline]
fn gaussian_ln_pdf(y: f64, mean: f64, sigma: f64) -> f64 {
    let d = (y - mean) / sigma;
    -0.5 * d * d - (sigma * (2.0 * PI).sqrt()).ln()
}

/// `ln(e^a + e^b)` without overflow.
#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln cosh(x)`, stable for large `|x|`.
#[inline]
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    if a > 20.0 {
        // ln(1 + e^{-2a}) < 5e-18 is below half an ulp of a - ln 2
        return a - LN_2;
    }
    a - LN_2 + (-2.0 * a).exp().ln_1p()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(invalid("sigma", format!("must be finite and > 0, got {sigma}")))
    }
}

/// The virtual channel from `z = x_A ^ x_B` to the relay output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradedChannel {
    sigma: f64,
}

impl DegradedChannel {
    pub fn new(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self { sigma })
    }

    /// `ln L[y|z]`, accurate far into the tails.
    pub fn ln_likelihood(&self, y: f64, z: u8) -> f64 {
        let s = self.sigma;
        if z == 1 {
            gaussian_ln_pdf(y, 0.0, s)
        } else {
            log_add_exp(gaussian_ln_pdf(y, -2.0, s), gaussian_ln_pdf(y, 2.0, s)) - LN_2
        }
    }

    /// `ln P(y)` for the output density with uniform `z`; identical to the
    /// density of `Y` with independent uniform `x_A, x_B`.
    fn ln_output_density(&self, y: f64) -> f64 {
        log_add_exp(self.ln_likelihood(y, 0), self.ln_likelihood(y, 1)) - LN_2
    }

    fn support(&self) -> (f64, f64) {
        let r = 2.0 + 10.0 * self.sigma;
        (-r, r)
    }

    /// Differential entropy (bits) of the output `Y` with uniform inputs.
    fn output_entropy(&self) -> Result<f64> {
        let (a, b) = self.support();
        quad::integrate(|y| neg_p_log2_p(self.ln_output_density(y)), a, b, RATE_QUAD_TOL / 4.0)
    }

    /// Symmetric information rate `I(Y; Z)` in bits per channel use.
    pub fn sir_caf(&self) -> Result<f64> {
        let (a, b) = self.support();
        let h_y = self.output_entropy()?;
        let h_y0 = quad::integrate(|y| neg_p_log2_p(self.ln_likelihood(y, 0)), a, b, RATE_QUAD_TOL / 4.0)?;
        let h_y1 = gaussian_entropy_bits(self.sigma);
        Ok(h_y - 0.5 * h_y0 - 0.5 * h_y1)
    }

    /// Sum-rate mutual information `I(Y; X_A, X_B)` in bits per channel use.
    pub fn mi_sd(&self) -> Result<f64> {
        Ok(self.output_entropy()? - gaussian_entropy_bits(self.sigma))
    }
}

impl BinaryInputChannel for DegradedChannel {
    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn likelihood(&self, y: f64, z: u8) -> f64 {
        let s = self.sigma;
        if z == 1 {
            gaussian_pdf(y, 0.0, s)
        } else {
            0.5 * gaussian_pdf(y, -2.0, s) + 0.5 * gaussian_pdf(y, 2.0, s)
        }
    }

    #[inline]
    fn llr(&self, y: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        ln_cosh(2.0 * y / s2) - 2.0 / s2
    }

    #[inline]
    fn sample_output<R: Rng + ?Sized>(&self, z: u8, rng: &mut R) -> f64 {
        let noise: f64 = rng.sample(StandardNormal);
        let mean = if z == 1 {
            0.0
        } else if rng.random::<bool>() {
            2.0
        } else {
            -2.0
        };
        mean + self.sigma * noise
    }
}

/// Plain BPSK over AWGN: `y = 1 - 2z + w`. Output-symmetric, used as a
/// regression anchor for the density-evolution engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiAwgnChannel {
    sigma: f64,
}

impl BiAwgnChannel {
    pub fn new(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self { sigma })
    }
}

impl BinaryInputChannel for BiAwgnChannel {
    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn likelihood(&self, y: f64, z: u8) -> f64 {
        gaussian_pdf(y, 1.0 - 2.0 * f64::from(z), self.sigma)
    }

    #[inline]
    fn llr(&self, y: f64) -> f64 {
        2.0 * y / (self.sigma * self.sigma)
    }

    #[inline]
    fn sample_output<R: Rng + ?Sized>(&self, z: u8, rng: &mut R) -> f64 {
        let noise: f64 = rng.sample(StandardNormal);
        1.0 - 2.0 * f64::from(z) + self.sigma * noise
    }
}

/// Which channel family a computation runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    /// The degraded relay channel.
    #[default]
    Degraded,
    BiAwgn,
}

#[inline]
fn neg_p_log2_p(ln_p: f64) -> f64 {
    // 0 log 0 = 0
    if ln_p == f64::NEG_INFINITY {
        return 0.0;
    }
    -ln_p.exp() * ln_p / LN_2
}

fn gaussian_entropy_bits(sigma: f64) -> f64 {
    0.5 * (2.0 * PI * std::f64::consts::E * sigma * sigma).log2()
}

/// Relaying scheme whose information rate defines the benchmark noise level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Compute-and-forward: the relay decodes the XOR.
    Caf,
    /// Separation decoding: the relay decodes both messages.
    Sd,
}

/// Search bracket for [`sir_threshold`].
pub const SIGMA_SEARCH: (f64, f64) = (0.02, 20.0);
const SIGMA_RESOLUTION: f64 = 1e-4;

/// Noise level at which the scheme's information rate equals `rate` per
/// user. For SD the sum rate `2 * rate` is matched against `I(Y; X_A, X_B)`.
pub fn sir_threshold(scheme: Scheme, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(invalid("rate", format!("must lie in (0, 1), got {rate}")));
    }
    let (target, info): (f64, fn(&DegradedChannel) -> Result<f64>) = match scheme {
        Scheme::Caf => (rate, DegradedChannel::sir_caf),
        Scheme::Sd => (2.0 * rate, DegradedChannel::mi_sd),
    };
    let eval = |s: f64| info(&DegradedChannel { sigma: s });
    let (mut lo, mut hi) = SIGMA_SEARCH;
    if eval(lo)? < target || eval(hi)? > target {
        return Err(Error::Unachievable { rate, lo, hi });
    }
    while hi - lo > SIGMA_RESOLUTION / 4.0 {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
