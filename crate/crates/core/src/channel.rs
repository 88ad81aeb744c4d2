//! SNR bookkeeping and the memoryless channel `y[l] = h[l] x[l] + w[l]`.
//!
//! Noise is drawn with variance `n0` on each real dimension, so a complex
//! noise sample carries total power `2 n0`. With `E|h|^2 = 1` this is the
//! calibration under which the published baseline curves are reproduced.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{sample_fading, sample_standard_normal, FadingSpec, Rng};
use crate::scalar::Real;

/// Operating point: SNR in dB, code rate in bits per channel use, and
/// whether the coded noise formula applies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnrPoint {
    pub snr_db: f64,
    pub rate: f64,
    pub coded: bool,
}

impl SnrPoint {
    pub fn uncoded(snr_db: f64) -> Self {
        Self { snr_db, rate: 1.0, coded: false }
    }

    pub fn coded(snr_db: f64, rate: f64) -> Self {
        Self { snr_db, rate, coded: true }
    }

    /// Rate `log2(M) / n` of an `(M, n)` block code.
    pub fn for_code(snr_db: f64, messages: usize, block_len: usize) -> Self {
        Self::coded(snr_db, (messages as f64).log2() / block_len as f64)
    }

    pub fn linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Per-real-dimension noise variance `N0` for an operating point
/// (`E_b = 1`): `1 / (2 snr)` uncoded, `1 / (2 R snr)` coded.
pub fn noise_param(snr: SnrPoint) -> Result<f64> {
    // +inf dB is allowed and means a noiseless channel
    if snr.snr_db.is_nan() || snr.snr_db == f64::NEG_INFINITY {
        return Err(invalid(format!("invalid SNR {}", snr.snr_db)));
    }
    let lin = snr.linear();
    if snr.coded {
        if !(snr.rate > 0.0) {
            return Err(invalid(format!("coded rate must be positive, got {}", snr.rate)));
        }
        Ok(1.0 / (2.0 * snr.rate * lin))
    } else {
        Ok(1.0 / (2.0 * lin))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// Fading, receiver sees only `y`.
    NoCsi,
    /// Fading, receiver also sees `h`.
    Csir,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelOutput<T> {
    pub y: Vec<Complex<T>>,
    pub h: Option<Vec<Complex<T>>>,
    pub n0: f64,
}

/// The random part of one block transmission, kept separate so that it can
/// be frozen for gradient checks.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDraw<T> {
    pub h: Vec<Complex<T>>,
    pub w: Vec<Complex<T>>,
}

impl<T: Real> ChannelDraw<T> {
    /// Draws `h[l]` then `w[l]` for each symbol in order.
    pub fn sample(len: usize, spec: &FadingSpec, n0: f64, rng: &mut Rng) -> Self {
        let sd = T::of(n0.sqrt());
        let mut h = Vec::with_capacity(len);
        let mut w = Vec::with_capacity(len);
        for _ in 0..len {
            h.push(sample_fading(rng, spec));
            let re: T = sample_standard_normal(rng);
            let im: T = sample_standard_normal(rng);
            w.push(Complex::new(sd * re, sd * im));
        }
        Self { h, w }
    }

    pub fn apply(&self, codeword: &[T]) -> Vec<Complex<T>> {
        codeword
            .iter()
            .zip(self.h.iter().zip(&self.w))
            .map(|(&c, (&h, &w))| h * c + w)
            .collect()
    }
}

/// Sends a real codeword through the fading channel.
pub fn transmit<T: Real>(
    codeword: &[T],
    spec: &FadingSpec,
    n0: f64,
    rng: &mut Rng,
    mode: ChannelMode,
) -> ChannelOutput<T> {
    let draw = ChannelDraw::sample(codeword.len(), spec, n0, rng);
    let y = draw.apply(codeword);
    let h = match mode {
        ChannelMode::NoCsi => None,
        ChannelMode::Csir => Some(draw.h),
    };
    ChannelOutput { y, h, n0 }
}

/// Real AWGN channel: `y_l = c_l + w_l`, `w_l ~ N(0, n0)`.
pub fn transmit_awgn<T: Real>(codeword: &[T], n0: f64, rng: &mut Rng) -> Vec<T> {
    let sd = T::of(n0.sqrt());
    codeword.iter().map(|&c| c + sd * sample_standard_normal::<T>(rng)).collect()
}
