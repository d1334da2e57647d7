//! Coherently sampled sine waves and the uniform mid-tread quantizer.
//!
//! The test signal is `s_i = -A cos(2*pi*lambda*i/N + phi) + d`; the quantizer
//! maps `s` to `step * floor(s/step + 1/2 + c)`, where `c` shifts the
//! characteristic (`c = 0` mid-tread, `c = -1/2` truncation).

use std::f64::consts::TAU;

use rand::Rng;

use crate::error::{invalid, Error, Result};

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// A sine wave with `lambda` periods in a record of `n_samples` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineSpec {
    pub amplitude: f64,
    pub lambda: u64,
    pub n_samples: usize,
    pub phase: f64,
    pub offset: f64,
}

impl SineSpec {
    pub fn new(amplitude: f64, lambda: u64, n_samples: usize) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(invalid(format!(
                "amplitude must be finite and >= 0, got {amplitude}"
            )));
        }
        if lambda == 0 {
            return Err(invalid("lambda must be a positive integer"));
        }
        if n_samples < 3 {
            return Err(Error::TooFewSamples(n_samples));
        }
        Ok(Self {
            amplitude,
            lambda,
            n_samples,
            phase: 0.0,
            offset: 0.0,
        })
    }

    /// Sets the initial record phase, reduced to `[0, 2*pi)`.
    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase.rem_euclid(TAU);
        self
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// True when `gcd(lambda, N) != 1`. Such records are allowed but lose
    /// the coherence the closed-form estimator relies on.
    pub fn non_coprime(&self) -> bool {
        gcd(self.lambda, self.n_samples as u64) != 1
    }

    /// `k_i = 2*pi*lambda*i/N`, reduced modulo `2*pi` in integer arithmetic.
    pub fn angle(&self, i: usize) -> f64 {
        let n = self.n_samples as u128;
        let r = (self.lambda as u128 * i as u128) % n;
        TAU * r as f64 / n as f64
    }

    /// Sample `i` of the record.
    pub fn sample(&self, i: usize) -> Result<f64> {
        if i >= self.n_samples {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.n_samples,
            });
        }
        Ok(self.waveform(i))
    }

    /// The periodic extension of the record to any integer index.
    pub fn waveform(&self, i: usize) -> f64 {
        -self.amplitude * (self.angle(i) + self.phase).cos() + self.offset
    }

    pub fn samples(&self) -> Vec<f64> {
        (0..self.n_samples).map(|i| self.waveform(i)).collect()
    }
}

/// What happens to inputs beyond the `[-1, 1]` full-scale range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Overload {
    /// No overload: the staircase continues indefinitely.
    #[default]
    Ideal,
    /// Output codes are clamped so that `code * step` stays within `[-1, 1]`.
    Saturating,
}

/// Uniform quantizer with step `step` and characteristic offset `offset_c`
/// (in units of the step).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    pub step: f64,
    pub offset_c: f64,
    pub overload: Overload,
}

impl QuantizerSpec {
    pub fn new(step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!(
                "quantizer step must be finite and > 0, got {step}"
            )));
        }
        Ok(Self {
            step,
            offset_c: 0.0,
            overload: Overload::Ideal,
        })
    }

    /// A `bits`-bit quantizer over `[-1, 1]`: `step = 2 * 2^-bits`.
    pub fn from_bits(bits: u32) -> Result<Self> {
        if bits == 0 || bits > 60 {
            return Err(invalid(format!("bit count must be in 1..=60, got {bits}")));
        }
        Self::new(2.0f64.powi(1 - bits as i32))
    }

    pub fn with_offset(mut self, c: f64) -> Result<Self> {
        if !(-0.5..=0.5).contains(&c) {
            return Err(invalid(format!(
                "characteristic offset must lie in [-0.5, 0.5], got {c}"
            )));
        }
        self.offset_c = c;
        Ok(self)
    }

    pub fn with_overload(mut self, overload: Overload) -> Self {
        self.overload = overload;
        self
    }

    /// Largest code magnitude representable within `[-1, 1]`.
    fn max_code(&self) -> i64 {
        (1.0 / self.step).floor() as i64
    }

    /// Integer output code for input `s`.
    #[inline]
    pub fn code(&self, s: f64) -> i64 {
        let n = (s / self.step + 0.5 + self.offset_c).floor() as i64;
        match self.overload {
            Overload::Ideal => n,
            Overload::Saturating => {
                let m = self.max_code();
                n.clamp(-m, m)
            }
        }
    }

    #[inline]
    pub fn quantize(&self, s: f64) -> f64 {
        self.step * self.code(s) as f64
    }

    /// Quantization error `quantize(s) - s`.
    ///
    /// For the ideal mid-tread characteristic this uses the fractional-part
    /// form `step/2 - step * frac(s/step + 1/2)`.
    pub fn quant_error(&self, s: f64) -> f64 {
        if self.offset_c == 0.0 && self.overload == Overload::Ideal {
            let t = s / self.step + 0.5;
            self.step / 2.0 - self.step * (t - t.floor())
        } else {
            self.quantize(s) - s
        }
    }
}

/// Standard normal deviate by the Box–Muller transform (cosine branch).
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // 1 - U lies in (0, 1], so the logarithm is finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// One quantized record, with optional Gaussian noise added before quantization.
pub fn make_record<R: Rng + ?Sized>(
    spec: &SineSpec,
    q: &QuantizerSpec,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(invalid(format!(
            "noise sigma must be finite and >= 0, got {noise_sigma}"
        )));
    }
    Ok((0..spec.n_samples)
        .map(|i| {
            let noise = if noise_sigma > 0.0 {
                noise_sigma * gaussian(rng)
            } else {
                0.0
            };
            q.quantize(spec.waveform(i) + noise)
        })
        .collect())
}
