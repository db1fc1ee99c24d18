//! Quantized boundary models: digipots, the compensation current DAC, the
//! VREF DAC, and the ADC with oversampling and decimation.
//!
//! All quantizers are mid-tread with round-half-away-from-zero so traces are
//! bit-reproducible.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConverterError {
    #[error("quantizer bits {0} outside [1, 24]")]
    BadBits(u32),
    #[error("full scale empty or inverted: lo {lo} >= hi {hi}")]
    BadRange { lo: f64, hi: f64 },
    #[error("code {code} out of range for {bits}-bit quantizer")]
    CodeOutOfRange { code: u32, bits: u32 },
    #[error("oversample factor {0} must be a power of 4 in {{1, 4, 16, 64, 256}}")]
    BadOversample(u32),
    #[error("effective ADC resolution {0} bits exceeds 16")]
    TooManyEffectiveBits(u32),
}

/// Code-to-value law of a converter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transfer {
    /// value = lo + code * LSB
    Linear,
    /// value = hi / (code + 1); models a current source whose setting
    /// resistor is a linear digipot. Code 0 gives full_scale_hi.
    Reciprocal,
}

/// A generic saturating quantizer over one physical quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    pub bits: u32,
    pub lo: f64,
    pub hi: f64,
    pub transfer: Transfer,
}

impl QuantizerSpec {
    pub fn linear(bits: u32, lo: f64, hi: f64) -> Self {
        Self { bits, lo, hi, transfer: Transfer::Linear }
    }

    pub fn reciprocal(bits: u32, lo: f64, hi: f64) -> Self {
        Self { bits, lo, hi, transfer: Transfer::Reciprocal }
    }

    pub fn validate(&self) -> Result<(), ConverterError> {
        if self.bits < 1 || self.bits > 24 {
            return Err(ConverterError::BadBits(self.bits));
        }
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(ConverterError::BadRange { lo: self.lo, hi: self.hi });
        }
        Ok(())
    }

    pub fn max_code(&self) -> u32 {
        (1u32 << self.bits) - 1
    }

    /// Linear step size. The endpoints map exactly: code 0 -> lo, max code -> hi.
    pub fn lsb(&self) -> f64 {
        (self.hi - self.lo) / self.max_code() as f64
    }

    /// Nearest code for `x`, saturating at the rails.
    pub fn quantize(&self, x: f64) -> u32 {
        match self.transfer {
            Transfer::Linear => {
                let q = ((x - self.lo) / self.lsb()).round();
                if q <= 0.0 {
                    0
                } else if q >= self.max_code() as f64 {
                    self.max_code()
                } else {
                    q as u32
                }
            }
            Transfer::Reciprocal => {
                // value(code) = hi/(code+1) is monotone decreasing, so the
                // argmin over codes is one of the two codes bracketing x.
                if !(x > 0.0) || x >= self.hi {
                    return 0;
                }
                let c = (self.hi / x - 1.0).floor();
                let c = if c >= self.max_code() as f64 { return self.max_code() } else { c as u32 };
                let lo_err = (self.value_unchecked(c) - x).abs();
                let hi_err = (self.value_unchecked((c + 1).min(self.max_code())) - x).abs();
                if lo_err <= hi_err {
                    c
                } else {
                    (c + 1).min(self.max_code())
                }
            }
        }
    }

    pub fn dequantize(&self, code: u32) -> Result<f64, ConverterError> {
        if code > self.max_code() {
            return Err(ConverterError::CodeOutOfRange { code, bits: self.bits });
        }
        Ok(self.value_unchecked(code))
    }

    /// Dequantize with the code clamped into range.
    pub fn value_clamped(&self, code: u32) -> f64 {
        self.value_unchecked(code.min(self.max_code()))
    }

    fn value_unchecked(&self, code: u32) -> f64 {
        match self.transfer {
            Transfer::Linear => self.lo + code as f64 * self.lsb(),
            Transfer::Reciprocal => self.hi / (code as f64 + 1.0),
        }
    }
}

/// The offset-compensation current sink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdacSpec {
    pub quant: QuantizerSpec,
}

impl IdacSpec {
    /// 8-bit sink over 1 uA .. 10 mA.
    pub fn full_range(transfer: Transfer) -> Self {
        Self { quant: QuantizerSpec { bits: 8, lo: 1e-6, hi: 10e-3, transfer } }
    }

    /// 7-bit SoC-style sink over 1 uA .. 128 uA (1 uA per code with the
    /// linear transfer).
    pub fn soc_7bit() -> Self {
        Self { quant: QuantizerSpec::linear(7, 1e-6, 128e-6) }
    }

    pub fn validate(&self) -> Result<(), ConverterError> {
        self.quant.validate()
    }

    pub fn current(&self, code: u32) -> f64 {
        self.quant.value_clamped(code)
    }

    /// Code minimizing |current(code) - target| over all codes.
    pub fn code_for(&self, target: f64) -> u32 {
        self.quant.quantize(target)
    }

    pub fn min_current(&self) -> f64 {
        match self.quant.transfer {
            Transfer::Linear => self.quant.lo,
            Transfer::Reciprocal => self.quant.hi / (self.quant.max_code() as f64 + 1.0),
        }
    }
}

/// Successive-approximation ADC with oversampling and decimation.
///
/// `oversample` noisy sub-conversions at `base_bits` are accumulated and
/// right-shifted by log4(oversample), for an effective resolution of
/// base_bits + log4(oversample).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcSpec {
    pub base_bits: u32,
    pub oversample: u32,
    pub vref_lo: f64,
    pub vref_hi: f64,
}

impl AdcSpec {
    pub fn new(base_bits: u32, oversample: u32, supply: f64) -> Self {
        Self { base_bits, oversample, vref_lo: 0.0, vref_hi: supply }
    }

    pub fn validate(&self) -> Result<(), ConverterError> {
        if !matches!(self.oversample, 1 | 4 | 16 | 64 | 256) {
            return Err(ConverterError::BadOversample(self.oversample));
        }
        let eff = self.effective_bits();
        if eff > 16 {
            return Err(ConverterError::TooManyEffectiveBits(eff));
        }
        QuantizerSpec::linear(self.base_bits, self.vref_lo, self.vref_hi).validate()
    }

    fn shift(&self) -> u32 {
        // log4(oversample)
        self.oversample.trailing_zeros() / 2
    }

    pub fn effective_bits(&self) -> u32 {
        self.base_bits + self.shift()
    }

    fn sub_spec(&self) -> QuantizerSpec {
        QuantizerSpec::linear(self.base_bits, self.vref_lo, self.vref_hi)
    }

    /// Step size of a single sub-conversion.
    pub fn base_lsb(&self) -> f64 {
        self.sub_spec().lsb()
    }

    /// Step size after decimation.
    pub fn effective_lsb(&self) -> f64 {
        self.base_lsb() / (1u32 << self.shift()) as f64
    }

    pub fn max_effective_code(&self) -> u32 {
        (self.oversample * self.sub_spec().max_code()) >> self.shift()
    }

    /// One full conversion: `oversample` noisy sub-samples, accumulated and
    /// decimated. Saturating; monotone non-decreasing in `v` when noiseless.
    pub fn sample<R: Rng + ?Sized>(&self, v: f64, noise_rms: f64, rng: &mut R) -> u32 {
        let sub = self.sub_spec();
        let mut acc: u64 = 0;
        if noise_rms > 0.0 {
            let dist = Normal::new(0.0, noise_rms).expect("finite noise rms");
            for _ in 0..self.oversample {
                acc += sub.quantize(v + dist.sample(rng)) as u64;
            }
        } else {
            acc = sub.quantize(v) as u64 * self.oversample as u64;
        }
        (acc >> self.shift()) as u32
    }

    /// Voltage corresponding to a decimated code.
    pub fn volts(&self, code: u32) -> f64 {
        self.vref_lo + code as f64 * self.effective_lsb()
    }

    /// True when a single base-resolution probe of `v` reads at either rail.
    pub fn probe_railed<R: Rng + ?Sized>(&self, v: f64, noise_rms: f64, rng: &mut R) -> bool {
        let sub = self.sub_spec();
        let code = if noise_rms > 0.0 {
            let dist = Normal::new(0.0, noise_rms).expect("finite noise rms");
            sub.quantize(v + dist.sample(rng))
        } else {
            sub.quantize(v)
        };
        code == 0 || code == sub.max_code()
    }
}
