//! Non-uniform (μ-law) quantization and the two fixed-width codecs built on it.
//!
//! LEB128-NUQ writes each code padded to whole bytes; UANUQ writes exactly `q`
//! bits. The same [`Quantizer`] in signed mode drives ADPCM.

use crate::bitio::{BitSink, BitSource};
use crate::error::{Error, Result};

use super::{padded_width, Decoder, Encoder};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantParams {
    /// Total code width in bits, sign bit included.
    pub q: u8,
    /// Companding constant; `None` means `2^q - 1`.
    pub mu: Option<f64>,
    /// Largest representable magnitude; larger inputs are clamped.
    pub range: f64,
    pub signed: bool,
}

impl QuantParams {
    pub fn unsigned(q: u8, range: f64) -> Self {
        Self {
            q,
            mu: None,
            range,
            signed: false,
        }
    }

    pub fn signed(q: u8, range: f64) -> Self {
        Self {
            signed: true,
            ..Self::unsigned(q, range)
        }
    }
}

/// A validated μ-law curve over `[0, R]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantizer {
    params: QuantParams,
    mu: f64,
    log_base: f64,
    max_code: u32,
}

impl Quantizer {
    pub fn new(params: QuantParams) -> Result<Self> {
        if !(2..=16).contains(&params.q) {
            return Err(Error::Param(format!(
                "quantization bits {} outside 2..=16",
                params.q
            )));
        }
        if !(params.range.is_finite() && params.range > 0.0) {
            return Err(Error::Param(format!(
                "dynamic range must be positive, got {}",
                params.range
            )));
        }
        let mu = params.mu.unwrap_or(f64::from((1u32 << params.q) - 1));
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::Param(format!("mu must be positive, got {mu}")));
        }
        let magnitude_bits = u32::from(params.q) - u32::from(params.signed);
        Ok(Self {
            params,
            mu,
            log_base: mu.ln_1p(),
            max_code: (1u32 << magnitude_bits) - 1,
        })
    }

    pub fn params(&self) -> QuantParams {
        self.params
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Largest magnitude code.
    pub fn max_code(&self) -> u32 {
        self.max_code
    }

    pub fn width(&self) -> u32 {
        u32::from(self.params.q)
    }

    /// Magnitude code for a non-negative value, clamped to `R`.
    pub fn quantize_magnitude(&self, x: f64) -> u32 {
        let u = (x.max(0.0) / self.params.range).min(1.0);
        let f = (self.mu * u).ln_1p() / self.log_base;
        ((f * f64::from(self.max_code)).round() as u32).min(self.max_code)
    }

    /// Exact real-valued inverse of the curve at a code point.
    pub fn dequantize_real(&self, code: u32) -> f64 {
        let f = f64::from(code.min(self.max_code)) / f64::from(self.max_code);
        self.params.range * (f * self.log_base).exp_m1() / self.mu
    }

    /// Integer reconstruction of a magnitude code. Picks the integer
    /// neighbour of the real inverse that quantizes back to `code` when one
    /// exists, so `quantize(dequantize(c)) == c` for every code reachable
    /// from an integer input.
    pub fn dequantize_magnitude(&self, code: u32) -> u64 {
        let real = self.dequantize_real(code);
        let lo = real.floor();
        let hi = real.ceil();
        let (near, far) = if real - lo <= hi - real {
            (lo, hi)
        } else {
            (hi, lo)
        };
        for cand in [near, far] {
            if self.quantize_magnitude(cand) == code {
                return cand as u64;
            }
        }
        near as u64
    }

    pub fn quantize(&self, x: u32) -> u32 {
        self.quantize_magnitude(f64::from(x))
    }

    pub fn dequantize(&self, code: u32) -> u32 {
        self.dequantize_magnitude(code).min(u64::from(u32::MAX)) as u32
    }

    /// Signed code: sign in the top bit, magnitude below. Zero is always
    /// encoded with a clear sign bit.
    pub fn quantize_signed(&self, d: i64) -> u32 {
        let mag = self.quantize_magnitude(d.unsigned_abs() as f64);
        if d < 0 && mag != 0 {
            mag | (1 << (self.width() - 1))
        } else {
            mag
        }
    }

    pub fn dequantize_signed(&self, code: u32) -> i64 {
        let sign_bit = 1u32 << (self.width() - 1);
        let mag = self.dequantize_magnitude(code & !sign_bit) as i64;
        if code & sign_bit != 0 {
            -mag
        } else {
            mag
        }
    }
}

/// Shared by LEB128-NUQ (byte-padded) and UANUQ (exactly `q` bits).
#[derive(Debug, Clone)]
pub struct NuqEncoder {
    quant: Quantizer,
    width: u32,
}

impl NuqEncoder {
    pub fn aligned(params: QuantParams) -> Result<Self> {
        Ok(Self {
            quant: Quantizer::new(params)?,
            width: padded_width(params.q),
        })
    }

    pub fn unaligned(params: QuantParams) -> Result<Self> {
        Ok(Self {
            quant: Quantizer::new(params)?,
            width: u32::from(params.q),
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }
}

impl Encoder for NuqEncoder {
    fn encode(&mut self, value: u32, sink: &mut BitSink) -> Result<()> {
        // s0 load / s1 quantize / s2 output
        sink.put_bits(u64::from(self.quant.quantize(value)), self.width);
        Ok(())
    }

    fn reset(&mut self) {}
}

#[derive(Debug, Clone)]
pub struct NuqDecoder {
    quant: Quantizer,
    width: u32,
}

impl NuqDecoder {
    pub fn aligned(params: QuantParams) -> Result<Self> {
        let enc = NuqEncoder::aligned(params)?;
        Ok(Self {
            quant: enc.quant,
            width: enc.width,
        })
    }

    pub fn unaligned(params: QuantParams) -> Result<Self> {
        let enc = NuqEncoder::unaligned(params)?;
        Ok(Self {
            quant: enc.quant,
            width: enc.width,
        })
    }
}

impl Decoder for NuqDecoder {
    fn decode_next(&mut self, src: &mut BitSource<'_>, out: &mut Vec<u32>) -> Result<bool> {
        if src.remaining() == 0 {
            return Ok(false);
        }
        let code = src.read_bits(self.width)? as u32;
        if code > self.quant.max_code() {
            return Err(Error::Corrupt(format!(
                "NUQ code {code} exceeds {}",
                self.quant.max_code()
            )));
        }
        out.push(self.quant.dequantize(code));
        Ok(true)
    }

    fn reset(&mut self) {}
}
