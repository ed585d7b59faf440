//! ADPCM and UAADPCM: signed NUQ over the difference from a predictor.
//!
//! The predictor is the previous *reconstructed* value, so encoder and
//! decoder run the same state machine and never drift apart.

use crate::bitio::{BitSink, BitSource};
use crate::error::{Error, Result};

use super::nuq::{QuantParams, Quantizer};
use super::{hash_words, padded_width, Decoder, Encoder};

#[derive(Debug, Clone)]
struct Predictor {
    quant: Quantizer,
    width: u32,
    last: u32,
}

impl Predictor {
    fn new(mut params: QuantParams, aligned: bool) -> Result<Self> {
        params.signed = true;
        let quant = Quantizer::new(params)?;
        let width = if aligned {
            padded_width(params.q)
        } else {
            u32::from(params.q)
        };
        Ok(Self {
            quant,
            width,
            last: 0,
        })
    }

    /// Applies a code and returns the reconstructed tuple.
    fn advance(&mut self, code: u32) -> u32 {
        let next = i64::from(self.last) + self.quant.dequantize_signed(code);
        self.last = next.clamp(0, i64::from(u32::MAX)) as u32;
        self.last
    }

    fn hash(&self) -> u64 {
        hash_words([u64::from(self.last)])
    }
}

#[derive(Debug, Clone)]
pub struct AdpcmEncoder {
    pred: Predictor,
}

impl AdpcmEncoder {
    pub fn aligned(params: QuantParams) -> Result<Self> {
        Predictor::new(params, true).map(|pred| Self { pred })
    }

    pub fn unaligned(params: QuantParams) -> Result<Self> {
        Predictor::new(params, false).map(|pred| Self { pred })
    }

    /// Current reconstructed predictor.
    pub fn predictor(&self) -> u32 {
        self.pred.last
    }
}

impl Encoder for AdpcmEncoder {
    fn encode(&mut self, value: u32, sink: &mut BitSink) -> Result<()> {
        // s1 pre-process
        let d = i64::from(value) - i64::from(self.pred.last);
        let code = self.pred.quant.quantize_signed(d);
        // s2 state update
        self.pred.advance(code);
        // s3 state-based encoding, s4 output
        sink.put_bits(u64::from(code), self.pred.width);
        Ok(())
    }

    fn reset(&mut self) {
        self.pred.last = 0;
    }

    fn state_hash(&self) -> u64 {
        self.pred.hash()
    }
}

#[derive(Debug, Clone)]
pub struct AdpcmDecoder {
    pred: Predictor,
}

impl AdpcmDecoder {
    pub fn aligned(params: QuantParams) -> Result<Self> {
        Predictor::new(params, true).map(|pred| Self { pred })
    }

    pub fn unaligned(params: QuantParams) -> Result<Self> {
        Predictor::new(params, false).map(|pred| Self { pred })
    }
}

impl Decoder for AdpcmDecoder {
    fn decode_next(&mut self, src: &mut BitSource<'_>, out: &mut Vec<u32>) -> Result<bool> {
        if src.remaining() == 0 {
            return Ok(false);
        }
        let code = src.read_bits(self.pred.width)? as u32;
        if code >> self.pred.quant.width() != 0 {
            return Err(Error::Corrupt(format!("ADPCM code {code:#x} has pad bits set")));
        }
        out.push(self.pred.advance(code));
        Ok(true)
    }

    fn reset(&mut self) {
        self.pred.last = 0;
    }

    fn state_hash(&self) -> u64 {
        self.pred.hash()
    }
}
