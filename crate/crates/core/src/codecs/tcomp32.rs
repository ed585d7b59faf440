//! Tcomp32: leading-zero suppression with a fixed 5-bit length prefix.
//!
//! Each tuple becomes `n - 1` in 5 bits followed by the low `n` bits of the
//! value, where `n` is the value's bit length (1 for 0 and 1).

use crate::bitio::{BitSink, BitSource};
use crate::error::{Error, Result};

use super::{Decoder, Encoder};

/// Significant bit count, with 0 counted as one bit.
#[inline]
pub fn code_width(number: u32) -> u32 {
    (32 - number.leading_zeros()).max(1)
}

/// Total encoded size of `number` in bits.
#[inline]
pub fn encoded_bits(number: u32) -> u32 {
    5 + code_width(number)
}

pub fn encode_one(number: u32, sink: &mut BitSink) {
    // s1: computed with leading_zeros, so number + 1 never overflows
    let n = code_width(number);
    // s2: unaligned write
    sink.put_bits(u64::from(n - 1), 5);
    sink.put_bits(u64::from(number), n);
}

pub fn decode_one(src: &mut BitSource<'_>) -> Result<u32> {
    let n = src.read_bits(5)? as u32 + 1;
    let value = src.read_bits(n)? as u32;
    if n > 1 && value >> (n - 1) != 1 {
        return Err(Error::Corrupt(format!(
            "tcomp32 code of width {n} has a leading zero"
        )));
    }
    Ok(value)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Tcomp32Encoder;

impl Encoder for Tcomp32Encoder {
    fn encode(&mut self, value: u32, sink: &mut BitSink) -> Result<()> {
        encode_one(value, sink);
        Ok(())
    }

    fn reset(&mut self) {}
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Tcomp32Decoder;

impl Decoder for Tcomp32Decoder {
    fn decode_next(&mut self, src: &mut BitSource<'_>, out: &mut Vec<u32>) -> Result<bool> {
        if src.remaining() == 0 {
            return Ok(false);
        }
        out.push(decode_one(src)?);
        Ok(true)
    }

    fn reset(&mut self) {}
}
