//! Unsigned LEB128: 7-bit groups, least significant group first, high bit
//! set on every byte except the last.

use crate::bitio::{BitSink, BitSource};
use crate::error::{Error, Result};

use super::{Decoder, Encoder};

/// Writes `number` as unsigned LEB128. The sink must be byte-aligned.
pub fn encode_u64(number: u64, sink: &mut BitSink) -> Result<()> {
    if !sink.is_aligned() {
        return Err(Error::Unaligned {
            bit_len: sink.bit_len(),
        });
    }
    let mut rest = number;
    loop {
        let group = (rest & 0x7F) as u8;
        rest >>= 7;
        if rest == 0 {
            sink.push_byte(group);
            return Ok(());
        }
        sink.push_byte(group | 0x80);
    }
}

pub fn encode_u32(number: u32, sink: &mut BitSink) -> Result<()> {
    encode_u64(u64::from(number), sink)
}

/// Reads one LEB128 value no wider than `max_bits`.
pub fn decode_u64(src: &mut BitSource<'_>, max_bits: u32) -> Result<u64> {
    let mut value = 0u64;
    let mut shift = 0u32;
    loop {
        let byte = src.read_byte()?;
        let group = u64::from(byte & 0x7F);
        if shift >= max_bits || (shift > 0 && group >> (max_bits - shift).min(63) != 0) {
            return Err(Error::Corrupt(format!(
                "LEB128 value exceeds {max_bits} bits"
            )));
        }
        value |= group << shift;
        if byte & 0x80 == 0 {
            return Ok(value);
        }
        shift += 7;
    }
}

pub fn decode_u32(src: &mut BitSource<'_>) -> Result<u32> {
    decode_u64(src, 32).map(|v| v as u32)
}

/// Number of bytes LEB128 needs for `number`.
pub fn encoded_len(number: u64) -> usize {
    let bits = 64 - number.leading_zeros() as usize;
    bits.div_ceil(7).max(1)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Leb128Encoder;

impl Encoder for Leb128Encoder {
    fn encode(&mut self, value: u32, sink: &mut BitSink) -> Result<()> {
        // s0 load / s1 squeeze leading zeros / s2 output
        encode_u32(value, sink)
    }

    fn reset(&mut self) {}
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Leb128Decoder;

impl Decoder for Leb128Decoder {
    fn decode_next(&mut self, src: &mut BitSource<'_>, out: &mut Vec<u32>) -> Result<bool> {
        if src.remaining() == 0 {
            return Ok(false);
        }
        out.push(decode_u32(src)?);
        Ok(true)
    }

    fn reset(&mut self) {}
}
