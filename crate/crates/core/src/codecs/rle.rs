//! Run-length encoding over 32-bit tuples.
//!
//! Each record is the raw value (4 bytes, little-endian) followed by the run
//! length in LEB128. Runs are emitted when the value changes, when they reach
//! [`MAX_RUN`], and on finish.

use crate::bitio::{BitSink, BitSource, Padding};
use crate::error::{Error, Result};

use super::delta::ValueState;
use super::{hash_words, leb128, Decoder, Encoder};

/// Longest run stored in one record; longer runs continue in the next record.
/// Bounds the decoder's expansion per input byte.
pub const MAX_RUN: u64 = 1 << 16;

#[derive(Debug, Default, Clone)]
pub struct RleEncoder {
    state: ValueState,
}

impl RleEncoder {
    pub fn state(&self) -> ValueState {
        self.state
    }

    fn emit(&self, sink: &mut BitSink) -> Result<()> {
        sink.write_byte_aligned(&self.state.last.to_le_bytes(), Padding::Strict)?;
        leb128::encode_u64(self.state.run, sink)
    }
}

impl Encoder for RleEncoder {
    fn encode(&mut self, value: u32, sink: &mut BitSink) -> Result<()> {
        if self.state.run > 0 && value == self.state.last && self.state.run < MAX_RUN {
            self.state.run += 1;
            return Ok(());
        }
        if self.state.run > 0 {
            self.emit(sink)?;
        }
        self.state = ValueState {
            last: value,
            run: 1,
        };
        Ok(())
    }

    fn finish(&mut self, sink: &mut BitSink) -> Result<()> {
        if self.state.run > 0 {
            self.emit(sink)?;
            self.state.run = 0;
        }
        Ok(())
    }

    fn reset(&mut self) {
        self.state = ValueState::default();
    }

    /// Only `last` is mirrored: the decoder sees whole runs at once.
    fn state_hash(&self) -> u64 {
        hash_words([u64::from(self.state.last)])
    }
}

#[derive(Debug, Default, Clone)]
pub struct RleDecoder {
    last: u32,
}

impl Decoder for RleDecoder {
    fn decode_next(&mut self, src: &mut BitSource<'_>, out: &mut Vec<u32>) -> Result<bool> {
        if src.remaining() == 0 {
            return Ok(false);
        }
        let value = src.read_u32_le()?;
        let run = leb128::decode_u64(src, 64)?;
        if run == 0 || run > MAX_RUN {
            return Err(Error::Corrupt(format!("RLE run {run} outside 1..={MAX_RUN}")));
        }
        out.extend(std::iter::repeat_n(value, run as usize));
        self.last = value;
        Ok(true)
    }

    fn reset(&mut self) {
        self.last = 0;
    }

    fn state_hash(&self) -> u64 {
        hash_words([u64::from(self.last)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bytes_of(values: &[u32]) -> Vec<u8> {
        let mut enc = RleEncoder::default();
        let mut sink = BitSink::new();
        for &v in values {
            enc.encode(v, &mut sink).unwrap();
        }
        enc.finish(&mut sink).unwrap();
        sink.into_bytes()
    }

    #[test]
    fn single_run() {
        assert_eq!(bytes_of(&[7, 7, 7]), vec![0x07, 0, 0, 0, 0x03]);
    }

    #[test]
    fn no_duplicates_expands() {
        let bytes = bytes_of(&[1, 2]);
        assert_eq!(bytes, vec![1, 0, 0, 0, 1, 2, 0, 0, 0, 1]);
    }

    #[test]
    fn long_runs_split() {
        let n = MAX_RUN as usize * 2 + 3;
        let bytes = bytes_of(&vec![9; n]);
        // two full records (4 + 3 bytes each) and a run of 3
        assert_eq!(bytes.len(), 7 + 7 + 5);
        assert_eq!(&bytes[4..7], &[0x80, 0x80, 0x04]);
        let mut src = BitSource::new(&bytes);
        let mut dec = RleDecoder::default();
        let mut out = Vec::new();
        while dec.decode_next(&mut src, &mut out).unwrap() {}
        assert_eq!(out.len(), n);
    }

    #[test]
    fn oversized_run_rejected() {
        let bytes = [1, 0, 0, 0, 0x81, 0x80, 0x04];
        let mut src = BitSource::new(&bytes);
        assert!(RleDecoder::default().decode_next(&mut src, &mut Vec::new()).is_err());
    }

    #[test]
    fn empty_stream() {
        assert!(bytes_of(&[]).is_empty());
    }

    #[test]
    fn long_run_uses_multibyte_length() {
        let bytes = bytes_of(&[5; 300]);
        assert_eq!(bytes, vec![5, 0, 0, 0, 0xAC, 0x02]);
    }

    #[test]
    fn zero_run_is_corrupt() {
        let bytes = [1, 0, 0, 0, 0];
        let mut src = BitSource::new(&bytes);
        let mut out = Vec::new();
        assert!(RleDecoder::default()
            .decode_next(&mut src, &mut out)
            .is_err());
    }
}
