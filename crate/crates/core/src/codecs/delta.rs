//! Delta-LEB128: LEB128 applied to the wrapping difference from the previous tuple.

use crate::bitio::{BitSink, BitSource};
use crate::error::Result;

use super::{hash_words, leb128, Decoder, Encoder};

/// Value state shared by Delta-LEB128 and RLE: the last tuple seen.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ValueState {
    pub last: u32,
    pub run: u64,
}

#[derive(Debug, Default, Clone)]
pub struct DeltaLeb128Encoder {
    state: ValueState,
}

impl DeltaLeb128Encoder {
    pub fn state(&self) -> ValueState {
        self.state
    }
}

impl Encoder for DeltaLeb128Encoder {
    fn encode(&mut self, value: u32, sink: &mut BitSink) -> Result<()> {
        // s1 pre-process
        let last = self.state.last;
        // s2 state update
        self.state.last = value;
        // s3 state-based encoding, s4 output
        leb128::encode_u32(value.wrapping_sub(last), sink)
    }

    fn reset(&mut self) {
        self.state = ValueState::default();
    }

    fn state_hash(&self) -> u64 {
        hash_words([u64::from(self.state.last)])
    }
}

#[derive(Debug, Default, Clone)]
pub struct DeltaLeb128Decoder {
    last: u32,
}

impl Decoder for DeltaLeb128Decoder {
    fn decode_next(&mut self, src: &mut BitSource<'_>, out: &mut Vec<u32>) -> Result<bool> {
        if src.remaining() == 0 {
            return Ok(false);
        }
        let delta = leb128::decode_u32(src)?;
        self.last = self.last.wrapping_add(delta);
        out.push(self.last);
        Ok(true)
    }

    fn reset(&mut self) {
        self.last = 0;
    }

    fn state_hash(&self) -> u64 {
        hash_words([u64::from(self.last)])
    }
}
