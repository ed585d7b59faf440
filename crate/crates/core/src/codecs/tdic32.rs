//! Tdic32: a direct-mapped hash table of recent tuples.
//!
//! A hit costs one flag bit plus the table index; a miss costs one flag bit
//! plus the raw 32-bit value and installs the value in its slot. Hits never
//! modify the table, so encoder and decoder tables stay identical.

use crate::bitio::{BitSink, BitSource};
use crate::error::{Error, Result};

use super::{hash_words, Decoder, Encoder};

pub const DEFAULT_DICT_SIZE: usize = 4096;
const MAX_INDEX_BITS: u32 = 24;
const FIB_MULTIPLIER: u32 = 2_654_435_761;

/// Fibonacci hash of `value` down to `index_bits` bits.
#[inline]
pub fn hash_index(value: u32, index_bits: u32) -> usize {
    (value.wrapping_mul(FIB_MULTIPLIER) >> (32 - index_bits)) as usize
}

/// Dictionary state. Occupancy is tracked with an epoch tag per slot, so a
/// fresh or cleared table never matches anything, value 0 included, and
/// clearing costs O(1).
#[derive(Debug, Clone)]
pub struct DictState {
    slots: Vec<(u32, u32)>,
    epoch: u32,
    index_bits: u32,
}

impl DictState {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 || !size.is_power_of_two() || size > 1 << MAX_INDEX_BITS {
            return Err(Error::Param(format!(
                "dictionary size {size} must be a power of two in 2..=2^{MAX_INDEX_BITS}"
            )));
        }
        Ok(Self {
            slots: vec![(0, 0); size],
            epoch: 1,
            index_bits: size.trailing_zeros(),
        })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied().next().is_none()
    }

    pub fn index_bits(&self) -> u32 {
        self.index_bits
    }

    #[inline]
    pub fn slot_of(&self, value: u32) -> usize {
        hash_index(value, self.index_bits)
    }

    #[inline]
    pub fn get(&self, slot: usize) -> Option<u32> {
        let (value, epoch) = self.slots[slot];
        (epoch == self.epoch).then_some(value)
    }

    #[inline]
    pub fn insert(&mut self, slot: usize, value: u32) {
        self.slots[slot] = (value, self.epoch);
    }

    pub fn clear(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.slots.fill((0, 0));
            self.epoch = 1;
        }
    }

    pub fn occupied(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, &(_, e))| e == self.epoch)
            .map(|(i, &(v, _))| (i, v))
    }

    pub fn state_hash(&self) -> u64 {
        hash_words(
            self.occupied()
                .map(|(i, v)| ((i as u64) << 32) | u64::from(v)),
        )
    }

    /// Encodes one tuple against the table, updating it on a miss.
    #[inline]
    pub fn encode(&mut self, value: u32, sink: &mut BitSink) {
        // s1 pre-process: hash
        let slot = self.slot_of(value);
        if self.get(slot) == Some(value) {
            // s3/s4: hit, flag + index
            sink.put_bits((1 << self.index_bits) | slot as u64, 1 + self.index_bits);
        } else {
            // s2 state update, then s3/s4: flag + raw value
            self.insert(slot, value);
            sink.put_bits(u64::from(value), 33);
        }
    }

    pub fn decode(&mut self, src: &mut BitSource<'_>) -> Result<u32> {
        if src.read_bits(1)? == 1 {
            let slot = src.read_bits(self.index_bits)? as usize;
            self.get(slot).ok_or_else(|| {
                Error::Corrupt(format!("tdic32 hit on unoccupied slot {slot}"))
            })
        } else {
            let value = src.read_bits(32)? as u32;
            let slot = self.slot_of(value);
            self.insert(slot, value);
            Ok(value)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tdic32Encoder {
    dict: DictState,
}

impl Tdic32Encoder {
    pub fn new(size: usize) -> Result<Self> {
        Ok(Self {
            dict: DictState::new(size)?,
        })
    }

    pub fn dict(&self) -> &DictState {
        &self.dict
    }
}

impl Encoder for Tdic32Encoder {
    fn encode(&mut self, value: u32, sink: &mut BitSink) -> Result<()> {
        self.dict.encode(value, sink);
        Ok(())
    }

    fn reset(&mut self) {
        self.dict.clear();
    }

    fn state_hash(&self) -> u64 {
        self.dict.state_hash()
    }
}

#[derive(Debug, Clone)]
pub struct Tdic32Decoder {
    dict: DictState,
}

impl Tdic32Decoder {
    pub fn new(size: usize) -> Result<Self> {
        Ok(Self {
            dict: DictState::new(size)?,
        })
    }
}

impl Decoder for Tdic32Decoder {
    fn decode_next(&mut self, src: &mut BitSource<'_>, out: &mut Vec<u32>) -> Result<bool> {
        if src.remaining() == 0 {
            return Ok(false);
        }
        out.push(self.dict.decode(src)?);
        Ok(true)
    }

    fn reset(&mut self) {
        self.dict.clear();
    }

    fn state_hash(&self) -> u64 {
        self.dict.state_hash()
    }
}
