//! Bit-exact output stream and cursor reader shared by every codec.
//!
//! Codes are written MSB-first and packed contiguously from the high bit of
//! each byte downwards. The final byte is zero-padded; the true length is
//! kept in [`BitSink::bit_len`] and carried through the [`Frame`] header so
//! decoders never mistake pad bits for data.

use crate::codecs::CodecId;
use crate::error::{Error, Result};

/// Append-only bit stream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitSink {
    buf: Vec<u8>,
    bit_len: u64,
}

/// How [`BitSink::write_byte_aligned`] treats a sink that is mid-byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Refuse to write unless the sink is already aligned.
    Strict,
    /// Zero-fill up to the next byte boundary first.
    ZeroPad,
}

impl BitSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bytes: usize) -> Self {
        Self {
            buf: Vec::with_capacity(bytes),
            bit_len: 0,
        }
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    pub fn is_aligned(&self) -> bool {
        self.bit_len.is_multiple_of(8)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buf
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    /// Appends the low `n` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, n: u32) -> Result<()> {
        if !(1..=64).contains(&n) {
            return Err(Error::Contract(format!("bit count {n} outside 1..=64")));
        }
        if n < 64 && value >> n != 0 {
            return Err(Error::Contract(format!(
                "value {value:#x} does not fit in {n} bits"
            )));
        }
        self.put_bits(value, n);
        Ok(())
    }

    /// Unchecked fast path used by codecs whose widths are known statically.
    #[inline]
    pub(crate) fn put_bits(&mut self, value: u64, n: u32) {
        debug_assert!((1..=64).contains(&n));
        let mut remaining = n;
        while remaining > 0 {
            let used = (self.bit_len % 8) as u32;
            if used == 0 {
                self.buf.push(0);
            }
            let free = 8 - used;
            let take = free.min(remaining);
            let chunk = ((value >> (remaining - take)) & ((1u64 << take) - 1)) as u8;
            let last = self.buf.len() - 1;
            self.buf[last] |= chunk << (free - take);
            remaining -= take;
            self.bit_len += u64::from(take);
        }
    }

    /// Zero-fills up to the next byte boundary; no-op when aligned.
    pub fn pad_to_byte(&mut self) {
        self.bit_len = self.buf.len() as u64 * 8;
    }

    pub fn write_byte_aligned(&mut self, bytes: &[u8], padding: Padding) -> Result<()> {
        if !self.is_aligned() {
            match padding {
                Padding::Strict => {
                    return Err(Error::Unaligned {
                        bit_len: self.bit_len,
                    })
                }
                Padding::ZeroPad => self.pad_to_byte(),
            }
        }
        self.buf.extend_from_slice(bytes);
        self.bit_len += bytes.len() as u64 * 8;
        Ok(())
    }

    #[inline]
    pub(crate) fn push_byte(&mut self, byte: u8) {
        debug_assert!(self.is_aligned());
        self.buf.push(byte);
        self.bit_len += 8;
    }

    /// Appends another sink's bits verbatim (no padding between them).
    pub fn append(&mut self, other: &BitSink) {
        if self.is_aligned() {
            self.buf.extend_from_slice(&other.buf);
            self.bit_len += other.bit_len;
            return;
        }
        let mut src = BitSource::with_bit_len(&other.buf, other.bit_len)
            .expect("sink invariants guarantee a consistent length");
        while src.remaining() > 0 {
            let n = src.remaining().min(64) as u32;
            let v = src.read_bits(n).expect("bounded by remaining");
            self.put_bits(v, n);
        }
    }
}

/// Cursor over a bit stream produced by [`BitSink`].
#[derive(Debug, Clone)]
pub struct BitSource<'a> {
    buf: &'a [u8],
    bit_len: u64,
    cursor: u64,
}

impl<'a> BitSource<'a> {
    /// Reads every bit of `buf`, trailing pad included.
    pub fn new(buf: &'a [u8]) -> Self {
        Self {
            buf,
            bit_len: buf.len() as u64 * 8,
            cursor: 0,
        }
    }

    /// Reads only the first `bit_len` bits of `buf`.
    pub fn with_bit_len(buf: &'a [u8], bit_len: u64) -> Result<Self> {
        if bit_len > buf.len() as u64 * 8 {
            return Err(Error::Frame(format!(
                "bit_len {bit_len} exceeds {} payload bytes",
                buf.len()
            )));
        }
        Ok(Self {
            buf,
            bit_len,
            cursor: 0,
        })
    }

    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    pub fn remaining(&self) -> u64 {
        self.bit_len - self.cursor
    }

    pub fn is_aligned(&self) -> bool {
        self.cursor.is_multiple_of(8)
    }

    pub fn read_bits(&mut self, n: u32) -> Result<u64> {
        if !(1..=64).contains(&n) {
            return Err(Error::Contract(format!("bit count {n} outside 1..=64")));
        }
        if u64::from(n) > self.remaining() {
            return Err(Error::EndOfStream {
                needed: u64::from(n),
                available: self.remaining(),
            });
        }
        let mut out = 0u64;
        let mut remaining = n;
        while remaining > 0 {
            let byte = self.buf[(self.cursor / 8) as usize];
            let used = (self.cursor % 8) as u32;
            let avail = 8 - used;
            let take = avail.min(remaining);
            let chunk = (byte >> (avail - take)) & (((1u16 << take) - 1) as u8);
            out = (out << take) | u64::from(chunk);
            remaining -= take;
            self.cursor += u64::from(take);
        }
        Ok(out)
    }

    pub fn read_byte(&mut self) -> Result<u8> {
        self.read_bits(8).map(|b| b as u8)
    }

    /// Reads four bytes as a little-endian word.
    pub fn read_u32_le(&mut self) -> Result<u32> {
        let word = self.read_bits(32)? as u32;
        Ok(word.swap_bytes())
    }

    /// Skips to the next byte boundary (pad bits are not validated).
    pub fn align(&mut self) {
        self.cursor = self.cursor.div_ceil(8) * 8;
        self.cursor = self.cursor.min(self.bit_len);
    }
}

/// Container magic: ASCII "CSTR".
pub const FRAME_MAGIC: [u8; 4] = *b"CSTR";
/// Magic (4) + codec id (1) + bit_len (8).
pub const FRAME_HEADER_LEN: usize = 13;

/// One compressed unit: `"CSTR" | codec id (u8) | bit_len (u64 LE) | payload`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub codec: CodecId,
    pub bit_len: u64,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn from_sink(codec: CodecId, sink: BitSink) -> Self {
        let bit_len = sink.bit_len();
        Self {
            codec,
            bit_len,
            payload: sink.into_bytes(),
        }
    }

    pub fn source(&self) -> BitSource<'_> {
        BitSource::with_bit_len(&self.payload, self.bit_len)
            .expect("frame payload validated on construction")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FRAME_HEADER_LEN + self.payload.len());
        out.extend_from_slice(&FRAME_MAGIC);
        out.push(self.codec.wire_id());
        out.extend_from_slice(&self.bit_len.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses a frame; trailing bytes beyond `ceil(bit_len / 8)` are rejected.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < FRAME_HEADER_LEN {
            return Err(Error::Frame(format!(
                "truncated header: {} of {FRAME_HEADER_LEN} bytes",
                bytes.len()
            )));
        }
        if bytes[..4] != FRAME_MAGIC {
            return Err(Error::Frame("bad magic".into()));
        }
        let codec = CodecId::from_wire_id(bytes[4])?;
        let bit_len = u64::from_le_bytes(bytes[5..13].try_into().expect("8 bytes"));
        let payload = &bytes[FRAME_HEADER_LEN..];
        let expected = bit_len.div_ceil(8);
        if (payload.len() as u64) < expected {
            return Err(Error::Frame(format!(
                "truncated payload: {} of {expected} bytes",
                payload.len()
            )));
        }
        if payload.len() as u64 > expected {
            return Err(Error::Frame(format!(
                "{} trailing bytes after payload",
                payload.len() as u64 - expected
            )));
        }
        Ok(Self {
            codec,
            bit_len,
            payload: payload.to_vec(),
        })
    }
}
