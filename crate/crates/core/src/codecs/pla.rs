//! Piecewise linear approximation with a swing-filter segmenter.
//!
//! Each segment record is: start index (LEB128), length (LEB128), anchor
//! value (u32 LE, exact first tuple), slope (f32 LE). Tuple `k` of a segment
//! reconstructs as `round(anchor + slope * k)` clamped to the u32 range.
//! Every reconstructed tuple is within `floor(ε)` of its input.

use crate::bitio::{BitSink, BitSource, Padding};
use crate::error::{Error, Result};

use super::{leb128, Decoder, Encoder};

/// Longest segment the encoder buffers before closing it.
pub const MAX_SEGMENT: usize = 1 << 16;

/// Slack added to the integer bound inside the cone so rounding stays within it.
const CONE_SLACK: f64 = 0.49;

/// Decoder arithmetic, shared with the encoder's verification pass.
pub fn reconstruct(anchor: u32, slope: f32, k: u64) -> u32 {
    let y = f64::from(anchor) + f64::from(slope) * k as f64;
    y.round().clamp(0.0, f64::from(u32::MAX)) as u32
}

/// Open segment: anchor plus the feasible slope cone.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaState {
    pub anchor_index: u64,
    pub anchor_value: u32,
    pub slope_lo: f64,
    pub slope_hi: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct PlaEncoder {
    bound: u64,
    cone: f64,
    state: PlaState,
    points: Vec<u32>,
    next_index: u64,
}

impl PlaEncoder {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::Param(format!(
                "PLA error bound must be finite and non-negative, got {epsilon}"
            )));
        }
        let bound = epsilon.floor().min(f64::from(u32::MAX)) as u64;
        Ok(Self {
            bound,
            cone: bound as f64 + CONE_SLACK,
            state: PlaState {
                anchor_index: 0,
                anchor_value: 0,
                slope_lo: f64::NEG_INFINITY,
                slope_hi: f64::INFINITY,
                epsilon,
            },
            points: Vec::new(),
            next_index: 0,
        })
    }

    pub fn state(&self) -> &PlaState {
        &self.state
    }

    /// Narrowed cone after admitting `value` at offset `k`, if still non-empty.
    fn admit(&self, value: u32, k: usize) -> Option<(f64, f64)> {
        let dy = f64::from(value) - f64::from(self.state.anchor_value);
        let k = k as f64;
        let lo = self.state.slope_lo.max((dy - self.cone) / k);
        let hi = self.state.slope_hi.min((dy + self.cone) / k);
        (lo <= hi).then_some((lo, hi))
    }

    fn open(&mut self, value: u32) {
        self.state.anchor_index = self.next_index;
        self.state.anchor_value = value;
        self.state.slope_lo = f64::NEG_INFINITY;
        self.state.slope_hi = f64::INFINITY;
        self.points.push(value);
    }

    /// Emits the buffered points, splitting wherever f32 slope rounding
    /// would break the bound.
    fn close(&mut self, sink: &mut BitSink) -> Result<()> {
        let points = std::mem::take(&mut self.points);
        let mut start = 0;
        while start < points.len() {
            let len = emit_longest(&points[start..], self.cone, self.bound, self.state.anchor_index + start as u64, sink)?;
            start += len;
        }
        Ok(())
    }
}

/// Greedily fits the longest verified prefix of `points` and writes its record.
fn emit_longest(points: &[u32], cone: f64, bound: u64, start_index: u64, sink: &mut BitSink) -> Result<usize> {
    let anchor = points[0];
    let mut limit = points.len();
    loop {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut len = 1;
        while len < limit {
            let dy = f64::from(points[len]) - f64::from(anchor);
            let k = len as f64;
            let nlo = lo.max((dy - cone) / k);
            let nhi = hi.min((dy + cone) / k);
            if nlo > nhi {
                break;
            }
            (lo, hi) = (nlo, nhi);
            len += 1;
        }
        let slope = if len == 1 { 0.0 } else { ((lo + hi) / 2.0) as f32 };
        let failure = (1..len).find(|&k| {
            u64::from(reconstruct(anchor, slope, k as u64).abs_diff(points[k])) > bound
        });
        match failure {
            Some(k) => limit = k,
            None => {
                leb128::encode_u64(start_index, sink)?;
                leb128::encode_u64(len as u64, sink)?;
                sink.write_byte_aligned(&anchor.to_le_bytes(), Padding::Strict)?;
                sink.write_byte_aligned(&slope.to_le_bytes(), Padding::Strict)?;
                return Ok(len);
            }
        }
    }
}

impl Encoder for PlaEncoder {
    fn encode(&mut self, value: u32, sink: &mut BitSink) -> Result<()> {
        if self.points.is_empty() {
            self.open(value);
        } else if let Some((lo, hi)) =
            (self.points.len() < MAX_SEGMENT).then(|| self.admit(value, self.points.len())).flatten()
        {
            self.state.slope_lo = lo;
            self.state.slope_hi = hi;
            self.points.push(value);
        } else {
            self.close(sink)?;
            self.open(value);
        }
        self.next_index += 1;
        Ok(())
    }

    fn finish(&mut self, sink: &mut BitSink) -> Result<()> {
        self.close(sink)
    }

    fn reset(&mut self) {
        self.points.clear();
        self.next_index = 0;
        self.state.slope_lo = f64::NEG_INFINITY;
        self.state.slope_hi = f64::INFINITY;
    }
}

#[derive(Debug, Default, Clone)]
pub struct PlaDecoder {
    next_index: u64,
}

impl Decoder for PlaDecoder {
    fn decode_next(&mut self, src: &mut BitSource<'_>, out: &mut Vec<u32>) -> Result<bool> {
        if src.remaining() == 0 {
            return Ok(false);
        }
        let start = leb128::decode_u64(src, 64)?;
        let len = leb128::decode_u64(src, 64)?;
        if start != self.next_index {
            return Err(Error::Corrupt(format!(
                "PLA segment starts at {start}, expected {}",
                self.next_index
            )));
        }
        if len == 0 || len > MAX_SEGMENT as u64 {
            return Err(Error::Corrupt(format!("PLA segment length {len}")));
        }
        let anchor = src.read_u32_le()?;
        let slope = f32::from_bits(src.read_u32_le()?);
        if !slope.is_finite() {
            return Err(Error::Corrupt("PLA slope is not finite".into()));
        }
        out.extend((0..len).map(|k| reconstruct(anchor, slope, k)));
        self.next_index += len;
        Ok(true)
    }

    fn reset(&mut self) {
        self.next_index = 0;
    }
}
