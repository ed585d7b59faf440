//! The ten stream codecs.
//!
//! Every codec consumes 32-bit tuples one at a time. Stateless codecs follow
//! a three-step pipeline (load, transform, output); stateful codecs follow a
//! five-step pipeline (load, pre-process, state update, state-based encoding,
//! output). The step lists are exposed through [`CodecId::steps`] because the
//! cost model and the scheduler work at step granularity.
//!
//! | codec         | fidelity | state      | alignment |
//! |---------------|----------|------------|-----------|
//! | LEB128-NUQ    | lossy    | stateless  | aligned   |
//! | ADPCM         | lossy    | value      | aligned   |
//! | UANUQ         | lossy    | stateless  | unaligned |
//! | UAADPCM       | lossy    | value      | unaligned |
//! | LEB128        | lossless | stateless  | aligned   |
//! | Delta-LEB128  | lossless | value      | aligned   |
//! | Tcomp32       | lossless | stateless  | unaligned |
//! | Tdic32        | lossless | dictionary | unaligned |
//! | RLE           | lossless | value      | aligned   |
//! | PLA           | lossy    | model      | aligned   |

use std::fmt;
use std::hash::{DefaultHasher, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bitio::{BitSink, BitSource, Frame};
use crate::error::{Error, Result};

pub mod adpcm;
pub mod delta;
pub mod leb128;
pub mod nuq;
pub mod pla;
pub mod rle;
pub mod tcomp32;
pub mod tdic32;

pub use nuq::{QuantParams, Quantizer};
pub use tdic32::{hash_index, DictState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodecId {
    Leb128,
    DeltaLeb128,
    Tcomp32,
    Tdic32,
    Rle,
    Leb128Nuq,
    Uanuq,
    Adpcm,
    Uaadpcm,
    Pla,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    Lossless,
    Lossy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateUse {
    Stateless,
    Value,
    Dictionary,
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alignment {
    Aligned,
    Unaligned,
}

const STATELESS_STEPS: &[&str] = &["load", "transform", "output"];
const STATEFUL_STEPS: &[&str] = &[
    "load",
    "pre-process",
    "state update",
    "state-based encoding",
    "output",
];

impl CodecId {
    pub const ALL: [CodecId; 10] = [
        CodecId::Leb128,
        CodecId::DeltaLeb128,
        CodecId::Tcomp32,
        CodecId::Tdic32,
        CodecId::Rle,
        CodecId::Leb128Nuq,
        CodecId::Uanuq,
        CodecId::Adpcm,
        CodecId::Uaadpcm,
        CodecId::Pla,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CodecId::Leb128 => "leb128",
            CodecId::DeltaLeb128 => "delta-leb128",
            CodecId::Tcomp32 => "tcomp32",
            CodecId::Tdic32 => "tdic32",
            CodecId::Rle => "rle",
            CodecId::Leb128Nuq => "leb128-nuq",
            CodecId::Uanuq => "uanuq",
            CodecId::Adpcm => "adpcm",
            CodecId::Uaadpcm => "uaadpcm",
            CodecId::Pla => "pla",
        }
    }

    /// Byte stored in the frame header.
    pub fn wire_id(self) -> u8 {
        match self {
            CodecId::Leb128 => 1,
            CodecId::DeltaLeb128 => 2,
            CodecId::Tcomp32 => 3,
            CodecId::Tdic32 => 4,
            CodecId::Rle => 5,
            CodecId::Leb128Nuq => 6,
            CodecId::Uanuq => 7,
            CodecId::Adpcm => 8,
            CodecId::Uaadpcm => 9,
            CodecId::Pla => 10,
        }
    }

    pub fn from_wire_id(id: u8) -> Result<Self> {
        CodecId::ALL
            .into_iter()
            .find(|c| c.wire_id() == id)
            .ok_or_else(|| Error::UnknownCodec(format!("wire id {id}")))
    }

    pub fn fidelity(self) -> Fidelity {
        match self {
            CodecId::Leb128
            | CodecId::DeltaLeb128
            | CodecId::Tcomp32
            | CodecId::Tdic32
            | CodecId::Rle => Fidelity::Lossless,
            _ => Fidelity::Lossy,
        }
    }

    pub fn state_use(self) -> StateUse {
        match self {
            CodecId::Leb128 | CodecId::Tcomp32 | CodecId::Leb128Nuq | CodecId::Uanuq => {
                StateUse::Stateless
            }
            CodecId::DeltaLeb128 | CodecId::Rle | CodecId::Adpcm | CodecId::Uaadpcm => {
                StateUse::Value
            }
            CodecId::Tdic32 => StateUse::Dictionary,
            CodecId::Pla => StateUse::Model,
        }
    }

    pub fn alignment(self) -> Alignment {
        match self {
            CodecId::Tcomp32 | CodecId::Tdic32 | CodecId::Uanuq | CodecId::Uaadpcm => {
                Alignment::Unaligned
            }
            _ => Alignment::Aligned,
        }
    }

    pub fn is_stateful(self) -> bool {
        self.state_use() != StateUse::Stateless
    }

    /// Pipeline steps in execution order.
    pub fn steps(self) -> &'static [&'static str] {
        if self.is_stateful() {
            STATEFUL_STEPS
        } else {
            STATELESS_STEPS
        }
    }
}

impl fmt::Display for CodecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CodecId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_lowercase().replace('_', "-");
        CodecId::ALL
            .into_iter()
            .find(|c| c.name() == wanted)
            .ok_or_else(|| {
                let names: Vec<&str> = CodecId::ALL.iter().map(|c| c.name()).collect();
                Error::UnknownCodec(format!("{s} (expected one of {})", names.join(", ")))
            })
    }
}

/// Tunables shared by the codec family. Each codec reads only what it needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodecParams {
    /// Quantization bits `q` for the NUQ/ADPCM family.
    pub quant_bits: u8,
    /// Companding constant; `None` means `2^q - 1`.
    pub mu: Option<f64>,
    /// Dynamic range `R`: largest representable input (NUQ) or delta magnitude (ADPCM).
    pub range: f64,
    /// Tdic32 table entries; must be a power of two.
    pub dict_size: usize,
    /// PLA maximum absolute reconstruction error.
    pub epsilon: f64,
}

impl Default for CodecParams {
    fn default() -> Self {
        Self {
            quant_bits: 8,
            mu: None,
            range: 65535.0,
            dict_size: tdic32::DEFAULT_DICT_SIZE,
            epsilon: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodecSpec {
    pub id: CodecId,
    #[serde(default)]
    pub params: CodecParams,
}

impl CodecSpec {
    pub fn new(id: CodecId) -> Self {
        Self {
            id,
            params: CodecParams::default(),
        }
    }

    pub fn with_params(id: CodecId, params: CodecParams) -> Self {
        Self { id, params }
    }

    pub fn fidelity(&self) -> Fidelity {
        self.id.fidelity()
    }

    pub fn state_use(&self) -> StateUse {
        self.id.state_use()
    }

    pub fn alignment(&self) -> Alignment {
        self.id.alignment()
    }

    pub(crate) fn quant_params(&self, signed: bool) -> QuantParams {
        QuantParams {
            q: self.params.quant_bits,
            mu: self.params.mu,
            range: self.params.range,
            signed,
        }
    }

    /// Validates parameters and builds a fresh encoder.
    pub fn encoder(&self) -> Result<Box<dyn Encoder>> {
        Ok(match self.id {
            CodecId::Leb128 => Box::new(leb128::Leb128Encoder),
            CodecId::DeltaLeb128 => Box::new(delta::DeltaLeb128Encoder::default()),
            CodecId::Tcomp32 => Box::new(tcomp32::Tcomp32Encoder),
            CodecId::Tdic32 => Box::new(tdic32::Tdic32Encoder::new(self.params.dict_size)?),
            CodecId::Rle => Box::new(rle::RleEncoder::default()),
            CodecId::Leb128Nuq => Box::new(nuq::NuqEncoder::aligned(self.quant_params(false))?),
            CodecId::Uanuq => Box::new(nuq::NuqEncoder::unaligned(self.quant_params(false))?),
            CodecId::Adpcm => Box::new(adpcm::AdpcmEncoder::aligned(self.quant_params(true))?),
            CodecId::Uaadpcm => {
                Box::new(adpcm::AdpcmEncoder::unaligned(self.quant_params(true))?)
            }
            CodecId::Pla => Box::new(pla::PlaEncoder::new(self.params.epsilon)?),
        })
    }

    pub fn decoder(&self) -> Result<Box<dyn Decoder>> {
        Ok(match self.id {
            CodecId::Leb128 => Box::new(leb128::Leb128Decoder),
            CodecId::DeltaLeb128 => Box::new(delta::DeltaLeb128Decoder::default()),
            CodecId::Tcomp32 => Box::new(tcomp32::Tcomp32Decoder),
            CodecId::Tdic32 => Box::new(tdic32::Tdic32Decoder::new(self.params.dict_size)?),
            CodecId::Rle => Box::new(rle::RleDecoder::default()),
            CodecId::Leb128Nuq => Box::new(nuq::NuqDecoder::aligned(self.quant_params(false))?),
            CodecId::Uanuq => Box::new(nuq::NuqDecoder::unaligned(self.quant_params(false))?),
            CodecId::Adpcm => Box::new(adpcm::AdpcmDecoder::aligned(self.quant_params(true))?),
            CodecId::Uaadpcm => {
                Box::new(adpcm::AdpcmDecoder::unaligned(self.quant_params(true))?)
            }
            CodecId::Pla => Box::new(pla::PlaDecoder::default()),
        })
    }
}

impl From<CodecId> for CodecSpec {
    fn from(id: CodecId) -> Self {
        CodecSpec::new(id)
    }
}

/// A per-tuple compression state machine.
pub trait Encoder: Send {
    fn encode(&mut self, value: u32, sink: &mut BitSink) -> Result<()>;

    /// Emits anything still pending (open runs, open segments).
    fn finish(&mut self, _sink: &mut BitSink) -> Result<()> {
        Ok(())
    }

    /// Returns to the initial state.
    fn reset(&mut self);

    /// Digest of the state a decoder must mirror; 0 for stateless codecs.
    fn state_hash(&self) -> u64 {
        0
    }
}

pub trait Decoder: Send {
    /// Decodes the next code, appending one or more tuples to `out`.
    /// Returns `false` once the source is exhausted.
    fn decode_next(&mut self, src: &mut BitSource<'_>, out: &mut Vec<u32>) -> Result<bool>;

    fn reset(&mut self);

    fn state_hash(&self) -> u64 {
        0
    }
}

/// Compresses a whole sequence into one frame.
pub fn encode(values: &[u32], spec: &CodecSpec) -> Result<Frame> {
    let mut enc = spec.encoder()?;
    let mut sink = BitSink::with_capacity(values.len() * 4);
    for &v in values {
        enc.encode(v, &mut sink)?;
    }
    enc.finish(&mut sink)?;
    Ok(Frame::from_sink(spec.id, sink))
}

/// Decodes a frame. Lossless codecs return the exact input; lossy codecs
/// return their reconstruction.
pub fn decode(frame: &Frame, spec: &CodecSpec) -> Result<Vec<u32>> {
    if frame.codec != spec.id {
        return Err(Error::Frame(format!(
            "frame holds {} but {} was requested",
            frame.codec, spec.id
        )));
    }
    let mut dec = spec.decoder()?;
    let mut src = frame.source();
    let mut out = Vec::new();
    while dec.decode_next(&mut src, &mut out)? {}
    Ok(out)
}

pub(crate) fn hash_words(words: impl IntoIterator<Item = u64>) -> u64 {
    let mut h = DefaultHasher::new();
    for w in words {
        h.write_u64(w);
    }
    h.finish()
}

/// Bits needed to hold `q` bits padded to whole bytes.
pub(crate) fn padded_width(q: u8) -> u32 {
    u32::from(q).div_ceil(8) * 8
}
