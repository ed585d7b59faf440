//! Micro synthetic generator, the bundled ECG-like signal, and raw dataset loaders.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Record layouts for raw little-endian datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// One 32-bit value per record.
    Plain32,
    /// 32-bit key followed by 32-bit payload.
    Kv32,
    /// 64-bit key followed by 64-bit payload.
    Kv64,
    /// 16 ASCII characters.
    Text128,
}

impl Layout {
    pub fn record_bytes(self) -> usize {
        match self {
            Layout::Plain32 => 4,
            Layout::Kv32 => 8,
            Layout::Kv64 | Layout::Text128 => 16,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Layout::Plain32 => "plain32",
            Layout::Kv32 => "kv32",
            Layout::Kv64 => "kv64",
            Layout::Text128 => "text128",
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plain32" => Ok(Layout::Plain32),
            "kv32" | "kv32+32" => Ok(Layout::Kv32),
            "kv64" | "kv64+64" => Ok(Layout::Kv64),
            "text128" => Ok(Layout::Text128),
            other => Err(Error::Config(format!("unknown layout {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WorkloadSpec {
    Micro(MicroSpec),
    File { path: PathBuf, layout: Layout },
    /// Bundled synthetic electrocardiogram-like signal.
    Ecg { n: usize, seed: u64 },
}

impl WorkloadSpec {
    pub fn load(&self) -> Result<Vec<u32>> {
        match self {
            WorkloadSpec::Micro(m) => gen_micro(m),
            WorkloadSpec::File { path, layout } => load_dataset(path, *layout),
            WorkloadSpec::Ecg { n, seed } => Ok(ecg_like(*n, *seed)),
        }
    }
}

/// Default Micro length: 1 MiB of 32-bit tuples.
pub const DEFAULT_TUPLES: usize = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MicroSpec {
    /// Largest generated value.
    pub range: u32,
    /// Fraction of tuples carrying the hot value, in `[0, 1)`.
    pub dup: f64,
    pub n: usize,
    pub seed: u64,
}

impl Default for MicroSpec {
    fn default() -> Self {
        Self {
            range: u32::MAX,
            dup: 0.0,
            n: DEFAULT_TUPLES,
            seed: 0,
        }
    }
}

/// Generates the Micro workload.
///
/// Exactly `round(dup * n)` tuples hold one hot value drawn from
/// `[0, range]`. The others are uniform over `[0, range]` minus the hot value
/// (over the full range when there are no hot tuples, or when the range has a
/// single value). Positions are shuffled; the output depends only on the spec.
pub fn gen_micro(spec: &MicroSpec) -> Result<Vec<u32>> {
    if !(0.0..1.0).contains(&spec.dup) {
        return Err(Error::Config(format!(
            "duplication ratio {} outside [0, 1)",
            spec.dup
        )));
    }
    if spec.range == 0 {
        return Err(Error::Config("micro range must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let hot_count = (spec.dup * spec.n as f64).round() as usize;
    let hot = rng.random_range(0..=spec.range);
    let mut out = Vec::with_capacity(spec.n);
    out.resize(hot_count, hot);
    for _ in hot_count..spec.n {
        let v = if hot_count == 0 {
            rng.random_range(0..=spec.range)
        } else {
            // draw from the range with the hot value removed
            let v = rng.random_range(0..spec.range);
            if v >= hot {
                v + 1
            } else {
                v
            }
        };
        out.push(v);
    }
    out.shuffle(&mut rng);
    Ok(out)
}

/// A deterministic heartbeat-like trace: baseline wander, a sharp periodic
/// spike and small noise, centred in the 16-bit range.
pub fn ecg_like(n: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = 360.0;
    (0..n)
        .map(|i| {
            let t = i as f64;
            let phase = (t % period) / period;
            let wander = 400.0 * (2.0 * std::f64::consts::PI * t / 2000.0).sin();
            let beat = 6000.0 * (-((phase - 0.3) / 0.012).powi(2)).exp()
                + 900.0 * (-((phase - 0.55) / 0.05).powi(2)).exp()
                - 700.0 * (-((phase - 0.27) / 0.01).powi(2)).exp();
            let noise = rng.random_range(-30.0..30.0);
            (32768.0 + wander + beat + noise).round() as u32
        })
        .collect()
}

/// Splits raw little-endian records into 32-bit words in record order.
pub fn parse_records(bytes: &[u8], layout: Layout) -> Result<Vec<u32>> {
    let width = layout.record_bytes();
    if !bytes.len().is_multiple_of(width) {
        return Err(Error::Config(format!(
            "{} bytes is not a whole number of {width}-byte {layout} records",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|w| u32::from_le_bytes([w[0], w[1], w[2], w[3]]))
        .collect())
}

pub fn load_dataset(path: &Path, layout: Layout) -> Result<Vec<u32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_records(&bytes, layout)
}

/// Inverse of [`parse_records`] for `plain32` data.
pub fn to_le_bytes(values: &[u32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn micro(range: u32, dup: f64, n: usize, seed: u64) -> Vec<u32> {
        gen_micro(&MicroSpec { range, dup, n, seed }).unwrap()
    }

    #[test]
    fn uniform_without_duplication() {
        let n = 256_000;
        let values = micro(255, 0.0, n, 11);
        let mut hist = [0usize; 256];
        for &v in &values {
            hist[v as usize] += 1;
        }
        let expected = n as f64 / 256.0;
        let chi2: f64 = hist
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 255 degrees of freedom; 99.9th percentile is about 330
        assert!(chi2 < 330.0, "chi2 {chi2}");
        let max = *hist.iter().max().unwrap() as f64 / n as f64;
        assert!(max < 0.005, "{max}");
    }

    #[test]
    fn exact_duplication() {
        let values = micro(1_000_000, 0.9, 1000, 5);
        let mut counts: HashMap<u32, usize> = HashMap::new();
        for &v in &values {
            *counts.entry(v).or_default() += 1;
        }
        assert_eq!(*counts.values().max().unwrap(), 900);
    }

    #[test]
    fn range_one_is_binary() {
        let values = micro(1, 0.0, 1000, 1);
        assert!(values.iter().all(|&v| v <= 1));
        assert!(values.contains(&0) && values.contains(&1));
    }

    #[test]
    fn invalid_specs() {
        assert!(gen_micro(&MicroSpec { dup: 1.0, ..Default::default() }).is_err());
        assert!(gen_micro(&MicroSpec { range: 0, ..Default::default() }).is_err());
    }

    #[test]
    fn record_layouts() {
        assert_eq!(parse_records(&[1, 0, 0, 0, 2, 0, 0, 0], Layout::Plain32).unwrap(), vec![1, 2]);
        let mut kv = 7u32.to_le_bytes().to_vec();
        kv.extend(9u32.to_le_bytes());
        assert_eq!(parse_records(&kv, Layout::Kv32).unwrap(), vec![7, 9]);
        assert!(parse_records(&kv[..6], Layout::Kv32).is_err());
        assert!(parse_records(&kv, Layout::Kv64).is_err());
    }

    #[test]
    fn text_records_pack_ascii() {
        let text = b"ABCDEFGHIJKLMNOP";
        let words = parse_records(text, Layout::Text128).unwrap();
        // independent packing: byte i lands in word i/4 at bit 8*(i%4)
        let mut expected = [0u32; 4];
        for (i, &b) in text.iter().enumerate() {
            expected[i / 4] += u32::from(b) << (8 * (i % 4));
        }
        assert_eq!(words, expected);
        assert_eq!(words[0], 0x4443_4241);
    }

    #[test]
    fn load_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        std::fs::write(&path, to_le_bytes(&[3, 4, 5])).unwrap();
        assert_eq!(load_dataset(&path, Layout::Plain32).unwrap(), vec![3, 4, 5]);
        assert!(matches!(
            load_dataset(&dir.path().join("missing"), Layout::Plain32),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn ecg_is_deterministic_and_bounded() {
        let a = ecg_like(5000, 2);
        assert_eq!(a, ecg_like(5000, 2));
        assert!(a.iter().all(|&v| v < 1 << 16));
        assert_ne!(a, ecg_like(5000, 3));
    }

    #[test]
    fn layout_names() {
        for l in [Layout::Plain32, Layout::Kv32, Layout::Kv64, Layout::Text128] {
            assert_eq!(l.name().parse::<Layout>().unwrap(), l);
        }
        assert_eq!("kv64+64".parse::<Layout>().unwrap(), Layout::Kv64);
    }

    proptest! {
        #[test]
        fn micro_is_deterministic(seed in any::<u64>(), dup in 0.0f64..0.99, range in 1u32..1000) {
            let a = micro(range, dup, 500, seed);
            prop_assert_eq!(&a, &micro(range, dup, 500, seed));
            prop_assert!(a.iter().all(|&v| v <= range));
        }
    }
}
