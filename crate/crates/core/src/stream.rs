//! Tuples, synthetic arrival clocks and micro-batching.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bytes per tuple value.
pub const TUPLE_BYTES: usize = 4;
/// Default lazy batch capacity in bytes.
pub const DEFAULT_BATCH_BYTES: usize = 400;
/// Windows used to shape skewed arrivals.
pub const DEFAULT_SKEW_WINDOWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tuple {
    /// Arrival time in nanoseconds since stream start.
    pub t: u64,
    pub v: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum BatchPolicy {
    /// One tuple per batch.
    Eager,
    /// Accumulate `batch_bytes` before compressing.
    Lazy { batch_bytes: usize },
}

impl Default for BatchPolicy {
    fn default() -> Self {
        BatchPolicy::Lazy {
            batch_bytes: DEFAULT_BATCH_BYTES,
        }
    }
}

impl BatchPolicy {
    pub fn lazy(batch_bytes: usize) -> Result<Self> {
        let p = BatchPolicy::Lazy { batch_bytes };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BatchPolicy::Lazy { batch_bytes } if batch_bytes < TUPLE_BYTES => Err(Error::Config(
                format!("batch size {batch_bytes} B is smaller than one tuple"),
            )),
            _ => Ok(()),
        }
    }

    /// Tuples per full batch.
    pub fn tuples_per_batch(&self) -> usize {
        match *self {
            BatchPolicy::Eager => 1,
            BatchPolicy::Lazy { batch_bytes } => (batch_bytes / TUPLE_BYTES).max(1),
        }
    }
}

/// A contiguous run of tuples handed to one worker.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroBatch {
    /// Position in the batch sequence; used to restore order after parallel work.
    pub index: usize,
    pub tuples: Vec<Tuple>,
}

impl MicroBatch {
    pub fn byte_size(&self) -> usize {
        self.tuples.len() * TUPLE_BYTES
    }

    pub fn values(&self) -> Vec<u32> {
        self.tuples.iter().map(|t| t.v).collect()
    }

    /// Arrival time of the last tuple, i.e. when the batch becomes complete.
    pub fn ready_at(&self) -> u64 {
        self.tuples.last().map_or(0, |t| t.t)
    }
}

/// Splits a stream into micro-batches according to `policy`.
pub fn batcher<I>(stream: I, policy: BatchPolicy) -> Result<Batcher<I::IntoIter>>
where
    I: IntoIterator<Item = Tuple>,
{
    policy.validate()?;
    Ok(Batcher {
        inner: stream.into_iter(),
        per_batch: policy.tuples_per_batch(),
        next_index: 0,
    })
}

#[derive(Debug)]
pub struct Batcher<I> {
    inner: I,
    per_batch: usize,
    next_index: usize,
}

impl<I: Iterator<Item = Tuple>> Iterator for Batcher<I> {
    type Item = MicroBatch;

    fn next(&mut self) -> Option<MicroBatch> {
        let tuples: Vec<Tuple> = self.inner.by_ref().take(self.per_batch).collect();
        if tuples.is_empty() {
            return None;
        }
        let index = self.next_index;
        self.next_index += 1;
        Some(MicroBatch { index, tuples })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArrivalSpec {
    /// Mean arrival rate in bytes per second.
    pub rate: f64,
    /// Zipf factor over windows, in `[0, 1]`.
    pub skew: f64,
    pub windows: usize,
    pub seed: u64,
}

impl Default for ArrivalSpec {
    fn default() -> Self {
        Self {
            rate: 16e6,
            skew: 0.0,
            windows: DEFAULT_SKEW_WINDOWS,
            seed: 0,
        }
    }
}

/// Assigns nondecreasing arrival timestamps to `values`.
///
/// With `skew == 0` tuples are evenly spaced at `4 / rate` seconds. With
/// `skew > 0` the span `total_bytes / rate` is cut into equal windows and
/// window `w` (1-based) receives a share of tuples proportional to
/// `1 / w^skew`; positions inside a window are seeded uniform draws.
pub fn arrival_clock(values: &[u32], spec: &ArrivalSpec) -> Result<Vec<Tuple>> {
    if !(spec.rate.is_finite() && spec.rate > 0.0) {
        return Err(Error::Config(format!(
            "arrival rate must be positive, got {}",
            spec.rate
        )));
    }
    if !(0.0..=1.0).contains(&spec.skew) {
        return Err(Error::Config(format!(
            "skew {} outside [0, 1]",
            spec.skew
        )));
    }
    let gap_ns = TUPLE_BYTES as f64 / spec.rate * 1e9;
    if spec.skew == 0.0 {
        return Ok(values
            .iter()
            .enumerate()
            .map(|(k, &v)| Tuple {
                t: (k as f64 * gap_ns).round() as u64,
                v,
            })
            .collect());
    }
    if spec.windows == 0 {
        return Err(Error::Config("skewed arrivals need at least one window".into()));
    }
    let span_ns = values.len() as f64 * gap_ns;
    let window_ns = span_ns / spec.windows as f64;
    let counts = zipf_counts(values.len(), spec.windows, spec.skew);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(values.len());
    let mut next = values.iter();
    for (w, &count) in counts.iter().enumerate() {
        let base = w as f64 * window_ns;
        let mut offsets: Vec<f64> = (0..count).map(|_| rng.random::<f64>() * window_ns).collect();
        offsets.sort_by(f64::total_cmp);
        for off in offsets {
            let v = *next.next().expect("counts sum to the stream length");
            out.push(Tuple {
                t: (base + off).round() as u64,
                v,
            });
        }
    }
    Ok(out)
}

/// Splits `n` items over `windows` with weights `1 / w^skew`, using largest
/// remainders so the counts sum to `n` exactly.
pub fn zipf_counts(n: usize, windows: usize, skew: f64) -> Vec<usize> {
    let weights: Vec<f64> = (1..=windows).map(|w| (w as f64).powf(-skew)).collect();
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..windows).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &w in order.iter().take(n - assigned) {
        counts[w] += 1;
    }
    counts
}

/// Mean arrival rate in bytes per second implied by a timestamped stream.
pub fn observed_rate(tuples: &[Tuple]) -> Option<f64> {
    let last = tuples.last()?.t;
    if tuples.len() < 2 || last == 0 {
        return None;
    }
    // n tuples span n - 1 gaps
    Some((tuples.len() - 1) as f64 * TUPLE_BYTES as f64 / (last as f64 / 1e9))
}
