//! Multi-threaded compression runtime.
//!
//! A source thread cuts the stream into micro-batches and hands each one to a
//! worker over that worker's bounded queue, using a static smooth weighted
//! round-robin. Workers compress whole batches and send frames to the calling
//! thread, which restores batch order. The queue graph is acyclic (source →
//! workers → collector) and the collector channel is unbounded, so no thread
//! can wait on a thread that waits on it.
//!
//! In private state mode every batch is compressed from a fresh codec state,
//! so the bitstream of a batch does not depend on which worker handled it or
//! on the worker count. In shared state mode (Tdic32 only) all workers use
//! one dictionary behind a mutex, taken once per tuple; every tuple receives
//! a global ticket so the output can be decoded in the order the dictionary
//! saw it.

use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, unbounded, Receiver, Sender};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::bitio::{BitSink, Frame};
use crate::codecs::{CodecId, CodecSpec, DictState, StateUse};
use crate::error::{Error, Result};
use crate::hwmodel::{self, HardwareProfile};
use crate::scheduler::SchedulingPlan;
use crate::stream::{batcher, BatchPolicy, MicroBatch, Tuple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateMode {
    Private,
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Every worker receives the same share of batches.
    Uniform,
    /// Each worker's share is proportional to its class's η at the codec's κ.
    AsymmetricAware,
    /// One worker per core used by the plan, weighted by the plan's input bytes.
    Plan(SchedulingPlan),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkerClass {
    Big,
    Little,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecConfig {
    pub big_workers: usize,
    pub little_workers: usize,
    /// Little-class workers spin for `(slowdown - 1)` times their compression
    /// time after each batch, emulating slower cores on symmetric hardware.
    pub little_slowdown: f64,
    pub strategy: Strategy,
    pub state_mode: StateMode,
    pub batch: BatchPolicy,
    /// Capacity of each worker's input queue, in batches.
    pub queue_depth: usize,
    /// Release each batch no earlier than its last tuple's arrival time.
    pub pace: bool,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            big_workers: 1,
            little_workers: 0,
            little_slowdown: 1.0,
            strategy: Strategy::Uniform,
            state_mode: StateMode::Private,
            batch: BatchPolicy::default(),
            queue_depth: 64,
            pace: false,
        }
    }
}

impl ExecConfig {
    pub fn with_workers(workers: usize) -> Self {
        Self {
            big_workers: workers,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkerStats {
    pub class: Option<WorkerClass>,
    pub weight: f64,
    pub batches: u64,
    pub tuples: u64,
    pub wall_ns: u64,
    /// Time spent waiting for input.
    pub blocked_ns: u64,
    /// Time spent compressing (including emulated slowdown).
    pub running_ns: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub wall_ns: u64,
    pub tuples: u64,
    pub input_bytes: u64,
    pub compressed_bits: u64,
    pub workers: Vec<WorkerStats>,
    /// Completion offset of each batch from the run start, ns.
    pub batch_done_ns: Vec<u64>,
    /// Arrival offset of each batch's first and last tuples, ns.
    pub batch_span_ns: Vec<(u64, u64)>,
}

impl RunStats {
    pub fn blocked_ns(&self) -> u64 {
        self.workers.iter().map(|w| w.blocked_ns).sum()
    }

    pub fn running_ns(&self) -> u64 {
        self.workers.iter().map(|w| w.running_ns).sum()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// One frame per batch, in batch order.
    pub frames: Vec<Frame>,
    /// Shared mode only: dictionary ticket of every tuple, per batch.
    pub tickets: Option<Vec<Vec<u64>>>,
    pub stats: RunStats,
}

impl RunOutput {
    pub fn compressed_bits(&self) -> u64 {
        self.frames.iter().map(|f| f.bit_len).sum()
    }
}

/// Share of work for the big class at intensity `kappa`:
/// `η_big · n_big / (η_big · n_big + η_little · n_little)`.
pub fn asymmetric_ratio(kappa: f64, profile: &HardwareProfile) -> Result<f64> {
    let (big, little) = (profile.big_cluster(), profile.little_cluster());
    if big == little {
        return Err(Error::Config("asymmetric ratio needs two core classes".into()));
    }
    let class = |c: usize| -> Result<f64> {
        let cores = profile.cluster_cores(c);
        let eta = profile.core(cores[0])?.perf.eval(kappa)?;
        Ok(eta * cores.len() as f64)
    };
    let (b, l) = (class(big)?, class(little)?);
    Ok(b / (b + l))
}

/// κ of a codec's whole pipeline (Σι / Σm over its steps).
pub fn codec_kappa(id: CodecId) -> Result<f64> {
    let steps = hwmodel::CostTable::default().task_costs(id);
    let iota: f64 = steps.iter().map(|s| s.iota).sum();
    let m: f64 = steps.iter().map(|s| s.m).sum();
    hwmodel::kappa(iota, m)
}

struct WorkerPlan {
    class: WorkerClass,
    weight: f64,
}

fn plan_workers(codec: &CodecSpec, config: &ExecConfig, profile: &HardwareProfile) -> Result<Vec<WorkerPlan>> {
    let fixed = |w: f64| {
        let mut v: Vec<WorkerPlan> = (0..config.big_workers)
            .map(|_| WorkerPlan { class: WorkerClass::Big, weight: w })
            .collect();
        v.extend((0..config.little_workers).map(|_| WorkerPlan {
            class: WorkerClass::Little,
            weight: w,
        }));
        v
    };
    let workers = match &config.strategy {
        Strategy::Uniform => fixed(1.0),
        Strategy::AsymmetricAware => {
            let kappa = codec_kappa(codec.id)?;
            let eta = |c: usize| -> Result<f64> {
                profile.core(profile.cluster_cores(c)[0])?.perf.eval(kappa)
            };
            let (big, little) = (eta(profile.big_cluster())?, eta(profile.little_cluster())?);
            let mut v = fixed(1.0);
            for w in &mut v {
                w.weight = match w.class {
                    WorkerClass::Big => big,
                    WorkerClass::Little => little,
                };
            }
            v
        }
        Strategy::Plan(plan) => {
            let big = profile.big_cluster();
            let multi = profile.clusters().len() > 1;
            let mut cores: Vec<usize> = plan.assignment.clone();
            cores.sort_unstable();
            cores.dedup();
            let mut v = Vec::new();
            for c in cores {
                let spec = profile.core(c)?;
                let weight: f64 = plan
                    .tasks
                    .iter()
                    .filter(|t| t.core == c)
                    .map(|t| t.input_bytes)
                    .sum();
                v.push(WorkerPlan {
                    class: if multi && spec.cluster != big {
                        WorkerClass::Little
                    } else {
                        WorkerClass::Big
                    },
                    weight: weight.max(f64::MIN_POSITIVE),
                });
            }
            v
        }
    };
    if workers.is_empty() {
        return Err(Error::Config("at least one worker is required".into()));
    }
    Ok(workers)
}

/// Deterministic smooth weighted round-robin.
struct Dispatch {
    weights: Vec<f64>,
    current: Vec<f64>,
    total: f64,
}

impl Dispatch {
    fn new(weights: Vec<f64>) -> Self {
        let total = weights.iter().sum();
        Self {
            current: vec![0.0; weights.len()],
            weights,
            total,
        }
    }

    fn next(&mut self) -> usize {
        for (c, w) in self.current.iter_mut().zip(&self.weights) {
            *c += w;
        }
        let pick = (0..self.current.len())
            .fold(0, |best, i| if self.current[i] > self.current[best] { i } else { best });
        self.current[pick] -= self.total;
        pick
    }
}

struct SharedDict {
    state: Mutex<(DictState, u64)>,
}

/// Frame, tickets, completion offset and arrival span of one batch.
type Finished = (Frame, Vec<u64>, u64, (u64, u64));

enum Done {
    Batch {
        index: usize,
        frame: Frame,
        tickets: Vec<u64>,
        done_ns: u64,
        span: (u64, u64),
    },
    Failed(Error),
}

fn spin_for(d: Duration) {
    let until = Instant::now() + d;
    while Instant::now() < until {
        std::hint::spin_loop();
    }
}

fn nanos(d: Duration) -> u64 {
    d.as_nanos().min(u128::from(u64::MAX)) as u64
}

/// Compresses one batch from a fresh codec state.
pub fn compress_batch(values: &[u32], codec: &CodecSpec) -> Result<Frame> {
    crate::codecs::encode(values, codec)
}

/// Reference path: every batch compressed in order on the calling thread.
pub fn compress_sequential(values: &[u32], codec: &CodecSpec, policy: BatchPolicy) -> Result<Vec<Frame>> {
    let tuples = values.iter().map(|&v| Tuple { t: 0, v });
    batcher(tuples, policy)?
        .map(|b| compress_batch(&b.values(), codec))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn worker_loop(
    rx: Receiver<MicroBatch>,
    tx: Sender<Done>,
    codec: CodecSpec,
    shared: Option<&SharedDict>,
    slowdown: f64,
    start: Instant,
    stats: &mut WorkerStats,
) {
    let began = Instant::now();
    let mut encoder = match codec.encoder() {
        Ok(e) => e,
        Err(e) => {
            let _ = tx.send(Done::Failed(e));
            return;
        }
    };
    loop {
        let wait = Instant::now();
        let Ok(batch) = rx.recv() else { break };
        stats.blocked_ns += nanos(wait.elapsed());
        let work = Instant::now();
        let mut sink = BitSink::with_capacity(batch.tuples.len() * 4);
        let mut tickets = Vec::new();
        let result = match shared {
            Some(dict) => {
                tickets.reserve(batch.tuples.len());
                for t in &batch.tuples {
                    let mut guard = dict.state.lock();
                    let (state, next) = &mut *guard;
                    tickets.push(*next);
                    *next += 1;
                    state.encode(t.v, &mut sink);
                }
                Ok(())
            }
            None => {
                encoder.reset();
                batch
                    .tuples
                    .iter()
                    .try_for_each(|t| encoder.encode(t.v, &mut sink))
                    .and_then(|_| encoder.finish(&mut sink))
            }
        };
        let spent = work.elapsed();
        if slowdown > 1.0 {
            spin_for(spent.mul_f64(slowdown - 1.0));
        }
        stats.running_ns += nanos(work.elapsed());
        stats.batches += 1;
        stats.tuples += batch.tuples.len() as u64;
        let msg = match result {
            Ok(()) => Done::Batch {
                index: batch.index,
                frame: Frame::from_sink(codec.id, sink),
                tickets,
                done_ns: nanos(start.elapsed()),
                span: (batch.tuples[0].t, batch.ready_at()),
            },
            Err(e) => Done::Failed(e),
        };
        if tx.send(msg).is_err() {
            break;
        }
    }
    stats.wall_ns = nanos(began.elapsed());
}

/// Compresses `tuples` with `codec` on worker threads.
pub fn run_pipeline(
    tuples: &[Tuple],
    codec: &CodecSpec,
    config: &ExecConfig,
    profile: &HardwareProfile,
) -> Result<RunOutput> {
    config.batch.validate()?;
    if config.queue_depth == 0 {
        return Err(Error::Config("queue depth must be at least 1".into()));
    }
    if !(config.little_slowdown.is_finite() && config.little_slowdown >= 1.0) {
        return Err(Error::Config("little_slowdown must be >= 1".into()));
    }
    codec.encoder()?;
    let shared = match (config.state_mode, codec.state_use()) {
        (StateMode::Shared, StateUse::Dictionary) => Some(SharedDict {
            state: Mutex::new((DictState::new(codec.params.dict_size)?, 0)),
        }),
        (StateMode::Shared, StateUse::Value | StateUse::Model) => {
            return Err(Error::Config(format!(
                "shared state is only supported for dictionary codecs, not {}",
                codec.id
            )))
        }
        _ => None,
    };
    let plans = plan_workers(codec, config, profile)?;
    let mut worker_stats: Vec<WorkerStats> = plans
        .iter()
        .map(|p| WorkerStats {
            class: Some(p.class),
            weight: p.weight,
            ..Default::default()
        })
        .collect();
    let (done_tx, done_rx) = unbounded::<Done>();
    let mut queues = Vec::new();
    let mut receivers = Vec::new();
    for _ in &plans {
        let (tx, rx) = bounded::<MicroBatch>(config.queue_depth);
        queues.push(tx);
        receivers.push(rx);
    }
    let mut dispatch = Dispatch::new(plans.iter().map(|p| p.weight).collect());
    let policy = config.batch;
    let pace = config.pace;

    let start = Instant::now();
    let mut slots: Vec<Option<Finished>> = Vec::new();
    let mut failure = None;
    let panicked = std::thread::scope(|scope| {
        let source = scope.spawn(move || -> Result<()> {
            for batch in batcher(tuples.iter().copied(), policy)? {
                if pace {
                    let due = Duration::from_nanos(batch.ready_at());
                    if let Some(wait) = due.checked_sub(start.elapsed()) {
                        std::thread::sleep(wait);
                    }
                }
                if queues[dispatch.next()].send(batch).is_err() {
                    break;
                }
            }
            Ok(())
        });
        let shared = shared.as_ref();
        let mut handles = Vec::new();
        for ((rx, stats), plan) in receivers.into_iter().zip(worker_stats.iter_mut()).zip(&plans) {
            let tx = done_tx.clone();
            let slowdown = match plan.class {
                WorkerClass::Little => config.little_slowdown,
                WorkerClass::Big => 1.0,
            };
            let codec = *codec;
            handles.push(scope.spawn(move || worker_loop(rx, tx, codec, shared, slowdown, start, stats)));
        }
        drop(done_tx);
        for msg in done_rx.iter() {
            match msg {
                Done::Batch {
                    index,
                    frame,
                    tickets,
                    done_ns,
                    span,
                } => {
                    if slots.len() <= index {
                        slots.resize_with(index + 1, || None);
                    }
                    slots[index] = Some((frame, tickets, done_ns, span));
                }
                Done::Failed(e) => {
                    failure.get_or_insert(e);
                }
            }
        }
        let mut panicked = Vec::new();
        match source.join() {
            Ok(Err(e)) => {
                failure.get_or_insert(e);
            }
            Err(_) => panicked.push("source".to_string()),
            Ok(Ok(())) => {}
        }
        for (i, h) in handles.into_iter().enumerate() {
            if h.join().is_err() {
                panicked.push(format!("worker {i}"));
            }
        }
        panicked
    });
    let wall_ns = nanos(start.elapsed());
    let completed = slots.iter().flatten().count();
    if !panicked.is_empty() {
        return Err(Error::Worker(format!(
            "{} panicked after {completed} batches completed",
            panicked.join(", ")
        )));
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let expected = tuples.len().div_ceil(policy.tuples_per_batch());
    if completed != expected || slots.len() != expected {
        return Err(Error::Worker(format!("{completed} of {expected} batches completed")));
    }
    let mut frames = Vec::with_capacity(expected);
    let mut tickets = Vec::with_capacity(expected);
    let mut stats = RunStats {
        wall_ns,
        tuples: tuples.len() as u64,
        input_bytes: tuples.len() as u64 * 4,
        workers: worker_stats,
        ..Default::default()
    };
    for (frame, t, done, span) in slots.into_iter().flatten() {
        stats.compressed_bits += frame.bit_len;
        stats.batch_done_ns.push(done);
        stats.batch_span_ns.push(span);
        frames.push(frame);
        tickets.push(t);
    }
    Ok(RunOutput {
        frames,
        tickets: shared.is_some().then_some(tickets),
        stats,
    })
}

/// Decodes a run's output back into the original tuple order.
pub fn decode_output(output: &RunOutput, codec: &CodecSpec) -> Result<Vec<u32>> {
    let Some(tickets) = &output.tickets else {
        let mut out = Vec::new();
        for f in &output.frames {
            out.extend(crate::codecs::decode(f, codec)?);
        }
        return Ok(out);
    };
    // replay the shared dictionary in ticket order
    let total: usize = tickets.iter().map(Vec::len).sum();
    let mut order: Vec<(u64, usize, usize)> = Vec::with_capacity(total);
    let mut base = 0;
    let mut starts = Vec::new();
    for (b, ts) in tickets.iter().enumerate() {
        starts.push(base);
        order.extend(ts.iter().enumerate().map(|(k, &t)| (t, b, k)));
        base += ts.len();
    }
    order.sort_unstable();
    let mut dict = DictState::new(codec.params.dict_size)?;
    let mut sources: Vec<_> = output.frames.iter().map(Frame::source).collect();
    let mut out = vec![0u32; total];
    for (_, b, k) in order {
        out[starts[b] + k] = dict.decode(&mut sources[b])?;
    }
    if sources.iter().any(|s| s.remaining() != 0) {
        return Err(Error::Corrupt("trailing bits after shared-state decode".into()));
    }
    Ok(out)
}
