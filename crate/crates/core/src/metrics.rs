//! Compression ratio, NRMSE, throughput, tuple latency and run reports.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codecs::CodecSpec;
use crate::error::{Error, Result};
use crate::exec::RunStats;
use crate::hwmodel::{CostTable, HardwareProfile};
use crate::scheduler::{evaluate_plan, search_optimal, JobSpec, SchedulingPlan, StageGraph};
use crate::stream::{BatchPolicy, Tuple};

/// Version of the report row layout. Bump when columns change meaning.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// `8 · input_bytes / output_bits`.
pub fn compression_ratio(input_bytes: u64, output_bits: u64) -> Result<f64> {
    if output_bits == 0 {
        return Err(Error::Metric("compression ratio is undefined for empty output".into()));
    }
    Ok(8.0 * input_bytes as f64 / output_bits as f64)
}

/// Root-mean-square error of `y` against `x`, normalized by the mean of `x`.
pub fn nrmse(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Metric("NRMSE needs at least one value".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Metric(format!(
            "NRMSE inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if mean == 0.0 || !mean.is_finite() {
        return Err(Error::Metric(format!("NRMSE is undefined for input mean {mean}")));
    }
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / n).sqrt() / mean.abs())
}

/// [`nrmse`] over raw tuple values.
pub fn nrmse_u32(x: &[u32], y: &[u32]) -> Result<f64> {
    let f = |v: &[u32]| v.iter().map(|&a| f64::from(a)).collect::<Vec<_>>();
    nrmse(&f(x), &f(y))
}

/// Bytes per second.
pub fn throughput(total_bytes: u64, seconds: f64) -> Result<f64> {
    if !(seconds > 0.0 && seconds.is_finite()) {
        return Err(Error::Metric(format!("throughput needs a positive duration, got {seconds} s")));
    }
    if total_bytes == 0 {
        return Err(Error::Metric("throughput is undefined for empty input".into()));
    }
    Ok(total_bytes as f64 / seconds)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub avg_ns: f64,
    pub p50_ns: f64,
    pub p99_ns: f64,
    pub max_ns: f64,
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[u64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1] as f64
}

/// Per-tuple latency: completion of the tuple's batch minus its arrival.
pub fn tuple_latency(stats: &RunStats, tuples: &[Tuple], policy: BatchPolicy) -> Result<LatencySummary> {
    if tuples.is_empty() {
        return Ok(LatencySummary::default());
    }
    let per = policy.tuples_per_batch();
    let batches = tuples.len().div_ceil(per);
    if stats.batch_done_ns.len() != batches {
        return Err(Error::Metric(format!(
            "run recorded {} batch completions, stream has {batches} batches",
            stats.batch_done_ns.len()
        )));
    }
    let mut lat: Vec<u64> = tuples
        .iter()
        .enumerate()
        .map(|(k, t)| stats.batch_done_ns[k / per].saturating_sub(t.t))
        .collect();
    let avg = lat.iter().map(|&l| l as f64).sum::<f64>() / lat.len() as f64;
    lat.sort_unstable();
    Ok(LatencySummary {
        avg_ns: avg,
        p50_ns: percentile(&lat, 50.0),
        p99_ns: percentile(&lat, 99.0),
        max_ns: *lat.last().unwrap() as f64,
    })
}

/// Model energy of compressing `job_bytes` with `codec`: the given plan if
/// any, otherwise the minimum-energy plan with no latency cap.
pub fn estimated_energy(
    codec: &CodecSpec,
    profile: &HardwareProfile,
    job_bytes: f64,
    plan: Option<&SchedulingPlan>,
) -> Result<f64> {
    let graph = StageGraph::from_codec(codec.id, &CostTable::default());
    let job = JobSpec::new(job_bytes, f64::INFINITY)?;
    match plan {
        Some(p) => {
            if p.assignment.len() != graph.num_tasks() {
                return Err(Error::Config(format!(
                    "plan assigns {} tasks, {} has {}",
                    p.assignment.len(),
                    codec.id,
                    graph.num_tasks()
                )));
            }
            Ok(evaluate_plan(&p.assignment, &graph, profile, &job)?.energy_j)
        }
        None => Ok(search_optimal(&graph, profile, &job)?.energy_j),
    }
}

/// One benchmark row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub label: String,
    pub repetition: u32,
    pub codec: String,
    pub workers: usize,
    pub batch_bytes: usize,
    pub strategy: String,
    pub state_mode: String,
    pub tuples: u64,
    pub input_bytes: u64,
    pub compressed_bits: u64,
    pub compression_ratio: f64,
    /// Lossy codecs only.
    pub nrmse: Option<f64>,
    pub wall_ns: u64,
    pub throughput_bps: f64,
    pub latency_avg_ns: f64,
    pub latency_p50_ns: f64,
    pub latency_p99_ns: f64,
    pub blocked_ns: u64,
    pub running_ns: u64,
    /// Cost-model estimate, not a measurement.
    pub energy_estimated_j: Option<f64>,
    pub throughput_mean_bps: Option<f64>,
    pub throughput_stddev_bps: Option<f64>,
    pub latency_avg_mean_ns: Option<f64>,
    pub latency_avg_stddev_ns: Option<f64>,
    /// JSON echo of the configuration that produced the row.
    pub config: String,
}

fn mean_std(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.len() > 1)
        .then(|| (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt());
    (mean, std)
}

/// Fills the mean and sample standard deviation columns across rows sharing
/// a label.
pub fn summarize(rows: &mut [Report]) {
    let mut labels: Vec<String> = rows.iter().map(|r| r.label.clone()).collect();
    labels.sort();
    labels.dedup();
    for label in labels {
        let pick = |f: fn(&Report) -> f64| -> Vec<f64> {
            rows.iter().filter(|r| r.label == label).map(f).collect()
        };
        let (tm, ts) = mean_std(&pick(|r| r.throughput_bps));
        let (lm, ls) = mean_std(&pick(|r| r.latency_avg_ns));
        for r in rows.iter_mut().filter(|r| r.label == label) {
            r.throughput_mean_bps = Some(tm);
            r.throughput_stddev_bps = ts;
            r.latency_avg_mean_ns = Some(lm);
            r.latency_avg_stddev_ns = ls;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Writes rows as a JSON array or CSV with a header.
pub fn write_reports<W: Write>(rows: &[Report], format: Format, out: W) -> Result<()> {
    match format {
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows).map_err(|e| Error::Metric(e.to_string()))?;
            writeln!(out).map_err(|e| Error::io(Path::new("<output>"), e))
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r).map_err(|e| Error::Metric(e.to_string()))?;
            }
            w.flush().map_err(|e| Error::io(Path::new("<output>"), e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ratio_examples() {
        assert_eq!(compression_ratio(100, 400).unwrap(), 2.0);
        assert_eq!(compression_ratio(100, 800).unwrap(), 1.0);
        assert!(compression_ratio(100, 0).is_err());
    }

    #[test]
    fn nuq_fixed_width_ratio_is_four() {
        use crate::codecs::{encode, CodecId};
        let values: Vec<u32> = (0..1000).map(|i| i * 7919).collect();
        let spec = CodecSpec::new(CodecId::Leb128Nuq);
        let frame = encode(&values, &spec).unwrap();
        assert_eq!(compression_ratio(4000, frame.bit_len).unwrap(), 4.0);
    }

    #[test]
    fn nrmse_examples() {
        assert_eq!(nrmse(&[2.0, 2.0], &[1.0, 3.0]).unwrap(), 0.5);
        assert_eq!(nrmse(&[1.0, 5.0], &[1.0, 5.0]).unwrap(), 0.0);
        assert!(nrmse(&[1.0, -1.0], &[0.0, 0.0]).is_err());
        assert!(nrmse(&[], &[]).is_err());
        assert!(nrmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn throughput_examples() {
        assert_eq!(throughput(1_000_000, 0.5).unwrap(), 2e6);
        assert!(throughput(10, 0.0).is_err());
        assert!(throughput(0, 1.0).is_err());
    }

    #[test]
    fn latency_from_batch_completions() {
        let tuples: Vec<Tuple> = (0..5).map(|k| Tuple { t: k * 10, v: 0 }).collect();
        let stats = RunStats {
            batch_done_ns: vec![25, 60, 45],
            ..Default::default()
        };
        let l = tuple_latency(&stats, &tuples, BatchPolicy::Lazy { batch_bytes: 8 }).unwrap();
        // latencies 25, 15, 40, 30, 5
        assert_eq!(l.avg_ns, 23.0);
        assert_eq!(l.p50_ns, 25.0);
        assert_eq!(l.p99_ns, 40.0);
        assert!(tuple_latency(&stats, &tuples, BatchPolicy::Eager).is_err());
    }

    #[test]
    fn lazy_batch_first_tuple_waits_for_accumulation() {
        use crate::exec::{run_pipeline, ExecConfig};
        use crate::stream::{arrival_clock, ArrivalSpec};
        let values: Vec<u32> = (0..4000).collect();
        let tuples = arrival_clock(&values, &ArrivalSpec { rate: 4e8, ..Default::default() }).unwrap();
        let mut cfg = ExecConfig::default();
        cfg.pace = true;
        let out = run_pipeline(&tuples, &CodecSpec::new(crate::codecs::CodecId::Tcomp32), &cfg, &HardwareProfile::rk3399()).unwrap();
        let per = cfg.batch.tuples_per_batch();
        for (b, chunk) in tuples.chunks(per).enumerate() {
            let span = chunk.last().unwrap().t - chunk[0].t;
            assert!(out.stats.batch_done_ns[b] - chunk[0].t >= span);
        }
    }

    #[test]
    fn summary_columns() {
        let mut rows: Vec<Report> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&t| Report { label: "a".into(), throughput_bps: t, ..Default::default() })
            .collect();
        rows.push(Report { label: "b".into(), throughput_bps: 5.0, ..Default::default() });
        summarize(&mut rows);
        assert_eq!(rows[0].throughput_mean_bps, Some(2.0));
        assert_eq!(rows[2].throughput_stddev_bps, Some(1.0));
        assert_eq!(rows[3].throughput_stddev_bps, None);
    }

    #[test]
    fn reports_serialize_both_formats() {
        let rows = vec![Report { schema_version: REPORT_SCHEMA_VERSION, nrmse: Some(0.01), ..Default::default() }];
        let mut csv_out = Vec::new();
        write_reports(&rows, Format::Csv, &mut csv_out).unwrap();
        let text = String::from_utf8(csv_out).unwrap();
        assert!(text.starts_with("schema_version,label,"));
        assert!(text.contains("energy_estimated_j"));
        let mut json = Vec::new();
        write_reports(&rows, Format::Json, &mut json).unwrap();
        let back: Vec<Report> = serde_json::from_slice(&json).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn model_energy_is_positive() {
        let p = HardwareProfile::rk3399();
        let spec = CodecSpec::new(crate::codecs::CodecId::Tdic32);
        let e = estimated_energy(&spec, &p, 1e6, None).unwrap();
        assert!(e > 0.0);
    }

    proptest! {
        #[test]
        fn nrmse_is_scale_invariant(
            pairs in prop::collection::vec((1.0f64..1e3, 0.0f64..1e3), 1..50),
            c in 0.01f64..100.0,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let a = nrmse(&x, &y).unwrap();
            let cx: Vec<f64> = x.iter().map(|v| v * c).collect();
            let cy: Vec<f64> = y.iter().map(|v| v * c).collect();
            let b = nrmse(&cx, &cy).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
            prop_assert_eq!(nrmse(&x, &x).unwrap(), 0.0);
        }
    }
}
