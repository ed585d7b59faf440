//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
//! error, 3 no plan meets the latency cap.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bitio::Frame;
use crate::codecs::{self, CodecId, CodecParams, CodecSpec, Fidelity};
use crate::error::{Error, Result};
use crate::exec::{decode_output, run_pipeline, ExecConfig, StateMode, Strategy};
use crate::hwmodel::{fit_roofline, CostTable, HardwareProfile};
use crate::metrics::{self, Format, Report, REPORT_SCHEMA_VERSION};
use crate::scheduler::{search_optimal, suggest_replicas, JobSpec, SchedulingPlan, Stage, StageGraph};
use crate::stream::{arrival_clock, ArrivalSpec, BatchPolicy};
use crate::workload::{ecg_like, gen_micro, load_dataset, to_le_bytes, Layout, MicroSpec, WorkloadSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cstream", version, about = "Stream compression toolkit for asymmetric multicores")]
pub struct Cli {
    /// Seed for every random choice (workloads, arrivals).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Hardware profile TOML; the built-in rk3399 profile when unset.
    #[arg(long, global = true, env = "CSTREAM_PROFILE")]
    pub profile: Option<PathBuf>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compress a file of records into a frame.
    Compress(CompressArgs),
    /// Decompress a frame into little-endian u32 values.
    Decompress(DecompressArgs),
    /// Write a synthetic workload as little-endian u32 values.
    Generate(GenerateArgs),
    /// Run a benchmark spec and emit one report row per configuration and repetition.
    Bench(BenchArgs),
    /// Find the minimum-energy plan within a latency cap.
    Schedule(ScheduleArgs),
    /// Fit a four-segment roofline to `kappa,value` samples.
    FitRoofline(FitArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CodecArgs {
    /// Quantization bits for the NUQ and ADPCM codecs.
    #[arg(long, default_value_t = 8)]
    pub quant_bits: u8,
    /// Companding constant; 2^q - 1 when unset.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Quantizer dynamic range.
    #[arg(long, default_value_t = 65535.0)]
    pub range: f64,
    /// Tdic32 table entries (power of two).
    #[arg(long, default_value_t = 4096)]
    pub dict_size: usize,
    /// PLA error bound.
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
}

impl CodecArgs {
    fn params(&self) -> CodecParams {
        CodecParams {
            quant_bits: self.quant_bits,
            mu: self.mu,
            range: self.range,
            dict_size: self.dict_size,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(short, long)]
    pub codec: CodecId,
    /// Record layout of the input; the first 32-bit word of each record is compressed.
    #[arg(long, default_value = "plain32")]
    pub layout: Layout,
    /// Skip the verify-decode after compressing.
    #[arg(long)]
    pub no_verify: bool,
    #[command(flatten)]
    pub params: CodecArgs,
}

#[derive(Debug, Args)]
pub struct DecompressArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Expected codec; the frame header decides when unset.
    #[arg(short, long)]
    pub codec: Option<CodecId>,
    #[command(flatten)]
    pub params: CodecArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GenKind {
    Micro,
    Ecg,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = GenKind::Micro)]
    pub kind: GenKind,
    #[arg(short, long, default_value_t = crate::workload::DEFAULT_TUPLES)]
    pub n: usize,
    /// Largest Micro value.
    #[arg(long, default_value_t = u32::MAX)]
    pub range: u32,
    /// Micro duplication ratio.
    #[arg(long, default_value_t = 0.0)]
    pub dup: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Benchmark spec (TOML).
    pub spec: PathBuf,
    /// Report destination; overrides the spec, stdout when neither is set.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Codec whose step pipeline is scheduled.
    #[arg(short, long, conflicts_with = "graph")]
    pub codec: Option<CodecId>,
    /// Stage graph TOML (`[[stage]]` tables with name, cost, weights).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Latency cap in ns.
    #[arg(long)]
    pub l_set: f64,
    /// Job size in bytes.
    #[arg(long, default_value_t = 1_048_576.0)]
    pub job_bytes: f64,
    /// Replicate bottleneck stages up to this many tasks.
    #[arg(long)]
    pub core_budget: Option<usize>,
    /// Per-step cost overrides (TOML).
    #[arg(long)]
    pub costs: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with `kappa,value` rows (a header row is allowed).
    pub samples: PathBuf,
}

/// Bench spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default = "one")]
    pub repetitions: u32,
    pub seed: Option<u64>,
    pub profile: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub workload: WorkloadSpec,
    pub codec: CodecSpec,
    #[serde(default)]
    pub exec: BenchExec,
    #[serde(default)]
    pub arrival: ArrivalSpec,
    #[serde(default)]
    pub sweep: Sweep,
}

fn default_label() -> String {
    "bench".into()
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    Uniform,
    AsymmetricAware,
    Plan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchExec {
    pub big_workers: usize,
    pub little_workers: usize,
    pub little_slowdown: f64,
    pub strategy: StrategyName,
    pub state_mode: StateMode,
    /// Bytes per micro-batch; 0 runs eagerly.
    pub batch_bytes: usize,
    pub queue_depth: usize,
    pub pace: bool,
    /// Latency cap for the `plan` strategy, ns; uncapped when unset.
    pub l_set_ns: Option<f64>,
}

impl Default for BenchExec {
    fn default() -> Self {
        let d = ExecConfig::default();
        Self {
            big_workers: d.big_workers,
            little_workers: d.little_workers,
            little_slowdown: d.little_slowdown,
            strategy: StrategyName::Uniform,
            state_mode: d.state_mode,
            batch_bytes: d.batch.tuples_per_batch() * crate::stream::TUPLE_BYTES,
            queue_depth: d.queue_depth,
            pace: d.pace,
            l_set_ns: None,
        }
    }
}

/// Axes crossed with each other; an empty axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub codec: Vec<CodecId>,
    pub batch_bytes: Vec<usize>,
    pub big_workers: Vec<usize>,
    pub little_workers: Vec<usize>,
    pub state_mode: Vec<StateMode>,
    pub strategy: Vec<StrategyName>,
}

impl BenchSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: BenchSpec = toml::from_str(text).map_err(|e| Error::Config(format!("bench spec: {e}")))?;
        if spec.repetitions == 0 {
            return Err(Error::Config("bench spec: repetitions must be >= 1".into()));
        }
        Ok(spec)
    }

    /// Every point of the sweep, as (label, codec, exec).
    pub fn configs(&self) -> Vec<(String, CodecSpec, BenchExec)> {
        fn axis<T: Clone>(v: &[T], base: T) -> Vec<T> {
            if v.is_empty() {
                vec![base]
            } else {
                v.to_vec()
            }
        }
        let s = &self.sweep;
        let mut out = Vec::new();
        for codec in axis(&s.codec, self.codec.id) {
            for batch in axis(&s.batch_bytes, self.exec.batch_bytes) {
                for big in axis(&s.big_workers, self.exec.big_workers) {
                    for little in axis(&s.little_workers, self.exec.little_workers) {
                        for mode in axis(&s.state_mode, self.exec.state_mode) {
                            for strategy in axis(&s.strategy, self.exec.strategy) {
                                let exec = BenchExec {
                                    batch_bytes: batch,
                                    big_workers: big,
                                    little_workers: little,
                                    state_mode: mode,
                                    strategy,
                                    ..self.exec.clone()
                                };
                                let label = format!(
                                    "{}/{codec}/b{batch}/w{big}+{little}/{}/{}",
                                    self.label,
                                    serde_name(&mode),
                                    serde_name(&strategy)
                                );
                                out.push((label, CodecSpec::with_params(codec, self.codec.params), exec));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

fn serde_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn with_seed(workload: &WorkloadSpec, seed: u64) -> WorkloadSpec {
    match workload {
        WorkloadSpec::Micro(m) => WorkloadSpec::Micro(MicroSpec { seed, ..*m }),
        WorkloadSpec::Ecg { n, .. } => WorkloadSpec::Ecg { n: *n, seed },
        other => other.clone(),
    }
}

fn load_profile(path: Option<&Path>) -> Result<HardwareProfile> {
    match path {
        Some(p) => HardwareProfile::load(p),
        None => Ok(HardwareProfile::rk3399()),
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownCodec(_) | Error::Param(_) | Error::Contract(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Parses `args` and runs the command, writing results to `out`.
pub fn run<I, T, W>(args: I, out: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch<W: Write>(cli: &Cli, out: &mut W) -> Result<i32> {
    let io_err = |e: io::Error| Error::io(Path::new("<stdout>"), e);
    match &cli.command {
        Command::Compress(a) => {
            let spec = CodecSpec::with_params(a.codec, a.params.params());
            let values = load_dataset(&a.input, a.layout)?;
            let frame = codecs::encode(&values, &spec)?;
            write_file(&a.output, &frame.to_bytes())?;
            let ratio = metrics::compression_ratio(values.len() as u64 * 4, frame.bit_len.max(1))?;
            writeln!(out, "codec: {}", a.codec).map_err(io_err)?;
            writeln!(out, "tuples: {}", values.len()).map_err(io_err)?;
            writeln!(out, "compressed_bits: {}", frame.bit_len).map_err(io_err)?;
            writeln!(out, "ratio: {ratio:.6}").map_err(io_err)?;
            if !a.no_verify {
                let back = codecs::decode(&Frame::from_bytes(&frame.to_bytes())?, &spec)?;
                match spec.fidelity() {
                    Fidelity::Lossless if back != values => {
                        return Err(Error::Corrupt("verify-decode differs from input".into()))
                    }
                    Fidelity::Lossless => writeln!(out, "verified: lossless").map_err(io_err)?,
                    Fidelity::Lossy => {
                        if back.len() != values.len() {
                            return Err(Error::Corrupt("verify-decode changed the tuple count".into()));
                        }
                        match metrics::nrmse_u32(&values, &back) {
                            Ok(n) => writeln!(out, "nrmse: {n:.6}").map_err(io_err)?,
                            Err(e) => writeln!(out, "nrmse: undefined ({e})").map_err(io_err)?,
                        }
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::Decompress(a) => {
            let frame = Frame::from_bytes(&read_file(&a.input)?)?;
            if let Some(c) = a.codec {
                if c != frame.codec {
                    return Err(Error::Config(format!("frame holds {}, not {c}", frame.codec)));
                }
            }
            let values = codecs::decode(&frame, &CodecSpec::with_params(frame.codec, a.params.params()))?;
            write_file(&a.output, &to_le_bytes(&values))?;
            writeln!(out, "tuples: {}", values.len()).map_err(io_err)?;
            Ok(EXIT_OK)
        }
        Command::Generate(a) => {
            let seed = cli.seed.unwrap_or(0);
            let values = match a.kind {
                GenKind::Micro => gen_micro(&MicroSpec {
                    range: a.range,
                    dup: a.dup,
                    n: a.n,
                    seed,
                })?,
                GenKind::Ecg => ecg_like(a.n, seed),
            };
            write_file(&a.output, &to_le_bytes(&values))?;
            writeln!(out, "tuples: {}", values.len()).map_err(io_err)?;
            Ok(EXIT_OK)
        }
        Command::Bench(a) => {
            let text = fs::read_to_string(&a.spec).map_err(|e| Error::io(&a.spec, e))?;
            let spec = BenchSpec::from_toml_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", a.spec.display())))?;
            let base = a.spec.parent().unwrap_or(Path::new("."));
            let profile_path = spec.profile.as_ref().map(|p| base.join(p)).or_else(|| cli.profile.clone());
            let profile = load_profile(profile_path.as_deref())?;
            let mut rows = run_bench(&spec, &profile, cli.seed)?;
            metrics::summarize(&mut rows);
            // an explicit --format wins over the spec
            let format = match spec.format {
                Some(f) if cli.format == Format::Json => f,
                _ => cli.format,
            };
            match a.output.clone().or_else(|| spec.output.as_ref().map(|p| base.join(p))) {
                Some(path) => {
                    let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                    metrics::write_reports(&rows, format, io::BufWriter::new(f))?;
                    writeln!(out, "wrote {} rows to {}", rows.len(), path.display()).map_err(io_err)?;
                }
                None => metrics::write_reports(&rows, format, &mut *out)?,
            }
            Ok(EXIT_OK)
        }
        Command::Schedule(a) => {
            let profile = load_profile(cli.profile.as_deref())?;
            let mut table = CostTable::default();
            if let Some(p) = &a.costs {
                table.apply_overrides(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?;
            }
            let mut graph = match (&a.graph, a.codec) {
                (Some(p), _) => load_graph(p)?,
                (None, Some(c)) => StageGraph::from_codec(c, &table),
                (None, None) => return Err(Error::Config("schedule needs --codec or --graph".into())),
            };
            if let Some(budget) = a.core_budget {
                graph = suggest_replicas(&graph, &profile, budget)?;
            }
            let plan = search_optimal(&graph, &profile, &JobSpec::new(a.job_bytes, a.l_set)?)?;
            writeln!(out, "{}", plan.to_json()).map_err(io_err)?;
            if plan.feasible {
                Ok(EXIT_OK)
            } else {
                eprintln!("no plan meets L_set = {} ns; best latency shown", a.l_set);
                Ok(EXIT_INFEASIBLE)
            }
        }
        Command::FitRoofline(a) => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .trim(csv::Trim::All)
                .from_path(&a.samples)
                .map_err(|e| Error::Config(format!("{}: {e}", a.samples.display())))?;
            let mut samples = Vec::new();
            for (line, rec) in reader.records().enumerate() {
                let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", a.samples.display())))?;
                let field = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok());
                match (field(0), field(1)) {
                    (Some(k), Some(v)) => samples.push((k, v)),
                    // header
                    _ if line == 0 => {}
                    _ => {
                        return Err(Error::Config(format!(
                            "{}: line {}: expected `kappa,value`",
                            a.samples.display(),
                            line + 1
                        )))
                    }
                }
            }
            let fit = fit_roofline(&samples)?;
            let text = toml::to_string(&fit).map_err(|e| Error::Fit(e.to_string()))?;
            write!(out, "{text}").map_err(io_err)?;
            Ok(EXIT_OK)
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    stage: Vec<Stage>,
}

fn load_graph(path: &Path) -> Result<StageGraph> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let g: GraphFile = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    StageGraph::new(g.stage)
}

/// Runs every configuration and repetition of a bench spec.
pub fn run_bench(spec: &BenchSpec, profile: &HardwareProfile, seed: Option<u64>) -> Result<Vec<Report>> {
    let seed = seed.or(spec.seed).unwrap_or(0);
    let values = with_seed(&spec.workload, seed).load()?;
    let tuples = arrival_clock(&values, &ArrivalSpec { seed, ..spec.arrival })?;
    let mut rows = Vec::new();
    for (label, codec, exec) in spec.configs() {
        let batch = if exec.batch_bytes == 0 {
            BatchPolicy::Eager
        } else {
            BatchPolicy::lazy(exec.batch_bytes)?
        };
        let job_bytes = values.len() as f64 * 4.0;
        let plan: Option<SchedulingPlan> = match exec.strategy {
            StrategyName::Plan => {
                let graph = StageGraph::from_codec(codec.id, &CostTable::default());
                let job = JobSpec::new(job_bytes, exec.l_set_ns.unwrap_or(f64::INFINITY))?;
                Some(search_optimal(&graph, profile, &job)?)
            }
            _ => None,
        };
        let config = ExecConfig {
            big_workers: exec.big_workers,
            little_workers: exec.little_workers,
            little_slowdown: exec.little_slowdown,
            strategy: match (&plan, exec.strategy) {
                (Some(p), _) => Strategy::Plan(p.clone()),
                (None, StrategyName::AsymmetricAware) => Strategy::AsymmetricAware,
                _ => Strategy::Uniform,
            },
            state_mode: exec.state_mode,
            batch,
            queue_depth: exec.queue_depth,
            pace: exec.pace,
        };
        let energy = metrics::estimated_energy(&codec, profile, job_bytes, plan.as_ref()).ok();
        let echo = serde_json::json!({ "codec": codec, "exec": exec, "seed": seed }).to_string();
        for rep in 0..spec.repetitions {
            let run = run_pipeline(&tuples, &codec, &config, profile)?;
            let back = decode_output(&run, &codec)?;
            let nrmse = match codec.fidelity() {
                Fidelity::Lossy => metrics::nrmse_u32(&values, &back).ok(),
                Fidelity::Lossless => {
                    if back != values {
                        return Err(Error::Corrupt(format!("{label}: roundtrip mismatch")));
                    }
                    None
                }
            };
            let secs = Duration::from_nanos(run.stats.wall_ns.max(1)).as_secs_f64();
            let lat = metrics::tuple_latency(&run.stats, &tuples, batch)?;
            rows.push(Report {
                schema_version: REPORT_SCHEMA_VERSION,
                label: label.clone(),
                repetition: rep,
                codec: codec.id.to_string(),
                workers: run.stats.workers.len(),
                batch_bytes: exec.batch_bytes,
                strategy: serde_name(&exec.strategy),
                state_mode: serde_name(&exec.state_mode),
                tuples: run.stats.tuples,
                input_bytes: run.stats.input_bytes,
                compressed_bits: run.compressed_bits(),
                compression_ratio: metrics::compression_ratio(run.stats.input_bytes, run.compressed_bits().max(1))?,
                nrmse,
                wall_ns: run.stats.wall_ns,
                throughput_bps: metrics::throughput(run.stats.input_bytes.max(1), secs)?,
                latency_avg_ns: lat.avg_ns,
                latency_p50_ns: lat.p50_ns,
                latency_p99_ns: lat.p99_ns,
                blocked_ns: run.stats.blocked_ns(),
                running_ns: run.stats.running_ns(),
                energy_estimated_j: energy,
                config: echo.clone(),
                ..Default::default()
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_expands_cartesian_product() {
        let spec = BenchSpec::from_toml_str(
            r#"
            repetitions = 2
            [workload]
            kind = "micro"
            n = 1000
            [codec]
            id = "tcomp32"
            [sweep]
            batch_bytes = [4, 40, 400, 4000, 40000]
            state_mode = ["private", "shared"]
            "#,
        )
        .unwrap();
        assert_eq!(spec.configs().len(), 10);
    }

    #[test]
    fn schema_errors_carry_line() {
        let err = BenchSpec::from_toml_str("repetitions = 1\n[workload]\nkind = \"micro\"\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
        assert!(BenchSpec::from_toml_str("repetitions = 0\n[workload]\nkind = \"ecg\"\nn = 1\nseed = 0\n[codec]\nid = \"rle\"\n").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        let mut out = Vec::new();
        assert_eq!(run(["cstream", "compress", "-i", "x", "-o", "y", "-c", "nope"], &mut out), EXIT_USAGE);
        assert_eq!(run(["cstream", "frobnicate"], &mut out), EXIT_USAGE);
    }
}
