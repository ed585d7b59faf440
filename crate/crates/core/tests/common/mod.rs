//! Shared test oracles and fixtures.
#![allow(dead_code)]

use std::path::PathBuf;

use cstream::bitio::Frame;
use cstream::hwmodel::{ClusterSpec, HardwareProfile, LinkSpec, RooflineParams, TaskCost};
use cstream::scheduler::{JobSpec, Stage, StageGraph};
use rand::Rng;

pub fn golden(name: &str) -> Frame {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.hex"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let text = text.trim();
    let bytes: Vec<u8> = (0..text.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&text[i..i + 2], 16).unwrap())
        .collect();
    Frame::from_bytes(&bytes).unwrap()
}

/// Piecewise evaluation written out from the roofline's boundaries and
/// segment coefficients.
fn roof(r: &RooflineParams, kappa: f64) -> f64 {
    let b = r.boundaries();
    let s = r.segments();
    let i = b.iter().position(|&k| kappa <= k);
    match i {
        Some(i) => s[i].a * kappa + s[i].b,
        None => r.plateau(),
    }
}

/// Cost of one complete assignment, computed task by task from the model
/// formulas. Returns `(L_job, E_job, feasible)`.
pub fn oracle_eval(assign: &[usize], graph: &StageGraph, profile: &HardwareProfile, job: &JobSpec) -> (f64, f64, bool) {
    let cores = profile.cores();
    let mut inputs = Vec::new();
    let mut costs = Vec::new();
    let mut first = Vec::new();
    let mut stage_of = Vec::new();
    for (si, s) in graph.stages().iter().enumerate() {
        let total: f64 = s.weights.iter().sum();
        first.push(inputs.len());
        for f in &s.weights {
            inputs.push(s.cost.beta * f * job.job_bytes / total);
            costs.push(s.cost);
            stage_of.push(si);
        }
    }
    let mut loads = vec![0.0; cores.len()];
    let (mut latency, mut energy) = (0.0f64, 0.0f64);
    for t in 0..assign.len() {
        let core = &cores[assign[t]];
        let c = costs[t];
        let i = inputs[t];
        let kappa = c.iota / c.m + c.delta * i;
        let eta = roof(&core.perf, kappa);
        let zeta = roof(&core.energy, kappa);
        let mut fetch = 0.0f64;
        let si = stage_of[t];
        if si > 0 {
            let up = graph.stages()[si - 1].weights.len();
            let here = graph.stages()[si].weights.len();
            let (mut a, mut b) = (up, here);
            while b != 0 {
                (a, b) = (b, a % b);
            }
            let r = t - first[si];
            for p in (0..up).filter(|p| p % a == r % a) {
                let from = assign[first[si - 1] + p];
                let to = assign[t];
                let f = if from == to {
                    0.0
                } else if cores[from].cluster == cores[to].cluster {
                    let line = f64::from(cores[from].l1_line.min(cores[to].l1_line));
                    (i / line).ceil() * profile.m(from, to) + profile.omega_same_ns
                } else {
                    let line = f64::from(cores[from].l2_line.min(cores[to].l2_line));
                    (i / line).ceil() * profile.m(from, to) * profile.rho(from, to) + profile.omega_different_ns
                };
                fetch = fetch.max(f);
            }
        }
        let run = core.lambda_ns_per_byte * (c.iota / 16.0 * i) + core.omega_ns;
        let l = fetch + run;
        latency = latency.max(l);
        energy += eta * (l * 1e-9) / zeta;
        loads[assign[t]] += eta;
    }
    let budget = loads.iter().zip(cores).all(|(l, c)| *l <= c.c_max);
    (latency, energy, latency < job.l_set_ns && budget)
}

/// Minimum energy over every assignment, or `None` when nothing is feasible.
pub fn exhaustive_min_energy(graph: &StageGraph, profile: &HardwareProfile, job: &JobSpec) -> Option<(f64, Vec<usize>)> {
    let n = graph.num_tasks();
    let k = profile.num_cores();
    let mut assign = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let (_, e, ok) = oracle_eval(&assign, graph, profile, job);
        if ok && best.as_ref().is_none_or(|(b, _)| e < *b) {
            best = Some((e, assign.clone()));
        }
        let mut d = 0;
        loop {
            if d == n {
                return best;
            }
            assign[d] += 1;
            if assign[d] < k {
                break;
            }
            assign[d] = 0;
            d += 1;
        }
    }
}

fn random_roofline<R: Rng>(rng: &mut R, scale: f64) -> RooflineParams {
    let b0 = rng.random_range(0.5..2.0);
    let b1 = b0 * rng.random_range(1.5..4.0);
    let b2 = b1 * rng.random_range(1.5..4.0);
    let mut y = rng.random_range(0.05..0.3) * scale;
    let mut knots = [0.0; 4];
    for k in &mut knots {
        *k = y;
        y += rng.random_range(0.0..0.6) * scale;
    }
    RooflineParams::from_knots([b0, b1, b2], knots).unwrap()
}

/// Random asymmetric profile with up to `max_cores` cores in one to three clusters.
pub fn random_profile<R: Rng>(rng: &mut R, max_cores: usize) -> HardwareProfile {
    let clusters = rng.random_range(1..=3usize.min(max_cores));
    let mut left = rng.random_range(clusters..=max_cores);
    let mut specs = Vec::new();
    for c in 0..clusters {
        let cores = if c + 1 == clusters { left } else { rng.random_range(1..=left - (clusters - c - 1)) };
        left -= cores;
        let speed = rng.random_range(0.5..2.0);
        specs.push(ClusterSpec {
            name: format!("c{c}"),
            cores,
            freq_ghz: 1.0,
            nominal_freq_ghz: None,
            c_max: rng.random_range(1.0..8.0) * 1e9 * speed,
            lambda_ns_per_byte: rng.random_range(0.5..3.0) / speed,
            omega_ns: rng.random_range(0.0..3000.0),
            l1_line: *[32u32, 64].get(rng.random_range(0..2)).unwrap(),
            l2_line: 64,
            perf: random_roofline(rng, 2e9 * speed),
            energy: random_roofline(rng, 3e9 / speed),
        });
    }
    let mut links = Vec::new();
    for a in &specs {
        for b in &specs {
            links.push(LinkSpec {
                from: a.name.clone(),
                to: b.name.clone(),
                m_ns: rng.random_range(1.0..30.0),
                rho: rng.random_range(1.0..3.0),
            });
        }
    }
    let same = rng.random_range(0.0..500.0);
    let diff = rng.random_range(0.0..1500.0);
    HardwareProfile::new("random", specs, links, same, diff).unwrap()
}

/// Random linear graph with at most `max_tasks` tasks in total.
pub fn random_graph<R: Rng>(rng: &mut R, max_tasks: usize) -> StageGraph {
    let mut left = rng.random_range(1..=max_tasks);
    let mut stages = Vec::new();
    while left > 0 {
        let replicas = rng.random_range(1..=left.min(2));
        left -= replicas;
        let mut cost = TaskCost::new(rng.random_range(2.0..20.0), rng.random_range(1.0..3.0));
        if rng.random_bool(0.3) {
            cost.delta = rng.random_range(0.0..1e-3);
        }
        let mut s = Stage::new(format!("s{}", stages.len()), cost);
        s.weights = (0..replicas).map(|_| rng.random_range(0.5..2.0)).collect();
        stages.push(s);
    }
    StageGraph::new(stages).unwrap()
}

pub fn random_job<R: Rng>(rng: &mut R) -> JobSpec {
    JobSpec::new(rng.random_range(1e3..2e4), rng.random_range(4e3..1e5)).unwrap()
}
