//! Minimum-energy assignment of stage replicas to cores under a latency cap.
//!
//! A plan maps every task (stage replica) to a core. Task `t` on core `j`
//! receives `i_t` bytes, has latency `l = l_fetch + l_run` and energy
//! `e = η(κ') · l / ζ(κ')`. A plan is feasible when every `l < L_set` and the
//! summed η of the tasks on each core stays within that core's `C_max`.

pub mod graph;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hwmodel::{self, HardwareProfile};

pub use graph::{Stage, StageGraph, TaskRef};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    /// Total input bytes `I_job`.
    pub job_bytes: f64,
    /// Latency cap `L_set`, ns.
    pub l_set_ns: f64,
}

impl JobSpec {
    pub fn new(job_bytes: f64, l_set_ns: f64) -> Result<Self> {
        let job = Self {
            job_bytes,
            l_set_ns,
        };
        job.validate()?;
        Ok(job)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l_set_ns > 0.0) {
            return Err(Error::Config(format!("latency cap must be positive, got {}", self.l_set_ns)));
        }
        if !(self.job_bytes.is_finite() && self.job_bytes >= 0.0) {
            return Err(Error::Config(format!("job size must be >= 0, got {}", self.job_bytes)));
        }
        Ok(())
    }
}

/// Evaluated cost of one task in a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEval {
    pub stage: usize,
    pub name: String,
    pub replica: usize,
    pub core: usize,
    pub cluster: String,
    pub input_bytes: f64,
    pub kappa: f64,
    pub eta: f64,
    pub zeta: f64,
    pub fetch_ns: f64,
    pub run_ns: f64,
    pub latency_ns: f64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanEval {
    pub tasks: Vec<TaskEval>,
    /// `L_job = max l_i`, ns.
    pub latency_ns: f64,
    /// `E_job = Σ e_i`, J.
    pub energy_j: f64,
    /// Σ η of the tasks on each core.
    pub loads: Vec<f64>,
}

impl PlanEval {
    pub fn within_budget(&self, profile: &HardwareProfile) -> bool {
        self.loads
            .iter()
            .zip(profile.cores())
            .all(|(load, core)| *load <= core.c_max)
    }

    pub fn is_feasible(&self, profile: &HardwareProfile, job: &JobSpec) -> bool {
        self.latency_ns < job.l_set_ns && self.within_budget(profile)
    }
}

/// Per-task, per-core quantities that do not depend on the rest of the plan.
struct Model<'a> {
    graph: &'a StageGraph,
    profile: &'a HardwareProfile,
    tasks: Vec<TaskRef>,
    input: Vec<f64>,
    kappa: Vec<f64>,
    /// Indexed `[task][core]`.
    eta: Vec<Vec<f64>>,
    zeta: Vec<Vec<f64>>,
    run: Vec<Vec<f64>>,
    /// Global task indices of each task's feeders.
    feeders: Vec<Vec<usize>>,
    offsets: Vec<usize>,
}

impl<'a> Model<'a> {
    fn new(graph: &'a StageGraph, profile: &'a HardwareProfile, job: &JobSpec) -> Result<Self> {
        job.validate()?;
        if profile.num_cores() == 0 {
            return Err(Error::Config("profile has no cores".into()));
        }
        let tasks = graph.tasks();
        let offsets = graph.stage_offsets();
        let mut input = Vec::with_capacity(tasks.len());
        for s in graph.stages() {
            input.extend(hwmodel::estimate_input_size(&s.weights, job.job_bytes, s.cost.beta)?);
        }
        let (mut kappa, mut eta, mut zeta, mut run, mut feeders) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (t, task) in tasks.iter().enumerate() {
            let cost = graph.stages()[task.stage].cost;
            let k = cost.kappa_at(input[t])?;
            let (mut e_row, mut z_row, mut r_row) = (Vec::new(), Vec::new(), Vec::new());
            for core in profile.cores() {
                let (e, z) = hwmodel::rates(core, k)?;
                e_row.push(e);
                z_row.push(z);
                r_row.push(hwmodel::latency_run(core, cost.work() * input[t]));
            }
            kappa.push(k);
            eta.push(e_row);
            zeta.push(z_row);
            run.push(r_row);
            let base = if task.stage == 0 { 0 } else { offsets[task.stage - 1] };
            feeders.push(
                graph
                    .feeders(task.stage, task.replica)
                    .into_iter()
                    .map(|p| base + p)
                    .collect(),
            );
        }
        Ok(Self {
            graph,
            profile,
            tasks,
            input,
            kappa,
            eta,
            zeta,
            run,
            feeders,
            offsets,
        })
    }

    fn fetch(&self, t: usize, core: usize, assignment: &[usize]) -> Result<f64> {
        let mut worst = 0.0f64;
        for &f in &self.feeders[t] {
            worst = worst.max(hwmodel::latency_fetch(self.profile, assignment[f], core, self.input[t])?);
        }
        Ok(worst)
    }

    /// `(fetch, latency, energy)` of task `t` on `core`.
    fn task(&self, t: usize, core: usize, assignment: &[usize]) -> Result<(f64, f64, f64)> {
        let fetch = self.fetch(t, core, assignment)?;
        let latency = fetch + self.run[t][core];
        let e = hwmodel::energy(self.eta[t][core], self.zeta[t][core], latency * 1e-9)?;
        Ok((fetch, latency, e))
    }

    fn evaluate(&self, assignment: &[usize]) -> Result<PlanEval> {
        if assignment.len() != self.tasks.len() {
            return Err(Error::Config(format!(
                "plan assigns {} tasks, graph has {}",
                assignment.len(),
                self.tasks.len()
            )));
        }
        for &c in assignment {
            self.profile.core(c)?;
        }
        let mut tasks = Vec::with_capacity(assignment.len());
        let mut loads = vec![0.0; self.profile.num_cores()];
        let (mut latency_ns, mut energy_j) = (0.0f64, 0.0);
        for (t, &core) in assignment.iter().enumerate() {
            let (fetch, latency, e) = self.task(t, core, assignment)?;
            latency_ns = latency_ns.max(latency);
            energy_j += e;
            loads[core] += self.eta[t][core];
            let task = self.tasks[t];
            let spec = &self.profile.cores()[core];
            tasks.push(TaskEval {
                stage: task.stage,
                name: self.graph.stages()[task.stage].name.clone(),
                replica: task.replica,
                core,
                cluster: self.profile.clusters()[spec.cluster].name.clone(),
                input_bytes: self.input[t],
                kappa: self.kappa[t],
                eta: self.eta[t][core],
                zeta: self.zeta[t][core],
                fetch_ns: fetch,
                run_ns: self.run[t][core],
                latency_ns: latency,
                energy_j: e,
            });
        }
        Ok(PlanEval {
            tasks,
            latency_ns,
            energy_j,
            loads,
        })
    }
}

/// Evaluates `assignment` (core id per task, stage-major).
pub fn evaluate_plan(
    assignment: &[usize],
    graph: &StageGraph,
    profile: &HardwareProfile,
    job: &JobSpec,
) -> Result<PlanEval> {
    Model::new(graph, profile, job)?.evaluate(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulingPlan {
    pub profile: String,
    pub feasible: bool,
    pub l_set_ns: f64,
    pub job_bytes: f64,
    /// Core id per task, stage-major.
    pub assignment: Vec<usize>,
    /// `L_job`, ns.
    pub latency_ns: f64,
    /// `E_job`, J (model estimate).
    pub energy_j: f64,
    pub tasks: Vec<TaskEval>,
    /// Search nodes expanded.
    pub explored: u64,
}

impl SchedulingPlan {
    fn from_eval(eval: PlanEval, assignment: Vec<usize>, feasible: bool, profile: &HardwareProfile, job: &JobSpec, explored: u64) -> Self {
        Self {
            profile: profile.name.clone(),
            feasible,
            l_set_ns: job.l_set_ns,
            job_bytes: job.job_bytes,
            assignment,
            latency_ns: eval.latency_ns,
            energy_j: eval.energy_j,
            tasks: eval.tasks,
            explored,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plans serialize")
    }
}

/// Upper bound on memoized stage-boundary states.
const MEMO_LIMIT: usize = 1 << 20;
/// Relative slack on the energy bound so equal-energy ties are never pruned.
const BOUND_SLACK: f64 = 1e-9;

type MemoKey = (usize, Vec<usize>, Vec<u64>);

struct Search<'m, 'a> {
    model: &'m Model<'a>,
    l_set: f64,
    c_max: Vec<f64>,
    /// Lower bound on the energy of tasks `t..`.
    energy_lb: Vec<f64>,
    assign: Vec<usize>,
    loads: Vec<f64>,
    best: Option<(f64, f64, Vec<usize>)>,
    memo: HashMap<MemoKey, Vec<(f64, f64)>>,
    explored: u64,
}

impl Search<'_, '_> {
    fn dominated(&mut self, t: usize, energy: f64, latency: f64) -> bool {
        let Some(stage) = self.model.offsets.iter().position(|&o| o == t) else {
            return false;
        };
        if stage == 0 {
            return false;
        }
        let prev = self.assign[self.model.offsets[stage - 1]..t].to_vec();
        let key = (stage, prev, self.loads.iter().map(|l| l.to_bits()).collect());
        if let Some(seen) = self.memo.get_mut(&key) {
            if seen.iter().any(|&(e, l)| e <= energy && l <= latency) {
                return true;
            }
            seen.push((energy, latency));
        } else if self.memo.len() < MEMO_LIMIT {
            self.memo.insert(key, vec![(energy, latency)]);
        }
        false
    }

    fn dfs(&mut self, t: usize, energy: f64, latency: f64) -> Result<()> {
        self.explored += 1;
        let n = self.model.tasks.len();
        if t == n {
            let better = match &self.best {
                None => true,
                Some((be, bl, _)) => energy < *be || (energy == *be && latency < *bl),
            };
            if better {
                self.best = Some((energy, latency, self.assign.clone()));
            }
            return Ok(());
        }
        if self.dominated(t, energy, latency) {
            return Ok(());
        }
        for core in 0..self.c_max.len() {
            let (_, l, e) = self.model.task(t, core, &self.assign)?;
            if !(l < self.l_set) {
                continue;
            }
            let old = self.loads[core];
            let load = old + self.model.eta[t][core];
            if load > self.c_max[core] {
                continue;
            }
            let partial = energy + e;
            if let Some((be, _, _)) = &self.best {
                if partial + self.energy_lb[t + 1] > be * (1.0 + BOUND_SLACK) {
                    continue;
                }
            }
            self.assign[t] = core;
            self.loads[core] = load;
            self.dfs(t + 1, partial, latency.max(l))?;
            self.loads[core] = old;
        }
        Ok(())
    }
}

/// Lowest-latency plan, ties broken by energy then assignment order.
fn min_latency(model: &Model<'_>) -> Result<(Vec<usize>, u64)> {
    struct Lat<'m, 'a> {
        model: &'m Model<'a>,
        assign: Vec<usize>,
        latency_lb: Vec<f64>,
        best: Option<(f64, f64, Vec<usize>)>,
        explored: u64,
    }
    impl Lat<'_, '_> {
        fn dfs(&mut self, t: usize, energy: f64, latency: f64) -> Result<()> {
            self.explored += 1;
            if t == self.assign.len() {
                let better = match &self.best {
                    None => true,
                    Some((be, bl, _)) => latency < *bl || (latency == *bl && energy < *be),
                };
                if better {
                    self.best = Some((energy, latency, self.assign.clone()));
                }
                return Ok(());
            }
            for core in 0..self.model.profile.num_cores() {
                let (_, l, e) = self.model.task(t, core, &self.assign)?;
                let lat = latency.max(l);
                if let Some((_, bl, _)) = &self.best {
                    if lat.max(self.latency_lb[t + 1]) > *bl {
                        continue;
                    }
                }
                self.assign[t] = core;
                self.dfs(t + 1, energy + e, lat)?;
            }
            Ok(())
        }
    }
    let n = model.tasks.len();
    let mut latency_lb = vec![0.0f64; n + 1];
    for t in (0..n).rev() {
        let fastest = model.run[t].iter().copied().fold(f64::INFINITY, f64::min);
        latency_lb[t] = latency_lb[t + 1].max(fastest);
    }
    let mut s = Lat {
        model,
        assign: vec![0; n],
        latency_lb,
        best: None,
        explored: 0,
    };
    s.dfs(0, 0.0, 0.0)?;
    let (_, _, assign) = s.best.expect("at least one plan exists");
    Ok((assign, s.explored))
}

/// Finds the minimum-energy feasible plan by depth-first branch and bound.
///
/// Tasks are assigned stage-major so every feeder is placed before the tasks
/// it feeds. Branches are cut when a task alone reaches `L_set`, when a
/// core's η budget would overflow, or when the partial energy plus a
/// fetch-free lower bound for the remaining tasks exceeds the incumbent.
/// States at stage boundaries with the same previous-stage placement and core
/// loads are memoized and dominated ones skipped. Ties go to lower `L_job`,
/// then to the lexicographically smaller assignment. When nothing is
/// feasible the result has `feasible == false` and holds the lowest-latency
/// plan.
pub fn search_optimal(graph: &StageGraph, profile: &HardwareProfile, job: &JobSpec) -> Result<SchedulingPlan> {
    let model = Model::new(graph, profile, job)?;
    let n = model.tasks.len();
    let cores = profile.num_cores();
    let mut energy_lb = vec![0.0; n + 1];
    for t in (0..n).rev() {
        let mut cheapest = f64::INFINITY;
        for j in 0..cores {
            let e = hwmodel::energy(model.eta[t][j], model.zeta[t][j], model.run[t][j] * 1e-9)?;
            cheapest = cheapest.min(e);
        }
        energy_lb[t] = energy_lb[t + 1] + cheapest;
    }
    let mut search = Search {
        model: &model,
        l_set: job.l_set_ns,
        c_max: profile.cores().iter().map(|c| c.c_max).collect(),
        energy_lb,
        assign: vec![0; n],
        loads: vec![0.0; cores],
        best: None,
        memo: HashMap::new(),
        explored: 0,
    };
    search.dfs(0, 0.0, 0.0)?;
    let explored = search.explored;
    match search.best {
        Some((_, _, assign)) => {
            let eval = model.evaluate(&assign)?;
            debug_assert!(eval.is_feasible(profile, job));
            Ok(SchedulingPlan::from_eval(eval, assign, true, profile, job, explored))
        }
        None => {
            let (assign, more) = min_latency(&model)?;
            let eval = model.evaluate(&assign)?;
            Ok(SchedulingPlan::from_eval(eval, assign, false, profile, job, explored + more))
        }
    }
}

/// Greedy replica suggestion.
///
/// A stage's estimated cost is `λ̄ · work / R` (mean λ over the profile's
/// cores, per job byte). While cores remain, the stage that is strictly the
/// most expensive gains a replica; the loop stops once the bottleneck is
/// shared or moves to another stage.
pub fn suggest_replicas(graph: &StageGraph, profile: &HardwareProfile, core_budget: usize) -> Result<StageGraph> {
    let stages = graph.stages().len();
    if core_budget < stages {
        return Err(Error::Config(format!(
            "core budget {core_budget} is smaller than the {stages} stages"
        )));
    }
    let lambda = profile.cores().iter().map(|c| c.lambda_ns_per_byte).sum::<f64>()
        / profile.num_cores() as f64;
    let mut counts = graph.replica_counts();
    let cost = |s: usize, counts: &[usize]| lambda * graph.stages()[s].cost.work() / counts[s] as f64;
    let bottleneck = |counts: &[usize]| {
        (0..stages).fold(0, |best, s| if cost(s, counts) > cost(best, counts) { s } else { best })
    };
    let mut first: Option<usize> = None;
    while counts.iter().sum::<usize>() < core_budget {
        let b = bottleneck(&counts);
        let unique = (0..stages).all(|s| s == b || cost(s, &counts) < cost(b, &counts));
        if !unique || first.is_some_and(|f| f != b) {
            break;
        }
        first = Some(b);
        counts[b] += 1;
    }
    let mut out = graph.clone();
    for (s, &c) in counts.iter().enumerate() {
        if c != graph.stages()[s].replicas() {
            out = out.with_replicas(s, c)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hwmodel::{ClusterSpec, RooflineParams, TaskCost};

    fn cluster(name: &str, cores: usize, lambda: f64, c_max: f64) -> ClusterSpec {
        let r = RooflineParams::from_knots([1.0, 4.0, 16.0], [1e8, 3e8, 8e8, 1e9]).unwrap();
        ClusterSpec {
            name: name.into(),
            cores,
            freq_ghz: 1.0,
            nominal_freq_ghz: None,
            c_max,
            lambda_ns_per_byte: lambda,
            omega_ns: 100.0,
            l1_line: 64,
            l2_line: 64,
            perf: r,
            energy: r.scaled(4.0).unwrap(),
        }
    }

    fn graph2() -> StageGraph {
        StageGraph::new(vec![
            Stage::new("s0", TaskCost::new(4.0, 2.0)),
            Stage::new("s1", TaskCost::new(14.0, 1.0)),
        ])
        .unwrap()
    }

    #[test]
    fn single_task_single_core() {
        let p = HardwareProfile::homogeneous(cluster("c", 1, 2.0, 1e10), 4.4).unwrap();
        let g = StageGraph::new(vec![Stage::new("only", TaskCost::new(16.0, 4.0))]).unwrap();
        let job = JobSpec::new(1000.0, 1e6).unwrap();
        let eval = evaluate_plan(&[0], &g, &p, &job).unwrap();
        assert_eq!(eval.latency_ns, 2.0 * 1000.0 + 100.0);
        assert_eq!(eval.tasks[0].fetch_ns, 0.0);
        let plan = search_optimal(&g, &p, &job).unwrap();
        assert!(plan.feasible);
        assert_eq!(plan.assignment, vec![0]);
        let tight = JobSpec::new(1000.0, 2100.0).unwrap();
        assert!(!search_optimal(&g, &p, &tight).unwrap().feasible);
    }

    #[test]
    fn colocated_stages_have_no_fetch() {
        let p = HardwareProfile::rk3399();
        let job = JobSpec::new(400.0, 1e9).unwrap();
        let eval = evaluate_plan(&[0, 0], &graph2(), &p, &job).unwrap();
        assert!(eval.tasks.iter().all(|t| t.fetch_ns == 0.0));
        let split = evaluate_plan(&[0, 4], &graph2(), &p, &job).unwrap();
        assert!(split.tasks[1].fetch_ns > 0.0);
    }

    #[test]
    fn infeasible_reports_fastest_plan() {
        let p = HardwareProfile::rk3399();
        let job = JobSpec::new(4000.0, 1.0).unwrap();
        let plan = search_optimal(&graph2(), &p, &job).unwrap();
        assert!(!plan.feasible);
        let fastest = plan.latency_ns;
        for a in 0..6 {
            for b in 0..6 {
                let e = evaluate_plan(&[a, b], &graph2(), &p, &job).unwrap();
                assert!(e.latency_ns >= fastest);
            }
        }
    }

    #[test]
    fn budget_forbids_oversubscription() {
        // plateau η (1e9) per task; C_max allows one task per core
        let p = HardwareProfile::homogeneous(cluster("c", 2, 1.0, 1.5e9), 4.4).unwrap();
        let g = StageGraph::new(vec![
            Stage::new("a", TaskCost::new(100.0, 1.0)),
            Stage::new("b", TaskCost::new(100.0, 1.0)),
        ])
        .unwrap();
        let plan = search_optimal(&g, &p, &JobSpec::new(100.0, 1e9).unwrap()).unwrap();
        assert!(plan.feasible);
        assert_ne!(plan.assignment[0], plan.assignment[1]);
    }

    #[test]
    fn replica_suggestions() {
        let p = HardwareProfile::rk3399();
        let balanced = StageGraph::new(vec![
            Stage::new("a", TaskCost::new(16.0, 1.0)),
            Stage::new("b", TaskCost::new(16.0, 1.0)),
        ])
        .unwrap();
        assert_eq!(suggest_replicas(&balanced, &p, 2).unwrap(), balanced);
        assert_eq!(suggest_replicas(&balanced, &p, 4).unwrap(), balanced);
        let skewed = StageGraph::new(vec![
            Stage::new("a", TaskCost::new(64.0, 1.0)),
            Stage::new("b", TaskCost::new(16.0, 1.0)),
        ])
        .unwrap();
        assert_eq!(suggest_replicas(&skewed, &p, 5).unwrap().replica_counts(), vec![4, 1]);
        assert_eq!(suggest_replicas(&skewed, &p, 3).unwrap().replica_counts(), vec![2, 1]);
        assert_eq!(suggest_replicas(&skewed, &p, 9).unwrap().replica_counts(), vec![4, 1]);
        assert!(suggest_replicas(&skewed, &p, 1).is_err());
    }

    #[test]
    fn plan_json_roundtrip() {
        let p = HardwareProfile::rk3399();
        let plan = search_optimal(&graph2(), &p, &JobSpec::new(400.0, 1e6).unwrap()).unwrap();
        let back: SchedulingPlan = serde_json::from_str(&plan.to_json()).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = HardwareProfile::rk3399();
        assert!(JobSpec::new(1.0, 0.0).is_err());
        let job = JobSpec::new(1.0, 1.0).unwrap();
        assert!(evaluate_plan(&[0], &graph2(), &p, &job).is_err());
        assert!(evaluate_plan(&[0, 7], &graph2(), &p, &job).is_err());
    }
}
