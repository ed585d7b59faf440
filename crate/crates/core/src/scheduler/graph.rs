//! Linear stage graphs built from codec step decompositions.

use serde::{Deserialize, Serialize};

use crate::codecs::CodecId;
use crate::error::{Error, Result};
use crate::hwmodel::{CostTable, TaskCost};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub cost: TaskCost,
    /// Relative weight `f` of each replica; the length is the replica count.
    pub weights: Vec<f64>,
}

impl Stage {
    pub fn new(name: impl Into<String>, cost: TaskCost) -> Self {
        Self {
            name: name.into(),
            cost,
            weights: vec![1.0],
        }
    }

    pub fn replicas(&self) -> usize {
        self.weights.len()
    }
}

/// One stage replica; tasks are numbered stage-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRef {
    pub stage: usize,
    pub replica: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageGraph {
    stages: Vec<Stage>,
}

impl StageGraph {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Config("stage graph has no stages".into()));
        }
        for s in &stages {
            if s.weights.is_empty() {
                return Err(Error::Config(format!("stage {:?} has no replicas", s.name)));
            }
            if s.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
                || s.weights.iter().sum::<f64>() <= 0.0
            {
                return Err(Error::Config(format!("stage {:?} has invalid weights", s.name)));
            }
            s.cost.kappa().map_err(|e| Error::Config(format!("stage {:?}: {e}", s.name)))?;
        }
        Ok(Self { stages })
    }

    /// One single-replica stage per pipeline step of `codec`.
    pub fn from_codec(codec: CodecId, table: &CostTable) -> Self {
        let stages = table
            .steps(codec)
            .iter()
            .map(|s| Stage::new(s.step.clone(), s.task()))
            .collect();
        Self { stages }
    }

    /// Merges consecutive stages; `groups` lists how many stages each new
    /// stage absorbs. Merged stages have a single replica.
    pub fn merged(&self, groups: &[usize]) -> Result<Self> {
        if groups.contains(&0) || groups.iter().sum::<usize>() != self.stages.len() {
            return Err(Error::Config(format!(
                "merge groups {groups:?} do not cover {} stages",
                self.stages.len()
            )));
        }
        let mut out = Vec::new();
        let mut it = self.stages.iter();
        for &g in groups {
            let part: Vec<&Stage> = it.by_ref().take(g).collect();
            let cost = part[1..]
                .iter()
                .fold(part[0].cost, |acc, s| acc.merged(&s.cost));
            let name = part.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join("+");
            out.push(Stage::new(name, cost));
        }
        Self::new(out)
    }

    /// Sets equal-weight replicas for one stage.
    pub fn with_replicas(mut self, stage: usize, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("replica count must be at least 1".into()));
        }
        let s = self
            .stages
            .get_mut(stage)
            .ok_or_else(|| Error::Config(format!("no stage {stage}")))?;
        s.weights = vec![1.0; count];
        Ok(self)
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn replica_counts(&self) -> Vec<usize> {
        self.stages.iter().map(Stage::replicas).collect()
    }

    pub fn tasks(&self) -> Vec<TaskRef> {
        self.stages
            .iter()
            .enumerate()
            .flat_map(|(stage, s)| (0..s.replicas()).map(move |replica| TaskRef { stage, replica }))
            .collect()
    }

    pub fn num_tasks(&self) -> usize {
        self.stages.iter().map(Stage::replicas).sum()
    }

    /// Index of the first task of each stage, plus the total at the end.
    pub fn stage_offsets(&self) -> Vec<usize> {
        let mut offsets = vec![0];
        for s in &self.stages {
            offsets.push(offsets.last().unwrap() + s.replicas());
        }
        offsets
    }

    /// Replicas of stage `stage - 1` feeding replica `replica` of `stage`.
    ///
    /// Upstream replica `p` feeds downstream replica `r` when
    /// `p ≡ r (mod gcd(R_prev, R))`, which is the pattern produced by
    /// round-robin hand-off between the two stages.
    pub fn feeders(&self, stage: usize, replica: usize) -> Vec<usize> {
        if stage == 0 {
            return Vec::new();
        }
        let up = self.stages[stage - 1].replicas();
        let g = gcd(up, self.stages[stage].replicas());
        (0..up).filter(|p| p % g == replica % g).collect()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
