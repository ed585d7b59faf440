//! Per-step instruction and memory-access counts for every codec.
//!
//! Counts are per tuple and derived by hand from each step's inner loop
//! rather than measured. Load steps copy a tuple in and are memory-heavy;
//! transform and encoding steps are arithmetic-heavy; output steps sit in
//! between. Values can be replaced from a TOML override file:
//!
//! ```toml
//! [[step]]
//! codec = "tcomp32"
//! step = "transform"
//! iota = 30
//! m = 1
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TaskCost;
use crate::codecs::{CodecId, CodecSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCost {
    pub step: String,
    pub iota: f64,
    pub m: f64,
}

impl StepCost {
    fn new(step: &str, iota: f64, m: f64) -> Self {
        Self {
            step: step.to_string(),
            iota,
            m,
        }
    }

    pub fn task(&self) -> TaskCost {
        TaskCost::new(self.iota, self.m)
    }
}

/// `(ι, m)` per step, in the order of [`CodecId::steps`].
fn analytic(id: CodecId) -> [(f64, f64); 5] {
    use CodecId::*;
    // unused trailing entries are ignored for three-step codecs
    match id {
        // load, squeeze zeros (7-bit group loop), byte output
        Leb128 => [(4.0, 2.0), (12.0, 1.0), (6.0, 2.0), (0.0, 0.0), (0.0, 0.0)],
        // load, clz + shifts, unaligned bit packing
        Tcomp32 => [(4.0, 2.0), (14.0, 1.0), (10.0, 2.0), (0.0, 0.0), (0.0, 0.0)],
        // load, μ-law log + scale, one padded code
        Leb128Nuq => [(4.0, 2.0), (40.0, 1.0), (4.0, 1.0), (0.0, 0.0), (0.0, 0.0)],
        Uanuq => [(4.0, 2.0), (40.0, 1.0), (10.0, 2.0), (0.0, 0.0), (0.0, 0.0)],
        // load, read last, write last, delta + LEB128 loop, bytes out
        DeltaLeb128 => [(4.0, 2.0), (3.0, 1.0), (2.0, 1.0), (12.0, 1.0), (6.0, 2.0)],
        // load, compare with last, bump run, decide flush, amortized record
        Rle => [(4.0, 2.0), (3.0, 1.0), (3.0, 1.0), (4.0, 1.0), (6.0, 2.0)],
        // load, multiplicative hash, slot read + write, slot compare, flag + payload
        Tdic32 => [(4.0, 2.0), (6.0, 1.0), (6.0, 2.0), (8.0, 2.0), (10.0, 2.0)],
        // load, signed delta, dequantize + predictor add, quantize, code out
        Adpcm => [(4.0, 2.0), (3.0, 1.0), (30.0, 1.0), (40.0, 1.0), (4.0, 1.0)],
        Uaadpcm => [(4.0, 2.0), (3.0, 1.0), (30.0, 1.0), (40.0, 1.0), (10.0, 2.0)],
        // load, offset from anchor, cone divisions + buffer push, segment test, record
        Pla => [(4.0, 2.0), (6.0, 1.0), (20.0, 2.0), (8.0, 1.0), (4.0, 1.0)],
    }
}

/// Analytic step costs, optionally overridden per step.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    entries: BTreeMap<CodecId, Vec<StepCost>>,
}

impl Default for CostTable {
    fn default() -> Self {
        let entries = CodecId::ALL
            .into_iter()
            .map(|id| {
                let costs = analytic(id);
                let steps = id
                    .steps()
                    .iter()
                    .zip(costs)
                    .map(|(name, (iota, m))| StepCost::new(name, iota, m))
                    .collect();
                (id, steps)
            })
            .collect();
        Self { entries }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideFile {
    #[serde(default)]
    step: Vec<Override>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Override {
    codec: String,
    step: String,
    iota: Option<f64>,
    m: Option<f64>,
}

impl CostTable {
    pub fn steps(&self, id: CodecId) -> &[StepCost] {
        &self.entries[&id]
    }

    pub fn task_costs(&self, id: CodecId) -> Vec<TaskCost> {
        self.steps(id).iter().map(StepCost::task).collect()
    }

    /// Applies overrides; `step` is a step name or its zero-based index.
    pub fn apply_overrides(&mut self, toml_text: &str) -> Result<()> {
        let file: OverrideFile =
            toml::from_str(toml_text).map_err(|e| Error::Config(format!("cost overrides: {e}")))?;
        for o in file.step {
            let id: CodecId = o.codec.parse()?;
            let steps = self.entries.get_mut(&id).expect("every codec has an entry");
            let idx = match o.step.parse::<usize>() {
                Ok(i) if i < steps.len() => i,
                _ => steps
                    .iter()
                    .position(|s| s.step == o.step)
                    .ok_or_else(|| Error::Config(format!("{id} has no step {:?}", o.step)))?,
            };
            let s = &mut steps[idx];
            if let Some(iota) = o.iota {
                s.iota = iota;
            }
            if let Some(m) = o.m {
                s.m = m;
            }
            super::kappa(s.iota, s.m)
                .map_err(|e| Error::Config(format!("{id} step {}: {e}", s.step)))?;
        }
        Ok(())
    }
}

/// Step costs for one codec from the built-in table.
pub fn codec_cost_table(spec: &CodecSpec) -> Vec<StepCost> {
    CostTable::default().steps(spec.id).to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_counts_match_pipelines() {
        let table = CostTable::default();
        for id in CodecId::ALL {
            assert_eq!(table.steps(id).len(), id.steps().len(), "{id}");
            for s in table.steps(id) {
                assert!(s.task().kappa().unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn tcomp32_transform_is_instruction_heavy() {
        let t = codec_cost_table(&CodecId::Tcomp32.into());
        assert!(t[1].task().kappa().unwrap() > t[0].task().kappa().unwrap());
    }

    #[test]
    fn tdic32_table_steps_touch_memory() {
        let t = codec_cost_table(&CodecId::Tdic32.into());
        assert!(t[2].m >= 2.0 && t[3].m >= 2.0);
    }

    #[test]
    fn overrides_replace_one_step() {
        let mut table = CostTable::default();
        table
            .apply_overrides("[[step]]\ncodec = \"tcomp32\"\nstep = \"transform\"\niota = 30\n")
            .unwrap();
        let s = &table.steps(CodecId::Tcomp32)[1];
        assert_eq!(s.task().kappa().unwrap(), 30.0);
        assert_eq!(table.steps(CodecId::Tcomp32)[0], CostTable::default().steps(CodecId::Tcomp32)[0]);
        table
            .apply_overrides("[[step]]\ncodec = \"tcomp32\"\nstep = \"0\"\nm = 4\n")
            .unwrap();
        assert_eq!(table.steps(CodecId::Tcomp32)[0].m, 4.0);
        assert!(table.apply_overrides("[[step]]\ncodec = \"zstd\"\nstep = \"0\"\n").is_err());
        assert!(table.apply_overrides("[[step]]\ncodec = \"rle\"\nstep = \"nope\"\n").is_err());
        assert!(table.apply_overrides("[[step]]\ncodec = \"rle\"\nstep = \"load\"\nm = 0\n").is_err());
    }
}
