//! Cost model for asymmetric multicores.
//!
//! Units are fixed: bytes, nanoseconds, joules, instructions. Rates are per
//! second (η in instructions/s, ζ in instructions/J).

pub mod cost;
pub mod profile;
pub mod roofline;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cost::{codec_cost_table, CostTable, StepCost};
pub use profile::{ClusterSpec, CoreSpec, HardwareProfile, LinkSpec};
pub use roofline::{fit_roofline, RooflineParams, Segment};

/// Instructions per tuple that one unit of `work` stands for. A core's λ is
/// the run-latency slope of a task with this many instructions per tuple.
pub const REFERENCE_IOTA: f64 = 16.0;

/// Analytic cost of one task (a stage or merged group of steps) per tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskCost {
    /// Instructions per tuple.
    pub iota: f64,
    /// Memory accesses per tuple.
    pub m: f64,
    /// Size sensitivity of κ (κ' = κ + δ·i).
    #[serde(default)]
    pub delta: f64,
    /// Input-size calibration coefficient.
    #[serde(default = "unit")]
    pub beta: f64,
}

fn unit() -> f64 {
    1.0
}

impl TaskCost {
    pub fn new(iota: f64, m: f64) -> Self {
        Self {
            iota,
            m,
            delta: 0.0,
            beta: 1.0,
        }
    }

    pub fn kappa(&self) -> Result<f64> {
        kappa(self.iota, self.m)
    }

    /// κ' for a task receiving `input_bytes`.
    pub fn kappa_at(&self, input_bytes: f64) -> Result<f64> {
        Ok(kappa_adjusted(self.kappa()?, self.delta, input_bytes))
    }

    /// Run-latency multiplier relative to [`REFERENCE_IOTA`].
    pub fn work(&self) -> f64 {
        self.iota / REFERENCE_IOTA
    }

    /// Sums two adjacent steps into one task.
    pub fn merged(&self, other: &TaskCost) -> TaskCost {
        TaskCost {
            iota: self.iota + other.iota,
            m: self.m + other.m,
            delta: self.delta + other.delta,
            beta: self.beta.max(other.beta),
        }
    }
}

/// Operational intensity κ = ι / m.
pub fn kappa(iota: f64, m: f64) -> Result<f64> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Cost(format!("memory accesses must be positive, got {m}")));
    }
    if !(iota > 0.0 && iota.is_finite()) {
        return Err(Error::Cost(format!("instructions must be positive, got {iota}")));
    }
    Ok(iota / m)
}

/// κ' = κ + δ·i.
pub fn kappa_adjusted(kappa: f64, delta: f64, input_bytes: f64) -> f64 {
    kappa + delta * input_bytes
}

/// i_i = β · f_i · I_job / Σf for every replica of one stage.
pub fn estimate_input_size(weights: &[f64], job_bytes: f64, beta: f64) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::Cost("stage has no replicas".into()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Cost("replica weights must be non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Cost("replica weights sum to zero".into()));
    }
    if beta == 0.0 {
        log::warn!("input size coefficient beta is 0; every task is estimated empty");
    }
    Ok(weights.iter().map(|f| beta * f * job_bytes / total).collect())
}

/// l_run = λ_j · i + ω_j, in ns.
pub fn latency_run(core: &CoreSpec, input_bytes: f64) -> f64 {
    core.lambda_ns_per_byte * input_bytes + core.omega_ns
}

/// Latency for core `to` to fetch `input_bytes` produced on core `from`, ns.
pub fn latency_fetch(profile: &HardwareProfile, from: usize, to: usize, input_bytes: f64) -> Result<f64> {
    if from == to {
        return Ok(0.0);
    }
    let (a, b) = (profile.core(from)?, profile.core(to)?);
    if a.cluster == b.cluster {
        let line = f64::from(a.l1_line.min(b.l1_line));
        Ok((input_bytes / line).ceil() * profile.m(from, to) + profile.omega_same_ns)
    } else {
        let line = f64::from(a.l2_line.min(b.l2_line));
        Ok((input_bytes / line).ceil() * profile.m(from, to) * profile.rho(from, to)
            + profile.omega_different_ns)
    }
}

/// e = η · l / ζ, with `latency_s` in seconds.
pub fn energy(eta: f64, zeta: f64, latency_s: f64) -> Result<f64> {
    if !(zeta > 0.0) {
        return Err(Error::Cost(format!("energy efficiency must be positive, got {zeta}")));
    }
    if !(eta >= 0.0 && latency_s >= 0.0) {
        return Err(Error::Cost("performance and latency must be non-negative".into()));
    }
    Ok(eta * latency_s / zeta)
}

/// η and ζ for a task with intensity `kappa` on `core`.
pub fn rates(core: &CoreSpec, kappa: f64) -> Result<(f64, f64)> {
    Ok((core.perf.eval(kappa)?, core.energy.eval(kappa)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn core(lambda: f64, omega: f64) -> CoreSpec {
        let r = RooflineParams::from_knots([1.0, 2.0, 3.0], [1.0, 2.0, 3.0, 4.0]).unwrap();
        CoreSpec {
            id: 0,
            cluster: 0,
            freq_ghz: 1.0,
            c_max: 10.0,
            lambda_ns_per_byte: lambda,
            omega_ns: omega,
            l1_line: 64,
            l2_line: 64,
            perf: r,
            energy: r,
        }
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(100.0, 20.0).unwrap(), 5.0);
        assert!(kappa(100.0, 0.0).is_err());
        assert_eq!(kappa_adjusted(5.0, 0.0, 400.0), 5.0);
        assert!((kappa_adjusted(5.0, 0.001, 400.0) - 5.4).abs() < 1e-12);
    }

    #[test]
    fn input_size_examples() {
        assert_eq!(estimate_input_size(&[1.0, 1.0], 800.0, 1.0).unwrap(), vec![400.0, 400.0]);
        assert_eq!(estimate_input_size(&[2.0, 1.0], 300.0, 1.0).unwrap(), vec![200.0, 100.0]);
        assert_eq!(estimate_input_size(&[1.0], 300.0, 0.0).unwrap(), vec![0.0]);
        assert!(estimate_input_size(&[], 300.0, 1.0).is_err());
    }

    #[test]
    fn run_latency_examples() {
        let c = core(2.0, 100.0);
        assert_eq!(latency_run(&c, 0.0), 100.0);
        assert_eq!(latency_run(&c, 1000.0), 2100.0);
        assert_eq!(latency_run(&c, 2000.0) - 100.0, 2.0 * (latency_run(&c, 1000.0) - 100.0));
    }

    #[test]
    fn energy_examples() {
        assert_eq!(energy(2e9, 1e9, 0.0).unwrap(), 0.0);
        assert_eq!(energy(3e9, 3e9, 0.25).unwrap(), 0.25);
        assert_eq!(energy(2e9, 1e9, 0.5).unwrap(), 1.0);
        assert!(energy(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn fetch_examples() {
        let p = HardwareProfile::rk3399();
        for j in 0..p.num_cores() {
            assert_eq!(latency_fetch(&p, j, j, 4096.0).unwrap(), 0.0);
        }
        assert_eq!(latency_fetch(&p, 0, 1, 64.0).unwrap(), 4.4 + p.omega_same_ns);
        for i in [1.0, 64.0, 400.0, 1e6] {
            let lb = latency_fetch(&p, 0, 4, i).unwrap();
            let bl = latency_fetch(&p, 4, 0, i).unwrap();
            assert!(lb > bl, "{i}: {lb} vs {bl}");
        }
        assert!(latency_fetch(&p, 0, 9, 1.0).is_err());
    }
}
