//! Hardware profiles: clusters of identical cores plus the inter-cluster
//! memory-access matrix.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::roofline::RooflineParams;
use crate::error::{Error, Result};

/// The shipped rk3399-like profile.
pub const RK3399_TOML: &str = include_str!("../../profiles/rk3399.toml");

/// A cluster of identical cores as written in a profile file.
///
/// Roofline, `c_max` and `lambda_ns_per_byte` are measured at
/// `nominal_freq_ghz` (defaults to `freq_ghz`); η and `c_max` scale with
/// `freq_ghz / nominal_freq_ghz` and λ with its inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub name: String,
    pub cores: usize,
    pub freq_ghz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal_freq_ghz: Option<f64>,
    /// Maximum executable instructions per second on one core.
    pub c_max: f64,
    pub lambda_ns_per_byte: f64,
    pub omega_ns: f64,
    pub l1_line: u32,
    pub l2_line: u32,
    /// κ → η (instructions per second).
    pub perf: RooflineParams,
    /// κ → ζ (instructions per joule).
    pub energy: RooflineParams,
}

/// Directed memory-access cost from cluster `from` to cluster `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub from: String,
    pub to: String,
    /// Worst-case latency per 32-bit access, ns.
    pub m_ns: f64,
    /// Direction polarity multiplier, at least 1.
    #[serde(default = "one")]
    pub rho: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    name: String,
    #[serde(default)]
    omega_same_ns: f64,
    #[serde(default)]
    omega_different_ns: f64,
    cluster: Vec<ClusterSpec>,
    link: Vec<LinkSpec>,
}

/// Effective per-core parameters after frequency scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreSpec {
    pub id: usize,
    pub cluster: usize,
    pub freq_ghz: f64,
    pub c_max: f64,
    pub lambda_ns_per_byte: f64,
    pub omega_ns: f64,
    pub l1_line: u32,
    pub l2_line: u32,
    pub perf: RooflineParams,
    pub energy: RooflineParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardwareProfile {
    pub name: String,
    clusters: Vec<ClusterSpec>,
    links: Vec<LinkSpec>,
    cores: Vec<CoreSpec>,
    /// Cluster-level latency and polarity, indexed `[from][to]`.
    m: Vec<Vec<f64>>,
    rho: Vec<Vec<f64>>,
    pub omega_same_ns: f64,
    pub omega_different_ns: f64,
}

impl HardwareProfile {
    pub fn new(
        name: impl Into<String>,
        clusters: Vec<ClusterSpec>,
        links: Vec<LinkSpec>,
        omega_same_ns: f64,
        omega_different_ns: f64,
    ) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::Config("profile has no clusters".into()));
        }
        for w in [omega_same_ns, omega_different_ns] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Config(format!("fetch overhead {w} must be >= 0")));
            }
        }
        let mut index = BTreeMap::new();
        for (i, c) in clusters.iter().enumerate() {
            validate_cluster(c)?;
            if index.insert(c.name.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate cluster {:?}", c.name)));
            }
        }
        let k = clusters.len();
        let mut m = vec![vec![f64::NAN; k]; k];
        let mut rho = vec![vec![f64::NAN; k]; k];
        for l in &links {
            let lookup = |n: &str| {
                index
                    .get(n)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("link names unknown cluster {n:?}")))
            };
            let (f, t) = (lookup(&l.from)?, lookup(&l.to)?);
            if !(l.m_ns.is_finite() && l.m_ns >= 0.0) {
                return Err(Error::Config(format!("link {}->{}: m_ns must be >= 0", l.from, l.to)));
            }
            if !(l.rho.is_finite() && l.rho >= 1.0) {
                return Err(Error::Config(format!("link {}->{}: rho must be >= 1", l.from, l.to)));
            }
            if !m[f][t].is_nan() {
                return Err(Error::Config(format!("duplicate link {}->{}", l.from, l.to)));
            }
            m[f][t] = l.m_ns;
            rho[f][t] = l.rho;
        }
        for (f, row) in m.iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                if v.is_nan() {
                    return Err(Error::Config(format!(
                        "missing link {}->{}",
                        clusters[f].name, clusters[t].name
                    )));
                }
            }
        }
        let mut cores = Vec::new();
        for (ci, c) in clusters.iter().enumerate() {
            let s = c.freq_ghz / c.nominal_freq_ghz.unwrap_or(c.freq_ghz);
            let perf = c.perf.scaled(s)?;
            for _ in 0..c.cores {
                cores.push(CoreSpec {
                    id: cores.len(),
                    cluster: ci,
                    freq_ghz: c.freq_ghz,
                    c_max: c.c_max * s,
                    lambda_ns_per_byte: c.lambda_ns_per_byte / s,
                    omega_ns: c.omega_ns,
                    l1_line: c.l1_line,
                    l2_line: c.l2_line,
                    perf,
                    energy: c.energy,
                });
            }
        }
        Ok(Self {
            name: name.into(),
            clusters,
            links,
            cores,
            m,
            rho,
            omega_same_ns,
            omega_different_ns,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ProfileFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("profile: {e}")))?;
        Self::new(
            file.name,
            file.cluster,
            file.link,
            file.omega_same_ns,
            file.omega_different_ns,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        let file = ProfileFile {
            name: self.name.clone(),
            omega_same_ns: self.omega_same_ns,
            omega_different_ns: self.omega_different_ns,
            cluster: self.clusters.clone(),
            link: self.links.clone(),
        };
        toml::to_string(&file).expect("profiles serialize")
    }

    /// The shipped rk3399-like profile: 4 little cores (ids 0-3) and 2 big
    /// cores (ids 4-5).
    pub fn rk3399() -> Self {
        Self::from_toml_str(RK3399_TOML).expect("shipped profile is valid")
    }

    /// A single cluster of `cores` identical cores.
    pub fn homogeneous(cluster: ClusterSpec, intra_m_ns: f64) -> Result<Self> {
        let link = LinkSpec {
            from: cluster.name.clone(),
            to: cluster.name.clone(),
            m_ns: intra_m_ns,
            rho: 1.0,
        };
        Self::new(format!("{}-only", cluster.name), vec![cluster], vec![link], 0.0, 0.0)
    }

    /// Copy of the profile with one cluster running at `freq_ghz`.
    pub fn with_frequency(&self, cluster: &str, freq_ghz: f64) -> Result<Self> {
        let mut clusters = self.clusters.clone();
        let c = clusters
            .iter_mut()
            .find(|c| c.name == cluster)
            .ok_or_else(|| Error::Config(format!("no cluster named {cluster:?}")))?;
        c.nominal_freq_ghz = Some(c.nominal_freq_ghz.unwrap_or(c.freq_ghz));
        c.freq_ghz = freq_ghz;
        Self::new(
            self.name.clone(),
            clusters,
            self.links.clone(),
            self.omega_same_ns,
            self.omega_different_ns,
        )
    }

    pub fn cores(&self) -> &[CoreSpec] {
        &self.cores
    }

    pub fn num_cores(&self) -> usize {
        self.cores.len()
    }

    pub fn core(&self, id: usize) -> Result<&CoreSpec> {
        self.cores
            .get(id)
            .ok_or_else(|| Error::Cost(format!("core {id} not in profile {}", self.name)))
    }

    pub fn clusters(&self) -> &[ClusterSpec] {
        &self.clusters
    }

    pub fn cluster_index(&self, name: &str) -> Option<usize> {
        self.clusters.iter().position(|c| c.name == name)
    }

    /// Core ids belonging to cluster `c`.
    pub fn cluster_cores(&self, c: usize) -> Vec<usize> {
        self.cores
            .iter()
            .filter(|k| k.cluster == c)
            .map(|k| k.id)
            .collect()
    }

    /// Per-access latency from core `from` to core `to`, ns.
    pub fn m(&self, from: usize, to: usize) -> f64 {
        self.m[self.cores[from].cluster][self.cores[to].cluster]
    }

    pub fn rho(&self, from: usize, to: usize) -> f64 {
        self.rho[self.cores[from].cluster][self.cores[to].cluster]
    }

    /// Cluster with the highest performance plateau (ties: lowest index).
    pub fn big_cluster(&self) -> usize {
        self.extreme_cluster(|a, b| a > b)
    }

    /// Cluster with the lowest performance plateau (ties: lowest index).
    pub fn little_cluster(&self) -> usize {
        self.extreme_cluster(|a, b| a < b)
    }

    fn extreme_cluster(&self, better: impl Fn(f64, f64) -> bool) -> usize {
        let plateau = |i: usize| {
            let s = self.clusters[i].freq_ghz
                / self.clusters[i].nominal_freq_ghz.unwrap_or(self.clusters[i].freq_ghz);
            self.clusters[i].perf.plateau() * s
        };
        (1..self.clusters.len()).fold(0, |best, i| {
            if better(plateau(i), plateau(best)) {
                i
            } else {
                best
            }
        })
    }
}

fn validate_cluster(c: &ClusterSpec) -> Result<()> {
    let bad = |what: &str| Err(Error::Config(format!("cluster {:?}: {what}", c.name)));
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if c.cores == 0 {
        return bad("needs at least one core");
    }
    if !positive(c.freq_ghz) || !c.nominal_freq_ghz.is_none_or(positive) {
        return bad("frequency must be positive");
    }
    if !positive(c.c_max) {
        return bad("c_max must be positive");
    }
    if !positive(c.lambda_ns_per_byte) {
        return bad("lambda_ns_per_byte must be positive");
    }
    if !(c.omega_ns.is_finite() && c.omega_ns >= 0.0) {
        return bad("omega_ns must be >= 0");
    }
    if c.l1_line == 0 || c.l2_line == 0 {
        return bad("cache lines must be non-zero");
    }
    if c.perf.knots()[0] < 0.0 {
        return bad("performance roofline must be non-negative");
    }
    if c.energy.knots()[0] <= 0.0 {
        return bad("energy roofline must be positive");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_profile_layout() {
        let p = HardwareProfile::rk3399();
        assert_eq!(p.num_cores(), 6);
        assert_eq!(p.cluster_cores(0), vec![0, 1, 2, 3]);
        assert_eq!(p.cluster_cores(1), vec![4, 5]);
        assert_eq!(p.big_cluster(), 1);
        assert_eq!(p.little_cluster(), 0);
        assert_eq!(p.m(0, 1), 4.4);
        assert_eq!(p.m(4, 5), 4.4);
        assert_eq!(p.m(4, 0) * p.rho(4, 0), 8.9);
        assert!((p.m(0, 4) * p.rho(0, 4) - 26.3).abs() < 1e-9);
    }

    #[test]
    fn toml_roundtrip() {
        let p = HardwareProfile::rk3399();
        let back = HardwareProfile::from_toml_str(&p.to_toml()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn frequency_scaling() {
        let p = HardwareProfile::rk3399();
        let slow = p.with_frequency("big", 0.9).unwrap();
        let (a, b) = (p.core(4).unwrap(), slow.core(4).unwrap());
        assert!((b.c_max - a.c_max / 2.0).abs() < 1e-3);
        assert!((b.lambda_ns_per_byte - 2.0 * a.lambda_ns_per_byte).abs() < 1e-12);
        assert!((b.perf.plateau() - a.perf.plateau() / 2.0).abs() < 1e-3);
        assert_eq!(b.energy, a.energy);
        assert_eq!(slow.core(0).unwrap(), p.core(0).unwrap());
        assert!(p.with_frequency("medium", 1.0).is_err());
    }

    #[test]
    fn validation_errors() {
        let text = RK3399_TOML.replace("rho = 2.955056179775281", "rho = 0.5");
        assert!(HardwareProfile::from_toml_str(&text).is_err());
        let missing = RK3399_TOML.replace("from = \"big\"\nto = \"little\"", "from = \"big\"\nto = \"big\"");
        assert!(HardwareProfile::from_toml_str(&missing).is_err());
        let bad_core = RK3399_TOML.replace("cores = 2", "cores = 0");
        assert!(HardwareProfile::from_toml_str(&bad_core).is_err());
        assert!(HardwareProfile::from_toml_str("name = 3").is_err());
        assert!(HardwareProfile::from_toml_str(&RK3399_TOML.replace("l1_line", "l1_size")).is_err());
    }

    #[test]
    fn unknown_core_is_an_error() {
        assert!(HardwareProfile::rk3399().core(6).is_err());
    }
}
