//! Experiment configuration, read from TOML.

use crate::error::{HarnessError, Result};
use qeopt::ising::{MAX_ENUMERATION_SPINS, MAX_SPINS};
use qeopt::proposal::{ProposalKernel, QuantumHyper};
use qeopt::statevector::MAX_QUBITS;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sa,
    Qesa,
    Pt,
    Qept,
    Mcmc,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Self::Sa => "sa",
            Self::Qesa => "qesa",
            Self::Pt => "pt",
            Self::Qept => "qept",
            Self::Mcmc => "mcmc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    Local,
    Uniform,
    Quantum,
}

impl KernelChoice {
    pub fn kernel(self, quantum: QuantumHyper) -> ProposalKernel {
        match self {
            Self::Local => ProposalKernel::Local,
            Self::Uniform => ProposalKernel::Uniform,
            Self::Quantum => ProposalKernel::Quantum(quantum),
        }
    }
}

/// Chain lengths to sweep: either explicit values or a geometric grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LengthGrid {
    pub min: u64,
    pub max: u64,
    pub points_per_decade: u32,
    pub values: Option<Vec<u64>>,
}

impl Default for LengthGrid {
    fn default() -> Self {
        Self {
            min: 10,
            max: 500,
            points_per_decade: 12,
            values: None,
        }
    }
}

impl LengthGrid {
    /// Sorted, de-duplicated lengths. Geometric points are rounded to the nearest
    /// integer and `max` is always included.
    pub fn lengths(&self) -> Vec<u64> {
        let mut out = match &self.values {
            Some(v) => v.clone(),
            None => {
                let mut v = Vec::new();
                let mut k = 0u32;
                loop {
                    let ell = (self.min as f64 * 10f64.powf(k as f64 / self.points_per_decade as f64)).round() as u64;
                    if ell >= self.max {
                        break;
                    }
                    v.push(ell);
                    k += 1;
                }
                v.push(self.max);
                v
            }
        };
        out.sort_unstable();
        out.dedup();
        out
    }

    fn validate(&self) -> Result<()> {
        match &self.values {
            Some(v) if v.is_empty() => config_err("lengths.values is empty"),
            Some(v) if v.contains(&0) => config_err("lengths must be at least 1"),
            Some(_) => Ok(()),
            None if self.min == 0 || self.max < self.min => {
                config_err(format!("need 1 <= lengths.min <= lengths.max, got {} and {}", self.min, self.max))
            }
            None if self.points_per_decade == 0 => config_err("lengths.points_per_decade must be at least 1"),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemperatureRange {
    pub high: f64,
    pub low: f64,
}

impl Default for TemperatureRange {
    fn default() -> Self {
        Self { high: 10.0, low: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemperingSettings {
    pub replicas: usize,
    /// Values of `m_q` to run for `qept`; `pt` always uses 0.
    pub quantum_replicas: Vec<usize>,
    /// Steps between exchange epochs; defaults to `n`.
    pub swap_interval: Option<u64>,
}

impl Default for TemperingSettings {
    fn default() -> Self {
        Self {
            replicas: 4,
            quantum_replicas: vec![0, 1, 2, 3, 4],
            swap_interval: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSettings {
    pub kernel: KernelChoice,
    /// Fixed chain temperature; defaults to `temperature.low`.
    pub temperature: Option<f64>,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self {
            kernel: KernelChoice::Local,
            temperature: None,
        }
    }
}

/// Fresh-ensemble evaluation at the tuned optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSettings {
    pub instances: usize,
    pub repeats: usize,
}

impl Default for ScalingSettings {
    fn default() -> Self {
        Self {
            instances: 100,
            repeats: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapSettings {
    pub kernels: Vec<KernelChoice>,
    /// Explicit temperatures; when absent, `points` geometric values spanning
    /// `temperature.high` to `temperature.low`.
    pub temperatures: Option<Vec<f64>>,
    pub points: usize,
    pub gamma_nodes: usize,
    pub epsilon: f64,
}

impl Default for GapSettings {
    fn default() -> Self {
        Self {
            kernels: vec![KernelChoice::Local, KernelChoice::Quantum],
            temperatures: None,
            points: 5,
            gamma_nodes: qeopt::proposal::DEFAULT_GAMMA_NODES,
            epsilon: qeopt::analysis::DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub n: Vec<usize>,
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_instances")]
    pub repeats: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    /// Also write one row per run.
    #[serde(default)]
    pub detail: bool,
    #[serde(default = "default_target")]
    pub target_p: f64,
    #[serde(default)]
    pub lengths: LengthGrid,
    #[serde(default)]
    pub temperature: TemperatureRange,
    #[serde(default)]
    pub quantum: QuantumHyper,
    #[serde(default)]
    pub tempering: TemperingSettings,
    #[serde(default)]
    pub mcmc: McmcSettings,
    #[serde(default)]
    pub scaling: ScalingSettings,
    #[serde(default)]
    pub gap: GapSettings,
}

fn default_instances() -> usize {
    100
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_target() -> f64 {
    qeopt::analysis::TARGET_P
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(HarnessError::Config(msg.into()))
}

impl ExperimentConfig {
    /// A config with every default and the given method and sizes.
    pub fn new(method: Method, n: Vec<usize>) -> Self {
        Self {
            method,
            n,
            instances: default_instances(),
            repeats: default_instances(),
            master_seed: 0,
            output: default_output(),
            workers: 0,
            detail: false,
            target_p: default_target(),
            lengths: LengthGrid::default(),
            temperature: TemperatureRange::default(),
            quantum: QuantumHyper::default(),
            tempering: TemperingSettings::default(),
            mcmc: McmcSettings::default(),
            scaling: ScalingSettings::default(),
            gap: GapSettings::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() {
            return config_err("n list is empty");
        }
        if let Some(&bad) = self.n.iter().find(|&&n| n == 0 || n > MAX_SPINS) {
            return config_err(format!("n = {bad} outside 1..={MAX_SPINS}"));
        }
        if self.instances == 0 || self.repeats == 0 {
            return config_err("instances and repeats must be at least 1");
        }
        if self.scaling.instances == 0 || self.scaling.repeats == 0 {
            return config_err("scaling.instances and scaling.repeats must be at least 1");
        }
        self.lengths.validate()?;
        let t = &self.temperature;
        if !(t.low > 0.0 && t.high > t.low && t.high.is_finite()) {
            return config_err(format!("need temperature.high > temperature.low > 0, got {} and {}", t.high, t.low));
        }
        self.quantum
            .validate()
            .map_err(|e| HarnessError::Config(format!("quantum: {e}")))?;
        if !(self.target_p > 0.0 && self.target_p < 1.0) {
            return config_err(format!("target_p = {} outside (0, 1)", self.target_p));
        }
        let tp = &self.tempering;
        if tp.replicas < 2 {
            return config_err("tempering.replicas must be at least 2");
        }
        if tp.quantum_replicas.is_empty() {
            return config_err("tempering.quantum_replicas is empty");
        }
        if let Some(&bad) = tp.quantum_replicas.iter().find(|&&q| q > tp.replicas) {
            return config_err(format!("m_q = {bad} exceeds tempering.replicas = {}", tp.replicas));
        }
        if tp.swap_interval == Some(0) {
            return config_err("tempering.swap_interval must be at least 1");
        }
        if let Some(t) = self.mcmc.temperature {
            if !(t > 0.0 && t.is_finite()) {
                return config_err(format!("mcmc.temperature = {t} must be positive"));
            }
        }
        let g = &self.gap;
        if g.kernels.is_empty() {
            return config_err("gap.kernels is empty");
        }
        if let Some(ts) = &g.temperatures {
            if ts.is_empty() || ts.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
                return config_err("gap.temperatures must be a non-empty list of positive values");
            }
        } else if g.points == 0 {
            return config_err("gap.points must be at least 1");
        }
        if g.gamma_nodes == 0 {
            return config_err("gap.gamma_nodes must be at least 1");
        }
        if !(g.epsilon > 0.0 && g.epsilon < 0.5) {
            return config_err(format!("gap.epsilon = {} outside (0, 1/2)", g.epsilon));
        }
        Ok(())
    }

    /// Series run by this config, one per `m_q` for `qept`.
    pub fn series(&self) -> Vec<Series> {
        let m = self.tempering.replicas;
        let one = |label: String, kernel, replicas, quantum_replicas| Series {
            label,
            method: self.method,
            kernel,
            replicas,
            quantum_replicas,
        };
        match self.method {
            Method::Sa => vec![one("sa".into(), ProposalKernel::Local, 1, 0)],
            Method::Qesa => vec![one("qesa".into(), ProposalKernel::Quantum(self.quantum), 1, 1)],
            Method::Pt => vec![one("pt".into(), ProposalKernel::Local, m, 0)],
            Method::Qept => self
                .tempering
                .quantum_replicas
                .iter()
                .map(|&q| one(format!("qept-mq{q}"), ProposalKernel::Quantum(self.quantum), m, q))
                .collect(),
            Method::Mcmc => {
                let kernel = self.mcmc.kernel.kernel(self.quantum);
                let q = kernel.is_quantum() as usize;
                vec![one(format!("mcmc-{}", kernel.label()), kernel, 1, q)]
            }
        }
    }

    pub fn mcmc_temperature(&self) -> f64 {
        self.mcmc.temperature.unwrap_or(self.temperature.low)
    }

    pub fn gap_temperatures(&self) -> Vec<f64> {
        match &self.gap.temperatures {
            Some(ts) => ts.clone(),
            None => {
                let (hi, lo, k) = (self.temperature.high, self.temperature.low, self.gap.points);
                if k == 1 {
                    return vec![lo];
                }
                let a = (hi / lo).ln() / (k - 1) as f64;
                let mut v: Vec<f64> = (0..k).map(|i| hi * (-a * i as f64).exp()).collect();
                v[k - 1] = lo;
                v
            }
        }
    }

    /// Checks size limits that apply to one `n`; these are reported per task
    /// rather than rejecting the whole config.
    pub fn check_caps(&self, n: usize) -> Result<()> {
        if n > MAX_ENUMERATION_SPINS {
            return Err(HarnessError::Cap(format!(
                "n = {n}: ground states need n <= {MAX_ENUMERATION_SPINS}"
            )));
        }
        if self.series().iter().any(|s| s.kernel.is_quantum()) && n > MAX_QUBITS {
            return Err(HarnessError::Cap(format!("n = {n}: quantum proposals need n <= {MAX_QUBITS}")));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, ignoring `output` and `workers`,
    /// which cannot change results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        c.workers = 0;
        let json = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// One curve of results: a method with a fixed kernel and replica layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub method: Method,
    pub kernel: ProposalKernel,
    /// `M`; 1 outside tempering.
    pub replicas: usize,
    /// `m_q`; for single-chain methods, 1 when the kernel is quantum.
    pub quantum_replicas: usize,
}
