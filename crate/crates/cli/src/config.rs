//! Experiment configuration, read from TOML.
//!
//! Unknown keys are rejected everywhere. See `configs/` for examples.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fedns_core::data::{LabelMode, PartitionPlan};
use fedns_core::federation::ArmijoRule;
use fedns_core::{ExitRule, LossFamily, SketchKind};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub feature_map: FeatureMapSpec,
    pub objective: ObjectiveSpec,
    pub partition: PartitionSpec,
    pub algorithm: AlgorithmSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    Libsvm {
        path: PathBuf,
        #[serde(default)]
        test_path: Option<PathBuf>,
        #[serde(default)]
        feature_dim: Option<usize>,
        #[serde(default)]
        labels: LabelSpec,
    },
    SyntheticLogistic {
        samples: usize,
        dim: usize,
        separability: f64,
        #[serde(default)]
        test_samples: usize,
        seed: u64,
    },
    SyntheticRidge {
        samples: usize,
        dim: usize,
        noise: f64,
        #[serde(default)]
        test_samples: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelSpec {
    #[default]
    Binary,
    Real,
}

impl From<LabelSpec> for LabelMode {
    fn from(l: LabelSpec) -> Self {
        match l {
            LabelSpec::Binary => LabelMode::Binary,
            LabelSpec::Real => LabelMode::Real,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FeatureMapSpec {
    #[default]
    Identity,
    RandomFourier {
        output_dim: usize,
        bandwidth: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub family: FamilySpec,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilySpec {
    Logistic,
    Squared,
}

impl From<FamilySpec> for LossFamily {
    fn from(f: FamilySpec) -> Self {
        match f {
            FamilySpec::Logistic => LossFamily::Logistic,
            FamilySpec::Squared => LossFamily::Squared,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PartitionSpec {
    Iid { workers: usize },
    LabelSkew { workers: usize, alpha: f64 },
}

impl PartitionSpec {
    pub fn workers(&self) -> usize {
        match *self {
            PartitionSpec::Iid { workers } | PartitionSpec::LabelSkew { workers, .. } => workers,
        }
    }

    pub fn plan(&self, seed: u64) -> PartitionPlan {
        match *self {
            PartitionSpec::Iid { workers } => PartitionPlan::iid(workers, seed),
            PartitionSpec::LabelSkew { workers, alpha } => PartitionPlan::label_skew(workers, alpha, seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SketchSpec {
    Gaussian,
    #[default]
    Srht,
    Sjlt,
    Identity,
}

impl From<SketchSpec> for SketchKind {
    fn from(s: SketchSpec) -> Self {
        match s {
            SketchSpec::Gaussian => SketchKind::Gaussian,
            SketchSpec::Srht => SketchKind::Srht,
            SketchSpec::Sjlt => SketchKind::Sjlt,
            SketchSpec::Identity => SketchKind::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitRuleSpec {
    #[default]
    Squared,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArmijoSpec {
    #[default]
    DriftCorrected,
    Shared,
}

fn one() -> f64 {
    1.0
}
fn default_a() -> f64 {
    0.1
}
fn default_b() -> f64 {
    0.5
}
fn default_eta() -> f64 {
    1.0 / 16.0
}
fn default_delta() -> f64 {
    1e-12
}
fn default_backtracks() -> usize {
    50
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    Fednewton {
        #[serde(default = "one")]
        step_size: f64,
        rounds: usize,
    },
    Fedns {
        #[serde(default = "one")]
        step_size: f64,
        sketch_size: usize,
        rounds: usize,
        #[serde(default)]
        sketch: SketchSpec,
    },
    Fedndes {
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "default_a")]
        a: f64,
        #[serde(default = "default_b")]
        b: f64,
        /// Defaults to `⌈4 d̃⌉` at `w0`.
        #[serde(default)]
        mbar1: Option<usize>,
        /// Defaults to `⌈16 d̃⌉` at `w0`.
        #[serde(default)]
        mbar2: Option<usize>,
        #[serde(default = "default_eta")]
        eta: f64,
        #[serde(default)]
        exit_rule: ExitRuleSpec,
        #[serde(default)]
        armijo: ArmijoSpec,
        #[serde(default = "default_backtracks")]
        max_backtracks: usize,
        max_rounds: usize,
        #[serde(default)]
        sketch: SketchSpec,
    },
    Fedavg {
        local_steps: usize,
        /// Defaults to `1/L` with `L` the largest local smoothness bound.
        #[serde(default)]
        step_size: Option<f64>,
        rounds: usize,
    },
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmSpec::Fednewton { .. } => "fednewton",
            AlgorithmSpec::Fedns { .. } => "fedns",
            AlgorithmSpec::Fedndes { .. } => "fedndes",
            AlgorithmSpec::Fedavg { .. } => "fedavg",
        }
    }
}

impl From<ExitRuleSpec> for ExitRule {
    fn from(e: ExitRuleSpec) -> Self {
        match e {
            ExitRuleSpec::Squared => ExitRule::Squared,
            ExitRuleSpec::Linear => ExitRule::Linear,
        }
    }
}

impl From<ArmijoSpec> for ArmijoRule {
    fn from(a: ArmijoSpec) -> Self {
        match a {
            ArmijoSpec::DriftCorrected => ArmijoRule::DriftCorrected,
            ArmijoSpec::Shared => ArmijoRule::Shared,
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Output directory; `--out` overrides it.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            seeds: default_seeds(),
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub k_values: Vec<usize>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config, returning it with the raw bytes.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| invalid(format!("{} is not UTF-8", path.display())))?;
        let cfg = Self::from_toml(text)?;
        Ok((cfg, bytes))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match &self.dataset {
            DatasetSpec::Libsvm { feature_dim, .. } => {
                if *feature_dim == Some(0) {
                    return Err(invalid("dataset.feature_dim must be at least 1"));
                }
            }
            DatasetSpec::SyntheticLogistic { samples, dim, separability, .. } => {
                if *samples == 0 || *dim == 0 {
                    return Err(invalid("synthetic dataset needs samples >= 1 and dim >= 1"));
                }
                if !separability.is_finite() {
                    return Err(invalid("dataset.separability must be finite"));
                }
            }
            DatasetSpec::SyntheticRidge { samples, dim, noise, .. } => {
                if *samples == 0 || *dim == 0 {
                    return Err(invalid("synthetic dataset needs samples >= 1 and dim >= 1"));
                }
                if !(noise.is_finite() && *noise >= 0.0) {
                    return Err(invalid("dataset.noise must be finite and non-negative"));
                }
            }
        }
        if let FeatureMapSpec::RandomFourier { output_dim, bandwidth, .. } = self.feature_map {
            if output_dim == 0 {
                return Err(invalid("feature_map.output_dim must be at least 1"));
            }
            positive("feature_map.bandwidth", bandwidth)?;
        }
        positive("objective.lambda", self.objective.lambda)?;
        if self.objective.family == FamilySpec::Logistic {
            if let DatasetSpec::Libsvm { labels: LabelSpec::Real, .. } = self.dataset {
                return Err(invalid("logistic objective needs binary labels"));
            }
            if let DatasetSpec::SyntheticRidge { .. } = self.dataset {
                return Err(invalid("logistic objective needs binary labels, not synthetic-ridge"));
            }
        }
        match self.partition {
            PartitionSpec::Iid { workers: 0 } => {
                return Err(invalid("partition.workers must be at least 1"))
            }
            PartitionSpec::LabelSkew { workers, alpha } => {
                if workers == 0 {
                    return Err(invalid("partition.workers must be at least 1"));
                }
                positive("partition.alpha", alpha)?;
            }
            _ => {}
        }
        match self.algorithm {
            AlgorithmSpec::Fednewton { step_size, .. } => positive("algorithm.step_size", step_size)?,
            AlgorithmSpec::Fedns { step_size, sketch_size, sketch, .. } => {
                positive("algorithm.step_size", step_size)?;
                if sketch_size == 0 && sketch != SketchSpec::Identity {
                    return Err(invalid("algorithm.sketch_size must be at least 1"));
                }
            }
            AlgorithmSpec::Fedndes { delta, a, b, mbar1, mbar2, eta, .. } => {
                positive("algorithm.delta", delta)?;
                positive("algorithm.eta", eta)?;
                if !(a > 0.0 && a < 0.5) {
                    return Err(invalid(format!("algorithm.a must lie in (0, 0.5), got {a}")));
                }
                if !(b > 0.0 && b < 1.0) {
                    return Err(invalid(format!("algorithm.b must lie in (0, 1), got {b}")));
                }
                if mbar1 == Some(0) || mbar2 == Some(0) {
                    return Err(invalid("algorithm.mbar1 and mbar2 must be at least 1"));
                }
            }
            AlgorithmSpec::Fedavg { local_steps, step_size, .. } => {
                if local_steps == 0 {
                    return Err(invalid("algorithm.local_steps must be at least 1"));
                }
                if let Some(s) = step_size {
                    positive("algorithm.step_size", s)?;
                }
            }
        }
        if self.run.seeds.is_empty() {
            return Err(invalid("run.seeds must not be empty"));
        }
        if let Some(sweep) = &self.sweep {
            validate_k_values(&sweep.k_values)?;
        }
        Ok(())
    }
}

pub fn validate_k_values(k_values: &[usize]) -> Result<(), CliError> {
    if k_values.is_empty() {
        return Err(invalid("sweep needs at least one sketch size"));
    }
    if k_values.contains(&0) {
        return Err(invalid("sketch sizes must be at least 1"));
    }
    Ok(())
}

/// Parses `1,2,5-8` into `[1, 2, 5, 6, 7, 8]`.
pub fn parse_seed_list(text: &str) -> Result<Vec<u64>, CliError> {
    let mut seeds = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let bad = || invalid(format!("bad seed list item `{item}`"));
        match item.split_once('-') {
            Some((lo, hi)) => {
                let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
                let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
                if lo > hi {
                    return Err(bad());
                }
                seeds.extend(lo..=hi);
            }
            None => seeds.push(item.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(invalid("seed list is empty"));
    }
    Ok(seeds)
}

/// Parses `5,10,20` into sketch sizes.
pub fn parse_k_list(text: &str) -> Result<Vec<usize>, CliError> {
    let ks = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| invalid(format!("bad sketch size `{s}`"))))
        .collect::<Result<Vec<usize>, _>>()?;
    validate_k_values(&ks)?;
    Ok(ks)
}
