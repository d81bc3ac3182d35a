//! Turns a validated config into traces.

use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use fedns_core::data::{
    partition, read_libsvm_file, synth_logistic, synth_ridge, FeatureMap, LibsvmOptions, RandomFourier,
};
use fedns_core::objective::{reference_optimum, Reference};
use fedns_core::{
    effective_dimension, Dataset, FedAvgConfig, FedNdesConfig, FedNewtonConfig, FedNsConfig, Federation,
    LabeledData, Objective, RunTrace, SketchKind,
};

use crate::config::{AlgorithmSpec, DatasetSpec, ExperimentConfig, FeatureMapSpec, PartitionSpec};
use crate::error::CliError;

pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything shared by all seeds of one experiment.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Option<Dataset>,
    pub objective: Objective,
    pub reference: Reference,
    /// `d̃_λ` of the loss-term Hessian at `w0 = 0`.
    pub effective_dimension: f64,
}

impl Prepared {
    pub fn model_dim(&self) -> usize {
        self.train.dim()
    }

    pub fn w0(&self) -> DVector<f64> {
        DVector::zeros(self.model_dim())
    }
}

fn split_rows(data: Dataset, train_rows: usize) -> Result<(Dataset, Option<Dataset>), CliError> {
    let n = data.len();
    if train_rows == n {
        return Ok((data, None));
    }
    let (train_x, train_y) = data.select(&(0..train_rows).collect::<Vec<_>>());
    let (test_x, test_y) = data.select(&(train_rows..n).collect::<Vec<_>>());
    let train = Dataset::new(data.name.clone(), train_x, train_y).map_err(CliError::data)?;
    let test = Dataset::new(format!("{}-test", data.name), test_x, test_y).map_err(CliError::data)?;
    Ok((train, Some(test)))
}

fn resolve(base_dir: &Path, path: &Path) -> std::path::PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base_dir.join(path)
    }
}

/// Loads raw data, splitting off a test set when one is configured.
pub fn load_data(cfg: &ExperimentConfig, base_dir: &Path) -> Result<(Dataset, Option<Dataset>), CliError> {
    match &cfg.dataset {
        DatasetSpec::Libsvm { path, test_path, feature_dim, labels } => {
            let mut opts = LibsvmOptions {
                feature_dim: *feature_dim,
                labels: (*labels).into(),
                name: None,
            };
            let train = read_libsvm_file(resolve(base_dir, path), &opts).map_err(CliError::data)?;
            let test = match test_path {
                Some(p) => {
                    opts.feature_dim = Some(train.feature_dim());
                    Some(read_libsvm_file(resolve(base_dir, p), &opts).map_err(CliError::data)?)
                }
                None => None,
            };
            Ok((train, test))
        }
        &DatasetSpec::SyntheticLogistic { samples, dim, separability, test_samples, seed } => {
            let all = synth_logistic(samples + test_samples, dim, separability, seed).map_err(CliError::data)?;
            split_rows(all, samples)
        }
        &DatasetSpec::SyntheticRidge { samples, dim, noise, test_samples, seed } => {
            let all = synth_ridge(samples + test_samples, dim, noise, seed).map_err(CliError::data)?;
            split_rows(all, samples)
        }
    }
}

fn feature_map(spec: &FeatureMapSpec, input_dim: usize) -> Result<FeatureMap, CliError> {
    Ok(match *spec {
        FeatureMapSpec::Identity => FeatureMap::Identity,
        FeatureMapSpec::RandomFourier { output_dim, bandwidth, seed } => FeatureMap::RandomFourier(
            RandomFourier::new(input_dim, output_dim, bandwidth, seed).map_err(CliError::run)?,
        ),
    })
}

/// Loads data, applies the feature map and computes `w*` and `d̃_λ` once.
pub fn prepare(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Prepared, CliError> {
    let (raw_train, raw_test) = load_data(cfg, base_dir)?;
    let fm = feature_map(&cfg.feature_map, raw_train.feature_dim())?;
    let train = fm.apply(&raw_train).map_err(CliError::data)?;
    let test = raw_test.map(|t| fm.apply(&t)).transpose().map_err(CliError::data)?;
    let objective = Objective::new(cfg.objective.family.into(), cfg.objective.lambda).map_err(CliError::run)?;

    let w0 = DVector::zeros(train.dim());
    let h0 = objective.loss_hessian(&train, &w0).map_err(CliError::data)?;
    let effective_dimension = effective_dimension(&h0, objective.lambda()).map_err(CliError::run)?;
    let reference = reference_optimum(&objective, &train).map_err(CliError::Numerical)?;
    Ok(Prepared { train, test, objective, reference, effective_dimension })
}

/// Fraction of test samples with `sign(xᵀw) = y`, zero scores counting as +1.
pub fn accuracy(test: &Dataset, w: &DVector<f64>) -> f64 {
    let scores = test.features() * w;
    let hits = scores
        .iter()
        .zip(test.labels().iter())
        .filter(|(s, y)| (if **s >= 0.0 { 1.0 } else { -1.0 }) == **y)
        .count();
    hits as f64 / test.len() as f64
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub trace: RunTrace,
    /// Per row; empty when no test set is configured or the loss is squared.
    pub test_accuracy: Vec<Option<f64>>,
    pub sketch_kind: Option<SketchKind>,
    /// Configured sketch size (FedNS `k`, FedNDES `mbar1`).
    pub sketch_size: Option<usize>,
}

/// Runs one seed. The seed drives the partition and every sketch.
pub fn run_seed(
    prepared: &Prepared,
    partition_spec: &PartitionSpec,
    algorithm: &AlgorithmSpec,
    seed: u64,
) -> Result<SeedRun, CliError> {
    let shards = partition(&prepared.train, &partition_spec.plan(seed)).map_err(CliError::run)?;
    let fed = Federation::new(&shards, prepared.objective)
        .map_err(CliError::run)?
        .with_reference_point(&prepared.reference.w)
        .map_err(CliError::run)?;
    let w0 = prepared.w0();
    let (trace, sketch_kind, sketch_size) = match *algorithm {
        AlgorithmSpec::Fednewton { step_size, rounds } => {
            (fed.fednewton_run(&w0, &FedNewtonConfig { step_size, rounds }), None, None)
        }
        AlgorithmSpec::Fedns { step_size, sketch_size, rounds, sketch } => {
            let cfg = FedNsConfig {
                step_size,
                sketch_size,
                rounds,
                sketch_kind: sketch.into(),
                seed,
            };
            (fed.fedns_run(&w0, &cfg), Some(cfg.sketch_kind), Some(sketch_size))
        }
        AlgorithmSpec::Fedndes {
            delta,
            a,
            b,
            mbar1,
            mbar2,
            eta,
            exit_rule,
            armijo,
            max_backtracks,
            max_rounds,
            sketch,
        } => {
            let defaults = FedNdesConfig::from_effective_dimension(prepared.effective_dimension, seed);
            let cfg = FedNdesConfig {
                delta,
                a,
                b,
                mbar1: mbar1.unwrap_or(defaults.mbar1),
                mbar2: mbar2.unwrap_or(defaults.mbar2),
                eta,
                exit_rule: exit_rule.into(),
                armijo: armijo.into(),
                max_backtracks,
                max_rounds,
                sketch_kind: sketch.into(),
                seed,
            };
            (fed.fedndes_run(&w0, &cfg), Some(cfg.sketch_kind), Some(cfg.mbar1))
        }
        AlgorithmSpec::Fedavg { local_steps, step_size, rounds } => {
            let cfg = FedAvgConfig {
                local_steps,
                step_size: step_size.unwrap_or_else(|| fed.fedavg_default_step()),
                rounds,
            };
            (fed.fedavg_baseline_run(&w0, &cfg), None, None)
        }
    };
    let trace = trace.map_err(CliError::run)?;
    let test_accuracy = match (&prepared.test, prepared.objective.family()) {
        (Some(test), fedns_core::LossFamily::Logistic) => {
            trace.iterates.iter().map(|w| Some(accuracy(test, w))).collect()
        }
        _ => vec![None; trace.rows.len()],
    };
    Ok(SeedRun { seed, trace, test_accuracy, sketch_kind, sketch_size })
}

/// Runs every seed; results come back in seed-list order.
pub fn run_seeds(
    prepared: &Prepared,
    partition_spec: &PartitionSpec,
    algorithm: &AlgorithmSpec,
    seeds: &[u64],
) -> Result<Vec<SeedRun>, CliError> {
    seeds
        .par_iter()
        .map(|&s| run_seed(prepared, partition_spec, algorithm, s))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanRow {
    pub round: usize,
    /// Runs that produced this round themselves; finished runs are carried
    /// forward at their final state.
    pub active: usize,
    pub loss: f64,
    pub optimal_gap: f64,
    pub grad_norm: f64,
    pub scalars_up: f64,
    pub scalars_down: f64,
    pub test_accuracy: Option<f64>,
}

pub fn mean_trace(runs: &[SeedRun]) -> Vec<MeanRow> {
    let len = runs.iter().map(|r| r.trace.rows.len()).max().unwrap_or(0);
    let count = runs.len() as f64;
    (0..len)
        .map(|t| {
            let mut row = MeanRow {
                round: t,
                active: 0,
                loss: 0.0,
                optimal_gap: 0.0,
                grad_norm: 0.0,
                scalars_up: 0.0,
                scalars_down: 0.0,
                test_accuracy: Some(0.0),
            };
            for run in runs {
                let live = t < run.trace.rows.len();
                let idx = t.min(run.trace.rows.len() - 1);
                let r = &run.trace.rows[idx];
                row.loss += r.loss / count;
                row.optimal_gap += r.optimal_gap / count;
                row.grad_norm += r.grad_norm / count;
                if live {
                    row.active += 1;
                    row.scalars_up += r.scalars_up as f64 / count;
                    row.scalars_down += r.scalars_down as f64 / count;
                }
                row.test_accuracy = match (row.test_accuracy, run.test_accuracy[idx]) {
                    (Some(acc), Some(a)) => Some(acc + a / count),
                    _ => None,
                };
            }
            row
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sketch_size: usize,
    pub mean_final_gap: f64,
    pub min_final_gap: f64,
    pub max_final_gap: f64,
    pub seeds: usize,
}

/// FedNS final gaps for every sketch size in `k_values`.
pub fn sweep_sketch_size(
    prepared: &Prepared,
    cfg: &ExperimentConfig,
    k_values: &[usize],
    seeds: &[u64],
) -> Result<Vec<SweepRow>, CliError> {
    crate::config::validate_k_values(k_values)?;
    let AlgorithmSpec::Fedns { step_size, rounds, sketch, .. } = cfg.algorithm else {
        return Err(CliError::Config(format!(
            "sweep-k needs algorithm.name = \"fedns\", found \"{}\"",
            cfg.algorithm.name()
        )));
    };
    k_values
        .iter()
        .map(|&k| {
            let alg = AlgorithmSpec::Fedns { step_size, sketch_size: k, rounds, sketch };
            let runs = run_seeds(prepared, &cfg.partition, &alg, seeds)?;
            let gaps: Vec<f64> = runs.iter().map(|r| r.trace.last().optimal_gap).collect();
            Ok(SweepRow {
                sketch_size: k,
                mean_final_gap: gaps.iter().sum::<f64>() / gaps.len() as f64,
                min_final_gap: gaps.iter().copied().fold(f64::INFINITY, f64::min),
                max_final_gap: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                seeds: gaps.len(),
            })
        })
        .collect()
}
