//! Experiment runner behind the `fedns` binary.

pub mod config;
pub mod error;
pub mod output;
pub mod runner;

use std::path::{Path, PathBuf};

use serde::Serialize;

use fedns_core::LabeledData;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use runner::{MeanRow, Prepared, SeedRun, SweepRow};

use output::TraceHeader;

/// Options shared by `run` and `sweep-k`.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    pub threads: usize,
}

impl RunOptions {
    pub fn new(config: impl Into<PathBuf>) -> Self {
        Self {
            config: config.into(),
            out: None,
            seeds: None,
            threads: 1,
        }
    }
}

/// Runs `f` on a rayon pool with `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    if threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

struct Loaded {
    cfg: ExperimentConfig,
    hash: String,
    base: PathBuf,
}

fn load(path: &Path) -> Result<Loaded, CliError> {
    let (cfg, bytes) = ExperimentConfig::load(path)?;
    Ok(Loaded {
        cfg,
        hash: runner::config_hash(&bytes),
        base: config_dir(path),
    })
}

fn out_dir(opts: &RunOptions, loaded: &Loaded) -> Result<PathBuf, CliError> {
    match (&opts.out, &loaded.cfg.run.out) {
        (Some(out), _) => Ok(out.clone()),
        (None, Some(out)) if out.is_absolute() => Ok(out.clone()),
        (None, Some(out)) => Ok(loaded.base.join(out)),
        (None, None) => Err(CliError::Config("no output directory: pass --out or set run.out".into())),
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub prepared: Prepared,
    pub runs: Vec<SeedRun>,
    pub mean: Vec<MeanRow>,
    pub header: TraceHeader,
    pub written: Vec<PathBuf>,
}

/// `run`: one trace per seed plus the mean aggregate.
pub fn run_command(opts: &RunOptions) -> Result<RunReport, CliError> {
    let loaded = load(&opts.config)?;
    let dir = out_dir(opts, &loaded)?;
    let seeds = opts.seeds.clone().unwrap_or_else(|| loaded.cfg.run.seeds.clone());
    let cfg = &loaded.cfg;

    let (prepared, runs) = with_threads(opts.threads, || {
        let prepared = runner::prepare(cfg, &loaded.base)?;
        let runs = runner::run_seeds(&prepared, &cfg.partition, &cfg.algorithm, &seeds)?;
        Ok::<_, CliError>((prepared, runs))
    })??;

    let algorithm = cfg.algorithm.name();
    let header = TraceHeader::base(&loaded.hash, &prepared, cfg.partition.workers(), algorithm, &seeds);
    output::ensure_dir(&dir)?;
    let mut written = Vec::new();
    for run in &runs {
        let [csv, json, timing] = output::seed_paths(&dir, algorithm, run.seed);
        output::write_atomic(&csv, &output::trace_csv(run))?;
        output::write_atomic(&json, &output::header_json(&header.for_seed(run)))?;
        output::write_atomic(&timing, &output::timing_csv(run))?;
        written.extend([csv, json, timing]);
    }
    let mean = runner::mean_trace(&runs);
    let [csv, json] = output::mean_paths(&dir, algorithm);
    let mean_header = TraceHeader {
        sketch_kind: runs[0].sketch_kind.map(|k| k.to_string()),
        sketch_size: runs[0].sketch_size,
        columns: output::MEAN_COLUMNS.to_vec(),
        ..header.clone()
    };
    output::write_atomic(&csv, &output::mean_csv(&mean))?;
    output::write_atomic(&json, &output::header_json(&mean_header))?;
    written.extend([csv, json]);
    Ok(RunReport { prepared, runs, mean, header, written })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepHeader {
    pub config_hash: String,
    pub algorithm: &'static str,
    pub sketch_kind: String,
    pub rounds: usize,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub model_dim: usize,
    pub samples: usize,
    pub lambda: f64,
    pub effective_dimension: f64,
    pub columns: Vec<&'static str>,
}

#[derive(Debug)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub header: SweepHeader,
    pub written: Vec<PathBuf>,
}

/// `sweep-k`: mean final FedNS gap per sketch size.
pub fn sweep_command(opts: &RunOptions, k_values: Option<Vec<usize>>) -> Result<SweepReport, CliError> {
    let loaded = load(&opts.config)?;
    let cfg = &loaded.cfg;
    let k_values = match (k_values, &cfg.sweep) {
        (Some(ks), _) => ks,
        (None, Some(sweep)) => sweep.k_values.clone(),
        (None, None) => return Err(CliError::Config("no sketch sizes: pass --k or set sweep.k_values".into())),
    };
    config::validate_k_values(&k_values)?;
    let config::AlgorithmSpec::Fedns { rounds, sketch, .. } = cfg.algorithm else {
        return Err(CliError::Config(format!(
            "sweep-k needs algorithm.name = \"fedns\", found \"{}\"",
            cfg.algorithm.name()
        )));
    };
    let dir = out_dir(opts, &loaded)?;
    let seeds = opts.seeds.clone().unwrap_or_else(|| cfg.run.seeds.clone());

    let (prepared, rows) = with_threads(opts.threads, || {
        let prepared = runner::prepare(cfg, &loaded.base)?;
        let rows = runner::sweep_sketch_size(&prepared, cfg, &k_values, &seeds)?;
        Ok::<_, CliError>((prepared, rows))
    })??;

    let header = SweepHeader {
        config_hash: loaded.hash.clone(),
        algorithm: "fedns",
        sketch_kind: fedns_core::SketchKind::from(sketch).to_string(),
        rounds,
        seeds,
        workers: cfg.partition.workers(),
        model_dim: prepared.model_dim(),
        samples: prepared.train.len(),
        lambda: prepared.objective.lambda(),
        effective_dimension: prepared.effective_dimension,
        columns: output::SWEEP_COLUMNS.to_vec(),
    };
    output::ensure_dir(&dir)?;
    let csv = dir.join("sweep_k.csv");
    let json = dir.join("sweep_k.json");
    output::write_atomic(&csv, &output::sweep_csv(&rows))?;
    output::write_atomic(&json, &output::header_json(&header))?;
    Ok(SweepReport { rows, header, written: vec![csv, json] })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffdimReport {
    pub config_hash: String,
    pub effective_dimension: f64,
    pub model_dim: usize,
    pub samples: usize,
    pub lambda: f64,
    /// FedNDES defaults `⌈4 d̃⌉` and `⌈16 d̃⌉`.
    pub mbar1: usize,
    pub mbar2: usize,
}

/// `effdim`: `d̃_λ` of the loss-term Hessian at `w0 = 0`.
pub fn effdim_command(config: &Path, out: Option<&Path>) -> Result<EffdimReport, CliError> {
    let loaded = load(config)?;
    let (train, _) = runner::load_data(&loaded.cfg, &loaded.base)?;
    let prepared_map = match loaded.cfg.feature_map {
        config::FeatureMapSpec::Identity => train,
        config::FeatureMapSpec::RandomFourier { output_dim, bandwidth, seed } => {
            let rf = fedns_core::data::RandomFourier::new(train.feature_dim(), output_dim, bandwidth, seed)
                .map_err(CliError::run)?;
            fedns_core::data::FeatureMap::RandomFourier(rf).apply(&train).map_err(CliError::data)?
        }
    };
    let obj = fedns_core::Objective::new(loaded.cfg.objective.family.into(), loaded.cfg.objective.lambda)
        .map_err(CliError::run)?;
    let dim = prepared_map.feature_dim();
    let h = obj
        .loss_hessian(&prepared_map, &nalgebra::DVector::zeros(dim))
        .map_err(CliError::data)?;
    let d_eff = fedns_core::effective_dimension(&h, obj.lambda()).map_err(CliError::Numerical)?;
    let sizes = fedns_core::FedNdesConfig::from_effective_dimension(d_eff, 0);
    let report = EffdimReport {
        config_hash: loaded.hash,
        effective_dimension: d_eff,
        model_dim: dim,
        samples: prepared_map.len(),
        lambda: obj.lambda(),
        mbar1: sizes.mbar1,
        mbar2: sizes.mbar2,
    };
    if let Some(dir) = out {
        output::ensure_dir(dir)?;
        output::write_atomic(&dir.join("effdim.json"), &output::header_json(&report))?;
    }
    Ok(report)
}

/// `validate-config`: schema and semantic checks without touching data.
pub fn validate_command(config: &Path) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::load(config).map(|(cfg, _)| cfg)
}
