//! Trace files: CSV rows plus a JSON header sidecar.
//!
//! Floats are written in shortest round-trip scientific notation and
//! missing values as empty fields, so identical runs give identical bytes.
//! Wall-clock times go to a separate `.timing.csv`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use fedns_core::LabeledData;

use crate::error::CliError;
use crate::runner::{MeanRow, Prepared, SeedRun, SweepRow};

pub const TRACE_COLUMNS: [&str; 10] = [
    "round",
    "loss",
    "optimal_gap",
    "grad_norm",
    "decrement",
    "step_size",
    "sketch_size",
    "scalars_up",
    "scalars_down",
    "test_accuracy",
];

pub const MEAN_COLUMNS: [&str; 8] = [
    "round",
    "runs_active",
    "loss",
    "optimal_gap",
    "grad_norm",
    "scalars_up",
    "scalars_down",
    "test_accuracy",
];

pub const SWEEP_COLUMNS: [&str; 5] = [
    "sketch_size",
    "mean_final_gap",
    "min_final_gap",
    "max_final_gap",
    "seeds",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceHeader {
    pub config_hash: String,
    /// `None` for aggregates.
    pub seed: Option<u64>,
    pub seeds: Vec<u64>,
    pub algorithm: String,
    pub sketch_kind: Option<String>,
    pub sketch_size: Option<usize>,
    pub workers: usize,
    pub model_dim: usize,
    pub samples: usize,
    pub lambda: f64,
    pub effective_dimension: f64,
    pub reference_loss: f64,
    pub status: Option<String>,
    pub columns: Vec<&'static str>,
}

impl TraceHeader {
    pub fn base(config_hash: &str, prepared: &Prepared, workers: usize, algorithm: &str, seeds: &[u64]) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            seed: None,
            seeds: seeds.to_vec(),
            algorithm: algorithm.to_string(),
            sketch_kind: None,
            sketch_size: None,
            workers,
            model_dim: prepared.model_dim(),
            samples: prepared.train.len(),
            lambda: prepared.objective.lambda(),
            effective_dimension: prepared.effective_dimension,
            reference_loss: prepared.reference.loss,
            status: None,
            columns: Vec::new(),
        }
    }

    pub fn for_seed(&self, run: &SeedRun) -> Self {
        Self {
            seed: Some(run.seed),
            seeds: vec![run.seed],
            sketch_kind: run.sketch_kind.map(|k| k.to_string()),
            sketch_size: run.sketch_size,
            status: Some(format!("{:?}", run.trace.status)),
            columns: TRACE_COLUMNS.to_vec(),
            ..self.clone()
        }
    }
}

fn float(out: &mut String, v: f64) {
    write!(out, "{v:e}").expect("writing to a String");
}

fn opt_float(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        float(out, v);
    }
}

pub fn trace_csv(run: &SeedRun) -> String {
    let mut out = TRACE_COLUMNS.join(",");
    out.push('\n');
    for (row, acc) in run.trace.rows.iter().zip(&run.test_accuracy) {
        write!(out, "{},", row.round).unwrap();
        float(&mut out, row.loss);
        out.push(',');
        float(&mut out, row.optimal_gap);
        out.push(',');
        float(&mut out, row.grad_norm);
        out.push(',');
        opt_float(&mut out, row.decrement);
        out.push(',');
        opt_float(&mut out, row.step_size);
        out.push(',');
        if let Some(k) = row.sketch_size {
            write!(out, "{k}").unwrap();
        }
        write!(out, ",{},{},", row.scalars_up, row.scalars_down).unwrap();
        opt_float(&mut out, *acc);
        out.push('\n');
    }
    out
}

pub fn timing_csv(run: &SeedRun) -> String {
    let mut out = String::from("round,wall_ns\n");
    for row in &run.trace.rows {
        writeln!(out, "{},{}", row.round, row.wall_ns).unwrap();
    }
    out
}

pub fn mean_csv(rows: &[MeanRow]) -> String {
    let mut out = MEAN_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        write!(out, "{},{},", r.round, r.active).unwrap();
        for v in [r.loss, r.optimal_gap, r.grad_norm, r.scalars_up, r.scalars_down] {
            float(&mut out, v);
            out.push(',');
        }
        opt_float(&mut out, r.test_accuracy);
        out.push('\n');
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        write!(out, "{},", r.sketch_size).unwrap();
        for v in [r.mean_final_gap, r.min_final_gap, r.max_final_gap] {
            float(&mut out, v);
            out.push(',');
        }
        writeln!(out, "{}", r.seeds).unwrap();
    }
    out
}

pub fn header_json<T: Serialize>(header: &T) -> String {
    let mut s = serde_json::to_string_pretty(header).expect("header serializes");
    s.push('\n');
    s
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let fail = |source| CliError::Output { path: path.to_path_buf(), source };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Output { path: dir.to_path_buf(), source })
}

/// Paths of the per-seed files: trace, header, timing.
pub fn seed_paths(dir: &Path, algorithm: &str, seed: u64) -> [PathBuf; 3] {
    let stem = format!("{algorithm}_seed{seed}");
    [
        dir.join(format!("{stem}.csv")),
        dir.join(format!("{stem}.json")),
        dir.join(format!("{stem}.timing.csv")),
    ]
}

pub fn mean_paths(dir: &Path, algorithm: &str) -> [PathBuf; 2] {
    [
        dir.join(format!("{algorithm}_mean.csv")),
        dir.join(format!("{algorithm}_mean.json")),
    ]
}
