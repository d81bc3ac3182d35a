//! Federated second-order training over a fixed set of shards.
//!
//! Workers are evaluated in parallel with rayon and their uploads are
//! always combined in ascending `worker_id`, so results do not depend on
//! the thread count.

mod fedavg;
mod fedndes;
mod fedns;
mod local;
mod metrics;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::{LabeledData, Shard};
use crate::error::{Error, Result};
use crate::linalg;
use crate::objective::{LossFamily, Objective};

pub use fedavg::FedAvgConfig;
pub use fedndes::{ExitRule, FedNdesConfig};
pub use fedns::{round_sketch_seed, FedNewtonConfig, FedNsConfig};
pub use local::{
    aggregate_gradient, aggregate_sketched_hessian, local_line_search, local_sketch_round,
    newton_decrement, ArmijoRule, LineSearch, WorkerUpload,
};
pub use metrics::{
    communication_ledger, expected_scalars_up, Algorithm, LedgerRow, LedgerSummary, RoundMetrics,
    RunStatus, RunTrace, BYTES_PER_SCALAR,
};

/// Tolerance on `Σ_j weight_j = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Shards plus the shared objective, with an optional reference loss for
/// optimality gaps.
#[derive(Debug, Clone)]
pub struct Federation<'a> {
    /// Sorted by worker id.
    shards: Vec<&'a Shard>,
    objective: Objective,
    dim: usize,
    reference_loss: Option<f64>,
}

impl<'a> Federation<'a> {
    pub fn new(shards: &'a [Shard], objective: Objective) -> Result<Self> {
        if shards.is_empty() {
            return Err(Error::InvalidArgument("federation needs at least one shard".into()));
        }
        let mut sorted: Vec<&Shard> = shards.iter().collect();
        sorted.sort_by_key(|s| s.worker_id);
        if let Some(pair) = sorted.windows(2).find(|p| p[0].worker_id == p[1].worker_id) {
            return Err(Error::InvalidArgument(format!(
                "duplicate worker id {}",
                pair[0].worker_id
            )));
        }
        let dim = sorted[0].dim();
        for s in &sorted {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: "shard feature dimension",
                    expected: dim,
                    found: s.dim(),
                });
            }
        }
        let total: f64 = sorted.iter().map(|s| s.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "shard weights must sum to 1, got {total}"
            )));
        }
        Ok(Self {
            shards: sorted,
            objective,
            dim,
            reference_loss: None,
        })
    }

    /// Sets `L(w*)` used for optimality gaps.
    pub fn with_reference_loss(mut self, loss: f64) -> Self {
        self.reference_loss = Some(loss);
        self
    }

    /// Evaluates `L(w*)` through the shards, so the gap at `w*` is exactly 0.
    pub fn with_reference_point(self, w_star: &DVector<f64>) -> Result<Self> {
        let loss = self.global_loss(w_star)?;
        Ok(self.with_reference_loss(loss))
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn workers(&self) -> usize {
        self.shards.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_samples(&self) -> usize {
        self.shards.iter().map(|s| s.len()).sum()
    }

    pub fn reference_loss(&self) -> Option<f64> {
        self.reference_loss
    }

    /// Shards in ascending worker id.
    pub fn shards(&self) -> &[&'a Shard] {
        &self.shards
    }

    fn check_dim(&self, w: &DVector<f64>) -> Result<()> {
        if w.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "model dimension",
                expected: self.dim,
                found: w.len(),
            });
        }
        Ok(())
    }

    /// `Σ_j weight_j · L(D_j, w)`.
    pub fn global_loss(&self, w: &DVector<f64>) -> Result<f64> {
        self.check_dim(w)?;
        let parts: Vec<f64> = self
            .shards
            .par_iter()
            .map(|s| self.objective.loss(*s, w))
            .collect::<Result<_>>()?;
        Ok(self.shards.iter().zip(parts).map(|(s, l)| s.weight * l).sum())
    }

    /// `Σ_j weight_j · ∇L(D_j, w)`.
    pub fn global_gradient(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(w)?;
        let parts: Vec<DVector<f64>> = self
            .shards
            .par_iter()
            .map(|s| self.objective.gradient(*s, w))
            .collect::<Result<_>>()?;
        let mut g = DVector::zeros(self.dim);
        for (s, gj) in self.shards.iter().zip(&parts) {
            g.axpy(s.weight, gj, 1.0);
        }
        Ok(g)
    }

    /// `Σ_j weight_j · ∇²L(D_j, w)`.
    pub fn global_hessian(&self, w: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(w)?;
        let parts: Vec<DMatrix<f64>> = self
            .shards
            .par_iter()
            .map(|s| self.objective.hessian(*s, w))
            .collect::<Result<_>>()?;
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for (s, hj) in self.shards.iter().zip(&parts) {
            h += hj * s.weight;
        }
        linalg::symmetrize_lower(&mut h);
        Ok(h)
    }

    /// Upper bound on the largest local smoothness constant,
    /// `max_j c·λ_max(X_jᵀX_j / n_j) + λ` with `c = 1/4` for logistic loss.
    pub fn smoothness_bound(&self) -> f64 {
        let curvature = match self.objective.family() {
            LossFamily::Logistic => 0.25,
            LossFamily::Squared => 1.0,
        };
        let worst = self
            .shards
            .iter()
            .map(|s| {
                let x = s.features();
                let gram = x.tr_mul(x) / s.len() as f64;
                gram.symmetric_eigenvalues().max()
            })
            .fold(0.0, f64::max);
        curvature * worst + self.objective.lambda()
    }

    /// State columns at `w`; step columns left empty.
    pub fn observe(&self, round: usize, w: &DVector<f64>) -> Result<RoundMetrics> {
        let loss = self.global_loss(w)?;
        let grad_norm = self.global_gradient(w)?.norm();
        if !loss.is_finite() || !grad_norm.is_finite() {
            return Err(Error::NonFinite("round metrics"));
        }
        Ok(RoundMetrics {
            round,
            loss,
            optimal_gap: self.reference_loss.map_or(f64::NAN, |r| loss - r),
            grad_norm,
            decrement: None,
            step_size: None,
            sketch_size: None,
            scalars_up: 0,
            scalars_down: 0,
            wall_ns: 0,
        })
    }

    fn trace(&self, algorithm: Algorithm, rec: Recorder, status: RunStatus) -> RunTrace {
        RunTrace {
            algorithm,
            workers: self.workers(),
            dim: self.dim,
            final_w: rec.iterates.last().expect("round 0 is always recorded").clone(),
            rows: rec.rows,
            iterates: rec.iterates,
            status,
        }
    }
}

struct Recorder {
    rows: Vec<RoundMetrics>,
    iterates: Vec<DVector<f64>>,
}

impl Recorder {
    fn new(first: RoundMetrics, w: &DVector<f64>) -> Self {
        Self {
            rows: vec![first],
            iterates: vec![w.clone()],
        }
    }

    fn push(&mut self, row: RoundMetrics, w: &DVector<f64>) {
        self.rows.push(row);
        self.iterates.push(w.clone());
    }
}

fn elapsed_ns(start: Instant) -> u64 {
    u64::try_from(start.elapsed().as_nanos()).unwrap_or(u64::MAX)
}

fn check_finite(w: &DVector<f64>, what: &'static str) -> Result<()> {
    if w.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
