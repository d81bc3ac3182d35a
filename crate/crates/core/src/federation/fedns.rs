use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use super::{check_finite, elapsed_ns, Recorder, local, Algorithm, Federation, RunStatus, RunTrace, WorkerUpload};
use crate::data::LabeledData;
use crate::error::{Error, Result};
use crate::linalg;
use crate::objective::ModelState;
use crate::rng::derive_seed;
use crate::sketch::{SketchKind, SketchOperator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FedNewtonConfig {
    pub step_size: f64,
    pub rounds: usize,
}

impl Default for FedNewtonConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            rounds: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FedNsConfig {
    pub step_size: f64,
    /// Rows per worker sketch. Ignored for [`SketchKind::Identity`], which
    /// uses `n_j` rows on worker `j`.
    pub sketch_size: usize,
    pub rounds: usize,
    pub sketch_kind: SketchKind,
    pub seed: u64,
}

impl Default for FedNsConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            sketch_size: 10,
            rounds: 10,
            sketch_kind: SketchKind::Srht,
            seed: 0,
        }
    }
}

pub(super) fn check_step(step: f64) -> Result<()> {
    if step.is_finite() && step > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("step size must be positive, got {step}")))
    }
}

/// Seed for worker `worker_id`'s sketch in round `round`.
pub fn round_sketch_seed(seed: u64, round: usize, worker_id: usize) -> u64 {
    derive_seed(seed, &[round as u64, worker_id as u64])
}

struct Step {
    w: DVector<f64>,
    decrement: f64,
    scalars_up: usize,
}

impl<'a> Federation<'a> {
    fn fednewton_step(&self, w: &DVector<f64>, mu: f64) -> Result<Step> {
        let obj = &self.objective;
        let locals: Vec<_> = self
            .shards
            .par_iter()
            .map(|s| Ok((obj.hessian(*s, w)?, obj.gradient(*s, w)?)))
            .collect::<Result<_>>()?;
        let mut h = nalgebra::DMatrix::zeros(self.dim, self.dim);
        let mut g = DVector::zeros(self.dim);
        let mut up = 0;
        for (s, (hj, gj)) in self.shards.iter().zip(&locals) {
            h += hj * s.weight;
            g.axpy(s.weight, gj, 1.0);
            up += hj.len() + gj.len();
        }
        linalg::symmetrize_lower(&mut h);
        let p = linalg::solve_spd(&h, &g)?;
        let next = w - &p * mu;
        check_finite(&next, "FedNewton iterate")?;
        Ok(Step {
            decrement: g.dot(&p),
            w: next,
            scalars_up: up,
        })
    }

    /// One exact federated Newton step: workers upload `H_j` and `g_j`.
    pub fn fednewton_round(&self, state: &ModelState, mu: f64) -> Result<ModelState> {
        check_step(mu)?;
        self.check_dim(&state.w)?;
        let step = self.fednewton_step(&state.w, mu)?;
        Ok(ModelState {
            w: step.w,
            round: state.round + 1,
        })
    }

    pub fn fednewton_run(&self, w0: &DVector<f64>, cfg: &FedNewtonConfig) -> Result<RunTrace> {
        check_step(cfg.step_size)?;
        self.check_dim(w0)?;
        let mut w = w0.clone();
        let mut rec = Recorder::new(self.observe(0, &w)?, &w);
        for t in 1..=cfg.rounds {
            let start = Instant::now();
            let step = self.fednewton_step(&w, cfg.step_size)?;
            w = step.w;
            let wall = elapsed_ns(start);
            let mut row = self.observe(t, &w)?;
            row.decrement = Some(step.decrement);
            row.step_size = Some(cfg.step_size);
            row.scalars_up = step.scalars_up;
            row.scalars_down = self.workers() * self.dim;
            row.wall_ns = wall;
            rec.push(row, &w);
        }
        Ok(self.trace(Algorithm::FedNewton, rec, RunStatus::Completed))
    }

    /// Every worker sketches its square-root Hessian for round `round`.
    pub(super) fn sketched_uploads(
        &self,
        w: &DVector<f64>,
        kind: SketchKind,
        sketch_size: usize,
        seed: u64,
        round: usize,
    ) -> Result<Vec<WorkerUpload>> {
        self.shards
            .par_iter()
            .map(|s| {
                let n = s.len();
                let k = if kind == SketchKind::Identity { n } else { sketch_size };
                let op = SketchOperator::new(kind, k, n, round_sketch_seed(seed, round, s.worker_id))?;
                local::local_sketch_round(s, &self.objective, w, &op)
            })
            .collect()
    }

    /// Federated Newton Sketch: `w ← w − μ H̃⁻¹g` with
    /// `H̃ = Σ_j weight_j Υ_jᵀΥ_j + λI`.
    pub fn fedns_run(&self, w0: &DVector<f64>, cfg: &FedNsConfig) -> Result<RunTrace> {
        check_step(cfg.step_size)?;
        if cfg.sketch_size == 0 && cfg.sketch_kind != SketchKind::Identity {
            return Err(Error::InvalidArgument("sketch size must be positive".into()));
        }
        self.check_dim(w0)?;
        let mut w = w0.clone();
        let mut rec = Recorder::new(self.observe(0, &w)?, &w);
        for t in 1..=cfg.rounds {
            let start = Instant::now();
            let uploads = self.sketched_uploads(&w, cfg.sketch_kind, cfg.sketch_size, cfg.seed, t)?;
            let h = local::aggregate_sketched_hessian(&uploads, self.objective.lambda())?;
            let g = local::aggregate_gradient(&uploads)?;
            let p = linalg::solve_spd(&h, &g)?;
            w -= &p * cfg.step_size;
            check_finite(&w, "FedNS iterate")?;
            let wall = elapsed_ns(start);
            let mut row = self.observe(t, &w)?;
            row.decrement = Some(g.dot(&p));
            row.step_size = Some(cfg.step_size);
            row.sketch_size = (cfg.sketch_kind != SketchKind::Identity).then_some(cfg.sketch_size);
            row.scalars_up = uploads.iter().map(WorkerUpload::scalars).sum();
            row.scalars_down = self.workers() * self.dim;
            row.wall_ns = wall;
            rec.push(row, &w);
        }
        Ok(self.trace(Algorithm::FedNs, rec, RunStatus::Completed))
    }
}
