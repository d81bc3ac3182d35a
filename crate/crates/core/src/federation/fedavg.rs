use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use super::fedns::check_step;
use super::{check_finite, elapsed_ns, Recorder, Algorithm, Federation, RunStatus, RunTrace};
use crate::error::Result;

/// Full-batch local gradient descent followed by weighted model averaging.
/// Deterministic, so it takes no seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FedAvgConfig {
    pub local_steps: usize,
    pub step_size: f64,
    pub rounds: usize,
}

impl<'a> Federation<'a> {
    /// `1 / L` with `L` from [`Federation::smoothness_bound`].
    pub fn fedavg_default_step(&self) -> f64 {
        1.0 / self.smoothness_bound()
    }

    pub fn fedavg_baseline_run(&self, w0: &DVector<f64>, cfg: &FedAvgConfig) -> Result<RunTrace> {
        check_step(cfg.step_size)?;
        self.check_dim(w0)?;
        let m = self.workers();
        let mut w = w0.clone();
        let mut rec = Recorder::new(self.observe(0, &w)?, &w);
        for t in 1..=cfg.rounds {
            let start = Instant::now();
            let locals: Vec<DVector<f64>> = self
                .shards
                .par_iter()
                .map(|s| {
                    let mut v = w.clone();
                    for _ in 0..cfg.local_steps {
                        let g = self.objective.gradient(*s, &v)?;
                        v.axpy(-cfg.step_size, &g, 1.0);
                    }
                    Ok(v)
                })
                .collect::<Result<_>>()?;
            let mut next = DVector::zeros(self.dim);
            for (s, v) in self.shards.iter().zip(&locals) {
                next.axpy(s.weight, v, 1.0);
            }
            w = next;
            check_finite(&w, "FedAvg iterate")?;
            let wall = elapsed_ns(start);
            let mut row = self.observe(t, &w)?;
            row.step_size = Some(cfg.step_size);
            row.scalars_up = m * self.dim;
            row.scalars_down = m * self.dim;
            row.wall_ns = wall;
            rec.push(row, &w);
        }
        Ok(self.trace(Algorithm::FedAvg, rec, RunStatus::Completed))
    }
}
