use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use super::{check_finite, elapsed_ns, Recorder, local, Algorithm, Federation, RunStatus, RunTrace, WorkerUpload};
use crate::error::{Error, Result};
use crate::linalg;
use crate::sketch::SketchKind;

/// When the server stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExitRule {
    /// `λ̃² ≤ ¾δ`.
    #[default]
    Squared,
    /// `λ̃ ≤ ¾δ`.
    Linear,
}

impl ExitRule {
    fn fires(self, decrement: f64, delta: f64) -> bool {
        match self {
            ExitRule::Squared => decrement * decrement <= 0.75 * delta,
            ExitRule::Linear => decrement <= 0.75 * delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FedNdesConfig {
    pub delta: f64,
    pub a: f64,
    pub b: f64,
    pub mbar1: usize,
    pub mbar2: usize,
    /// Switch to `mbar2` once the decrement drops to `eta` or below.
    pub eta: f64,
    pub exit_rule: ExitRule,
    pub armijo: local::ArmijoRule,
    pub max_backtracks: usize,
    pub max_rounds: usize,
    pub sketch_kind: SketchKind,
    pub seed: u64,
}


impl FedNdesConfig {
    /// Defaults sized from the effective dimension at `w0`:
    /// `mbar1 = ⌈4 d̃⌉`, `mbar2 = ⌈16 d̃⌉`.
    pub fn from_effective_dimension(d_eff: f64, seed: u64) -> Self {
        let size = |c: f64| ((c * d_eff).ceil() as usize).max(1);
        Self {
            delta: 1e-12,
            a: 0.1,
            b: 0.5,
            mbar1: size(4.0),
            mbar2: size(16.0),
            eta: 1.0 / 16.0,
            exit_rule: ExitRule::Squared,
            armijo: local::ArmijoRule::DriftCorrected,
            max_backtracks: 50,
            max_rounds: 50,
            sketch_kind: SketchKind::Srht,
            seed,
        }
    }

    pub fn line_search(&self) -> local::LineSearch {
        local::LineSearch {
            a: self.a,
            b: self.b,
            max_backtracks: self.max_backtracks,
            rule: self.armijo,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidArgument(format!("eta must be positive, got {}", self.eta)));
        }
        if self.mbar1 == 0 || self.mbar2 == 0 {
            return Err(Error::InvalidArgument("mbar1 and mbar2 must be at least 1".into()));
        }
        self.line_search().validate()
    }
}

impl<'a> Federation<'a> {
    /// Dimension-efficient federated Newton with per-worker line search.
    ///
    /// Row `t` of a non-exit round holds the state at `w_t` and the
    /// decrement and step computed at `w_{t−1}`. An exit round adds a final
    /// row whose state equals the previous one, with the decrement that
    /// passed the exit test and no step.
    pub fn fedndes_run(&self, w0: &DVector<f64>, cfg: &FedNdesConfig) -> Result<RunTrace> {
        cfg.validate()?;
        self.check_dim(w0)?;
        let search = cfg.line_search();
        let m = self.workers();
        let mut w = w0.clone();
        let mut rec = Recorder::new(self.observe(0, &w)?, &w);
        let mut k = cfg.mbar1;
        for t in 1..=cfg.max_rounds {
            let start = Instant::now();
            let uploads = self.sketched_uploads(&w, cfg.sketch_kind, k, cfg.seed, t)?;
            let h = local::aggregate_sketched_hessian(&uploads, self.objective.lambda())?;
            let g = local::aggregate_gradient(&uploads)?;
            let delta_w = -linalg::solve_spd(&h, &g)?;
            let decrement = local::newton_decrement(&g, &delta_w);
            let sketch_size = (cfg.sketch_kind != SketchKind::Identity).then_some(k);
            let up: usize = uploads.iter().map(WorkerUpload::scalars).sum();

            if cfg.exit_rule.fires(decrement, cfg.delta) {
                let mut row = self.observe(t, &w)?;
                row.decrement = Some(decrement);
                row.sketch_size = sketch_size;
                row.scalars_up = up;
                row.wall_ns = elapsed_ns(start);
                rec.push(row, &w);
                return Ok(self.trace(Algorithm::FedNdes, rec, RunStatus::Converged { round: t }));
            }

            let steps: Vec<f64> = self
                .shards
                .par_iter()
                .zip(uploads.par_iter())
                .map(|(s, u)| {
                    local::local_line_search_with_gradient(
                        s,
                        &self.objective,
                        &w,
                        &delta_w,
                        decrement,
                        &u.gradient,
                        &search,
                    )
                })
                .collect::<Result<_>>()?;
            let mu = steps.iter().copied().fold(f64::INFINITY, f64::min);
            w.axpy(mu, &delta_w, 1.0);
            check_finite(&w, "FedNDES iterate")?;
            k = if decrement > cfg.eta { cfg.mbar1 } else { cfg.mbar2 };

            let wall = elapsed_ns(start);
            let mut row = self.observe(t, &w)?;
            row.decrement = Some(decrement);
            row.step_size = Some(mu);
            row.sketch_size = sketch_size;
            row.scalars_up = up + m;
            row.scalars_down = m * (2 * self.dim + 2);
            row.wall_ns = wall;
            rec.push(row, &w);
        }
        Ok(self.trace(Algorithm::FedNdes, rec, RunStatus::MaxRoundsReached))
    }
}
