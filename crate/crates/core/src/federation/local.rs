//! Worker-side computations and server-side aggregation.

use nalgebra::{DMatrix, DVector};

use crate::data::{LabeledData, Shard};
use crate::error::{Error, Result};
use crate::linalg;
use crate::objective::Objective;
use crate::sketch::SketchOperator;

/// What one worker sends to the server in a sketched round.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerUpload {
    pub worker_id: usize,
    pub weight: f64,
    /// `Υ_j = S_j · ∇²L(D_j, w)^{1/2}`, `k×M`.
    pub upsilon: DMatrix<f64>,
    /// `∇L(D_j, w) + λw`.
    pub gradient: DVector<f64>,
}

impl WorkerUpload {
    /// Scalars actually held in the upload buffers.
    pub fn scalars(&self) -> usize {
        self.upsilon.len() + self.gradient.len()
    }
}

/// Sketches the shard's square-root Hessian and computes its gradient.
pub fn local_sketch_round(
    shard: &Shard,
    obj: &Objective,
    w: &DVector<f64>,
    sketch: &SketchOperator,
) -> Result<WorkerUpload> {
    if sketch.cols() != shard.len() {
        return Err(Error::DimensionMismatch {
            context: "local sketch (shard rows)",
            expected: shard.len(),
            found: sketch.cols(),
        });
    }
    let sqrt_h = obj.sqrt_hessian(shard, w)?;
    Ok(WorkerUpload {
        worker_id: shard.worker_id,
        weight: shard.weight,
        upsilon: sketch.apply(&sqrt_h.factor)?,
        gradient: obj.gradient(shard, w)?,
    })
}

fn ordered(uploads: &[WorkerUpload]) -> Result<Vec<&WorkerUpload>> {
    if uploads.is_empty() {
        return Err(Error::InvalidArgument("no worker uploads to aggregate".into()));
    }
    let mut refs: Vec<&WorkerUpload> = uploads.iter().collect();
    refs.sort_by_key(|u| u.worker_id);
    Ok(refs)
}

/// `Σ_j weight_j Υ_jᵀΥ_j + λI`, summed in ascending worker id.
pub fn aggregate_sketched_hessian(uploads: &[WorkerUpload], lambda: f64) -> Result<DMatrix<f64>> {
    let refs = ordered(uploads)?;
    let dim = refs[0].upsilon.ncols();
    let mut h = DMatrix::zeros(dim, dim);
    for u in refs {
        if u.upsilon.ncols() != dim {
            return Err(Error::DimensionMismatch {
                context: "aggregate (sketched factor columns)",
                expected: dim,
                found: u.upsilon.ncols(),
            });
        }
        h += u.upsilon.tr_mul(&u.upsilon) * u.weight;
    }
    linalg::symmetrize_lower(&mut h);
    linalg::add_diagonal(&mut h, lambda);
    Ok(h)
}

/// `Σ_j weight_j g_j`, summed in ascending worker id.
pub fn aggregate_gradient(uploads: &[WorkerUpload]) -> Result<DVector<f64>> {
    let refs = ordered(uploads)?;
    let dim = refs[0].gradient.len();
    let mut g = DVector::zeros(dim);
    for u in refs {
        if u.gradient.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "aggregate (gradient length)",
                expected: dim,
                found: u.gradient.len(),
            });
        }
        g.axpy(u.weight, &u.gradient, 1.0);
    }
    Ok(g)
}

/// Approximate Newton decrement `λ̃ = −gᵀΔw` for `Δw = −H̃⁻¹g`.
///
/// This is the magnitude `gᵀH̃⁻¹g ≥ 0`; the signed quantity `gᵀΔw` is its
/// negative.
pub fn newton_decrement(g: &DVector<f64>, delta_w: &DVector<f64>) -> f64 {
    -g.dot(delta_w)
}

/// Sufficient-decrease predicate used by each worker's backtracking search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArmijoRule {
    /// `L_j(w + μΔw) ≤ L_j(w) + μ·g_jᵀΔw + (1 − a)·μ·λ̃`.
    ///
    /// Coincides with [`ArmijoRule::Shared`] when `g_j = g`. Summed with the
    /// federation weights it yields `L(w + μΔw) ≤ L(w) − a·μ·λ̃`, and it
    /// stays satisfiable when the local gradient disagrees with the global
    /// direction.
    #[default]
    DriftCorrected,
    /// `L_j(w + μΔw) ≤ L_j(w) − a·μ·λ̃` with the global decrement on every
    /// shard. Can fail to terminate on heterogeneous or noisy shards once
    /// `g_jᵀΔw > −a·λ̃`.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub a: f64,
    pub b: f64,
    pub max_backtracks: usize,
    pub rule: ArmijoRule,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            a: 0.1,
            b: 0.5,
            max_backtracks: 50,
            rule: ArmijoRule::DriftCorrected,
        }
    }
}

impl LineSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "Armijo slope must lie in (0, 1/2), got {}",
                self.a
            )));
        }
        if !(self.b > 0.0 && self.b < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "backtracking factor must lie in (0, 1), got {}",
                self.b
            )));
        }
        Ok(())
    }

    /// Per-unit-step allowance `c` in `L_j(w + μΔw) ≤ L_j(w) + μ·c`.
    fn allowance(&self, lambda_tilde: f64, local_slope: impl FnOnce() -> Result<f64>) -> Result<f64> {
        Ok(match self.rule {
            ArmijoRule::Shared => -self.a * lambda_tilde,
            ArmijoRule::DriftCorrected => local_slope()? + (1.0 - self.a) * lambda_tilde,
        })
    }
}

pub(crate) fn backtrack(
    shard: &Shard,
    obj: &Objective,
    w: &DVector<f64>,
    delta_w: &DVector<f64>,
    allowance: f64,
    search: &LineSearch,
) -> Result<f64> {
    let base = obj.loss(shard, w)?;
    let mut mu = 1.0;
    for _ in 0..=search.max_backtracks {
        let trial = w + delta_w * mu;
        if obj.loss(shard, &trial)? <= base + mu * allowance {
            return Ok(mu);
        }
        mu *= search.b;
    }
    Err(Error::LineSearch {
        worker_id: shard.worker_id,
        backtracks: search.max_backtracks,
    })
}

/// Backtracking from `μ = 1`, shrinking by `b` until the predicate of
/// `search.rule` holds. Returns the accepted step `b^i`.
pub fn local_line_search(
    shard: &Shard,
    obj: &Objective,
    w: &DVector<f64>,
    delta_w: &DVector<f64>,
    lambda_tilde: f64,
    search: &LineSearch,
) -> Result<f64> {
    search.validate()?;
    let allowance = search.allowance(lambda_tilde, || Ok(obj.gradient(shard, w)?.dot(delta_w)))?;
    backtrack(shard, obj, w, delta_w, allowance, search)
}

/// Same as [`local_line_search`] reusing a gradient the worker already has.
pub(crate) fn local_line_search_with_gradient(
    shard: &Shard,
    obj: &Objective,
    w: &DVector<f64>,
    delta_w: &DVector<f64>,
    lambda_tilde: f64,
    local_gradient: &DVector<f64>,
    search: &LineSearch,
) -> Result<f64> {
    let allowance = search.allowance(lambda_tilde, || Ok(local_gradient.dot(delta_w)))?;
    backtrack(shard, obj, w, delta_w, allowance, search)
}
