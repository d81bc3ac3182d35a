//! Centralized exact Newton and the closed-form ridge solution; both serve
//! as reference oracles for the federated methods.

use nalgebra::DVector;

use super::Objective;
use crate::data::LabeledData;
use crate::error::{Error, Result};
use crate::linalg;
use crate::objective::ModelState;

/// Gradient-norm tolerance used for the reference optimum `w*`.
pub const REFERENCE_TOL: f64 = 1e-12;
pub const REFERENCE_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub step_size: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            tol: REFERENCE_TOL,
            max_iter: REFERENCE_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonIterate {
    pub iteration: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonRun {
    pub state: ModelState,
    /// One entry per visited iterate, starting with `w0`.
    pub trace: Vec<NewtonIterate>,
    pub converged: bool,
}

/// `w ← w − μ H⁻¹ g` until `‖g‖ ≤ tol` or `max_iter` updates.
///
/// Non-convergence is reported through [`NewtonRun::converged`], not as an
/// error; a failed Hessian solve is an error.
pub fn centralized_newton<D: LabeledData + ?Sized>(
    obj: &Objective,
    data: &D,
    w0: &DVector<f64>,
    opts: NewtonOptions,
) -> Result<NewtonRun> {
    if !(opts.step_size.is_finite() && opts.step_size > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Newton step size must be positive, got {}",
            opts.step_size
        )));
    }
    let mut w = w0.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut updates = 0;
    loop {
        let g = obj.gradient(data, &w)?;
        let grad_norm = g.norm();
        trace.push(NewtonIterate {
            iteration: updates,
            loss: obj.loss(data, &w)?,
            grad_norm,
        });
        if !grad_norm.is_finite() {
            return Err(Error::NonFinite("Newton gradient"));
        }
        if grad_norm <= opts.tol {
            converged = true;
            break;
        }
        if updates == opts.max_iter {
            break;
        }
        let h = obj.hessian(data, &w)?;
        let step = linalg::solve_spd(&h, &g)?;
        w.axpy(-opts.step_size, &step, 1.0);
        updates += 1;
    }
    Ok(NewtonRun {
        state: ModelState { w, round: updates },
        trace,
        converged,
    })
}

/// The reference optimum `w*` and its loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub w: DVector<f64>,
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Runs [`centralized_newton`] from zero with `μ = 1` to `‖g‖ ≤ 1e-12`.
pub fn reference_optimum<D: LabeledData + ?Sized>(obj: &Objective, data: &D) -> Result<Reference> {
    let run = centralized_newton(obj, data, &DVector::zeros(data.dim()), NewtonOptions::default())?;
    let last = *run.trace.last().expect("trace holds at least w0");
    if !run.converged {
        return Err(Error::NotConverged {
            iterations: run.state.round,
            grad_norm: last.grad_norm,
        });
    }
    Ok(Reference {
        w: run.state.w,
        loss: last.loss,
        grad_norm: last.grad_norm,
        iterations: run.state.round,
    })
}

/// Kernel ridge regression on explicit features:
/// `w = (ΦᵀΦ + λN·I)⁻¹ Φᵀy`.
///
/// This is the minimizer of `(1/N) Σ ½(φ_iᵀw − y_i)² + (λ/2)‖w‖²`, i.e. the
/// squared-loss [`Objective`] with the same `λ`.
pub fn krr_closed_form<D: LabeledData + ?Sized>(data: &D, lambda: f64) -> Result<DVector<f64>> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "regularization must be finite and non-negative, got {lambda}"
        )));
    }
    let phi = data.features();
    let mut gram = phi.tr_mul(phi);
    linalg::symmetrize_lower(&mut gram);
    linalg::add_diagonal(&mut gram, lambda * data.len() as f64);
    linalg::solve_spd(&gram, &phi.tr_mul(data.labels()))
}
