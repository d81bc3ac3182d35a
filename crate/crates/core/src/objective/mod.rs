//! Regularized GLM objectives
//!
//! `L(D, w) = (1/n) Σ ℓ(x_iᵀw, y_i) + λ·½‖w‖²`
//!
//! with the logistic loss `ℓ = log(1 + exp(−y·xᵀw))` (labels in {−1,+1}) or
//! the squared loss `ℓ = ½(xᵀw − y)²`. The regularizer is fixed to `½‖w‖²`
//! so its Hessian is exactly the identity.

mod newton;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::data::LabeledData;
use crate::error::{Error, Result};
use crate::linalg;

pub use newton::{
    centralized_newton, krr_closed_form, reference_optimum, NewtonIterate, NewtonOptions,
    NewtonRun, Reference, REFERENCE_MAX_ITER, REFERENCE_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossFamily {
    Logistic,
    Squared,
}

impl LossFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            LossFamily::Logistic => "logistic",
            LossFamily::Squared => "squared",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    family: LossFamily,
    lambda: f64,
}

/// Iterate `w` together with the number of updates applied to it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub w: DVector<f64>,
    pub round: usize,
}

impl ModelState {
    pub fn new(w: DVector<f64>) -> Result<Self> {
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("model state"));
        }
        Ok(Self { w, round: 0 })
    }
}

/// `B = D(w)^{1/2} X / √n`, so that `BᵀB` is the loss-term Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct SqrtHessianFactor {
    pub factor: DMatrix<f64>,
    pub owner: Option<usize>,
}

/// `ln(1 + e^{−z})` without overflow.
pub(crate) fn softplus_neg(z: f64) -> f64 {
    (-z).max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `1 / (1 + e^{z})`.
fn sigmoid_neg(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// `σ(z)·σ(−z)`.
fn logistic_curvature(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

impl Objective {
    /// `lambda` must be finite and non-negative. Newton-type solvers assume
    /// `lambda > 0`; zero is accepted for evaluating unregularized losses.
    pub fn new(family: LossFamily, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "regularization must be finite and non-negative, got {lambda}"
            )));
        }
        Ok(Self { family, lambda })
    }

    pub fn logistic(lambda: f64) -> Result<Self> {
        Self::new(LossFamily::Logistic, lambda)
    }

    pub fn squared(lambda: f64) -> Result<Self> {
        Self::new(LossFamily::Squared, lambda)
    }

    pub fn family(&self) -> LossFamily {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn check<D: LabeledData + ?Sized>(&self, data: &D, w: &DVector<f64>) -> Result<()> {
        if w.len() != data.dim() {
            return Err(Error::DimensionMismatch {
                context: "model dimension",
                expected: data.dim(),
                found: w.len(),
            });
        }
        if data.is_empty() {
            return Err(Error::InvalidArgument("objective over zero samples".into()));
        }
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("model"));
        }
        if self.family == LossFamily::Logistic {
            if let Some((index, &value)) = data
                .labels()
                .iter()
                .enumerate()
                .find(|(_, &y)| y != 1.0 && y != -1.0)
            {
                return Err(Error::LabelDomain { index, value });
            }
        }
        Ok(())
    }

    /// Per-sample curvature weights `D(w)`; all ones for the squared loss.
    fn curvature<D: LabeledData + ?Sized>(&self, data: &D, w: &DVector<f64>) -> DVector<f64> {
        match self.family {
            LossFamily::Squared => DVector::from_element(data.len(), 1.0),
            LossFamily::Logistic => {
                let xw = data.features() * w;
                DVector::from_iterator(
                    data.len(),
                    xw.iter()
                        .zip(data.labels().iter())
                        .map(|(m, y)| logistic_curvature(y * m)),
                )
            }
        }
    }

    pub fn loss<D: LabeledData + ?Sized>(&self, data: &D, w: &DVector<f64>) -> Result<f64> {
        self.check(data, w)?;
        let xw = data.features() * w;
        let y = data.labels();
        let total: f64 = match self.family {
            LossFamily::Logistic => xw.iter().zip(y.iter()).map(|(m, y)| softplus_neg(y * m)).sum(),
            LossFamily::Squared => xw
                .iter()
                .zip(y.iter())
                .map(|(m, y)| 0.5 * (m - y) * (m - y))
                .sum(),
        };
        Ok(total / data.len() as f64 + 0.5 * self.lambda * w.norm_squared())
    }

    pub fn gradient<D: LabeledData + ?Sized>(
        &self,
        data: &D,
        w: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        self.check(data, w)?;
        let xw = data.features() * w;
        let y = data.labels();
        // derivative of ℓ with respect to the linear prediction xᵀw
        let residual = DVector::from_iterator(
            data.len(),
            xw.iter().zip(y.iter()).map(|(m, y)| match self.family {
                LossFamily::Logistic => -y * sigmoid_neg(y * m),
                LossFamily::Squared => m - y,
            }),
        );
        let mut g = data.features().tr_mul(&residual) / data.len() as f64;
        g.axpy(self.lambda, w, 1.0);
        Ok(g)
    }

    /// Loss-term Hessian `(1/n) Xᵀ D(w) X`, exactly symmetric.
    pub fn loss_hessian<D: LabeledData + ?Sized>(
        &self,
        data: &D,
        w: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        self.check(data, w)?;
        let d = self.curvature(data, w);
        let x = data.features();
        let mut dx = x.clone();
        for (mut row, &di) in dx.row_iter_mut().zip(d.iter()) {
            row *= di;
        }
        let mut h = x.tr_mul(&dx) / data.len() as f64;
        linalg::symmetrize_lower(&mut h);
        Ok(h)
    }

    /// Full Hessian `(1/n) Xᵀ D(w) X + λI`.
    pub fn hessian<D: LabeledData + ?Sized>(
        &self,
        data: &D,
        w: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        let mut h = self.loss_hessian(data, w)?;
        linalg::add_diagonal(&mut h, self.lambda);
        Ok(h)
    }

    /// Square-root factor of the loss term only; the regularizer is left out.
    pub fn sqrt_hessian<D: LabeledData + ?Sized>(
        &self,
        data: &D,
        w: &DVector<f64>,
    ) -> Result<SqrtHessianFactor> {
        self.check(data, w)?;
        let d = self.curvature(data, w);
        let inv_sqrt_n = 1.0 / (data.len() as f64).sqrt();
        let mut factor = data.features().clone();
        for (mut row, &di) in factor.row_iter_mut().zip(d.iter()) {
            row *= di.sqrt() * inv_sqrt_n;
        }
        Ok(SqrtHessianFactor {
            factor,
            owner: None,
        })
    }
}

/// Empirical effective dimension `Tr(H (H + λI)⁻¹)` of a loss-term Hessian.
pub fn effective_dimension(h: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "effective dimension needs lambda > 0, got {lambda}"
        )));
    }
    let dim = h.nrows();
    if h.ncols() != dim {
        return Err(Error::DimensionMismatch {
            context: "effective_dimension (square matrix)",
            expected: dim,
            found: h.ncols(),
        });
    }
    if !h.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("effective_dimension input"));
    }
    let mut shifted = h.clone();
    linalg::add_diagonal(&mut shifted, lambda);
    let chol = Cholesky::new(shifted).ok_or(Error::SolveFailed { attempts: 0 })?;
    Ok(chol.solve(h).trace())
}
