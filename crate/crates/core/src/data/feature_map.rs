use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dataset, LabeledData};
use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// Random Fourier features for the Gaussian kernel
/// `k(x, x') = exp(−‖x − x'‖² / (2·bandwidth²))`:
/// `z(x) = √(2/M) · cos(Ωᵀx + b)` with `Ω_ij ~ N(0, 1/bandwidth²)` and
/// `b_j ~ U[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomFourier {
    omega: DMatrix<f64>,
    phase: DVector<f64>,
    pub bandwidth: f64,
    pub seed: u64,
}

impl RandomFourier {
    pub fn new(input_dim: usize, output_dim: usize, bandwidth: f64, seed: u64) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::InvalidArgument(
                "random Fourier features need positive input and output dimensions".into(),
            ));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        let mut rng = rng::stream(seed, streams::FOURIER);
        let omega = DMatrix::from_fn(input_dim, output_dim, |_, _| {
            rng.sample::<f64, _>(StandardNormal) / bandwidth
        });
        let phase = DVector::from_fn(output_dim, |_, _| {
            rng.random_range(0.0..std::f64::consts::TAU)
        });
        Ok(Self {
            omega,
            phase,
            bandwidth,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.omega.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.omega.ncols()
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "random Fourier input dimension",
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        let scale = (2.0 / self.output_dim() as f64).sqrt();
        let mut z = x * &self.omega;
        for (j, mut col) in z.column_iter_mut().enumerate() {
            let b = self.phase[j];
            col.iter_mut().for_each(|v| *v = scale * (*v + b).cos());
        }
        Ok(z)
    }
}

/// Feature map `φ: R^d → R^M` applied before training.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum FeatureMap {
    #[default]
    Identity,
    RandomFourier(RandomFourier),
}

impl FeatureMap {
    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self {
            FeatureMap::Identity => input_dim,
            FeatureMap::RandomFourier(rf) => rf.output_dim(),
        }
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        match self {
            FeatureMap::Identity => Ok(data.clone()),
            FeatureMap::RandomFourier(rf) => Dataset::new(
                data.name.clone(),
                rf.transform(data.features())?,
                data.labels().clone(),
            ),
        }
    }
}

pub fn apply_feature_map(fm: &FeatureMap, data: &Dataset) -> Result<Dataset> {
    fm.apply(data)
}
