//! Datasets, LIBSVM I/O, feature maps, partitioning and synthetic problems.

mod feature_map;
mod libsvm;
mod partition;
mod synth;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use feature_map::{apply_feature_map, FeatureMap, RandomFourier};
pub use libsvm::{parse_libsvm, read_libsvm_file, write_libsvm, LabelMode, LibsvmOptions};
pub use partition::{partition, PartitionPlan, PartitionStrategy, Shard};
pub use synth::{
    synth_logistic, synth_logistic_with, synth_ridge, SYNTH_LEADING_VARIANCE,
};

/// Anything that carries a feature matrix and a label vector.
pub trait LabeledData {
    fn features(&self) -> &DMatrix<f64>;
    fn labels(&self) -> &DVector<f64>;

    fn len(&self) -> usize {
        self.features().nrows()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dim(&self) -> usize {
        self.features().ncols()
    }
}

/// Dense feature-mapped samples `N×d` with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    features: DMatrix<f64>,
    labels: DVector<f64>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: DMatrix<f64>,
        labels: DVector<f64>,
    ) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::InvalidArgument("dataset has no samples".into()));
        }
        if labels.len() != features.nrows() {
            return Err(Error::DimensionMismatch {
                context: "dataset labels",
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        if !features.iter().chain(labels.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("dataset"));
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Rows `ids` (in the given order) as a new dataset.
    pub fn select(&self, ids: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
        let d = self.features.ncols();
        let x = DMatrix::from_fn(ids.len(), d, |r, c| self.features[(ids[r], c)]);
        let y = DVector::from_iterator(ids.len(), ids.iter().map(|&i| self.labels[i]));
        (x, y)
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>) {
        (self.features, self.labels)
    }
}

impl LabeledData for Dataset {
    fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    fn labels(&self) -> &DVector<f64> {
        &self.labels
    }
}
