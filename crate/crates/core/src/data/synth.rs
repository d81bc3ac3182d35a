//! Synthetic benchmark problems with fast spectral decay.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// Variance of the leading feature; feature `i` (1-based) has variance
/// `SYNTH_LEADING_VARIANCE / i²`.
pub const SYNTH_LEADING_VARIANCE: f64 = 0.1;

fn check_shape(n: usize, d: usize) -> Result<()> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument(format!(
            "synthetic problem needs n ≥ 1 and d ≥ 1 (n = {n}, d = {d})"
        )));
    }
    Ok(())
}

/// Draws `(u, X)`: `u` uniform on the unit sphere, rows of `X` from
/// `N(0, diag(c/i²))`.
fn draw_design<R: Rng>(rng: &mut R, n: usize, d: usize, leading_variance: f64) -> (DVector<f64>, DMatrix<f64>) {
    let mut u = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = u.norm();
    if norm > 0.0 {
        u /= norm;
    }
    let sd: Vec<f64> = (1..=d).map(|i| leading_variance.sqrt() / i as f64).collect();
    let mut x = DMatrix::zeros(n, d);
    for r in 0..n {
        for c in 0..d {
            x[(r, c)] = sd[c] * rng.sample::<f64, _>(StandardNormal);
        }
    }
    (u, x)
}

/// Logistic-model labels on [`SYNTH_LEADING_VARIANCE`]-scaled features.
pub fn synth_logistic(n: usize, d: usize, separability: f64, seed: u64) -> Result<Dataset> {
    synth_logistic_with(n, d, separability, SYNTH_LEADING_VARIANCE, seed)
}

/// `P(y = +1 | x) = σ(separability · xᵀu / √(uᵀΣu))`, so `separability` is the
/// slope on a unit-variance margin and 0 gives labels independent of `x`.
pub fn synth_logistic_with(
    n: usize,
    d: usize,
    separability: f64,
    leading_variance: f64,
    seed: u64,
) -> Result<Dataset> {
    check_shape(n, d)?;
    if !separability.is_finite() || !(leading_variance.is_finite() && leading_variance > 0.0) {
        return Err(Error::InvalidArgument(
            "separability must be finite and leading variance positive".into(),
        ));
    }
    let mut rng = rng::stream(seed, streams::SYNTH);
    let (u, x) = draw_design(&mut rng, n, d, leading_variance);
    let margin_sd = (1..=d)
        .map(|i| leading_variance * u[i - 1] * u[i - 1] / (i * i) as f64)
        .sum::<f64>()
        .sqrt();
    let xu = &x * &u;
    let labels = DVector::from_fn(n, |r, _| {
        let z = separability * xu[r] / margin_sd;
        let p = 1.0 / (1.0 + (-z).exp());
        if rng.random::<f64>() < p {
            1.0
        } else {
            -1.0
        }
    });
    Dataset::new("synthetic-logistic", x, labels)
}

/// Linear-Gaussian regression `y = xᵀu / √(uᵀΣu) + noise·ε` on the same design.
pub fn synth_ridge(n: usize, d: usize, noise: f64, seed: u64) -> Result<Dataset> {
    check_shape(n, d)?;
    let mut rng = rng::stream(seed, streams::SYNTH);
    let (u, x) = draw_design(&mut rng, n, d, SYNTH_LEADING_VARIANCE);
    let scale = (1..=d)
        .map(|i| SYNTH_LEADING_VARIANCE * u[i - 1] * u[i - 1] / (i * i) as f64)
        .sum::<f64>()
        .sqrt();
    let xu = &x * &u;
    let labels = DVector::from_fn(n, |r, _| {
        xu[r] / scale + noise * rng.sample::<f64, _>(StandardNormal)
    });
    Dataset::new("synthetic-ridge", x, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabeledData;

    #[test]
    fn fixed_seed_is_reproducible() {
        assert_eq!(synth_logistic(50, 4, 2.0, 3).unwrap(), synth_logistic(50, 4, 2.0, 3).unwrap());
        assert_ne!(synth_logistic(50, 4, 2.0, 3).unwrap(), synth_logistic(50, 4, 2.0, 4).unwrap());
    }

    #[test]
    fn feature_variances_decay_quadratically() {
        let d = synth_logistic(20_000, 4, 1.0, 0).unwrap();
        let x = d.features();
        for c in 0..4 {
            let var = x.column(c).norm_squared() / x.nrows() as f64;
            let expected = SYNTH_LEADING_VARIANCE / ((c + 1) * (c + 1)) as f64;
            assert!((var / expected - 1.0).abs() < 0.05, "column {c}: {var}");
        }
    }

    #[test]
    fn labels_are_binary() {
        let d = synth_logistic(100, 3, 5.0, 1).unwrap();
        assert!(d.labels().iter().all(|&y| y == 1.0 || y == -1.0));
    }
}
