//! Randomized sketching operators.
//!
//! Three random families (Gaussian, SRHT, SJLT) plus an identity operator
//! used for exactness checks. Every operator is scaled so that
//! `E[SᵀS] = I_n` for the operator as applied; equivalently the unscaled
//! sketch `√k·S` satisfies `E[(√k·S)ᵀ(√k·S)/k] = I_n`. With this scaling the
//! sketched Gram matrix `(SB)ᵀ(SB)` is an unbiased estimate of `BᵀB`.
//!
//! | kind     | entries of the applied operator                          |
//! |----------|----------------------------------------------------------|
//! | Gaussian | i.i.d. `N(0,1)/√k`                                        |
//! | SRHT     | `√(n_pad/k) · P · (W/√n_pad) · D`, i.e. `±1/√k` entries  |
//! | SJLT     | one `±1` per column at a uniformly chosen row             |
//! | Identity | `I_n` (requires `k == n`)                                 |
//!
//! SRHT: `D` is a Rademacher sign diagonal of length `n_pad` (the next power
//! of two ≥ n, input rows zero-padded), `W` the unnormalized Walsh–Hadamard
//! matrix and `P` selects `k` distinct rows uniformly without replacement.

mod hadamard;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

pub use hadamard::{fwht_in_place, walsh_hadamard_matrix};

use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// Largest `k·n` that [`SketchOperator::materialize`] will allocate.
pub const MATERIALIZE_LIMIT: usize = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SketchKind {
    Gaussian,
    Srht,
    Sjlt,
    Identity,
}

impl SketchKind {
    pub const RANDOM: [SketchKind; 3] = [SketchKind::Gaussian, SketchKind::Srht, SketchKind::Sjlt];

    pub fn as_str(self) -> &'static str {
        match self {
            SketchKind::Gaussian => "gaussian",
            SketchKind::Srht => "srht",
            SketchKind::Sjlt => "sjlt",
            SketchKind::Identity => "identity",
        }
    }
}

impl fmt::Display for SketchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SketchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(SketchKind::Gaussian),
            "srht" => Ok(SketchKind::Srht),
            "sjlt" => Ok(SketchKind::Sjlt),
            "identity" => Ok(SketchKind::Identity),
            _ => Err(Error::UnknownSketchKind(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Gaussian(DMatrix<f64>),
    Srht {
        signs: Vec<f64>,
        sampled: Vec<usize>,
    },
    Sjlt {
        targets: Vec<usize>,
        signs: Vec<f64>,
    },
    Identity,
}

/// An immutable seeded sketch `S ∈ R^{k×n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchOperator {
    kind: SketchKind,
    rows: usize,
    cols: usize,
    seed: u64,
    repr: Repr,
}

fn rademacher<R: Rng>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

impl SketchOperator {
    /// Draws a `k×n` sketch of the given kind from `seed`.
    pub fn new(kind: SketchKind, k: usize, n: usize, seed: u64) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "sketch dimensions must be positive (k = {k}, n = {n})"
            )));
        }
        let mut rng = rng::stream(seed, streams::SKETCH);
        let repr = match kind {
            SketchKind::Gaussian => {
                let scale = 1.0 / (k as f64).sqrt();
                // column-major fill: column j holds the k draws for input row j
                let data: Vec<f64> = (0..k * n)
                    .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
                    .collect();
                Repr::Gaussian(DMatrix::from_vec(k, n, data))
            }
            SketchKind::Srht => {
                let n_pad = n.next_power_of_two();
                if k > n_pad {
                    return Err(Error::InvalidArgument(format!(
                        "SRHT samples without replacement: k = {k} exceeds padded length {n_pad}"
                    )));
                }
                let signs = (0..n_pad).map(|_| rademacher(&mut rng)).collect();
                let sampled = index::sample(&mut rng, n_pad, k).into_vec();
                Repr::Srht { signs, sampled }
            }
            SketchKind::Sjlt => {
                let mut targets = Vec::with_capacity(n);
                let mut signs = Vec::with_capacity(n);
                for _ in 0..n {
                    targets.push(rng.random_range(0..k));
                    signs.push(rademacher(&mut rng));
                }
                Repr::Sjlt { targets, signs }
            }
            SketchKind::Identity => {
                if k != n {
                    return Err(Error::InvalidArgument(format!(
                        "identity sketch requires k == n (k = {k}, n = {n})"
                    )));
                }
                Repr::Identity
            }
        };
        Ok(Self {
            kind,
            rows: k,
            cols: n,
            seed,
            repr,
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(SketchKind::Identity, n, n, 0)
    }

    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    /// Sketch size `k`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Input row count `n`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Zero-padded transform length for SRHT, `None` for other kinds.
    pub fn padded_len(&self) -> Option<usize> {
        match &self.repr {
            Repr::Srht { signs, .. } => Some(signs.len()),
            _ => None,
        }
    }

    /// Rows of the Walsh–Hadamard transform kept by an SRHT.
    pub fn sampled_rows(&self) -> Option<&[usize]> {
        match &self.repr {
            Repr::Srht { sampled, .. } => Some(sampled),
            _ => None,
        }
    }

    /// Computes `S·A` without forming `S` (except for Gaussian, which is dense).
    pub fn apply(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if a.nrows() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "apply_sketch (input rows)",
                expected: self.cols,
                found: a.nrows(),
            });
        }
        let m = a.ncols();
        let out = match &self.repr {
            Repr::Gaussian(s) => s * a,
            Repr::Identity => a.clone(),
            Repr::Srht { signs, sampled } => {
                let scale = 1.0 / (self.rows as f64).sqrt();
                let mut out = DMatrix::zeros(self.rows, m);
                let mut buf = vec![0.0; signs.len()];
                for j in 0..m {
                    let col = a.column(j);
                    for (i, b) in buf.iter_mut().enumerate() {
                        *b = if i < self.cols { signs[i] * col[i] } else { 0.0 };
                    }
                    fwht_in_place(&mut buf);
                    let mut out_col = out.column_mut(j);
                    for (r, &idx) in sampled.iter().enumerate() {
                        out_col[r] = buf[idx] * scale;
                    }
                }
                out
            }
            Repr::Sjlt { targets, signs } => {
                let mut out = DMatrix::zeros(self.rows, m);
                for j in 0..m {
                    let col = a.column(j);
                    let mut out_col = out.column_mut(j);
                    for i in 0..self.cols {
                        out_col[targets[i]] += signs[i] * col[i];
                    }
                }
                out
            }
        };
        Ok(out)
    }

    /// Dense `k×n` matrix of the operator (testing oracle).
    pub fn materialize(&self) -> Result<DMatrix<f64>> {
        if self.rows.saturating_mul(self.cols) > MATERIALIZE_LIMIT {
            return Err(Error::SizeGuard {
                rows: self.rows,
                cols: self.cols,
            });
        }
        match &self.repr {
            Repr::Gaussian(s) => Ok(s.clone()),
            _ => self.apply(&DMatrix::identity(self.cols, self.cols)),
        }
    }
}

/// Free-function form of [`SketchOperator::new`].
pub fn make_sketch(kind: SketchKind, k: usize, n: usize, seed: u64) -> Result<SketchOperator> {
    SketchOperator::new(kind, k, n, seed)
}

pub fn apply_sketch(sketch: &SketchOperator, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sketch.apply(a)
}
