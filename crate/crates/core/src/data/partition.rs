//! Splitting a dataset into disjoint worker shards.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma};

use super::{Dataset, LabeledData};
use crate::error::{Error, Result};
use crate::rng::{self, streams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionStrategy {
    /// Seeded shuffle, then contiguous blocks whose sizes differ by at most one.
    Iid,
    /// Per-class worker proportions drawn from `Dirichlet(alpha·1_m)`.
    LabelSkew { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionPlan {
    pub strategy: PartitionStrategy,
    pub workers: usize,
    pub seed: u64,
}

impl PartitionPlan {
    pub fn iid(workers: usize, seed: u64) -> Self {
        Self {
            strategy: PartitionStrategy::Iid,
            workers,
            seed,
        }
    }

    pub fn label_skew(workers: usize, alpha: f64, seed: u64) -> Self {
        Self {
            strategy: PartitionStrategy::LabelSkew { alpha },
            workers,
            seed,
        }
    }
}

/// One worker's local data `D_j` with federation weight `n_j / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Shard {
    pub worker_id: usize,
    pub weight: f64,
    /// Row indices into the source dataset, ascending.
    pub sample_ids: Vec<usize>,
    features: DMatrix<f64>,
    labels: DVector<f64>,
}

impl Shard {
    pub fn new(
        worker_id: usize,
        features: DMatrix<f64>,
        labels: DVector<f64>,
        weight: f64,
    ) -> Result<Self> {
        if labels.len() != features.nrows() {
            return Err(Error::DimensionMismatch {
                context: "shard labels",
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        if features.nrows() == 0 {
            return Err(Error::InvalidArgument(format!("shard {worker_id} is empty")));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "shard weight must be positive, got {weight}"
            )));
        }
        let sample_ids = (0..features.nrows()).collect();
        Ok(Self {
            worker_id,
            weight,
            sample_ids,
            features,
            labels,
        })
    }
}

impl LabeledData for Shard {
    fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    fn labels(&self) -> &DVector<f64> {
        &self.labels
    }
}

fn build_shards(data: &Dataset, mut groups: Vec<Vec<usize>>) -> Vec<Shard> {
    let total = data.len() as f64;
    groups
        .iter_mut()
        .enumerate()
        .map(|(worker_id, ids)| {
            ids.sort_unstable();
            let (features, labels) = data.select(ids);
            Shard {
                worker_id,
                weight: ids.len() as f64 / total,
                sample_ids: std::mem::take(ids),
                features,
                labels,
            }
        })
        .collect()
}

fn iid_groups(n: usize, workers: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng::stream(seed, streams::PARTITION));
    let base = n / workers;
    let extra = n % workers;
    let mut groups = Vec::with_capacity(workers);
    let mut start = 0;
    for j in 0..workers {
        let len = base + usize::from(j < extra);
        groups.push(ids[start..start + len].to_vec());
        start += len;
    }
    groups
}

/// Normalized `Gamma(alpha, 1)` draws; uniform if every draw underflows.
fn dirichlet<R: rand::Rng>(rng: &mut R, alpha: f64, workers: usize) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    let draws: Vec<f64> = (0..workers).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 {
        draws.iter().map(|g| g / sum).collect()
    } else {
        vec![1.0 / workers as f64; workers]
    }
}

/// Class `c` (classes ordered by label value) draws its proportions from
/// `rng::stream(seed, streams::LABEL_SKEW + c)`, then shuffles its members
/// with the same generator and cuts them at `round(n_c·cumsum(p))`. Empty
/// workers are then filled by moving one sample at a time from the largest
/// shard (lowest worker id on ties).
fn label_skew_groups(data: &Dataset, workers: usize, alpha: f64, seed: u64) -> Vec<Vec<usize>> {
    let mut classes: Vec<f64> = data.labels().iter().copied().collect();
    classes.sort_by(f64::total_cmp);
    classes.dedup();

    let mut groups = vec![Vec::new(); workers];
    for (c, &class) in classes.iter().enumerate() {
        let mut members: Vec<usize> = data
            .labels()
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == class)
            .map(|(i, _)| i)
            .collect();
        let mut rng = rng::stream(seed, streams::LABEL_SKEW + c as u64);
        let p = dirichlet(&mut rng, alpha, workers);
        members.shuffle(&mut rng);
        let n_c = members.len() as f64;
        let mut cum = 0.0;
        let mut start = 0;
        for (j, pj) in p.iter().enumerate() {
            cum += pj;
            let end = if j + 1 == workers {
                members.len()
            } else {
                ((n_c * cum).round() as usize).clamp(start, members.len())
            };
            groups[j].extend_from_slice(&members[start..end]);
            start = end;
        }
    }

    while let Some(empty) = groups.iter().position(Vec::is_empty) {
        let donor = (0..workers)
            .max_by(|&a, &b| groups[a].len().cmp(&groups[b].len()).then(b.cmp(&a)))
            .expect("at least one worker");
        groups[donor].sort_unstable();
        let moved = groups[donor].pop().expect("donor holds at least two samples");
        groups[empty].push(moved);
    }
    groups
}

/// Splits `data` into `plan.workers` disjoint, non-empty shards covering
/// every sample exactly once.
pub fn partition(data: &Dataset, plan: &PartitionPlan) -> Result<Vec<Shard>> {
    let n = data.len();
    if plan.workers == 0 {
        return Err(Error::InvalidArgument("partition needs at least one worker".into()));
    }
    if plan.workers > n {
        return Err(Error::TooManyWorkers {
            workers: plan.workers,
            samples: n,
        });
    }
    let groups = match plan.strategy {
        PartitionStrategy::Iid => iid_groups(n, plan.workers, plan.seed),
        PartitionStrategy::LabelSkew { alpha } => {
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "Dirichlet concentration must be positive, got {alpha}"
                )));
            }
            label_skew_groups(data, plan.workers, alpha, plan.seed)
        }
    };
    Ok(build_shards(data, groups))
}
