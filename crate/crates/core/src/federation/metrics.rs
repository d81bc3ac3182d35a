//! Per-round instrumentation and communication accounting.

use std::fmt;

use nalgebra::DVector;

/// Bytes per communicated scalar (64-bit floats).
pub const BYTES_PER_SCALAR: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    FedNewton,
    FedNs,
    FedNdes,
    FedAvg,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::FedNewton => "fednewton",
            Algorithm::FedNs => "fedns",
            Algorithm::FedNdes => "fedndes",
            Algorithm::FedAvg => "fedavg",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One trace row.
///
/// State columns (`loss`, `optimal_gap`, `grad_norm`) describe `w_t`; step
/// columns describe the round that produced `w_t` and are empty on row 0.
/// For FedNDES `decrement` is the approximate Newton decrement `gᵀH̃⁻¹g`
/// computed at `w_{t−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: usize,
    pub loss: f64,
    /// `L(w_t) − L(w*)`; NaN when no reference optimum was supplied.
    pub optimal_gap: f64,
    pub grad_norm: f64,
    pub decrement: Option<f64>,
    pub step_size: Option<f64>,
    pub sketch_size: Option<usize>,
    pub scalars_up: usize,
    pub scalars_down: usize,
    pub wall_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Ran the requested number of rounds.
    Completed,
    /// FedNDES exit test fired at this round.
    Converged { round: usize },
    /// FedNDES hit its round budget without passing the exit test.
    MaxRoundsReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub algorithm: Algorithm,
    pub workers: usize,
    pub dim: usize,
    pub rows: Vec<RoundMetrics>,
    /// `w_t` for every row.
    pub iterates: Vec<DVector<f64>>,
    pub final_w: DVector<f64>,
    pub status: RunStatus,
}

impl RunTrace {
    pub fn gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.optimal_gap).collect()
    }

    pub fn last(&self) -> &RoundMetrics {
        self.rows.last().expect("a trace always holds round 0")
    }

    /// Row for round `t`, or the final row if the run stopped earlier.
    pub fn at_or_final(&self, t: usize) -> &RoundMetrics {
        self.rows.get(t).unwrap_or_else(|| self.last())
    }
}

/// Closed-form per-round upload count.
///
/// FedNewton `m(M² + M)`, FedNS `m(kM + M)`, FedAvg `mM`; a non-exit
/// FedNDES round also uploads one step size per worker, `m(kM + M + 1)`.
pub fn expected_scalars_up(algorithm: Algorithm, workers: usize, sketch_size: usize, dim: usize) -> usize {
    let per_worker = match algorithm {
        Algorithm::FedNewton => dim * dim + dim,
        Algorithm::FedNs => sketch_size * dim + dim,
        Algorithm::FedNdes => sketch_size * dim + dim + 1,
        Algorithm::FedAvg => dim,
    };
    workers * per_worker
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerRow {
    pub round: usize,
    pub scalars_up: usize,
    pub scalars_down: usize,
    pub cumulative_up: usize,
    pub cumulative_down: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerSummary {
    pub rows: Vec<LedgerRow>,
    pub total_up: usize,
    pub total_down: usize,
}

impl LedgerSummary {
    pub fn bytes_up(&self) -> usize {
        self.total_up * BYTES_PER_SCALAR
    }

    pub fn bytes_down(&self) -> usize {
        self.total_down * BYTES_PER_SCALAR
    }
}

pub fn communication_ledger(trace: &RunTrace) -> LedgerSummary {
    let mut rows = Vec::with_capacity(trace.rows.len());
    let (mut up, mut down) = (0, 0);
    for r in &trace.rows {
        up += r.scalars_up;
        down += r.scalars_down;
        rows.push(LedgerRow {
            round: r.round,
            scalars_up: r.scalars_up,
            scalars_down: r.scalars_down,
            cumulative_up: up,
            cumulative_down: down,
        });
    }
    LedgerSummary {
        rows,
        total_up: up,
        total_down: down,
    }
}
