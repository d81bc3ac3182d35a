//! Federated Newton-sketch optimization for regularized GLMs.
//!
//! Workers hold shards of the data and upload sketched square-root
//! Hessians `Υ_j = S_j B_j` plus gradients; the server solves with
//! `Σ_j weight_j Υ_jᵀΥ_j + λI`. See [`federation::Federation`] for the runs.

pub mod data;
pub mod error;
pub mod federation;
pub mod linalg;
pub mod objective;
pub mod rng;
pub mod sketch;

pub use data::{Dataset, LabeledData, PartitionPlan, PartitionStrategy, Shard};
pub use error::{Error, ParseError, ParseErrorKind, Result};
pub use federation::{
    Algorithm, ExitRule, FedAvgConfig, FedNdesConfig, FedNewtonConfig, FedNsConfig, Federation,
    RoundMetrics, RunStatus, RunTrace,
};
pub use objective::{effective_dimension, LossFamily, ModelState, Objective};
pub use sketch::{SketchKind, SketchOperator};
