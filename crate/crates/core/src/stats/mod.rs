//! Conditioned replica batches and the estimators built on them.
//!
//! Every estimator reads only accepted replicas (alive at the horizon), so
//! probabilities and expectations are taken under survival conditioning.

mod batch;
mod estimators;
mod interval;

use thiserror::Error;

pub use batch::{
    rerun_replica, run_replicas, run_replicas_with_plan, BatchContext, BatchCounts, ReplicaBatch, ReplicaOutcome,
};
pub use estimators::{
    estimate_mu, estimate_rho, fit_stretched_exponent, sigma_gap_tail, tail_curve, theorem1_order_stats,
    theorem2_moment_stats, DistanceMoment, GammaFit, MomentStats, MuReport, MuRow, NormTail, OrderRow, OrderStats,
    PairMoment, RhoEstimate, SiteTail, TailCurve, TailPoint, MIN_EXCEEDANCES,
};
pub use interval::{
    kolmogorov_survival, ks_exponential, mean, percentile_interval, std_err, wilson_interval, wilson_interval_z, wilson_score,
    z_for_confidence, Interval, KsResult, THREE_SIGMA,
};

use crate::config::Violation;
use crate::events::LogError;
use crate::hitting::HittingError;
use crate::lattice::{LatticeError, Point};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("invalid configuration: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidConfig(Vec<Violation>),
    #[error(
        "acceptance cap exceeded: {accepted} accepted of {attempts} attempts (rejection rate {rejection_rate:.4}); \
         lambda may be subcritical or the horizon/box too small"
    )]
    AcceptanceCapExceeded { attempts: u64, accepted: u64, rejection_rate: f64, batch: Box<ReplicaBatch> },
    #[error("batch has no usable replicas")]
    EmptyBatch,
    #[error("site {0} lies outside the box")]
    SiteOutsideBox(Point),
    #[error("site {0} was not tracked by this batch")]
    SiteNotTracked(Point),
    #[error("pair ({0}, {0}) has x = y")]
    DegeneratePair(Point),
    #[error("tail exponent fit undefined: no grid point has an estimate strictly between 0 and 1 with enough exceedances")]
    FitUndefined,
    #[error("invalid counts: {successes} successes of {trials} trials")]
    InvalidCounts { successes: u64, trials: u64 },
    #[error("confidence must lie in (0, 1), got {0}")]
    BadConfidence(f64),
    #[error("{0}")]
    BadArgument(String),
    #[error("batches come from different experiments")]
    IncompatibleBatches,
    #[error("replica {0} appears twice")]
    DuplicateReplica(u64),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Hitting(#[from] HittingError),
}
