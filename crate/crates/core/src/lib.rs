//! Monte Carlo laboratory for the supercritical contact process on `Z^d`.
//!
//! A replica is a seeded graphical representation (recovery marks and
//! infection arrows) inside a finite 1-norm ball with a killing boundary.
//! Every quantity is a deterministic function of that log:
//!
//! * [`engine`] evolves configurations and answers reachability queries.
//! * [`hitting`] computes first hitting times, essential hitting times and
//!   the survival verdict used for conditioning.
//! * [`stats`] runs conditioned replica batches and builds estimators with
//!   confidence intervals.
//! * [`oracle`] solves the process exactly on very small site sets.

pub mod config;
pub mod engine;
pub mod events;
pub mod hitting;
pub mod lattice;
pub mod oracle;
pub mod rates;
pub mod rng;
pub mod stats;

pub use config::{ExperimentConfig, ExperimentKind, TrackPlan, Violation};
pub use engine::{evolve, extinction_time, reachable, BranchFate, ConfigurationSet, EngineError, Extinction};
pub use events::{Event, EventLog, LogError, ReplicaSeed};
pub use hitting::{
    essential_hitting, essential_hitting_from, essential_hitting_many, hitting_times, survival_proxy, EssentialFlags,
    EssentialRecord, HittingError, HittingRecord, Sigma, SurvivalMode, SurvivalVerdict, Verdict,
};
pub use lattice::{Lattice, LatticeError, Point, SiteId};
pub use oracle::{build_subset_chain, OracleError, SubsetChain, SubsetDistribution};
pub use rates::{RateError, RateSpec};
pub use stats::{ReplicaBatch, ReplicaOutcome, StatsError};
