//! Conditioned replica batches.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::config::{ExperimentConfig, TrackPlan};
use crate::events::{EventLog, ReplicaSeed};
use crate::hitting::{
    essential_hitting_many, hitting_times, survival_proxy, EssentialRecord, HittingRecord, SurvivalMode,
    SurvivalVerdict, Verdict,
};
use crate::lattice::{Lattice, Point, SiteId};

/// Horizon of the cheap first pass. A replica that dies inside it dies
/// identically on the full log, whose prefix it is.
const PROBE_HORIZON: f64 = 8.0;

/// Everything recorded for one replica. Hitting and essential records exist
/// only for accepted replicas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaOutcome {
    pub seed: ReplicaSeed,
    pub verdict: SurvivalVerdict,
    pub hitting: Option<HittingRecord>,
    pub essential: Option<Vec<EssentialRecord>>,
}

impl ReplicaOutcome {
    pub fn id(&self) -> u64 {
        self.seed.replica
    }

    pub fn accepted(&self) -> bool {
        self.verdict.verdict == Verdict::Survives
    }
}

/// Resolved run parameters shared by all replicas of a batch.
#[derive(Clone, Debug)]
pub struct BatchContext {
    pub config: ExperimentConfig,
    pub plan: TrackPlan,
    pub lattice: Arc<Lattice>,
    pub initial: Vec<SiteId>,
    pub origin: SiteId,
    pub hitting_sites: Vec<SiteId>,
    pub essential_sites: Vec<SiteId>,
}

impl BatchContext {
    pub fn new(config: &ExperimentConfig, plan: &TrackPlan) -> Result<Self, StatsError> {
        let violations = config.validate();
        if !violations.is_empty() {
            return Err(StatsError::InvalidConfig(violations));
        }
        let lattice = Arc::new(config.build_lattice()?);
        let resolve = |pts: &[Point]| -> Result<Vec<SiteId>, StatsError> {
            pts.iter().map(|p| lattice.require_site(p).map_err(|_| StatsError::SiteOutsideBox(p.clone()))).collect()
        };
        let initial = resolve(&config.initial_points())?;
        let hitting_sites = resolve(&plan.hitting)?;
        let essential_sites = resolve(&plan.essential)?;
        let origin = lattice.origin().expect("balls contain the origin");
        Ok(BatchContext {
            config: config.clone(),
            plan: plan.clone(),
            lattice,
            initial,
            origin,
            hitting_sites,
            essential_sites,
        })
    }

    /// Simulate replica `id` from scratch.
    pub fn run_one(&self, id: u64) -> Result<ReplicaOutcome, StatsError> {
        let seed = ReplicaSeed::new(self.config.seed, id);
        let horizon = self.config.run.horizon;
        let rates = &self.config.rates;
        if horizon > PROBE_HORIZON {
            let probe = EventLog::generate(self.lattice.clone(), rates, PROBE_HORIZON, seed)?;
            let verdict = survival_proxy(&probe, (self.origin, 0.0), SurvivalMode::Horizon)?;
            if verdict.verdict != Verdict::Survives {
                return Ok(ReplicaOutcome { seed, verdict, hitting: None, essential: None });
            }
        }
        let log = EventLog::generate(self.lattice.clone(), rates, horizon, seed)?;
        let verdict = survival_proxy(&log, (self.origin, 0.0), SurvivalMode::Horizon)?;
        if verdict.verdict != Verdict::Survives {
            return Ok(ReplicaOutcome { seed, verdict, hitting: None, essential: None });
        }
        let hitting = hitting_times(&log, &self.initial, &self.hitting_sites)?;
        let essential = essential_hitting_many(&log, &self.initial, &self.essential_sites)?;
        Ok(ReplicaOutcome { seed, verdict, hitting: Some(hitting), essential: Some(essential) })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchCounts {
    pub accepted: u64,
    pub rejected: u64,
    pub ambiguous: u64,
}

impl BatchCounts {
    pub fn total(&self) -> u64 {
        self.accepted + self.rejected + self.ambiguous
    }

    fn add(&mut self, v: Verdict) {
        match v {
            Verdict::Survives => self.accepted += 1,
            Verdict::Dies => self.rejected += 1,
            Verdict::Ambiguous => self.ambiguous += 1,
        }
    }
}

/// Replica outcomes kept sorted by replica id, so every statistic is a
/// function of the set of replicas and not of their arrival order.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicaBatch {
    context: Arc<BatchContext>,
    replicas: Vec<ReplicaOutcome>,
    counts: BatchCounts,
}

impl ReplicaBatch {
    pub fn new(context: Arc<BatchContext>, mut replicas: Vec<ReplicaOutcome>) -> Result<Self, StatsError> {
        replicas.sort_by_key(ReplicaOutcome::id);
        if let Some(w) = replicas.windows(2).find(|w| w[0].id() == w[1].id()) {
            return Err(StatsError::DuplicateReplica(w[0].id()));
        }
        let mut counts = BatchCounts::default();
        for r in &replicas {
            counts.add(r.verdict.verdict);
        }
        Ok(ReplicaBatch { context, replicas, counts })
    }

    pub fn context(&self) -> &BatchContext {
        &self.context
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.context.config
    }

    pub fn lattice(&self) -> &Lattice {
        &self.context.lattice
    }

    pub fn counts(&self) -> BatchCounts {
        self.counts
    }

    pub fn replicas(&self) -> &[ReplicaOutcome] {
        &self.replicas
    }

    /// Accepted (surviving) replicas in id order.
    pub fn accepted(&self) -> impl Iterator<Item = &ReplicaOutcome> + '_ {
        self.replicas.iter().filter(|r| r.accepted())
    }

    pub fn boundary_contact_fraction(&self) -> f64 {
        if self.replicas.is_empty() {
            return 0.0;
        }
        self.replicas.iter().filter(|r| r.verdict.boundary_contact).count() as f64 / self.replicas.len() as f64
    }

    /// Pool two batches of the same experiment. Commutative and associative.
    pub fn merge(&self, other: &ReplicaBatch) -> Result<ReplicaBatch, StatsError> {
        let same = self.context.config == other.context.config && self.context.plan == other.context.plan;
        if !same {
            return Err(StatsError::IncompatibleBatches);
        }
        let mut all = self.replicas.clone();
        all.extend(other.replicas.iter().cloned());
        ReplicaBatch::new(self.context.clone(), all)
    }

    /// Position of `p` in the hitting plan.
    pub(crate) fn hitting_slot(&self, p: &Point) -> Result<usize, StatsError> {
        if !self.lattice().contains(p) {
            return Err(StatsError::SiteOutsideBox(p.clone()));
        }
        self.context.plan.hitting.iter().position(|q| q == p).ok_or_else(|| StatsError::SiteNotTracked(p.clone()))
    }

    pub(crate) fn essential_slot(&self, p: &Point) -> Result<usize, StatsError> {
        if !self.lattice().contains(p) {
            return Err(StatsError::SiteOutsideBox(p.clone()));
        }
        self.context.plan.essential.iter().position(|q| q == p).ok_or_else(|| StatsError::SiteNotTracked(p.clone()))
    }
}

/// Run replicas with ids 0, 1, 2, ... until the accepted count reaches the
/// target, using the config's own tracking plan.
pub fn run_replicas(config: &ExperimentConfig) -> Result<ReplicaBatch, StatsError> {
    run_replicas_with_plan(config, &config.plan())
}

/// As [`run_replicas`] with an explicit tracking plan.
///
/// Replicas are simulated in parallel in chunks whose size depends only on
/// counts so far; outcomes are consumed in id order and everything past the
/// replica that completes the target is discarded, so the batch does not
/// depend on the thread count.
pub fn run_replicas_with_plan(config: &ExperimentConfig, plan: &TrackPlan) -> Result<ReplicaBatch, StatsError> {
    let ctx = Arc::new(BatchContext::new(config, plan)?);
    let target = config.run.replicas as u64;
    let cap = config.run.max_attempts as u64;
    let mut outcomes = Vec::new();
    let mut counts = BatchCounts::default();
    let mut next_id = 0u64;
    while counts.accepted < target && next_id < cap {
        let remaining = target - counts.accepted;
        let rate = if counts.total() == 0 { 0.5 } else { (counts.accepted as f64 / counts.total() as f64).max(0.02) };
        let chunk = ((remaining as f64 / rate).ceil() as u64).clamp(64, 1 << 16).min(cap - next_id);
        let results: Vec<Result<ReplicaOutcome, StatsError>> =
            (next_id..next_id + chunk).into_par_iter().map(|id| ctx.run_one(id)).collect();
        next_id += chunk;
        for r in results {
            let r = r?;
            counts.add(r.verdict.verdict);
            outcomes.push(r);
            if counts.accepted == target {
                break;
            }
        }
    }
    let batch = ReplicaBatch::new(ctx, outcomes)?;
    if counts.accepted < target {
        let total = counts.total().max(1) as f64;
        return Err(StatsError::AcceptanceCapExceeded {
            attempts: counts.total(),
            accepted: counts.accepted,
            rejection_rate: (counts.rejected + counts.ambiguous) as f64 / total,
            batch: Box::new(batch),
        });
    }
    Ok(batch)
}

/// Re-run one replica of an experiment in isolation.
pub fn rerun_replica(config: &ExperimentConfig, id: u64) -> Result<ReplicaOutcome, StatsError> {
    BatchContext::new(config, &config.plan())?.run_one(id)
}

impl PartialEq for BatchContext {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.plan == other.plan
    }
}
