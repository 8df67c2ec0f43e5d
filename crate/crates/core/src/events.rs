//! The graphical representation of one replica: recovery marks per site and
//! transmission arrows per directed edge inside a finite space-time box.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Lattice, SiteId, OUTSIDE};
use crate::rates::{RateError, RateSpec};
use crate::rng::{poisson_times, StreamKey};

#[derive(Debug, Error, PartialEq)]
pub enum LogError {
    #[error("horizon must be finite and positive, got {0}")]
    BadHorizon(f64),
    #[error(transparent)]
    Rates(#[from] RateError),
    #[error("event times for {object} are not strictly increasing inside (0, {horizon}]")]
    BadEventTimes { object: String, horizon: f64 },
    #[error("site index {0} is not in the lattice")]
    UnknownSite(u32),
    #[error("direction {dir} out of range for dimension {dim}")]
    BadDirection { dir: usize, dim: usize },
}

/// Identifies the random streams of one replica.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReplicaSeed {
    pub root: u64,
    pub replica: u64,
}

impl ReplicaSeed {
    pub fn new(root: u64, replica: u64) -> Self {
        ReplicaSeed { root, replica }
    }

    fn key(self) -> StreamKey {
        StreamKey::root(self.root).with(self.replica)
    }
}

const RECOVERY_STREAM: u64 = 1;
const ARROW_STREAM: u64 = 2;
pub(crate) const RECOVERY: u32 = u32::MAX - 1;

/// Compact merged event. `tag` is the site for recoveries and the directed
/// edge index for arrows; `target` is [`RECOVERY`], [`OUTSIDE`] or a site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct RawEvent {
    pub time: f64,
    pub tag: u32,
    pub target: u32,
}

/// One event of the log in public form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Event {
    Recovery { time: f64, site: SiteId },
    /// `to` is `None` when the arrow leaves the box and is discarded.
    Arrow { time: f64, from: SiteId, dir: usize, to: Option<SiteId> },
}

impl Event {
    pub fn time(&self) -> f64 {
        match *self {
            Event::Recovery { time, .. } | Event::Arrow { time, .. } => time,
        }
    }
}

/// Immutable after construction; share freely across threads.
#[derive(Clone, Debug)]
pub struct EventLog {
    lattice: Arc<Lattice>,
    horizon: f64,
    seed: Option<ReplicaSeed>,
    recoveries: Vec<Vec<f64>>,
    arrows: Vec<Vec<f64>>,
    events: Vec<RawEvent>,
}

impl EventLog {
    /// Sample the log of replica `seed` on `(0, horizon]`.
    ///
    /// Each site's recovery clock and each directed edge's arrow clock is
    /// keyed by the object's coordinates, so the same object has the same
    /// marks whatever the box radius, and a longer horizon only appends.
    pub fn generate(
        lattice: Arc<Lattice>,
        rates: &RateSpec,
        horizon: f64,
        seed: ReplicaSeed,
    ) -> Result<Self, LogError> {
        check_horizon(horizon)?;
        rates.validate()?;
        let key = seed.key();
        let rec_key = key.with(RECOVERY_STREAM);
        let arrow_key = key.with(ARROW_STREAM);
        let deg = lattice.degree();

        let mut recoveries = Vec::with_capacity(lattice.len());
        let mut arrows = Vec::with_capacity(lattice.num_directed_edges());
        for p in lattice.points() {
            recoveries.push(poisson_times(rec_key.with_point(p.coords()).stream(), 1.0, horizon));
            let site_key = arrow_key.with_point(p.coords());
            for dir in 0..deg {
                let rate = rates.edge_rate(p, dir);
                arrows.push(poisson_times(site_key.with(dir as u64).stream(), rate, horizon));
            }
        }
        Ok(Self::assemble(lattice, horizon, Some(seed), recoveries, arrows))
    }

    /// Build a log from explicit marks. Objects not listed carry no events.
    pub fn from_marks(
        lattice: Arc<Lattice>,
        horizon: f64,
        recovery_marks: Vec<(SiteId, Vec<f64>)>,
        arrow_marks: Vec<(SiteId, usize, Vec<f64>)>,
    ) -> Result<Self, LogError> {
        check_horizon(horizon)?;
        let deg = lattice.degree();
        let mut recoveries = vec![Vec::new(); lattice.len()];
        let mut arrows = vec![Vec::new(); lattice.num_directed_edges()];
        for (site, times) in recovery_marks {
            if site.index() >= lattice.len() {
                return Err(LogError::UnknownSite(site.0));
            }
            recoveries[site.index()].extend(times);
            check_times(&recoveries[site.index()], horizon, || format!("recoveries at {}", lattice.point(site)))?;
        }
        for (site, dir, times) in arrow_marks {
            if site.index() >= lattice.len() {
                return Err(LogError::UnknownSite(site.0));
            }
            if dir >= deg {
                return Err(LogError::BadDirection { dir, dim: lattice.dim() });
            }
            let edge = site.index() * deg + dir;
            arrows[edge].extend(times);
            check_times(&arrows[edge], horizon, || format!("arrows from {} dir {dir}", lattice.point(site)))?;
        }
        Ok(Self::assemble(lattice, horizon, None, recoveries, arrows))
    }

    fn assemble(
        lattice: Arc<Lattice>,
        horizon: f64,
        seed: Option<ReplicaSeed>,
        recoveries: Vec<Vec<f64>>,
        arrows: Vec<Vec<f64>>,
    ) -> Self {
        let deg = lattice.degree();
        let total = recoveries.iter().map(Vec::len).sum::<usize>() + arrows.iter().map(Vec::len).sum::<usize>();
        let mut events = Vec::with_capacity(total);
        for (site, times) in recoveries.iter().enumerate() {
            events.extend(times.iter().map(|&time| RawEvent { time, tag: site as u32, target: RECOVERY }));
        }
        for (edge, times) in arrows.iter().enumerate() {
            let target = lattice.raw_neighbor(edge);
            events.extend(times.iter().map(|&time| RawEvent { time, tag: edge as u32, target }));
        }
        // ties are broken by a deterministic event id
        let id = |e: &RawEvent| -> u64 {
            if e.target == RECOVERY {
                e.tag as u64 * (deg as u64 + 1)
            } else {
                let site = e.tag as u64 / deg as u64;
                site * (deg as u64 + 1) + 1 + e.tag as u64 % deg as u64
            }
        };
        events.sort_unstable_by(|a, b| a.time.total_cmp(&b.time).then_with(|| id(a).cmp(&id(b))));
        EventLog { lattice, horizon, seed, recoveries, arrows, events }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `None` for hand-built logs.
    pub fn seed(&self) -> Option<ReplicaSeed> {
        self.seed
    }

    pub fn recovery_times(&self, site: SiteId) -> &[f64] {
        &self.recoveries[site.index()]
    }

    pub fn arrow_times(&self, site: SiteId, dir: usize) -> &[f64] {
        &self.arrows[site.index() * self.lattice.degree() + dir]
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    /// All events in replay order.
    pub fn events(&self) -> impl Iterator<Item = Event> + '_ {
        let deg = self.lattice.degree();
        self.events.iter().map(move |e| {
            if e.target == RECOVERY {
                Event::Recovery { time: e.time, site: SiteId(e.tag) }
            } else {
                Event::Arrow {
                    time: e.time,
                    from: SiteId(e.tag / deg as u32),
                    dir: e.tag as usize % deg,
                    to: (e.target != OUTSIDE).then_some(SiteId(e.target)),
                }
            }
        })
    }

    pub(crate) fn raw(&self) -> &[RawEvent] {
        &self.events
    }

    #[inline]
    pub(crate) fn source_of(&self, e: &RawEvent) -> u32 {
        e.tag / self.lattice.degree() as u32
    }

    /// Index of the first event strictly after `t`.
    pub(crate) fn first_after(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.time <= t)
    }

    /// Bitwise equality of all event data.
    pub fn bit_identical(&self, other: &EventLog) -> bool {
        let same = |a: &[Vec<f64>], b: &[Vec<f64>]| {
            a.len() == b.len()
                && a.iter().zip(b).all(|(x, y)| {
                    x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits())
                })
        };
        self.horizon.to_bits() == other.horizon.to_bits()
            && *self.lattice == *other.lattice
            && same(&self.recoveries, &other.recoveries)
            && same(&self.arrows, &other.arrows)
    }
}

fn check_horizon(horizon: f64) -> Result<(), LogError> {
    if horizon.is_finite() && horizon > 0.0 {
        Ok(())
    } else {
        Err(LogError::BadHorizon(horizon))
    }
}

fn check_times(times: &[f64], horizon: f64, object: impl Fn() -> String) -> Result<(), LogError> {
    let in_range = times.iter().all(|&t| t > 0.0 && t <= horizon);
    let increasing = times.windows(2).all(|w| w[0] < w[1]);
    if in_range && increasing {
        Ok(())
    } else {
        Err(LogError::BadEventTimes { object: object(), horizon })
    }
}
