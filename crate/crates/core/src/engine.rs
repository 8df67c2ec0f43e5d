//! Replay of the contact process on a fixed [`EventLog`].
//!
//! All queries are single merged-time sweeps over the log with a dense
//! occupancy bitmap. Events strictly after the start time are applied in log
//! order: a recovery mark at `x` clears `x`, an arrow `x -> y` infects `y`
//! when `x` is infected and `y` lies in the box. An arrow from an infected
//! site that leaves the box is recorded as boundary contact.

use std::ops::ControlFlow;

use thiserror::Error;

use crate::events::{EventLog, RawEvent, RECOVERY};
use crate::lattice::{SiteId, OUTSIDE};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("time {t} exceeds the log horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },
    #[error("query time {to} precedes start time {from}")]
    TimeOrder { from: f64, to: f64 },
    #[error("site index {0} is not in the lattice")]
    UnknownSite(u32),
    #[error("start time must be finite and nonnegative, got {0}")]
    BadStart(f64),
}

/// A set of infected sites at a given time.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigurationSet {
    sites: Vec<SiteId>,
    time: f64,
}

impl ConfigurationSet {
    pub fn new(mut sites: Vec<SiteId>, time: f64) -> Self {
        sites.sort_unstable();
        sites.dedup();
        ConfigurationSet { sites, time }
    }

    pub fn singleton(site: SiteId, time: f64) -> Self {
        ConfigurationSet { sites: vec![site], time }
    }

    pub fn sites(&self) -> &[SiteId] {
        &self.sites
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, site: SiteId) -> bool {
        self.sites.binary_search(&site).is_ok()
    }

    pub fn is_subset(&self, other: &ConfigurationSet) -> bool {
        self.sites.iter().all(|s| other.contains(*s))
    }

    pub fn union(&self, other: &ConfigurationSet) -> ConfigurationSet {
        let mut sites = self.sites.clone();
        sites.extend_from_slice(&other.sites);
        ConfigurationSet::new(sites, self.time.max(other.time))
    }

    pub fn intersects(&self, other: &ConfigurationSet) -> bool {
        self.sites.iter().any(|s| other.contains(*s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Transition {
    Infect { site: u32, time: f64 },
    Recover { site: u32, time: f64 },
}

/// Running state of one sweep.
pub(crate) struct Sweep<'a> {
    log: &'a EventLog,
    infected: Vec<bool>,
    count: usize,
    next: usize,
    pub boundary_contact: bool,
    /// Time of the event that emptied the configuration.
    pub died_at: Option<f64>,
}

impl<'a> Sweep<'a> {
    pub fn start(log: &'a EventLog, sites: &[SiteId], time: f64) -> Result<Self, EngineError> {
        let n = log.lattice().len();
        let mut infected = vec![false; n];
        let mut count = 0;
        for s in sites {
            if s.index() >= n {
                return Err(EngineError::UnknownSite(s.0));
            }
            if !infected[s.index()] {
                infected[s.index()] = true;
                count += 1;
            }
        }
        Ok(Sweep { log, infected, count, next: log.first_after(time), boundary_contact: false, died_at: None })
    }

    #[inline]
    pub fn is_infected(&self, site: SiteId) -> bool {
        self.infected[site.index()]
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn infected_sites(&self) -> Vec<SiteId> {
        self.infected.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| SiteId(i as u32)).collect()
    }

    /// Apply every event with time `<= until`, reporting each state change.
    /// Stops early once the configuration is empty or the callback breaks.
    pub fn run<F>(&mut self, until: f64, mut on_change: F) -> ControlFlow<()>
    where
        F: FnMut(Transition) -> ControlFlow<()>,
    {
        let events: &[RawEvent] = self.log.raw();
        while self.count > 0 {
            let Some(e) = events.get(self.next) else { break };
            if e.time > until {
                break;
            }
            self.next += 1;
            if e.target == RECOVERY {
                let s = e.tag as usize;
                if self.infected[s] {
                    self.infected[s] = false;
                    self.count -= 1;
                    if self.count == 0 {
                        self.died_at = Some(e.time);
                    }
                    on_change(Transition::Recover { site: e.tag, time: e.time })?;
                }
            } else {
                let src = self.log.source_of(e) as usize;
                if !self.infected[src] {
                    continue;
                }
                if e.target == OUTSIDE {
                    self.boundary_contact = true;
                    continue;
                }
                let dst = e.target as usize;
                if !self.infected[dst] {
                    self.infected[dst] = true;
                    self.count += 1;
                    on_change(Transition::Infect { site: e.target, time: e.time })?;
                }
            }
        }
        ControlFlow::Continue(())
    }

    pub fn run_quiet(&mut self, until: f64) {
        let _ = self.run(until, |_| ControlFlow::Continue(()));
    }
}

fn check_window(log: &EventLog, from: f64, to: f64) -> Result<(), EngineError> {
    if !(from.is_finite() && from >= 0.0) {
        return Err(EngineError::BadStart(from));
    }
    if to > log.horizon() {
        return Err(EngineError::BeyondHorizon { t: to, horizon: log.horizon() });
    }
    if to < from {
        return Err(EngineError::TimeOrder { from, to });
    }
    Ok(())
}

/// The configuration at time `t` of the process started from `initial` at
/// `initial.time()`.
pub fn evolve(log: &EventLog, initial: &ConfigurationSet, t: f64) -> Result<ConfigurationSet, EngineError> {
    check_window(log, initial.time(), t)?;
    let mut sweep = Sweep::start(log, initial.sites(), initial.time())?;
    sweep.run_quiet(t);
    Ok(ConfigurationSet { sites: sweep.infected_sites(), time: t })
}

/// Whether an infection path leads from `(x, s)` to `(y, t)`.
pub fn reachable(log: &EventLog, source: (SiteId, f64), target: (SiteId, f64)) -> Result<bool, EngineError> {
    let (x, s) = source;
    let (y, t) = target;
    check_window(log, s, t)?;
    if y.index() >= log.lattice().len() {
        return Err(EngineError::UnknownSite(y.0));
    }
    let mut sweep = Sweep::start(log, &[x], s)?;
    sweep.run_quiet(t);
    Ok(sweep.is_infected(y))
}

/// Death time of a single-site infection, or censoring at the horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Extinction {
    Died(f64),
    /// Still alive at the horizon.
    Censored,
}

impl Extinction {
    pub fn time(self) -> Option<f64> {
        match self {
            Extinction::Died(t) => Some(t),
            Extinction::Censored => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchFate {
    pub extinction: Extinction,
    /// The branch fired an arrow out of the box, so its fate may differ from
    /// the infinite-lattice one.
    pub boundary_contact: bool,
    /// Number of infected sites at the horizon (0 when it died).
    pub alive_at_horizon: usize,
}

/// `sup{r <= T : (x, s) ~> Z^d x {r}}` for the infection started at `(x, s)`.
pub fn extinction_time(log: &EventLog, seed: (SiteId, f64)) -> Result<BranchFate, EngineError> {
    let (x, s) = seed;
    check_window(log, s, log.horizon())?;
    let mut sweep = Sweep::start(log, &[x], s)?;
    sweep.run_quiet(log.horizon());
    let extinction = match sweep.died_at {
        Some(t) => Extinction::Died(t),
        None => Extinction::Censored,
    };
    Ok(BranchFate { extinction, boundary_contact: sweep.boundary_contact, alive_at_horizon: sweep.count() })
}
