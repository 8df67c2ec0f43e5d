#![allow(dead_code)]

use std::sync::Arc;

use contactkit::config::{ExperimentConfig, LatticeSection, RunSection};
use contactkit::{EventLog, ExperimentKind, Lattice, Point, RateSpec, ReplicaSeed, SiteId};

pub fn line(radius: u32) -> Arc<Lattice> {
    Arc::new(Lattice::ball(1, radius).unwrap())
}

pub fn pt(coords: &[i32]) -> Point {
    Point(coords.to_vec())
}

pub fn log(lattice: &Arc<Lattice>, lambda: f64, horizon: f64, root: u64, replica: u64) -> EventLog {
    EventLog::generate(lattice.clone(), &RateSpec::uniform(lambda), horizon, ReplicaSeed::new(root, replica)).unwrap()
}

/// Minimal config for batch tests; callers fill in kind sections.
pub fn config(kind: ExperimentKind, d: usize, radius: u32, lambda: f64, horizon: f64, replicas: usize) -> ExperimentConfig {
    ExperimentConfig {
        kind,
        seed: 11,
        lattice: LatticeSection { d, radius },
        rates: RateSpec::uniform(lambda),
        run: RunSection {
            horizon,
            replicas,
            max_attempts: replicas * 50,
            confidence: 0.95,
            bootstrap: 100,
            initial: None,
        },
        shape: None,
        theorem1: None,
        theorem2: None,
        sigma_tail: None,
        output: None,
    }
}

/// Infection paths found by explicit search over arrival states `(site, time)`.
///
/// A path arrives at `x` at time `a` (an arrow landing there, or the start).
/// From there it may take any arrow out of `x` fired before the first
/// recovery mark at `x` after `a`. The number of arrival states is bounded
/// by the number of arrows, so the search is exhaustive.
pub struct PathSearch<'a> {
    log: &'a EventLog,
}

impl<'a> PathSearch<'a> {
    pub fn new(log: &'a EventLog) -> Self {
        PathSearch { log }
    }

    fn next_recovery(&self, x: SiteId, after: f64) -> f64 {
        self.log.recovery_times(x).iter().copied().find(|&r| r > after).unwrap_or(f64::INFINITY)
    }

    /// Every arrival state reachable from `sources` at time `s`, up to time `t`.
    pub fn arrivals(&self, sources: &[SiteId], s: f64, t: f64) -> Vec<(SiteId, f64)> {
        let lattice = self.log.lattice();
        let mut seen: Vec<(SiteId, f64)> = sources.iter().map(|&x| (x, s)).collect();
        let mut stack = seen.clone();
        while let Some((x, a)) = stack.pop() {
            let dead = self.next_recovery(x, a);
            for dir in 0..lattice.degree() {
                let Some(y) = lattice.neighbor(x, dir) else { continue };
                for &time in self.log.arrow_times(x, dir) {
                    if time > a && time < dead && time <= t {
                        let state = (y, time);
                        if !seen.contains(&state) {
                            seen.push(state);
                            stack.push(state);
                        }
                    }
                }
            }
        }
        seen
    }

    /// Sites infected at time `t` starting from `sources` at time `s`.
    pub fn infected_at(&self, sources: &[SiteId], s: f64, t: f64) -> Vec<SiteId> {
        let mut out: Vec<SiteId> = self
            .arrivals(sources, s, t)
            .into_iter()
            .filter(|&(x, a)| self.next_recovery(x, a) > t)
            .map(|(x, _)| x)
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Earliest arrival at each site from `sources` at time 0.
    pub fn first_arrival(&self, sources: &[SiteId]) -> Vec<f64> {
        let mut first = vec![f64::INFINITY; self.log.lattice().len()];
        for (x, a) in self.arrivals(sources, 0.0, self.log.horizon()) {
            first[x.index()] = first[x.index()].min(a);
        }
        first
    }
}
