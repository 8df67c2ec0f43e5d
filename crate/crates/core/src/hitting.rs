//! Hitting times, essential hitting times and survival verdicts on a fixed
//! event log.
//!
//! The essential hitting time of `x` is built from the renewal sequence
//!
//! ```text
//! u_0 = v_0 = 0
//! u_{k+1} = inf { t >= v_k : x in xi^A_t }
//! v_{k+1} = death time of the infection started at (x, u_{k+1})
//! ```
//!
//! stopping at the first `k` whose branch is still alive at the horizon;
//! then `sigma(x) = u_K`. Alive-at-horizon stands in for survival forever.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{extinction_time, EngineError, Extinction, Sweep, Transition};
use crate::events::EventLog;
use crate::lattice::SiteId;

#[derive(Debug, Error, PartialEq)]
pub enum HittingError {
    #[error("initial set must be nonempty")]
    EmptyInitialSet,
    #[error("initial set must contain the origin")]
    OriginNotInInitialSet,
    #[error("site index {0} is not in the lattice")]
    UnknownSite(u32),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// First infection times `t_A(x)` for a list of tracked sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingRecord {
    pub initial: Vec<SiteId>,
    pub tracked: Vec<SiteId>,
    /// Aligned with `tracked`; `f64::INFINITY` when not hit before the horizon.
    pub times: Vec<f64>,
    pub horizon: f64,
}

impl HittingRecord {
    pub fn time(&self, site: SiteId) -> Option<f64> {
        self.tracked.iter().position(|&s| s == site).map(|i| self.times[i])
    }

    /// Tracked part of the once-infected set `H_t = {x : t(x) <= t}`.
    pub fn once_infected(&self, t: f64) -> Vec<SiteId> {
        self.tracked.iter().zip(&self.times).filter(|(_, &h)| h <= t).map(|(&s, _)| s).collect()
    }
}

fn check_sites(log: &EventLog, sites: &[SiteId]) -> Result<(), HittingError> {
    let n = log.lattice().len();
    match sites.iter().find(|s| s.index() >= n) {
        Some(s) => Err(HittingError::UnknownSite(s.0)),
        None => Ok(()),
    }
}

/// First infection time of every tracked site for the process started from
/// `initial` at time 0, in one pass over the log.
pub fn hitting_times(log: &EventLog, initial: &[SiteId], tracked: &[SiteId]) -> Result<HittingRecord, HittingError> {
    if initial.is_empty() {
        return Err(HittingError::EmptyInitialSet);
    }
    check_sites(log, initial)?;
    check_sites(log, tracked)?;
    let mut first = vec![f64::INFINITY; log.lattice().len()];
    let mut wanted = vec![false; log.lattice().len()];
    for s in tracked {
        wanted[s.index()] = true;
    }
    let mut remaining = tracked.len();
    for s in initial {
        if first[s.index()].is_infinite() {
            first[s.index()] = 0.0;
            if wanted[s.index()] {
                wanted[s.index()] = false;
                remaining -= 1;
            }
        }
    }
    let mut sweep = Sweep::start(log, initial, 0.0)?;
    if remaining > 0 {
        let _ = sweep.run(log.horizon(), |tr| {
            if let Transition::Infect { site, time } = tr {
                let s = site as usize;
                if first[s].is_infinite() {
                    first[s] = time;
                    if wanted[s] {
                        wanted[s] = false;
                        remaining -= 1;
                        if remaining == 0 {
                            return ControlFlow::Break(());
                        }
                    }
                }
            }
            ControlFlow::Continue(())
        });
    }
    Ok(HittingRecord {
        initial: initial.to_vec(),
        tracked: tracked.to_vec(),
        times: tracked.iter().map(|s| first[s.index()]).collect(),
        horizon: log.horizon(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Sigma {
    Found(f64),
    /// The horizon ran out before a branch alive at the horizon was found.
    CensoredAtHorizon,
    /// The site is never reached again because the process itself died.
    Undefined,
}

impl Sigma {
    pub fn value(self) -> Option<f64> {
        match self {
            Sigma::Found(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EssentialFlags {
    pub branch_censored: bool,
    pub boundary_contact: bool,
    pub never_hit: bool,
    pub global_death: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssentialRecord {
    pub site: SiteId,
    /// Infection times that started a branch, `u_1 < u_2 < ...`.
    pub u: Vec<f64>,
    /// Death times of all branches that died, `v_1 < v_2 < ...`.
    pub v: Vec<f64>,
    /// Number of branches tried; equals `u.len()`.
    pub k: usize,
    pub sigma: Sigma,
    pub flags: EssentialFlags,
}

impl EssentialRecord {
    /// `sigma - t` when sigma was found.
    pub fn gap(&self) -> Option<f64> {
        self.sigma.value().map(|s| s - self.u[0])
    }

    /// The ordering constraints of the renewal sequence.
    pub fn is_well_ordered(&self) -> bool {
        let pairs_ok = self.u.iter().zip(&self.v).all(|(u, v)| v > u);
        let renew_ok = self.v.iter().zip(self.u.iter().skip(1)).all(|(v, u_next)| u_next >= v);
        let len_ok = self.k == self.u.len() && self.v.len() + 1 >= self.u.len() && self.v.len() <= self.u.len();
        let sigma_ok = match self.sigma {
            Sigma::Found(s) => {
                self.v.len() + 1 == self.u.len()
                    && Some(&s) == self.u.last()
                    && s >= self.u[0]
                    && ((s == self.u[0]) == (self.k == 1))
            }
            _ => true,
        };
        pairs_ok && renew_ok && len_ok && sigma_ok
    }
}

/// Infected intervals `[on, off)` of each tracked site in `xi^A`, with
/// `off = inf` when still infected at the horizon.
struct Occupancy {
    intervals: Vec<Vec<(f64, f64)>>,
    global_died: bool,
}

fn occupancy(log: &EventLog, initial: &[SiteId], sites: &[SiteId]) -> Result<Occupancy, HittingError> {
    let n = log.lattice().len();
    let mut slot = vec![usize::MAX; n];
    for (i, s) in sites.iter().enumerate() {
        slot[s.index()] = i;
    }
    let mut intervals = vec![Vec::new(); sites.len()];
    let mut open = vec![f64::NAN; sites.len()];
    let mut sweep = Sweep::start(log, initial, 0.0)?;
    for (i, s) in sites.iter().enumerate() {
        if sweep.is_infected(*s) {
            open[i] = 0.0;
        }
    }
    let _ = sweep.run(log.horizon(), |tr| {
        match tr {
            Transition::Infect { site, time } => {
                let i = slot[site as usize];
                if i != usize::MAX {
                    open[i] = time;
                }
            }
            Transition::Recover { site, time } => {
                let i = slot[site as usize];
                if i != usize::MAX {
                    intervals[i].push((open[i], time));
                    open[i] = f64::NAN;
                }
            }
        }
        ControlFlow::Continue(())
    });
    for (i, on) in open.into_iter().enumerate() {
        if !on.is_nan() {
            intervals[i].push((on, f64::INFINITY));
        }
    }
    Ok(Occupancy { intervals, global_died: sweep.died_at.is_some() })
}

/// `inf { t >= from : x infected }` given x's infected intervals.
fn next_infected(intervals: &[(f64, f64)], from: f64) -> Option<f64> {
    let i = intervals.partition_point(|&(_, off)| off <= from);
    intervals.get(i).map(|&(on, _)| on.max(from))
}

fn run_recursion(
    log: &EventLog,
    site: SiteId,
    intervals: &[(f64, f64)],
    global_died: bool,
    start: f64,
) -> Result<EssentialRecord, HittingError> {
    let mut u = Vec::new();
    let mut v = Vec::new();
    let mut flags = EssentialFlags::default();
    let mut last_v = start;
    let sigma = loop {
        let Some(next_u) = next_infected(intervals, last_v) else {
            if u.is_empty() {
                flags.never_hit = true;
            }
            if global_died {
                flags.global_death = true;
                break Sigma::Undefined;
            }
            flags.branch_censored = true;
            break Sigma::CensoredAtHorizon;
        };
        u.push(next_u);
        let fate = extinction_time(log, (site, next_u))?;
        flags.boundary_contact |= fate.boundary_contact;
        match fate.extinction {
            Extinction::Censored => break Sigma::Found(next_u),
            Extinction::Died(t) => {
                v.push(t);
                last_v = t;
            }
        }
    };
    Ok(EssentialRecord { site, k: u.len(), u, v, sigma, flags })
}

fn check_initial(log: &EventLog, initial: &[SiteId]) -> Result<(), HittingError> {
    if initial.is_empty() {
        return Err(HittingError::EmptyInitialSet);
    }
    check_sites(log, initial)?;
    match log.lattice().origin() {
        Some(o) if initial.contains(&o) => Ok(()),
        _ => Err(HittingError::OriginNotInInitialSet),
    }
}

/// Essential hitting time of `x` for the process started from `initial`,
/// which must contain the origin.
pub fn essential_hitting(log: &EventLog, initial: &[SiteId], x: SiteId) -> Result<EssentialRecord, HittingError> {
    essential_hitting_from(log, initial, x, 0.0)
}

/// The same recursion with `v_0 = restart` instead of 0. Restarting at some
/// `v_k` of a full record reproduces its suffix.
pub fn essential_hitting_from(
    log: &EventLog,
    initial: &[SiteId],
    x: SiteId,
    restart: f64,
) -> Result<EssentialRecord, HittingError> {
    check_initial(log, initial)?;
    check_sites(log, &[x])?;
    let occ = occupancy(log, initial, &[x])?;
    run_recursion(log, x, &occ.intervals[0], occ.global_died, restart)
}

/// Essential records for several sites sharing one replay of `xi^A`.
pub fn essential_hitting_many(
    log: &EventLog,
    initial: &[SiteId],
    sites: &[SiteId],
) -> Result<Vec<EssentialRecord>, HittingError> {
    check_initial(log, initial)?;
    check_sites(log, sites)?;
    let occ = occupancy(log, initial, sites)?;
    sites
        .iter()
        .zip(&occ.intervals)
        .map(|(&x, iv)| run_recursion(log, x, iv, occ.global_died, 0.0))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Survives,
    Dies,
    Ambiguous,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurvivalMode {
    /// Alive at the horizon counts as survival.
    #[default]
    Horizon,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalVerdict {
    pub verdict: Verdict,
    pub extinction_time: Option<f64>,
    pub alive_at_horizon: usize,
    pub boundary_contact: bool,
}

/// Survival verdict for the infection started at `seed`. A death that
/// follows boundary contact is `Ambiguous`, since killing may have caused it.
pub fn survival_proxy(log: &EventLog, seed: (SiteId, f64), mode: SurvivalMode) -> Result<SurvivalVerdict, HittingError> {
    match mode {
        SurvivalMode::Horizon => {
            let fate = extinction_time(log, seed)?;
            let verdict = match fate.extinction {
                Extinction::Censored => Verdict::Survives,
                Extinction::Died(_) if fate.boundary_contact => Verdict::Ambiguous,
                Extinction::Died(_) => Verdict::Dies,
            };
            Ok(SurvivalVerdict {
                verdict,
                extinction_time: fate.extinction.time(),
                alive_at_horizon: fate.alive_at_horizon,
                boundary_contact: fate.boundary_contact,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::events::ReplicaSeed;
    use crate::lattice::{Lattice, Point};
    use crate::rates::RateSpec;

    fn line(m: u32) -> Arc<Lattice> {
        Arc::new(Lattice::ball(1, m).unwrap())
    }

    fn at(l: &Lattice, x: i32) -> SiteId {
        l.site(&Point(vec![x])).unwrap()
    }

    #[test]
    fn initial_sites_have_zero_time() {
        let log = EventLog::generate(line(5), &RateSpec::uniform(2.0), 10.0, ReplicaSeed::new(0, 0)).unwrap();
        let l = log.lattice().clone();
        let a = [at(&l, 0), at(&l, 2)];
        let rec = hitting_times(&log, &a, &[at(&l, 2), at(&l, 0), at(&l, 4)]).unwrap();
        assert_eq!(rec.time(at(&l, 2)), Some(0.0));
        assert_eq!(rec.time(at(&l, 0)), Some(0.0));
    }

    #[test]
    fn zero_rate_never_hits_others() {
        let log = EventLog::generate(line(4), &RateSpec::uniform(0.0), 10.0, ReplicaSeed::new(0, 0)).unwrap();
        let l = log.lattice().clone();
        let o = l.origin().unwrap();
        let others: Vec<SiteId> = l.sites().filter(|&s| s != o).collect();
        let rec = hitting_times(&log, &[o], &others).unwrap();
        assert!(rec.times.iter().all(|t| t.is_infinite()));
        let ess = essential_hitting(&log, &[o], at(&l, 1)).unwrap();
        assert!(ess.flags.never_hit);
        assert_eq!(ess.sigma, Sigma::Undefined);
        let v = survival_proxy(&log, (o, 0.0), SurvivalMode::Horizon).unwrap();
        assert_eq!(v.verdict, Verdict::Dies);
    }

    #[test]
    fn handcrafted_hitting_time() {
        let l = line(3);
        let o = at(&l, 0);
        let log = EventLog::from_marks(l.clone(), 10.0, vec![(o, vec![2.0])], vec![(o, 0, vec![1.0])]).unwrap();
        let rec = hitting_times(&log, &[o], &[at(&l, 1), at(&l, -1)]).unwrap();
        assert_eq!(rec.time(at(&l, 1)), Some(1.0));
        assert_eq!(rec.time(at(&l, -1)), Some(f64::INFINITY));
        assert_eq!(rec.once_infected(0.5), Vec::<SiteId>::new());
        assert_eq!(rec.once_infected(1.0), vec![at(&l, 1)]);
    }

    /// x = e1 is infected at 1 (arrow o -> e1), that branch dies at 2 (e1
    /// recovers). Meanwhile o infects -1 at 0.5 and -1 keeps o alive; o
    /// reinfects e1 at 3 and that branch is alive at the horizon.
    fn reinfection_log() -> EventLog {
        let l = line(3);
        let (m1, o, e1) = (at(&l, -1), at(&l, 0), at(&l, 1));
        EventLog::from_marks(
            l,
            10.0,
            vec![(e1, vec![2.0]), (o, vec![1.5])],
            vec![(o, 1, vec![0.5]), (o, 0, vec![1.0, 3.0]), (m1, 0, vec![2.5])],
        )
        .unwrap()
    }

    #[test]
    fn handcrafted_essential_recursion() {
        let log = reinfection_log();
        let l = log.lattice().clone();
        let rec = essential_hitting(&log, &[at(&l, 0)], at(&l, 1)).unwrap();
        assert_eq!(rec.u, vec![1.0, 3.0]);
        assert_eq!(rec.v, vec![2.0]);
        assert_eq!(rec.k, 2);
        assert_eq!(rec.sigma, Sigma::Found(3.0));
        assert_eq!(rec.gap(), Some(2.0));
        assert!(rec.is_well_ordered());
        assert_eq!(rec.flags, EssentialFlags::default());

        let suffix = essential_hitting_from(&log, &[at(&l, 0)], at(&l, 1), 2.0).unwrap();
        assert_eq!(suffix.u, vec![3.0]);
        assert_eq!(suffix.sigma, Sigma::Found(3.0));
    }

    #[test]
    fn first_branch_surviving_gives_k_one() {
        let l = line(3);
        let o = at(&l, 0);
        let log = EventLog::from_marks(l.clone(), 10.0, vec![], vec![(o, 0, vec![1.0])]).unwrap();
        let rec = essential_hitting(&log, &[o], at(&l, 1)).unwrap();
        assert_eq!(rec.k, 1);
        assert_eq!(rec.sigma, Sigma::Found(1.0));
        let origin = essential_hitting(&log, &[o], o).unwrap();
        assert_eq!(origin.sigma, Sigma::Found(0.0));
    }

    #[test]
    fn horizon_exhausted_is_branch_censored() {
        // e1 branch dies at 2, o survives but never reinfects e1
        let l = line(3);
        let (o, e1) = (at(&l, 0), at(&l, 1));
        let log = EventLog::from_marks(l.clone(), 10.0, vec![(e1, vec![2.0])], vec![(o, 0, vec![1.0])]).unwrap();
        let rec = essential_hitting(&log, &[o], e1).unwrap();
        assert_eq!(rec.sigma, Sigma::CensoredAtHorizon);
        assert!(rec.flags.branch_censored);
        assert!(!rec.flags.never_hit);
        assert_eq!(rec.u, vec![1.0]);
        assert_eq!(rec.v, vec![2.0]);
    }

    #[test]
    fn global_death_is_distinguished() {
        let l = line(3);
        let (o, e1) = (at(&l, 0), at(&l, 1));
        let log =
            EventLog::from_marks(l.clone(), 10.0, vec![(e1, vec![2.0]), (o, vec![1.5])], vec![(o, 0, vec![1.0])]).unwrap();
        let rec = essential_hitting(&log, &[o], e1).unwrap();
        assert_eq!(rec.sigma, Sigma::Undefined);
        assert!(rec.flags.global_death);
        assert!(!rec.flags.never_hit);
    }

    #[test]
    fn origin_required() {
        let log = reinfection_log();
        let l = log.lattice().clone();
        assert_eq!(
            essential_hitting(&log, &[at(&l, 1)], at(&l, 2)).unwrap_err(),
            HittingError::OriginNotInInitialSet
        );
        assert_eq!(hitting_times(&log, &[], &[]).unwrap_err(), HittingError::EmptyInitialSet);
    }

    #[test]
    fn immortal_chain_survives() {
        // no recovery marks on the positive ray, arrows along it
        let l = line(6);
        let arrows = (0..=6).map(|x| (at(&l, x), 0usize, vec![1.0 + x as f64])).collect();
        let recs = (-6..0).map(|x| (at(&l, x), vec![0.5])).collect();
        let log = EventLog::from_marks(l.clone(), 20.0, recs, arrows).unwrap();
        let v = survival_proxy(&log, (at(&l, 0), 0.0), SurvivalMode::Horizon).unwrap();
        assert_eq!(v.verdict, Verdict::Survives);
        assert_eq!(v.alive_at_horizon, 7);
        assert!(v.boundary_contact);
    }

    #[test]
    fn death_after_boundary_contact_is_ambiguous() {
        let l = line(1);
        let (o, e1) = (at(&l, 0), at(&l, 1));
        let log = EventLog::from_marks(l, 10.0, vec![(o, vec![2.0]), (e1, vec![3.0])], vec![(o, 0, vec![1.0]), (e1, 0, vec![1.5])])
            .unwrap();
        let v = survival_proxy(&log, (o, 0.0), SurvivalMode::Horizon).unwrap();
        assert_eq!(v.verdict, Verdict::Ambiguous);
        assert_eq!(v.extinction_time, Some(3.0));
    }

    #[test]
    fn general_initial_set_recursion() {
        let log = EventLog::generate(line(12), &RateSpec::uniform(2.5), 30.0, ReplicaSeed::new(4, 2)).unwrap();
        let l = log.lattice().clone();
        let a = [at(&l, 0), at(&l, -3), at(&l, 5)];
        let sites: Vec<SiteId> = (-6..=6).map(|x| at(&l, x)).collect();
        let many = essential_hitting_many(&log, &a, &sites).unwrap();
        let hit = hitting_times(&log, &a, &sites).unwrap();
        for (rec, single) in many.iter().zip(sites.iter().map(|&x| essential_hitting(&log, &a, x).unwrap())) {
            assert_eq!(rec, &single);
            assert!(rec.is_well_ordered());
            if let Some(&u1) = rec.u.first() {
                assert_eq!(Some(u1), hit.time(rec.site));
            }
        }
    }
}
