//! Exact transient analysis of the contact process on a tiny site set.
//!
//! The state space is every subset of `S` (at most 2^12 states). Infected
//! sites recover at rate 1; a healthy site becomes infected at rate λ times
//! its number of infected neighbors inside `S`. Neighbors outside `S` are
//! ignored, which is the same killing boundary the engine uses.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::lattice::Point;
use crate::rates::{RateError, RateSpec};

pub const MAX_SITES: usize = 12;

/// Uniformization truncation tolerance (total over all time steps).
pub const TRUNCATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("site set has {0} sites; at most {MAX_SITES} are supported")]
    TooManySites(usize),
    #[error("site set is empty")]
    Empty,
    #[error("site {0} is not in the chain")]
    UnknownSite(Point),
    #[error("site {0} listed twice")]
    DuplicateSite(Point),
    #[error("time must be finite and nonnegative, got {0}")]
    BadTime(f64),
    #[error(transparent)]
    Rates(#[from] RateError),
    #[error("linear system for absorption probabilities is singular")]
    Singular,
}

/// Continuous-time chain on subsets of a small site set. State `s` is a
/// bitmask: bit `i` set means site `i` is infected.
#[derive(Clone, Debug)]
pub struct SubsetChain {
    sites: Vec<Point>,
    transitions: Vec<Vec<(u32, f64)>>,
    exit: Vec<f64>,
}

/// Chain with uniform infection rate `lambda`.
pub fn build_subset_chain(sites: &[Point], lambda: f64) -> Result<SubsetChain, OracleError> {
    SubsetChain::new(sites, &RateSpec::uniform(lambda))
}

impl SubsetChain {
    pub fn new(sites: &[Point], rates: &RateSpec) -> Result<Self, OracleError> {
        rates.validate()?;
        let n = sites.len();
        if n == 0 {
            return Err(OracleError::Empty);
        }
        if n > MAX_SITES {
            return Err(OracleError::TooManySites(n));
        }
        for (i, p) in sites.iter().enumerate() {
            if sites[..i].contains(p) {
                return Err(OracleError::DuplicateSite(p.clone()));
            }
        }
        // incoming[j] = (i, rate of arrow i -> j) for neighbors i in S
        let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, p) in sites.iter().enumerate() {
            for dir in 0..2 * p.dim() {
                let q = p.step(dir);
                if let Some(j) = sites.iter().position(|s| *s == q) {
                    incoming[j].push((i, rates.edge_rate(p, dir)));
                }
            }
        }
        let states = 1usize << n;
        let mut transitions = Vec::with_capacity(states);
        let mut exit = Vec::with_capacity(states);
        for s in 0..states {
            let mut row = Vec::new();
            for (j, inc) in incoming.iter().enumerate() {
                let bit = 1usize << j;
                if s & bit != 0 {
                    row.push(((s & !bit) as u32, 1.0));
                } else {
                    let rate: f64 = inc.iter().filter(|(i, _)| s & (1 << i) != 0).map(|(_, r)| r).sum();
                    if rate > 0.0 {
                        row.push(((s | bit) as u32, rate));
                    }
                }
            }
            exit.push(row.iter().map(|(_, r)| r).sum());
            transitions.push(row);
        }
        Ok(SubsetChain { sites: sites.to_vec(), transitions, exit })
    }

    pub fn sites(&self) -> &[Point] {
        &self.sites
    }

    pub fn num_states(&self) -> usize {
        self.transitions.len()
    }

    /// Outgoing transitions of state `s` as `(target state, rate)`.
    pub fn transitions(&self, s: usize) -> &[(u32, f64)] {
        &self.transitions[s]
    }

    pub fn exit_rate(&self, s: usize) -> f64 {
        self.exit[s]
    }

    /// Dense generator matrix; rows sum to zero.
    pub fn generator(&self) -> DMatrix<f64> {
        let n = self.num_states();
        let mut q = DMatrix::zeros(n, n);
        for s in 0..n {
            for &(t, r) in &self.transitions[s] {
                q[(s, t as usize)] += r;
            }
            q[(s, s)] -= self.exit[s];
        }
        q
    }

    pub fn mask_of(&self, subset: &[Point]) -> Result<usize, OracleError> {
        subset.iter().try_fold(0usize, |m, p| {
            let i = self.site_index(p)?;
            Ok(m | (1 << i))
        })
    }

    pub fn site_index(&self, p: &Point) -> Result<usize, OracleError> {
        self.sites.iter().position(|s| s == p).ok_or_else(|| OracleError::UnknownSite(p.clone()))
    }

    /// Distribution at time `t` started from `initial`.
    pub fn transient(&self, initial: &[Point], t: f64) -> Result<SubsetDistribution, OracleError> {
        let mut p0 = vec![0.0; self.num_states()];
        p0[self.mask_of(initial)?] = 1.0;
        self.transient_with(p0, t, |_| false)
    }

    /// Uniformization, with states satisfying `absorbing` made absorbing.
    pub fn transient_with(
        &self,
        p0: Vec<f64>,
        t: f64,
        absorbing: impl Fn(usize) -> bool,
    ) -> Result<SubsetDistribution, OracleError> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(OracleError::BadTime(t));
        }
        let n = self.num_states();
        let live: Vec<bool> = (0..n).map(|s| !absorbing(s)).collect();
        let q = (0..n).filter(|&s| live[s]).map(|s| self.exit[s]).fold(0.0, f64::max);
        if q == 0.0 || t == 0.0 {
            return Ok(SubsetDistribution { probs: p0 });
        }
        // keep q * dt moderate so exp(-q dt) stays well inside f64 range
        let steps = (q * t / 30.0).ceil().max(1.0) as usize;
        let dt = t / steps as f64;
        let eps = TRUNCATION_TOLERANCE / steps as f64;
        let mut p = p0;
        let mut v = vec![0.0; n];
        for _ in 0..steps {
            let qt = q * dt;
            let mut weight = (-qt).exp();
            let mut cum = weight;
            let mut acc: Vec<f64> = p.iter().map(|x| x * weight).collect();
            let mut cur = p;
            let mut k = 0u64;
            while 1.0 - cum > eps {
                k += 1;
                // cur <- cur * (I + Q / q)
                v.iter_mut().for_each(|x| *x = 0.0);
                for s in 0..n {
                    let mass = cur[s];
                    if mass == 0.0 {
                        continue;
                    }
                    if !live[s] {
                        v[s] += mass;
                        continue;
                    }
                    v[s] += mass * (1.0 - self.exit[s] / q);
                    for &(t, r) in &self.transitions[s] {
                        v[t as usize] += mass * r / q;
                    }
                }
                std::mem::swap(&mut cur, &mut v);
                weight *= qt / k as f64;
                cum += weight;
                for (a, c) in acc.iter_mut().zip(&cur) {
                    *a += weight * c;
                }
                if k > 100_000 {
                    break;
                }
            }
            p = acc;
        }
        Ok(SubsetDistribution { probs: p })
    }

    /// Probability that `target` is ever infected by time `horizon`
    /// (`None` = ever), starting from `initial`.
    pub fn hitting_probability(&self, initial: &[Point], target: &Point, horizon: Option<f64>) -> Result<f64, OracleError> {
        let bit = 1usize << self.site_index(target)?;
        let start = self.mask_of(initial)?;
        if start & bit != 0 {
            return Ok(1.0);
        }
        match horizon {
            Some(t) => {
                let mut p0 = vec![0.0; self.num_states()];
                p0[start] = 1.0;
                let dist = self.transient_with(p0, t, |s| s & bit != 0)?;
                Ok(dist.probability(|s| s & bit != 0))
            }
            None => self.absorption_probability(start, |s| s & bit != 0),
        }
    }

    /// Probability of ever entering the set `hit`, by a direct linear solve
    /// over the states outside it.
    pub fn absorption_probability(&self, start: usize, hit: impl Fn(usize) -> bool) -> Result<f64, OracleError> {
        if hit(start) {
            return Ok(1.0);
        }
        let n = self.num_states();
        let transient: Vec<usize> = (0..n).filter(|&s| !hit(s) && self.exit[s] > 0.0).collect();
        let Some(pos_start) = transient.iter().position(|&s| s == start) else {
            return Ok(0.0);
        };
        let mut index = vec![usize::MAX; n];
        for (i, &s) in transient.iter().enumerate() {
            index[s] = i;
        }
        let m = transient.len();
        let mut a = DMatrix::<f64>::zeros(m, m);
        let mut b = DVector::<f64>::zeros(m);
        for (i, &s) in transient.iter().enumerate() {
            a[(i, i)] = self.exit[s];
            for &(t, r) in &self.transitions[s] {
                let t = t as usize;
                if hit(t) {
                    b[i] += r;
                } else if index[t] != usize::MAX {
                    a[(i, index[t])] -= r;
                }
            }
        }
        let h = a.lu().solve(&b).ok_or(OracleError::Singular)?;
        Ok(h[pos_start].clamp(0.0, 1.0))
    }
}

/// Probability vector over subset states.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetDistribution {
    probs: Vec<f64>,
}

impl SubsetDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Probability that every site is healthy.
    pub fn prob_empty(&self) -> f64 {
        self.probs[0]
    }

    pub fn probability(&self, pred: impl Fn(usize) -> bool) -> f64 {
        self.probs.iter().enumerate().filter(|(s, _)| pred(*s)).map(|(_, p)| p).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: i32) -> Vec<Point> {
        let h = n / 2;
        (-h..=h).map(|x| Point(vec![x])).collect()
    }

    #[test]
    fn single_site() {
        let c = build_subset_chain(&[Point(vec![0])], 3.0).unwrap();
        assert_eq!(c.num_states(), 2);
        assert_eq!(c.transitions(1), &[(0, 1.0)]);
        assert!(c.transitions(0).is_empty());
        let d = c.transient(&[Point(vec![0])], std::f64::consts::LN_2).unwrap();
        assert!((d.prob_empty() - 0.5).abs() < 1e-10);
        let d = c.transient(&[Point(vec![0])], 1.7).unwrap();
        assert!((d.prob_empty() - (1.0 - (-1.7f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn two_sites() {
        let lam = 2.0;
        let c = build_subset_chain(&[Point(vec![0]), Point(vec![1])], lam).unwrap();
        assert_eq!(c.num_states(), 4);
        let mut row = c.transitions(0b01).to_vec();
        row.sort_by_key(|a| a.0);
        assert_eq!(row, vec![(0b00, 1.0), (0b11, lam)]);
        let h = c.hitting_probability(&[Point(vec![0])], &Point(vec![1]), None).unwrap();
        assert!((h - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn five_site_path_generator() {
        let c = build_subset_chain(&path(5), 1.0).unwrap();
        assert_eq!(c.num_states(), 32);
        let q = c.generator();
        for s in 0..32 {
            let row_sum: f64 = q.row(s).iter().sum();
            assert!(row_sum.abs() < 1e-12);
            for t in 0..32 {
                if t != s {
                    assert!(q[(s, t)] >= 0.0);
                }
            }
        }
        assert!(q.row(0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn distributions_are_normalized() {
        let c = build_subset_chain(&path(7), 1.5).unwrap();
        for t in [0.0, 0.3, 2.0, 10.0, 60.0] {
            let d = c.transient(&[Point(vec![0])], t).unwrap();
            assert!((d.total() - 1.0).abs() < 1e-9, "t={t}");
            assert!(d.probs().iter().all(|&p| p >= -1e-15));
        }
        let d = c.transient(&[Point(vec![0])], 0.0).unwrap();
        assert_eq!(d.probs()[c.mask_of(&[Point(vec![0])]).unwrap()], 1.0);
    }

    /// Transient distribution agrees with a truncated Taylor series of
    /// exp(tQ) for a small chain where that series is accurate.
    #[test]
    fn uniformization_matches_taylor_series() {
        let c = build_subset_chain(&path(3), 1.0).unwrap();
        let q = c.generator();
        let t = 0.8;
        let mut term = DMatrix::<f64>::identity(8, 8);
        let mut sum = term.clone();
        for k in 1..60 {
            term = &term * &q * (t / k as f64);
            sum += &term;
        }
        let start = c.mask_of(&[Point(vec![0])]).unwrap();
        let d = c.transient(&[Point(vec![0])], t).unwrap();
        for s in 0..8 {
            assert!((d.probs()[s] - sum[(start, s)]).abs() < 1e-11);
        }
    }

    #[test]
    fn hitting_edge_cases() {
        let c = build_subset_chain(&path(3), 0.0).unwrap();
        assert_eq!(c.hitting_probability(&[Point(vec![0])], &Point(vec![0]), None).unwrap(), 1.0);
        assert_eq!(c.hitting_probability(&[Point(vec![0])], &Point(vec![1]), None).unwrap(), 0.0);
        assert_eq!(c.hitting_probability(&[Point(vec![0])], &Point(vec![1]), Some(5.0)).unwrap(), 0.0);
    }

    #[test]
    fn finite_horizon_converges_to_infinite() {
        let c = build_subset_chain(&path(5), 1.0).unwrap();
        let inf = c.hitting_probability(&[Point(vec![0])], &Point(vec![2]), None).unwrap();
        let fin = c.hitting_probability(&[Point(vec![0])], &Point(vec![2]), Some(200.0)).unwrap();
        assert!((inf - fin).abs() < 1e-9);
        let short = c.hitting_probability(&[Point(vec![0])], &Point(vec![2]), Some(1.0)).unwrap();
        assert!(short < inf);
    }

    #[test]
    fn hitting_is_monotone_in_lambda() {
        let sites = path(5);
        let mut prev = 0.0;
        for i in 0..=12 {
            let lam = 0.25 * i as f64;
            let c = build_subset_chain(&sites, lam).unwrap();
            let h = c.hitting_probability(&[Point(vec![0])], &Point(vec![2]), None).unwrap();
            assert!(h >= prev - 1e-12, "lambda={lam}");
            prev = h;
        }
    }

    #[test]
    fn rejects_oversized_sets() {
        let sites: Vec<Point> = (0..13).map(|x| Point(vec![x])).collect();
        assert_eq!(build_subset_chain(&sites, 1.0).unwrap_err(), OracleError::TooManySites(13));
    }
}
