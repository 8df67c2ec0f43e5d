//! Engine Monte Carlo against exact and analytic values.

mod common;

use std::sync::Arc;

use common::pt;
use contactkit::oracle::SubsetChain;
use contactkit::stats::{ks_exponential, wilson_interval, Interval, THREE_SIGMA};
use contactkit::{
    build_subset_chain, evolve, hitting_times, ConfigurationSet, EventLog, Lattice, Point, RateSpec, ReplicaSeed,
};

fn sites_1d(xs: std::ops::RangeInclusive<i32>) -> Vec<Point> {
    xs.map(|x| pt(&[x])).collect()
}

struct Tiny {
    lattice: Arc<Lattice>,
    chain: SubsetChain,
    lambda: f64,
}

impl Tiny {
    fn new(d: usize, sites: Vec<Point>, lambda: f64) -> Self {
        let chain = build_subset_chain(&sites, lambda).unwrap();
        Tiny { lattice: Arc::new(Lattice::from_sites(d, sites).unwrap()), chain, lambda }
    }

    fn log(&self, horizon: f64, root: u64, replica: u64) -> EventLog {
        EventLog::generate(self.lattice.clone(), &RateSpec::uniform(self.lambda), horizon, ReplicaSeed::new(root, replica))
            .unwrap()
    }

    fn ids(&self, pts: &[Point]) -> Vec<contactkit::SiteId> {
        pts.iter().map(|p| self.lattice.site(p).unwrap()).collect()
    }

    /// Fraction of replicas in which the process from `initial` is extinct at `t`.
    fn extinct_by(&self, initial: &[Point], t: f64, root: u64, n: u64) -> u64 {
        let a = self.ids(initial);
        (0..n).filter(|&i| evolve(&self.log(t, root, i), &ConfigurationSet::new(a.clone(), 0.0), t).unwrap().is_empty()).count()
            as u64
    }

    /// Fraction of replicas in which `target` is infected by `horizon`.
    fn hit_by(&self, initial: &[Point], target: &Point, horizon: f64, root: u64, n: u64) -> u64 {
        let a = self.ids(initial);
        let y = self.ids(std::slice::from_ref(target));
        (0..n)
            .filter(|&i| hitting_times(&self.log(horizon, root, i), &a, &y).unwrap().times[0].is_finite())
            .count() as u64
    }
}

fn three_sigma(successes: u64, n: u64) -> Interval {
    wilson_interval(successes, n, THREE_SIGMA).unwrap()
}

/// Fifty small graph / rate / query combinations; the Monte Carlo estimate
/// must land in the 3-sigma interval around the exact value in at least 99%.
#[test]
fn engine_agrees_with_oracle_on_fifty_cases() {
    let square = vec![pt(&[0, 0]), pt(&[1, 0]), pt(&[0, 1]), pt(&[1, 1])];
    let plus: Vec<Point> = Lattice::ball(2, 1).unwrap().points().to_vec();
    let l_shape = vec![pt(&[0, 0]), pt(&[1, 0]), pt(&[2, 0]), pt(&[0, 1]), pt(&[0, 2])];
    let graphs: Vec<(usize, Vec<Point>, Point, Point)> = vec![
        (1, sites_1d(0..=1), pt(&[0]), pt(&[1])),
        (1, sites_1d(-1..=1), pt(&[0]), pt(&[1])),
        (1, sites_1d(-2..=2), pt(&[0]), pt(&[2])),
        (1, sites_1d(0..=5), pt(&[0]), pt(&[5])),
        (2, square, pt(&[0, 0]), pt(&[1, 1])),
        (2, plus, pt(&[0, 0]), pt(&[-1, 0])),
        (2, l_shape, pt(&[1, 0]), pt(&[0, 2])),
    ];
    let lambdas = [0.5, 1.0, 2.5];
    let n = 20_000u64;
    // (exact value, successes, label)
    let mut results: Vec<(f64, u64, String)> = Vec::new();
    'outer: for (g, (d, sites, start, target)) in graphs.iter().enumerate() {
        for (li, &lambda) in lambdas.iter().enumerate() {
            let tiny = Tiny::new(*d, sites.clone(), lambda);
            let root = 1000 + 10 * g as u64 + li as u64;
            let start = std::slice::from_ref(start);
            for t in [0.7, 2.5] {
                let exact = tiny.chain.transient(start, t).unwrap().prob_empty();
                results.push((exact, tiny.extinct_by(start, t, root, n), format!("graph {g} lambda {lambda} extinct by {t}")));
            }
            let h = 6.0;
            let exact = tiny.chain.hitting_probability(start, target, Some(h)).unwrap();
            results.push((exact, tiny.hit_by(start, target, h, root + 5000, n), format!("graph {g} lambda {lambda} hit by {h}")));
            if results.len() >= 50 {
                break 'outer;
            }
        }
    }
    results.truncate(50);
    let cases = results.len();
    let mut inside = 0;
    for (exact, successes, label) in &results {
        let iv = three_sigma(*successes, n);
        if iv.contains(*exact) {
            inside += 1;
        } else {
            eprintln!("outside: {label}: exact {exact:.6}, estimate {:.6}, interval {iv:?}", *successes as f64 / n as f64);
        }
    }
    assert_eq!(cases, 50);
    assert!(inside as f64 >= 0.99 * cases as f64, "{inside} of {cases} inside");
}

#[test]
fn three_site_path_hitting_by_linear_solve() {
    let tiny = Tiny::new(1, sites_1d(-1..=1), 1.0);
    let exact = tiny.chain.hitting_probability(&[pt(&[0])], &pt(&[1]), None).unwrap();
    // finite horizon long enough that the remaining mass is negligible
    let h = 40.0;
    let at_h = tiny.chain.hitting_probability(&[pt(&[0])], &pt(&[1]), Some(h)).unwrap();
    assert!((exact - at_h).abs() < 1e-9, "{exact} vs {at_h}");
    let n = 1_000_000;
    let hits = tiny.hit_by(&[pt(&[0])], &pt(&[1]), h, 77, n);
    let iv = three_sigma(hits, n);
    assert!(iv.contains(exact), "exact {exact}, interval {iv:?}");
}

#[test]
fn two_site_and_single_site_anchors() {
    let n = 40_000;
    for (i, lambda) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let tiny = Tiny::new(1, sites_1d(0..=1), lambda);
        let hits = tiny.hit_by(&[pt(&[0])], &pt(&[1]), 40.0, 300 + i as u64, n);
        let exact = lambda / (1.0 + lambda);
        assert!(three_sigma(hits, n).contains(exact), "lambda {lambda}: {hits}/{n}");
    }
    let single = Tiny::new(1, vec![pt(&[0])], 3.0);
    let dead = single.extinct_by(&[pt(&[0])], std::f64::consts::LN_2, 400, n);
    assert!(three_sigma(dead, n).contains(0.5), "{dead}/{n}");
}

/// Inter-arrival gaps with a fixed index `i < GAPS` are exactly exponential;
/// pooling every gap that completes before the horizon would not be, since
/// the censored last gap is dropped.
const GAPS: usize = 10;

fn leading_gaps(times: &[f64], out: &mut Vec<f64>) {
    assert!(times.len() > GAPS, "horizon too short for {GAPS} gaps");
    let mut prev = 0.0;
    for &t in &times[..GAPS] {
        out.push(t - prev);
        prev = t;
    }
}

#[test]
fn marks_are_poisson() {
    let lattice = Arc::new(Lattice::ball(1, 3).unwrap());
    let origin = lattice.origin().unwrap();
    let reps = 400u64;
    let mut total = 0usize;
    let mut gaps = Vec::new();
    let mut arrow_gaps = Vec::new();
    for i in 0..reps {
        let log = EventLog::generate(lattice.clone(), &RateSpec::uniform(0.5), 100.0, ReplicaSeed::new(3, i)).unwrap();
        total += log.recovery_times(origin).len();
        for s in lattice.sites() {
            leading_gaps(log.recovery_times(s), &mut gaps);
        }
        leading_gaps(log.arrow_times(origin, 0), &mut arrow_gaps);
        leading_gaps(log.arrow_times(origin, 1), &mut arrow_gaps);
    }
    // count at a fixed site over (0, 100] is Poisson(100)
    let mean = total as f64 / reps as f64;
    assert!((mean - 100.0).abs() <= 3.0 * (100.0 / reps as f64).sqrt(), "mean {mean}");
    assert!(gaps.len() >= 10_000);
    let ks = ks_exponential(&gaps, 1.0).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
    let ks = ks_exponential(&arrow_gaps, 0.5).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
    assert!(ks_exponential(&gaps, 1.1).unwrap().p_value < 0.01);
}

/// `P(xi^A_t meets B) = P(xi^B_t meets A)` on independent replica sets.
#[test]
fn self_duality() {
    let lattice = Arc::new(Lattice::ball(2, 4).unwrap());
    let ids = |ps: &[Point]| ps.iter().map(|p| lattice.site(p).unwrap()).collect::<Vec<_>>();
    let meets = |a: &[Point], b: &[Point], t: f64, root: u64, n: u64| {
        let (a, b) = (ids(a), ids(b));
        (0..n)
            .filter(|&i| {
                let log = EventLog::generate(lattice.clone(), &RateSpec::uniform(1.0), t, ReplicaSeed::new(root, i)).unwrap();
                let xi = evolve(&log, &ConfigurationSet::new(a.clone(), 0.0), t).unwrap();
                b.iter().any(|&s| xi.contains(s))
            })
            .count() as u64
    };
    let n = 20_000;
    let triples = [
        (vec![pt(&[0, 0])], vec![pt(&[1, 0])], 1.0),
        (vec![pt(&[0, 0]), pt(&[1, 0])], vec![pt(&[0, 2])], 2.0),
        (vec![pt(&[-1, 0])], vec![pt(&[1, 1]), pt(&[2, 0])], 1.5),
    ];
    for (k, (a, b, t)) in triples.iter().enumerate() {
        let fwd = three_sigma(meets(a, b, *t, 500 + k as u64, n), n);
        let bwd = three_sigma(meets(b, a, *t, 600 + k as u64, n), n);
        assert!(fwd.overlaps(&bwd), "triple {k}: {fwd:?} vs {bwd:?}");
    }
}
