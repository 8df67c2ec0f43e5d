//! Shared fixtures for the `contactkit` benchmarks.

use std::sync::Arc;

use contactkit::{EventLog, Lattice, Point, RateSpec, ReplicaSeed};

/// Root seed of every benchmark log.
pub const BENCH_SEED: u64 = 0xBE9C;

/// A 1-norm ball with its log for replica `replica`.
pub fn fixture_log(d: usize, radius: u32, lambda: f64, horizon: f64, replica: u64) -> EventLog {
    let lattice = Arc::new(Lattice::ball(d, radius).expect("valid ball"));
    EventLog::generate(lattice, &RateSpec::uniform(lambda), horizon, ReplicaSeed::new(BENCH_SEED, replica))
        .expect("valid log parameters")
}

/// Sites `k * e_1` for `k = 0..=n` in dimension `d`.
pub fn axis_ray(d: usize, n: i32) -> Vec<Point> {
    (0..=n).map(|k| Point::unit(d, 0).scale(k)).collect()
}

/// First replica id at or after `from` whose process from the origin is
/// alive at the horizon.
pub fn surviving_replica(d: usize, radius: u32, lambda: f64, horizon: f64, from: u64) -> u64 {
    (from..)
        .find(|&r| {
            let log = fixture_log(d, radius, lambda, horizon, r);
            let o = log.lattice().origin().expect("ball contains the origin");
            let start = contactkit::ConfigurationSet::singleton(o, 0.0);
            !contactkit::evolve(&log, &start, horizon).expect("origin is in the box").is_empty()
        })
        .expect("supercritical rates survive eventually")
}
