//! Estimators over accepted replicas: survival probability, time constant,
//! ordering along rays, moment ratios and the essential-gap tail.

use serde::{Deserialize, Serialize};

use super::batch::{BatchCounts, ReplicaBatch, ReplicaOutcome};
use super::interval::{mean, percentile_interval, std_err, wilson_interval, wilson_score, z_for_confidence, Interval};
use super::StatsError;
use crate::config::grid_problem;
use crate::lattice::Point;
use crate::rng::StreamKey;

const BOOTSTRAP_DOMAIN: u64 = 0xB007_57A9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub counts: BatchCounts,
    pub rho_hat: f64,
    pub interval: Interval,
    /// Ambiguous replicas counted as dying.
    pub rho_low: f64,
    /// Ambiguous replicas counted as surviving.
    pub rho_high: f64,
}

/// `accepted / (accepted + rejected)` with a Wilson interval.
pub fn estimate_rho(batch: &ReplicaBatch) -> Result<RhoEstimate, StatsError> {
    let c = batch.counts();
    let decided = c.accepted + c.rejected;
    if decided == 0 {
        return Err(StatsError::EmptyBatch);
    }
    let total = c.total() as f64;
    Ok(RhoEstimate {
        counts: c,
        rho_hat: c.accepted as f64 / decided as f64,
        interval: wilson_interval(c.accepted, decided, batch.config().run.confidence)?,
        rho_low: c.accepted as f64 / total,
        rho_high: (c.accepted + c.ambiguous) as f64 / total,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuRow {
    pub n: u32,
    pub site: Point,
    pub mu_hat: f64,
    pub std_err: f64,
    pub n_used: usize,
    /// Accepted replicas in which the site was not hit before the horizon.
    pub n_censored: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuReport {
    pub direction: Point,
    pub rows: Vec<MuRow>,
    /// Relative change of the estimate between the two largest `n`.
    pub drift: Option<f64>,
}

fn hitting_column(batch: &ReplicaBatch, p: &Point) -> Result<Vec<f64>, StatsError> {
    let slot = batch.hitting_slot(p)?;
    Ok(batch.accepted().map(|r| hitting_of(r)[slot]).collect())
}

fn hitting_of(r: &ReplicaOutcome) -> &[f64] {
    &r.hitting.as_ref().expect("accepted replicas carry hitting records").times
}

/// `mu_n = mean of t(n x) / n` over accepted replicas, for each `n`.
pub fn estimate_mu(batch: &ReplicaBatch, direction: &Point, n_list: &[u32]) -> Result<MuReport, StatsError> {
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(StatsError::BadArgument("n_list must be nonempty with n >= 1".into()));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let site = direction.scale(n as i32);
        let col = hitting_column(batch, &site)?;
        let finite: Vec<f64> = col.iter().filter(|t| t.is_finite()).map(|t| t / n as f64).collect();
        let (mu_hat, se) = if finite.is_empty() { (f64::NAN, f64::NAN) } else { (mean(&finite), std_err(&finite)) };
        rows.push(MuRow { n, site, mu_hat, std_err: se, n_used: finite.len(), n_censored: col.len() - finite.len() });
    }
    let mut by_n: Vec<&MuRow> = rows.iter().collect();
    by_n.sort_by_key(|r| r.n);
    let drift = match by_n.as_slice() {
        [.., a, b] if a.n != b.n && b.mu_hat != 0.0 => Some((b.mu_hat - a.mu_hat).abs() / b.mu_hat.abs()),
        _ => None,
    };
    Ok(MuReport { direction: direction.clone(), rows, drift })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub k: u32,
    /// Estimate of P(t((k-1)x) <= t(kx)) under the survival conditioning.
    pub p_hat: f64,
    pub interval: Interval,
    /// Mean of the finite values of t(kx).
    pub mean_t: f64,
    /// Fraction of replicas where t((k-1)x) or t(kx) was not reached.
    pub flagged_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderStats {
    pub direction: Point,
    pub n: u32,
    pub rows: Vec<OrderRow>,
    /// `(1/n) sum_k p_hat_k`.
    pub cesaro: f64,
    /// Standard error of the Cesàro mean from per-replica averages.
    pub cesaro_std_err: f64,
    /// `#{k : mean t(kx) >= mean t((k-1)x)} / n`.
    pub mean_increase_density: f64,
    /// Fraction of replicas with at least one unreached site on the ray.
    pub flagged_fraction: f64,
    pub n_replicas: usize,
}

/// Ordering statistics along the ray `{k x : 0 <= k <= n}`.
///
/// A site not reached before the horizon has hitting time +inf, so a pair
/// counts as ordered when only the later site is unreached; such replicas
/// are flagged.
pub fn theorem1_order_stats(batch: &ReplicaBatch, x: &Point, n: u32) -> Result<OrderStats, StatsError> {
    if n == 0 {
        return Err(StatsError::BadArgument("n must be at least 1".into()));
    }
    // the box is convex, so the far end of the ray decides containment
    let far = x.scale(n as i32);
    if !batch.lattice().contains(&far) {
        return Err(StatsError::SiteOutsideBox(far));
    }
    let cols: Vec<Vec<f64>> =
        (0..=n).map(|k| hitting_column(batch, &x.scale(k as i32))).collect::<Result<_, _>>()?;
    let reps = cols[0].len();
    if reps == 0 {
        return Err(StatsError::EmptyBatch);
    }
    let confidence = batch.config().run.confidence;
    let mean_finite = |c: &[f64]| {
        let f: Vec<f64> = c.iter().copied().filter(|t| t.is_finite()).collect();
        if f.is_empty() { f64::INFINITY } else { mean(&f) }
    };
    let mut rows = Vec::with_capacity(n as usize);
    let mut per_replica = vec![0.0f64; reps];
    let mut any_flag = vec![false; reps];
    let mut prev_mean = mean_finite(&cols[0]);
    let mut increases = 0u32;
    for k in 1..=n as usize {
        let (a, b) = (&cols[k - 1], &cols[k]);
        let mut ordered = 0u64;
        let mut flagged = 0usize;
        for r in 0..reps {
            if a[r] <= b[r] {
                ordered += 1;
                per_replica[r] += 1.0;
            }
            if a[r].is_infinite() || b[r].is_infinite() {
                flagged += 1;
                any_flag[r] = true;
            }
        }
        let mean_t = mean_finite(b);
        if mean_t >= prev_mean {
            increases += 1;
        }
        prev_mean = mean_t;
        rows.push(OrderRow {
            k: k as u32,
            p_hat: ordered as f64 / reps as f64,
            interval: wilson_interval(ordered, reps as u64, confidence)?,
            mean_t,
            flagged_fraction: flagged as f64 / reps as f64,
        });
    }
    for v in &mut per_replica {
        *v /= n as f64;
    }
    let cesaro = rows.iter().map(|r| r.p_hat).sum::<f64>() / n as f64;
    Ok(OrderStats {
        direction: x.clone(),
        n,
        cesaro,
        cesaro_std_err: if reps > 1 { std_err(&per_replica) } else { 0.0 },
        mean_increase_density: increases as f64 / n as f64,
        flagged_fraction: any_flag.iter().filter(|&&f| f).count() as f64 / reps as f64,
        n_replicas: reps,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMoment {
    pub x: Point,
    pub y: Point,
    pub distance: u64,
    /// `mean |t(x) - t(y)|^p / |x - y|^p`.
    pub ratio: f64,
    pub interval: Option<Interval>,
    pub n_used: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceMoment {
    pub distance: u64,
    /// Mean of the pair ratios at this distance.
    pub ratio: f64,
    pub interval: Option<Interval>,
    pub n_pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentStats {
    pub p: f64,
    pub pairs: Vec<PairMoment>,
    pub by_distance: Vec<DistanceMoment>,
    pub resamples: usize,
}

/// Replica resampling indices for bootstrap replicate `b` of estimator `tag`.
fn resample(seed: u64, tag: u64, b: usize, n: usize) -> Vec<usize> {
    let mut rng = StreamKey::root(seed).with(BOOTSTRAP_DOMAIN).with(tag).with(b as u64).stream();
    (0..n).map(|_| rng.below(n)).collect()
}

/// Plug-in moment ratios with replica-level bootstrap intervals.
pub fn theorem2_moment_stats(batch: &ReplicaBatch, pairs: &[(Point, Point)], p: f64) -> Result<MomentStats, StatsError> {
    if !(p.is_finite() && p > 0.0) {
        return Err(StatsError::BadArgument(format!("moment order must be positive, got {p}")));
    }
    if pairs.is_empty() {
        return Err(StatsError::BadArgument("pair list is empty".into()));
    }
    // per pair, per accepted replica: |t(x) - t(y)|^p or None when unreached
    let mut values: Vec<Vec<Option<f64>>> = Vec::with_capacity(pairs.len());
    for (x, y) in pairs {
        if x == y {
            return Err(StatsError::DegeneratePair(x.clone()));
        }
        let cx = hitting_column(batch, x)?;
        let cy = hitting_column(batch, y)?;
        values.push(
            cx.iter()
                .zip(&cy)
                .map(|(a, b)| (a.is_finite() && b.is_finite()).then(|| (a - b).abs().powf(p)))
                .collect(),
        );
    }
    let reps = values[0].len();
    if reps == 0 {
        return Err(StatsError::EmptyBatch);
    }
    let dists: Vec<u64> = pairs.iter().map(|(x, y)| x.dist1(y)).collect();
    let mut distinct: Vec<u64> = dists.clone();
    distinct.sort_unstable();
    distinct.dedup();

    let ratios_for = |idx: &mut dyn Iterator<Item = usize>| -> (Vec<f64>, Vec<usize>) {
        let mut sum = vec![0.0; pairs.len()];
        let mut cnt = vec![0usize; pairs.len()];
        for r in idx {
            for (j, col) in values.iter().enumerate() {
                if let Some(v) = col[r] {
                    sum[j] += v;
                    cnt[j] += 1;
                }
            }
        }
        let ratios = (0..pairs.len())
            .map(|j| if cnt[j] == 0 { f64::NAN } else { sum[j] / cnt[j] as f64 / (dists[j] as f64).powf(p) })
            .collect();
        (ratios, cnt)
    };
    let aggregate = |ratios: &[f64], d: u64| {
        let at: Vec<f64> = ratios.iter().zip(&dists).filter(|(r, &dd)| dd == d && r.is_finite()).map(|(r, _)| *r).collect();
        if at.is_empty() { f64::NAN } else { mean(&at) }
    };

    let (point, counts) = ratios_for(&mut (0..reps));
    let resamples = batch.config().run.bootstrap;
    let seed = batch.config().seed;
    let tag = 0x7432 ^ p.to_bits();
    let mut boot_pairs = vec![Vec::with_capacity(resamples); pairs.len()];
    let mut boot_dist = vec![Vec::with_capacity(resamples); distinct.len()];
    for b in 0..resamples {
        let idx = resample(seed, tag, b, reps);
        let (ratios, _) = ratios_for(&mut idx.into_iter());
        for (j, r) in ratios.iter().enumerate() {
            if r.is_finite() {
                boot_pairs[j].push(*r);
            }
        }
        for (i, &d) in distinct.iter().enumerate() {
            let a = aggregate(&ratios, d);
            if a.is_finite() {
                boot_dist[i].push(a);
            }
        }
    }
    let confidence = batch.config().run.confidence;
    let pair_rows = pairs
        .iter()
        .enumerate()
        .map(|(j, (x, y))| PairMoment {
            x: x.clone(),
            y: y.clone(),
            distance: dists[j],
            ratio: point[j],
            interval: percentile_interval(&mut boot_pairs[j], confidence),
            n_used: counts[j],
        })
        .collect();
    let by_distance = distinct
        .iter()
        .enumerate()
        .map(|(i, &d)| DistanceMoment {
            distance: d,
            ratio: aggregate(&point, d),
            interval: percentile_interval(&mut boot_dist[i], confidence),
            n_pairs: dists.iter().filter(|&&dd| dd == d).count(),
        })
        .collect();
    Ok(MomentStats { p, pairs: pair_rows, by_distance, resamples })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub l: f64,
    /// Estimate of P(sigma(x) - t(x) > L).
    pub q_hat: f64,
    pub interval: Interval,
    pub exceedances: u64,
    pub n: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteTail {
    pub site: Point,
    pub points: Vec<TailPoint>,
    /// Accepted replicas whose search for sigma ran out of horizon.
    pub n_censored: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormTail {
    pub norm: u64,
    pub points: Vec<TailPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub gamma_hat: f64,
    pub intercept: f64,
    /// Grid values used by the fit.
    pub l_used: Vec<f64>,
    pub interval: Option<Interval>,
    /// Bootstrap replicates where the fit was undefined.
    pub failed_resamples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub sites: Vec<Point>,
    pub l_grid: Vec<f64>,
    pub pooled: Vec<TailPoint>,
    pub per_site: Vec<SiteTail>,
    pub by_norm: Vec<NormTail>,
    pub fit: Option<GammaFit>,
}

/// Minimum exceedance count for a grid point to enter the fit.
pub const MIN_EXCEEDANCES: u64 = 10;

/// Least-squares slope of `log(-log q)` against `log L` over grid points
/// with `L > 0`, `0 < q < 1` and at least [`MIN_EXCEEDANCES`] exceedances.
pub fn fit_stretched_exponent(l_grid: &[f64], exceed: &[u64], n: u64) -> Option<(f64, f64, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut used = Vec::new();
    for (&l, &e) in l_grid.iter().zip(exceed) {
        if l <= 0.0 || e < MIN_EXCEEDANCES || e >= n {
            continue;
        }
        let q = e as f64 / n as f64;
        xs.push(l.ln());
        ys.push((-q.ln()).ln());
        used.push(l);
    }
    if xs.len() < 2 {
        return None;
    }
    let mx = mean(&xs);
    let my = mean(&ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx, used))
}

/// Tail of the essential gap `sigma(x) - t(x)` over the L grid, pooled and
/// per site, with the stretched-exponent fit when it is defined.
pub fn tail_curve(batch: &ReplicaBatch, sites: &[Point], l_grid: &[f64]) -> Result<TailCurve, StatsError> {
    if let Some(msg) = grid_problem(l_grid) {
        return Err(StatsError::BadArgument(msg));
    }
    if sites.is_empty() {
        return Err(StatsError::BadArgument("site list is empty".into()));
    }
    let slots: Vec<usize> = sites.iter().map(|p| batch.essential_slot(p)).collect::<Result<_, _>>()?;
    let accepted: Vec<&ReplicaOutcome> = batch.accepted().collect();
    if accepted.is_empty() {
        return Err(StatsError::EmptyBatch);
    }
    let confidence = batch.config().run.confidence;
    let z = z_for_confidence(confidence)?;
    let g = l_grid.len();

    // gaps[site][replica]; None when sigma was not found
    let gaps: Vec<Vec<Option<f64>>> = slots
        .iter()
        .map(|&slot| {
            accepted
                .iter()
                .map(|rep| rep.essential.as_ref().expect("accepted replicas carry essential records")[slot].gap())
                .collect()
        })
        .collect();
    let group = |members: &[usize]| GroupCounts::new(&gaps, members, l_grid);

    let per_site = sites
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let counts = group(&[i]);
            let censored = accepted.len() as u64 - counts.found;
            Ok(SiteTail { site: p.clone(), points: counts.points(l_grid, z, confidence)?, n_censored: censored })
        })
        .collect::<Result<Vec<_>, StatsError>>()?;

    let mut norms: Vec<u64> = sites.iter().map(Point::norm1).collect();
    norms.sort_unstable();
    norms.dedup();
    let by_norm = norms
        .iter()
        .map(|&norm| {
            let members: Vec<usize> = (0..sites.len()).filter(|&i| sites[i].norm1() == norm).collect();
            Ok(NormTail { norm, points: group(&members).points(l_grid, z, confidence)? })
        })
        .collect::<Result<Vec<_>, StatsError>>()?;

    let all: Vec<usize> = (0..sites.len()).collect();
    let pooled_counts = group(&all);
    let pooled = pooled_counts.points(l_grid, z, confidence)?;

    let fit = fit_stretched_exponent(l_grid, &pooled_counts.exceed, pooled_counts.found).map(|(gamma_hat, intercept, l_used)| {
        let resamples = batch.config().run.bootstrap;
        let mut boot = Vec::with_capacity(resamples);
        let mut failed = 0;
        for b in 0..resamples {
            let idx = resample(batch.config().seed, 0x5167, b, accepted.len());
            let n: u64 = idx.iter().map(|&r| pooled_counts.rep_found[r]).sum();
            let e: Vec<u64> = (0..g).map(|i| idx.iter().map(|&r| pooled_counts.rep_exceed[r][i]).sum()).collect();
            match fit_stretched_exponent(l_grid, &e, n) {
                Some((gh, _, _)) => boot.push(gh),
                None => failed += 1,
            }
        }
        GammaFit { gamma_hat, intercept, l_used, interval: percentile_interval(&mut boot, confidence), failed_resamples: failed }
    });
    Ok(TailCurve { sites: sites.to_vec(), l_grid: l_grid.to_vec(), pooled, per_site, by_norm, fit })
}

/// Found gaps and exceedances of a group of sites, per accepted replica.
struct GroupCounts {
    sites: usize,
    rep_found: Vec<u64>,
    rep_exceed: Vec<Vec<u64>>,
    found: u64,
    exceed: Vec<u64>,
}

impl GroupCounts {
    fn new(gaps: &[Vec<Option<f64>>], members: &[usize], l_grid: &[f64]) -> Self {
        let reps = gaps[0].len();
        let mut rep_found = vec![0u64; reps];
        let mut rep_exceed = vec![vec![0u64; l_grid.len()]; reps];
        for &m in members {
            for (r, gap) in gaps[m].iter().enumerate() {
                if let Some(gap) = gap {
                    rep_found[r] += 1;
                    for (i, &l) in l_grid.iter().enumerate() {
                        if *gap > l {
                            rep_exceed[r][i] += 1;
                        }
                    }
                }
            }
        }
        let found = rep_found.iter().sum();
        let exceed = (0..l_grid.len()).map(|i| rep_exceed.iter().map(|e| e[i]).sum()).collect();
        GroupCounts { sites: members.len(), rep_found, rep_exceed, found, exceed }
    }

    /// One site gives one Bernoulli trial per replica and an exact Wilson
    /// interval. Several sites of one replica are dependent, so the pooled
    /// proportion gets a Wilson interval at the effective sample size
    /// `found / deff`, where `deff` is the ratio of the replica-level
    /// (cluster) variance of `q_hat` to the binomial one.
    fn points(&self, l_grid: &[f64], z: f64, confidence: f64) -> Result<Vec<TailPoint>, StatsError> {
        let n = self.found;
        l_grid
            .iter()
            .zip(&self.exceed)
            .enumerate()
            .map(|(i, (&l, &e))| {
                let (q_hat, interval) = if n == 0 {
                    (f64::NAN, Interval { lo: 0.0, hi: 1.0 })
                } else if self.sites == 1 {
                    (e as f64 / n as f64, wilson_interval(e, n, confidence)?)
                } else {
                    let q = e as f64 / n as f64;
                    (q, wilson_score(q, self.effective_size(i, q), z))
                };
                Ok(TailPoint { l, q_hat, interval, exceedances: e, n })
            })
            .collect()
    }

    fn effective_size(&self, i: usize, q: f64) -> f64 {
        let units = self.rep_found.iter().filter(|&&f| f > 0).count() as f64;
        let n = self.found as f64;
        let binomial = q * (1.0 - q) / n;
        if binomial == 0.0 || units < 2.0 {
            // no spread to measure; one unit per contributing replica
            return units.max(1.0);
        }
        let resid: f64 = self
            .rep_found
            .iter()
            .zip(&self.rep_exceed)
            .map(|(&f, e)| (e[i] as f64 - q * f as f64).powi(2))
            .sum();
        let cluster = units / (units - 1.0) * resid / (n * n);
        if cluster == 0.0 { n } else { n * binomial / cluster }
    }
}

/// [`tail_curve`] that additionally requires the exponent fit to exist.
pub fn sigma_gap_tail(batch: &ReplicaBatch, sites: &[Point], l_grid: &[f64]) -> Result<TailCurve, StatsError> {
    let curve = tail_curve(batch, sites, l_grid)?;
    if curve.fit.is_none() {
        return Err(StatsError::FitUndefined);
    }
    Ok(curve)
}
