//! Result tables (CSV) and summaries (JSON).
//!
//! Every table is a pure function of the batch, so `results.csv` does not
//! depend on the thread count. Points are written with `;` between
//! coordinates so they stay a single CSV field.

use std::fs;
use std::path::Path;

use contactkit::stats::{
    estimate_mu, estimate_rho, tail_curve, theorem1_order_stats, theorem2_moment_stats, Interval, TailPoint,
};
use contactkit::{ExperimentConfig, ExperimentKind, Point, ReplicaBatch, StatsError};
use serde_json::{json, Value};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SEEDS_FILE: &str = "seeds.csv";

pub struct Table {
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

/// CSV header of each experiment kind.
pub fn columns(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::Shape => &["n", "site", "mu_hat", "std_err", "n_used", "n_censored"],
        ExperimentKind::Theorem1 => &["k", "p_hat", "ci_lo", "ci_hi", "mean_t_k", "flagged_fraction"],
        ExperimentKind::Theorem2 => &["p", "scope", "x", "y", "distance", "ratio", "ci_lo", "ci_hi", "count"],
        ExperimentKind::SigmaTail => &["scope", "key", "l", "q_hat", "ci_lo", "ci_hi", "exceedances", "n"],
        ExperimentKind::Rho => &["accepted", "rejected", "ambiguous", "rho_hat", "ci_lo", "ci_hi", "rho_low", "rho_high"],
    }
}

pub fn point_field(p: &Point) -> String {
    p.coords().iter().map(i32::to_string).collect::<Vec<_>>().join(";")
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn interval_fields(iv: Option<Interval>) -> [String; 2] {
    match iv {
        Some(iv) => [num(iv.lo), num(iv.hi)],
        None => [String::new(), String::new()],
    }
}

fn tail_rows(scope: &str, key: String, points: &[TailPoint], rows: &mut Vec<Vec<String>>) {
    for p in points {
        let [lo, hi] = interval_fields(Some(p.interval));
        rows.push(vec![scope.into(), key.clone(), num(p.l), num(p.q_hat), lo, hi, p.exceedances.to_string(), p.n.to_string()]);
    }
}

/// Result table and JSON estimates for the configured experiment kind.
pub fn estimates(batch: &ReplicaBatch) -> Result<(Table, Value, Vec<String>), StatsError> {
    let cfg = batch.config();
    let kind = cfg.kind;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let value = match kind {
        ExperimentKind::Shape => {
            let s = cfg.shape.as_ref().expect("validated");
            let report = estimate_mu(batch, &s.direction, &s.n_list)?;
            for r in &report.rows {
                rows.push(vec![
                    r.n.to_string(),
                    point_field(&r.site),
                    num(r.mu_hat),
                    num(r.std_err),
                    r.n_used.to_string(),
                    r.n_censored.to_string(),
                ]);
            }
            json!(report)
        }
        ExperimentKind::Theorem1 => {
            let s = cfg.theorem1.as_ref().expect("validated");
            let os = theorem1_order_stats(batch, &s.direction, s.n)?;
            for r in &os.rows {
                let [lo, hi] = interval_fields(Some(r.interval));
                rows.push(vec![r.k.to_string(), num(r.p_hat), lo, hi, num(r.mean_t), num(r.flagged_fraction)]);
            }
            json!(os)
        }
        ExperimentKind::Theorem2 => {
            let s = cfg.theorem2.as_ref().expect("validated");
            let mut all = Vec::new();
            for &p in &s.p {
                let ms = theorem2_moment_stats(batch, &s.pairs, p)?;
                for pm in &ms.pairs {
                    let [lo, hi] = interval_fields(pm.interval);
                    rows.push(vec![
                        num(p),
                        "pair".into(),
                        point_field(&pm.x),
                        point_field(&pm.y),
                        pm.distance.to_string(),
                        num(pm.ratio),
                        lo,
                        hi,
                        pm.n_used.to_string(),
                    ]);
                }
                for dm in &ms.by_distance {
                    let [lo, hi] = interval_fields(dm.interval);
                    rows.push(vec![
                        num(p),
                        "distance".into(),
                        String::new(),
                        String::new(),
                        dm.distance.to_string(),
                        num(dm.ratio),
                        lo,
                        hi,
                        dm.n_pairs.to_string(),
                    ]);
                }
                all.push(ms);
            }
            json!(all)
        }
        ExperimentKind::SigmaTail => {
            let s = cfg.sigma_tail.as_ref().expect("validated");
            let curve = tail_curve(batch, &s.sites, &s.l_grid)?;
            tail_rows("pooled", String::new(), &curve.pooled, &mut rows);
            for nt in &curve.by_norm {
                tail_rows("norm", nt.norm.to_string(), &nt.points, &mut rows);
            }
            for st in &curve.per_site {
                tail_rows("site", point_field(&st.site), &st.points, &mut rows);
            }
            if curve.fit.is_none() {
                warnings.push(StatsError::FitUndefined.to_string());
            }
            json!(curve)
        }
        ExperimentKind::Rho => {
            let rho = estimate_rho(batch)?;
            let c = rho.counts;
            let [lo, hi] = interval_fields(Some(rho.interval));
            rows.push(vec![
                c.accepted.to_string(),
                c.rejected.to_string(),
                c.ambiguous.to_string(),
                num(rho.rho_hat),
                lo,
                hi,
                num(rho.rho_low),
                num(rho.rho_high),
            ]);
            json!(rho)
        }
    };
    Ok((Table { header: columns(kind), rows }, value, warnings))
}

pub fn diagnostics(batch: &ReplicaBatch) -> Value {
    let c = batch.counts();
    let total = c.total().max(1) as f64;
    json!({
        "attempts": c.total(),
        "accepted": c.accepted,
        "rejected": c.rejected,
        "ambiguous": c.ambiguous,
        "acceptance_rate": c.accepted as f64 / total,
        "rejection_rate": (c.rejected + c.ambiguous) as f64 / total,
        "ambiguous_fraction": c.ambiguous as f64 / total,
        "boundary_contact_fraction": batch.boundary_contact_fraction(),
    })
}

pub fn version() -> Value {
    json!({
        "package": env!("CARGO_PKG_VERSION"),
        "git": env!("CONTACTKIT_GIT_DESCRIBE"),
    })
}

pub fn summary(
    config: &ExperimentConfig,
    status: &str,
    diagnostics: Value,
    estimates: Option<Value>,
    warnings: &[String],
    wall_time: f64,
) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "status": status,
        "kind": config.kind,
        "version": version(),
        "config": config,
        "diagnostics": diagnostics,
        "estimates": estimates,
        "warnings": warnings,
        "wall_time_seconds": wall_time,
        "seed_log": SEEDS_FILE,
    })
}

pub fn write_table(path: &Path, table: &Table) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Write { path: path.to_path_buf(), source: e.into() };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(table.header).map_err(io)?;
    for r in &table.rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Write { path: path.to_path_buf(), source: e })
}

/// One line per attempted replica, enough to re-run any of them alone.
pub fn seed_table(batch: &ReplicaBatch) -> Table {
    let rows = batch
        .replicas()
        .iter()
        .map(|r| {
            let v = &r.verdict;
            vec![
                r.seed.replica.to_string(),
                r.seed.root.to_string(),
                match v.verdict {
                    contactkit::Verdict::Survives => "SURVIVES",
                    contactkit::Verdict::Dies => "DIES",
                    contactkit::Verdict::Ambiguous => "AMBIGUOUS",
                }
                .to_string(),
                v.extinction_time.map(num).unwrap_or_default(),
                v.alive_at_horizon.to_string(),
                v.boundary_contact.to_string(),
            ]
        })
        .collect();
    Table {
        header: &["replica", "root_seed", "verdict", "extinction_time", "alive_at_horizon", "boundary_contact"],
        rows,
    }
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    fs::write(path, text).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}
