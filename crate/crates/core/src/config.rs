//! Experiment configuration and its validation.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::lattice::{Lattice, LatticeError, Point};
use crate::rates::RateSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Shape,
    Theorem1,
    Theorem2,
    SigmaTail,
    Rho,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Shape => "shape",
            ExperimentKind::Theorem1 => "theorem1",
            ExperimentKind::Theorem2 => "theorem2",
            ExperimentKind::SigmaTail => "sigma-tail",
            ExperimentKind::Rho => "rho",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Shape, Self::Theorem1, Self::Theorem2, Self::SigmaTail, Self::Rho].into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub d: usize,
    pub radius: u32,
}

fn default_confidence() -> f64 {
    0.95
}

fn default_bootstrap() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: f64,
    /// Target number of accepted (surviving) replicas.
    pub replicas: usize,
    /// Cap on the total number of replicas attempted.
    pub max_attempts: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    /// Initial infected set; defaults to the origin alone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<Point>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSection {
    pub direction: Point,
    pub n_list: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem1Section {
    pub direction: Point,
    pub n: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem2Section {
    pub pairs: Vec<(Point, Point)>,
    pub p: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaTailSection {
    pub sites: Vec<Point>,
    pub l_grid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub lattice: LatticeSection,
    pub rates: RateSpec,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem1: Option<Theorem1Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem2: Option<Theorem2Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_tail: Option<SigmaTailSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

/// One named problem with a configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Sites whose hitting times (and essential hitting times) each accepted
/// replica records.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackPlan {
    pub hitting: Vec<Point>,
    pub essential: Vec<Point>,
}

impl TrackPlan {
    pub fn merge(&self, other: &TrackPlan) -> TrackPlan {
        let hit: BTreeSet<Point> = self.hitting.iter().chain(&other.hitting).cloned().collect();
        let ess: BTreeSet<Point> = self.essential.iter().chain(&other.essential).cloned().collect();
        TrackPlan { hitting: hit.into_iter().collect(), essential: ess.into_iter().collect() }
    }
}

impl ExperimentConfig {
    pub fn build_lattice(&self) -> Result<Lattice, LatticeError> {
        Lattice::ball(self.lattice.d, self.lattice.radius)
    }

    pub fn initial_points(&self) -> Vec<Point> {
        self.run.initial.clone().unwrap_or_else(|| vec![Point::origin(self.lattice.d)])
    }

    /// Union of the sites needed by every section present.
    pub fn plan(&self) -> TrackPlan {
        let d = self.lattice.d;
        let mut hit = BTreeSet::new();
        let mut ess = BTreeSet::new();
        if let Some(s) = &self.shape {
            for &n in &s.n_list {
                hit.insert(s.direction.scale(n as i32));
            }
        }
        if let Some(s) = &self.theorem1 {
            for k in 0..=s.n {
                hit.insert(s.direction.scale(k as i32));
            }
        }
        if let Some(s) = &self.theorem2 {
            for (x, y) in &s.pairs {
                hit.insert(x.clone());
                hit.insert(y.clone());
            }
        }
        if let Some(s) = &self.sigma_tail {
            for x in &s.sites {
                hit.insert(x.clone());
                ess.insert(x.clone());
            }
        }
        hit.insert(Point::origin(d));
        TrackPlan { hitting: hit.into_iter().collect(), essential: ess.into_iter().collect() }
    }

    /// Every violation, without running anything.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |field: &str, message: String| out.push(Violation { field: field.to_string(), message });
        let d = self.lattice.d;
        let m = self.lattice.radius as u64;
        if d == 0 {
            bad("lattice.d", "dimension must be at least 1".into());
        }
        if m == 0 {
            bad("lattice.radius", "box radius must be at least 1".into());
        }
        if let Err(e) = self.rates.validate() {
            bad("rates", e.to_string());
        }
        let run = &self.run;
        if !(run.horizon.is_finite() && run.horizon > 0.0) {
            bad("run.horizon", format!("horizon must be positive and finite, got {}", run.horizon));
        }
        if run.replicas == 0 {
            bad("run.replicas", "replica target must be at least 1".into());
        }
        if run.max_attempts < run.replicas {
            bad("run.max_attempts", format!("attempt cap {} is below the replica target {}", run.max_attempts, run.replicas));
        }
        if !(run.confidence > 0.0 && run.confidence < 1.0) {
            bad("run.confidence", format!("confidence must lie in (0, 1), got {}", run.confidence));
        }
        if run.bootstrap == 0 {
            bad("run.bootstrap", "bootstrap resample count must be at least 1".into());
        }

        let check_point = |field: &str, p: &Point, out: &mut Vec<Violation>| {
            if p.dim() != d {
                out.push(Violation { field: field.into(), message: format!("site {p} has dimension {}, expected {d}", p.dim()) });
            } else if p.norm1() > m {
                out.push(Violation {
                    field: field.into(),
                    message: format!("site {p} has |x|_1 = {} > box radius {m}", p.norm1()),
                });
            }
        };
        if let Some(init) = &run.initial {
            if init.is_empty() {
                out.push(Violation { field: "run.initial".into(), message: "initial set is empty".into() });
            }
            if !init.iter().any(Point::is_origin) {
                out.push(Violation { field: "run.initial".into(), message: "initial set must contain the origin".into() });
            }
            for p in init {
                check_point("run.initial", p, &mut out);
            }
        }
        if let Some(s) = &self.shape {
            if s.n_list.is_empty() {
                out.push(Violation { field: "shape.n_list".into(), message: "n_list is empty".into() });
            }
            if s.n_list.contains(&0) {
                out.push(Violation { field: "shape.n_list".into(), message: "n must be at least 1".into() });
            }
            for &n in &s.n_list {
                check_scaled("shape.n_list", &s.direction, n, d, m, &mut out);
            }
        }
        if let Some(s) = &self.theorem1 {
            if s.n == 0 {
                out.push(Violation { field: "theorem1.n".into(), message: "n must be at least 1".into() });
            }
            if s.direction.dim() == d && s.direction.is_origin() {
                out.push(Violation { field: "theorem1.direction".into(), message: "direction must be nonzero".into() });
            }
            check_scaled("theorem1.n", &s.direction, s.n, d, m, &mut out);
        }
        if let Some(s) = &self.theorem2 {
            if s.pairs.is_empty() {
                out.push(Violation { field: "theorem2.pairs".into(), message: "pair list is empty".into() });
            }
            for (x, y) in &s.pairs {
                check_point("theorem2.pairs", x, &mut out);
                check_point("theorem2.pairs", y, &mut out);
                if x == y {
                    out.push(Violation { field: "theorem2.pairs".into(), message: format!("pair ({x}, {y}) has x = y") });
                }
            }
            if s.p.is_empty() {
                out.push(Violation { field: "theorem2.p".into(), message: "moment list is empty".into() });
            }
            for &p in &s.p {
                if !(p.is_finite() && p > 0.0) {
                    out.push(Violation { field: "theorem2.p".into(), message: format!("moment order must be positive, got {p}") });
                }
            }
        }
        if let Some(s) = &self.sigma_tail {
            if s.sites.is_empty() {
                out.push(Violation { field: "sigma_tail.sites".into(), message: "site list is empty".into() });
            }
            for x in &s.sites {
                check_point("sigma_tail.sites", x, &mut out);
            }
            if let Some(msg) = grid_problem(&s.l_grid) {
                out.push(Violation { field: "sigma_tail.l_grid".into(), message: msg });
            }
        }
        let missing = match self.kind {
            ExperimentKind::Shape => self.shape.is_none().then_some("shape"),
            ExperimentKind::Theorem1 => self.theorem1.is_none().then_some("theorem1"),
            ExperimentKind::Theorem2 => self.theorem2.is_none().then_some("theorem2"),
            ExperimentKind::SigmaTail => self.sigma_tail.is_none().then_some("sigma_tail"),
            ExperimentKind::Rho => None,
        };
        if let Some(section) = missing {
            out.push(Violation {
                field: section.into(),
                message: format!("experiment kind {} requires a [{section}] section", self.kind),
            });
        }
        out
    }
}

fn check_scaled(field: &str, x: &Point, n: u32, d: usize, m: u64, out: &mut Vec<Violation>) {
    if x.dim() != d {
        out.push(Violation { field: field.into(), message: format!("direction {x} has dimension {}, expected {d}", x.dim()) });
        return;
    }
    let reach = n as u64 * x.norm1();
    if reach > m {
        out.push(Violation {
            field: field.into(),
            message: format!("n*|x|_1 = {n}*{} = {reach} exceeds box radius {m}", x.norm1()),
        });
    }
}

/// Grid must be nonempty, finite, nonnegative and strictly increasing.
pub(crate) fn grid_problem(grid: &[f64]) -> Option<String> {
    if grid.is_empty() {
        return Some("L grid is empty".into());
    }
    if grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Some("L grid values must be finite and nonnegative".into());
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Some("L grid must be strictly increasing".into());
    }
    None
}
