//! Infection rates: a uniform λ or a quenched random environment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::Point;
use crate::rng::StreamKey;

#[derive(Debug, Error, PartialEq)]
pub enum RateError {
    #[error("infection rate must be finite and nonnegative, got {0}")]
    NegativeRate(f64),
    #[error("environment bounds must satisfy 0 <= lambda_min <= lambda_max, got [{min}, {max}]")]
    BadEnvironment { min: f64, max: f64 },
}

/// Transmission rates across nearest-neighbor edges. Recovery always has
/// rate 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateSpec {
    Uniform { lambda: f64 },
    /// i.i.d. uniform rates on `[lambda_min, lambda_max]`, one per undirected
    /// edge, fixed by `env_seed`.
    Environment { lambda_min: f64, lambda_max: f64, env_seed: u64 },
}

const ENV_DOMAIN: u64 = 0x454E_5649_524F_4E00;

impl RateSpec {
    pub fn uniform(lambda: f64) -> Self {
        RateSpec::Uniform { lambda }
    }

    pub fn validate(&self) -> Result<(), RateError> {
        match *self {
            RateSpec::Uniform { lambda } => {
                if !(lambda.is_finite() && lambda >= 0.0) {
                    return Err(RateError::NegativeRate(lambda));
                }
            }
            RateSpec::Environment { lambda_min: min, lambda_max: max, .. } => {
                if !(min.is_finite() && max.is_finite() && 0.0 <= min && min <= max) {
                    return Err(RateError::BadEnvironment { min, max });
                }
            }
        }
        Ok(())
    }

    /// Rate of the arrow from `from` to its neighbor in direction `dir`.
    /// Symmetric: the reverse arrow gets the same rate.
    pub fn edge_rate(&self, from: &Point, dir: usize) -> f64 {
        match *self {
            RateSpec::Uniform { lambda } => lambda,
            RateSpec::Environment { lambda_min, lambda_max, env_seed } => {
                let axis = dir / 2;
                // key the undirected edge by its lower endpoint and axis
                let lower = if dir.is_multiple_of(2) { from.clone() } else { from.step(dir) };
                let mut rng = StreamKey::root(env_seed)
                    .with(ENV_DOMAIN)
                    .with(axis as u64)
                    .with_point(lower.coords())
                    .stream();
                rng.uniform(lambda_min, lambda_max)
            }
        }
    }

    /// Largest rate any edge can carry.
    pub fn max_rate(&self) -> f64 {
        match *self {
            RateSpec::Uniform { lambda } => lambda,
            RateSpec::Environment { lambda_max, .. } => lambda_max,
        }
    }
}
