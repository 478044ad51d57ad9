use serde::{Deserialize, Serialize};

use super::{CookieEnvironment, JumpDistribution};
use crate::error::Result;

/// JSON form of a jump law: explicit atoms, or the two-point family
/// `{-1: epsilon, L: 1 - epsilon}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum DistributionSpec {
    Explicit {
        support: Vec<i64>,
        probs: Vec<f64>,
    },
    Family {
        #[serde(rename = "L")]
        max_jump: i64,
        epsilon: f64,
    },
}

impl DistributionSpec {
    pub fn build(&self) -> Result<JumpDistribution> {
        match self {
            Self::Explicit { support, probs } => JumpDistribution::from_pairs(support, probs),
            Self::Family { max_jump, epsilon } => {
                JumpDistribution::epsilon_family(*max_jump, *epsilon)
            }
        }
    }
}

/// JSON form of an environment: one law (a single cookie) or a list of laws
/// under `"cookies"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvironmentSpec {
    Cookies { cookies: Vec<DistributionSpec> },
    Single(DistributionSpec),
}

impl EnvironmentSpec {
    pub fn build(&self) -> Result<CookieEnvironment> {
        match self {
            Self::Single(d) => Ok(CookieEnvironment::one_cookie(d.build()?)),
            Self::Cookies { cookies } => {
                CookieEnvironment::new(cookies.iter().map(DistributionSpec::build).collect::<Result<_>>()?)
            }
        }
    }
}
