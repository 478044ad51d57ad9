use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::distribution::JumpDistribution;
use crate::error::{Error, Result};

/// `C` cookies per site; the `i`-th visit to a site uses `laws[i - 1]`, and
/// visits after the `C`-th use the symmetric nearest-neighbour rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CookieEnvironment {
    laws: Vec<JumpDistribution>,
}

/// Which standing hypotheses an environment satisfies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// Every excited law has mean `>= 0`.
    pub non_negative_means: bool,
    /// All excited laws share one support.
    pub shared_support: bool,
    /// The shared support has at least two points.
    pub support_has_two_points: bool,
    /// Single cookie, infimum of the support `-1` and finite supremum.
    pub one_cookie_skip_free: bool,
}

impl AssumptionReport {
    pub fn general_model(&self) -> bool {
        self.non_negative_means && self.shared_support && self.support_has_two_points
    }

    pub fn all(&self) -> bool {
        self.general_model() && self.one_cookie_skip_free
    }
}

impl CookieEnvironment {
    pub fn new(laws: Vec<JumpDistribution>) -> Result<Self> {
        if laws.is_empty() {
            return Err(Error::InvalidEnvironment(
                "at least one cookie per site is required".into(),
            ));
        }
        Ok(Self { laws })
    }

    pub fn one_cookie(q: JumpDistribution) -> Self {
        Self { laws: vec![q] }
    }

    /// Number of cookies per site.
    pub fn cookies(&self) -> usize {
        self.laws.len()
    }

    pub fn laws(&self) -> &[JumpDistribution] {
        &self.laws
    }

    /// Law used on the `visit`-th arrival at a site (1-based), or `None` once
    /// the site is out of cookies.
    #[inline]
    pub fn law_for_visit(&self, visit: u32) -> Option<&JumpDistribution> {
        self.laws.get(visit.wrapping_sub(1) as usize)
    }

    /// Largest jump any excited law can make.
    pub fn max_jump(&self) -> i64 {
        self.laws.iter().map(JumpDistribution::max_jump).max().unwrap()
    }

    pub fn assumptions(&self) -> AssumptionReport {
        let first = self.laws[0].support();
        AssumptionReport {
            non_negative_means: self.laws.iter().all(|q| q.mean() >= 0.0),
            shared_support: self.laws.iter().all(|q| q.support() == first),
            support_has_two_points: first.len() >= 2,
            one_cookie_skip_free: self.laws.len() == 1 && first.first() == Some(&-1),
        }
    }

    /// Short hex digest identifying the environment in trajectory records.
    pub fn digest(&self) -> String {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(self.laws.len() as u64).to_le_bytes());
        for q in &self.laws {
            q.canonical_bytes(&mut bytes);
        }
        let hash = Sha256::digest(&bytes);
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
