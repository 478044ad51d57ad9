//! Coarse-graining of a long-range one-cookie walk onto blocks
//! `B_j = [l j, l j + c - 1]`, and the arrow systems read off from it.
//!
//! Each block runs its own sequence of trigger times `T <= U <= V`. The
//! sequence is decided by whether the block still held cookies when the
//! previous sequence closed; its outcome is one arrow `E(j, k)`.

mod bundle;
mod law;
mod report;
mod scan;
#[cfg(test)]
mod tests;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bundle::{
    arrows_from_records, build_e, build_h_k, bundle_from_records, h_k_from_blocks, landing_stats, sandwich_check, BlockChanges, CoupledBundle, LandingStats,
    SandwichReport, SandwichViolation,
};
pub use law::{build_m, strassen_bundle, IndependentArrows, PlusSampler, StrassenPair};
pub use report::{analyze_replica, verify_coupling, BranchStats, Check, CheckStatus, CouplingReport, ReplicaCoupling};
pub use scan::{scan_triggers, scan_with_idle, IdleSequence, MegaCookieLedger};

/// Block width `c` and spacing `l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MegaVertexConfig {
    pub c: u32,
    pub ell: u32,
}

impl MegaVertexConfig {
    pub fn new(c: u32, ell: u32) -> Result<Self> {
        if c < 3 || ell < 3 * c {
            return Err(Error::Precondition(format!(
                "block width c = {c} and spacing l = {ell} need c >= 3 and l >= 3c"
            )));
        }
        Ok(Self { c, ell })
    }

    pub(crate) fn c(&self) -> i64 {
        i64::from(self.c)
    }

    pub(crate) fn l(&self) -> i64 {
        i64::from(self.ell)
    }

    /// Lowest vertex of `B_j`.
    pub fn block_start(&self, j: i64) -> i64 {
        self.l() * j
    }

    /// Highest vertex of `B_j`.
    pub fn block_end(&self, j: i64) -> i64 {
        self.l() * j + self.c() - 1
    }

    /// The block containing `y`, if any.
    pub fn block_of(&self, y: i64) -> Option<i64> {
        let j = y.div_euclid(self.l());
        (y.rem_euclid(self.l()) < self.c()).then_some(j)
    }

    /// Plus-arrow probability of the comparison walk on its first `c` visits.
    pub fn arrow_bound(&self, q: &crate::walk::JumpDistribution) -> f64 {
        let (c, l) = (self.c as f64, self.ell as f64);
        (1.0 - (c - 1.0) / l) * q.tail(self.l() + self.c() - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Cookie,
    NoCookie,
}

/// How a trigger sequence resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcase {
    /// Entered `B_j` on a fresh vertex, so `U = T` and `V = U + 1`.
    HitCookieAtT,
    /// Found a fresh vertex of `B_j` after entering, before leaving the
    /// window below it.
    HitCookieLater,
    /// Left the window to the left at `U`, so `V = U`.
    ExitedLeft,
    /// Passed the top of `B_j` first, then came back and left from a fresh
    /// vertex of `B_j`.
    HitCookieAfterExit,
    /// Passed the top of `B_j` and left the outer window without eating.
    ExitedWithoutCookie,
    /// The block was already empty when the sequence opened.
    NoCookie,
}

/// One trigger sequence `(T, U, V)` of block `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TriggerRecord {
    pub j: i64,
    pub k: u32,
    /// Closing time of the previous sequence of this block (0 for `k = 1`).
    pub opened: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "U")]
    pub u: Option<usize>,
    #[serde(rename = "V")]
    pub v: Option<usize>,
    pub branch: Branch,
    pub subcase: Option<Subcase>,
    /// Whether `B_{j+1}` still held cookies at `U` (cookie branch only).
    pub neighbor_state: Option<bool>,
    pub arrow: Option<i8>,
}

impl TriggerRecord {
    pub fn is_censored(&self) -> bool {
        self.v.is_none()
    }
}

/// `+1` in the four cases that leave `E(j, k)` untouched, `-1` otherwise.
pub fn assign_arrow(record: &TriggerRecord, y_v: i64, cfg: &MegaVertexConfig) -> Result<i8> {
    if record.is_censored() {
        return Err(Error::Censored);
    }
    Ok(arrow_for(cfg, record.j, record.branch, record.neighbor_state, y_v))
}

pub(crate) fn arrow_for(
    cfg: &MegaVertexConfig,
    j: i64,
    branch: Branch,
    neighbor_state: Option<bool>,
    y_v: i64,
) -> i8 {
    let next = cfg.block_start(j + 1);
    let threshold = match (branch, neighbor_state) {
        (Branch::Cookie, Some(true)) => next,
        _ => next + cfg.c() - 1,
    };
    if y_v >= threshold {
        1
    } else {
        -1
    }
}
