//! Drift quantities, recurrence classification and the ballisticity condition
//!
//! ```text
//! 2 (1 - (c - 1) / ell) Q(ell + c - 1) - 1 > 2 / c,   c >= 3, ell >= 3c.
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::walk::{CookieEnvironment, JumpDistribution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Recurrent,
    Transient,
}

/// `Q(j) = sum_{k >= j} q(k)`.
pub fn tail_q(q: &JumpDistribution, j: i64) -> f64 {
    q.tail(j)
}

/// `sum_k k q(k)`.
pub fn mean_drift(q: &JumpDistribution) -> f64 {
    q.mean()
}

/// Expected total drift: the sum of the excited laws' means.
pub fn total_drift(env: &CookieEnvironment) -> f64 {
    env.laws().iter().map(JumpDistribution::mean).sum()
}

/// Recurrent iff `0 <= delta <= 1`.
pub fn classify(delta: f64) -> Result<Classification> {
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::InvalidEnvironment(format!(
            "expected total drift {delta} is negative"
        )));
    }
    Ok(if delta <= 1.0 {
        Classification::Recurrent
    } else {
        Classification::Transient
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriteriaReport {
    pub delta: f64,
    #[serde(rename = "Q_table")]
    pub q_table: Vec<f64>,
    pub c: u32,
    pub ell: u32,
    pub condition_lhs: f64,
    pub condition_rhs: f64,
    pub satisfied: bool,
    /// `None` when the drift is negative and the walk is outside the model.
    pub classification: Option<Classification>,
    pub delta_exceeds_two: bool,
    /// `Q(1) > 1/2`, equivalently `q(-1) + q(0) < 1/2`.
    pub upper_tail_exceeds_half: bool,
    /// False only if the condition holds while one of its consequences fails.
    pub consequences_hold: bool,
}

fn check_grid_point(c: u32, ell: u32) -> Result<()> {
    if c < 3 {
        return Err(Error::Precondition(format!("c = {c} must be at least 3")));
    }
    if ell < 3 * c {
        return Err(Error::Precondition(format!(
            "ell = {ell} must be at least 3c = {}",
            3 * c
        )));
    }
    Ok(())
}

/// Left-hand side `2 (1 - (c-1)/ell) Q(ell + c - 1) - 1`.
pub fn condition_lhs(q: &JumpDistribution, c: u32, ell: u32) -> f64 {
    let (cf, lf) = (f64::from(c), f64::from(ell));
    2.0 * (1.0 - (cf - 1.0) / lf) * q.tail(i64::from(ell + c - 1)) - 1.0
}

pub fn ballisticity_condition(q: &JumpDistribution, c: u32, ell: u32) -> Result<CriteriaReport> {
    check_grid_point(c, ell)?;
    let delta = q.mean();
    let lhs = condition_lhs(q, c, ell);
    let rhs = 2.0 / f64::from(c);
    let satisfied = lhs > rhs;
    let delta_exceeds_two = delta > 2.0;
    let upper_tail_exceeds_half = q.tail(1) > 0.5;
    Ok(CriteriaReport {
        delta,
        q_table: q.tail_table().to_vec(),
        c,
        ell,
        condition_lhs: lhs,
        condition_rhs: rhs,
        satisfied,
        classification: classify(delta).ok(),
        delta_exceeds_two,
        upper_tail_exceeds_half,
        consequences_hold: !satisfied || (delta_exceeds_two && upper_tail_exceeds_half),
    })
}

/// First `(c, ell)` satisfying the condition, scanning `c` upward from 3 and,
/// for each `c`, `ell` upward from `3c` to `L - c + 1`.
pub fn search_parameters(q: &JumpDistribution) -> Option<(u32, u32)> {
    let max_jump = u32::try_from(q.max_jump()).ok()?;
    (3..=max_jump)
        .flat_map(|c| {
            let hi = (max_jump + 1).saturating_sub(c);
            (3 * c..=hi).map(move |ell| (c, ell))
        })
        .find(|&(c, ell)| condition_lhs(q, c, ell) > 2.0 / f64::from(c))
}

/// Closed-form threshold on `eps` for the two-point family
/// `{-1: eps, ell + c - 1: 1 - eps}`.
pub fn frontier_closed_form(c: u32, ell: u32) -> f64 {
    let (cf, lf) = (f64::from(c), f64::from(ell));
    let shrink = 1.0 - (cf - 1.0) / lf;
    (1.0 - 2.0 * (cf - 1.0) / lf - 2.0 / cf) / (2.0 * shrink)
}

/// Bisection tolerance on `eps`.
pub const FRONTIER_TOLERANCE: f64 = 1e-12;

/// The `eps` at which the condition flips for a family decreasing in `eps`.
///
/// The condition must hold at `eps = 0` and fail at `eps = 1`.
pub fn frontier_epsilon<F>(c: u32, ell: u32, family: F) -> Result<f64>
where
    F: Fn(f64) -> Result<JumpDistribution>,
{
    check_grid_point(c, ell)?;
    let rhs = 2.0 / f64::from(c);
    let gap = |eps: f64| -> Result<f64> { Ok(condition_lhs(&family(eps)?, c, ell) - rhs) };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if gap(lo)? <= 0.0 || gap(hi)? > 0.0 {
        return Err(Error::NoFrontier);
    }
    while hi - lo > FRONTIER_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
