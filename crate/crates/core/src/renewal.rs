//! Cut times of a transient walk and the speed estimators built on them.
//!
//! A cut time is a step `t` at which the walk sits at a strict running maximum,
//! jumps by the maximal amount `L`, and never afterwards drops below the
//! landing point. Consecutive cut times split the path into i.i.d. blocks
//! (after the first), so the speed is `E[J_2 - J_1] / E[tau_2 - tau_1]`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::replicas::run_replicas;
use crate::stats::{bootstrap_mean_interval, normal_critical, Moments, Proportion, RatioMoments};
use crate::uniform::UniformSource;
use crate::walk::checks::StepViolation;
use crate::walk::{CookieEnvironment, Trajectory, WalkState};

pub const DEFAULT_LEVEL: f64 = 0.99;

/// A cut time `tau` and the position `J = Y_tau`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CutTimeRecord {
    pub tau: usize,
    #[serde(rename = "J")]
    pub position: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedMethod {
    Renewal,
    Naive,
}

impl SpeedMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Renewal => "renewal",
            Self::Naive => "naive",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpeedEstimate {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_renewals: usize,
    pub method: SpeedMethod,
}

impl SpeedEstimate {
    fn new(point: f64, lo: f64, hi: f64, n_renewals: usize, method: SpeedMethod) -> Self {
        Self {
            point,
            ci_low: lo.min(point),
            ci_high: hi.max(point),
            n_renewals,
            method,
        }
    }

    pub fn excludes_zero(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }
}

/// Guard window `10 L^2 / max(delta - 1, 0.1)` steps, rounded up.
pub fn default_guard(max_jump: i64, delta: f64) -> usize {
    let l = max_jump as f64;
    (10.0 * l * l / (delta - 1.0).max(0.1)).ceil() as usize
}

/// All cut times `t` with `t + guard <= horizon`.
///
/// `t` qualifies when `Y_{t+1} - Y_t = L`, `Y_s < Y_t` for every `s < t`, and
/// `Y_u >= Y_{t+1}` for every `u` in `(t, horizon]`.
pub fn detect_cut_times(traj: &Trajectory, guard: usize) -> Vec<CutTimeRecord> {
    let max_jump = traj.env().max_jump();
    let pos = traj.positions();
    let horizon = traj.horizon();
    if horizon == 0 {
        return Vec::new();
    }
    // suffix_min[t] = min_{u >= t} Y_u
    let mut suffix_min = pos.to_vec();
    for t in (0..horizon).rev() {
        suffix_min[t] = suffix_min[t].min(suffix_min[t + 1]);
    }
    let mut out = Vec::new();
    let mut best_before = i64::MIN;
    for t in 0..horizon {
        let y = pos[t];
        if t + guard > horizon {
            break;
        }
        if y > best_before && pos[t + 1] - y == max_jump && suffix_min[t + 1] >= pos[t + 1] {
            out.push(CutTimeRecord { tau: t, position: y });
        }
        best_before = best_before.max(y);
    }
    out
}

/// Gap moments `(tau_{k+1} - tau_k, J_{k+1} - J_k)` for `k >= 1`.
pub fn renewal_moments(records: &[CutTimeRecord]) -> RatioMoments {
    let mut m = RatioMoments::default();
    for w in records.windows(2) {
        m.push((w[1].tau - w[0].tau) as f64, (w[1].position - w[0].position) as f64);
    }
    m
}

/// Ratio estimate from pooled gap moments with a delta-method interval.
pub fn speed_from_moments(m: &RatioMoments, level: f64) -> Result<SpeedEstimate> {
    if m.n < 2 {
        return Err(Error::InsufficientRenewals {
            needed: 3,
            found: m.n as usize + usize::from(m.n > 0),
        });
    }
    let point = m.ratio();
    let half = normal_critical(level) * m.ratio_std_error();
    Ok(SpeedEstimate::new(
        point,
        point - half,
        point + half,
        m.n as usize,
        SpeedMethod::Renewal,
    ))
}

/// `mean(dJ) / mean(dtau)` over consecutive cut times; the first record only
/// anchors the first gap.
pub fn estimate_speed_renewal(records: &[CutTimeRecord], level: f64) -> Result<SpeedEstimate> {
    if records.len() < 3 {
        return Err(Error::InsufficientRenewals {
            needed: 3,
            found: records.len(),
        });
    }
    speed_from_moments(&renewal_moments(records), level)
}

/// `Y_T / T` for one path.
pub fn estimate_speed_naive(traj: &Trajectory) -> Result<SpeedEstimate> {
    let horizon = traj.horizon();
    if horizon == 0 {
        return Err(Error::Precondition("naive speed needs horizon >= 1".into()));
    }
    let v = traj.final_position() as f64 / horizon as f64;
    Ok(SpeedEstimate::new(v, v, v, 0, SpeedMethod::Naive))
}

/// Replica aggregate of naive speeds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NaiveAggregate {
    pub estimate: SpeedEstimate,
    pub replicas: usize,
    pub std_error: f64,
    pub min: f64,
    pub max: f64,
}

/// Bootstrap resamples for replica-percentile intervals.
pub const BOOTSTRAP_RESAMPLES: usize = 4000;

/// Mean of per-replica naive speeds with a percentile-bootstrap interval.
pub fn aggregate_naive(points: &[f64], level: f64, seed: u64) -> Result<NaiveAggregate> {
    if points.is_empty() {
        return Err(Error::Precondition("no replicas to aggregate".into()));
    }
    let m: Moments = points.iter().copied().collect();
    let (lo, hi) = if points.len() == 1 {
        (points[0], points[0])
    } else {
        bootstrap_mean_interval(points, level, BOOTSTRAP_RESAMPLES, seed)
    };
    Ok(NaiveAggregate {
        estimate: SpeedEstimate::new(m.mean(), lo, hi, 0, SpeedMethod::Naive),
        replicas: points.len(),
        std_error: m.std_error(),
        min: points.iter().copied().fold(f64::INFINITY, f64::min),
        max: points.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Fraction of replicas that stay at or above 0 up to each horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlphaEstimate {
    pub horizon: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub successes: u64,
    pub replicas: u64,
}

/// Monte Carlo upper estimate of `P(Y_t >= 0 for all t)`, evaluated at each
/// of `horizons` from the same replicas (so estimates are non-increasing).
pub fn estimate_alpha_horizons(
    env: &Arc<CookieEnvironment>,
    replicas: usize,
    horizons: &[usize],
    seed: u64,
) -> Vec<AlphaEstimate> {
    let longest = horizons.iter().copied().max().unwrap_or(0);
    // First time each replica goes negative, if it does before `longest`.
    let exits: Vec<Option<usize>> = run_replicas(replicas, |r| {
        let mut src = UniformSource::new(seed, r);
        let mut state = WalkState::new();
        for t in 1..=longest {
            state.step(env, src.next_uniform());
            if state.position() < 0 {
                return Some(t);
            }
        }
        None
    });
    horizons
        .iter()
        .map(|&h| {
            let stayed = exits.iter().filter(|e| e.is_none_or(|t| t > h)).count() as u64;
            let p = Proportion::new(stayed, replicas as u64);
            AlphaEstimate {
                horizon: h,
                estimate: p.estimate(),
                std_error: p.std_error(),
                successes: stayed,
                replicas: replicas as u64,
            }
        })
        .collect()
}

pub fn estimate_alpha(
    env: &Arc<CookieEnvironment>,
    replicas: usize,
    horizon: usize,
    seed: u64,
) -> AlphaEstimate {
    estimate_alpha_horizons(env, replicas, &[horizon], seed)[0]
}

/// Blocks `A_j = [jL, (j+1)L - 1]`, `j >= 0`, counted as explored and as
/// visited exactly once.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BlockVisitCounts {
    pub explored: u64,
    pub exactly_once: u64,
}

impl BlockVisitCounts {
    pub fn merge(self, o: Self) -> Self {
        Self {
            explored: self.explored + o.explored,
            exactly_once: self.exactly_once + o.exactly_once,
        }
    }

    pub fn frequency(&self) -> Proportion {
        Proportion::new(self.exactly_once, self.explored)
    }
}

/// Counts blocks of width `block` visited exactly once.
///
/// A block is explored when it lies entirely below every position of the
/// final tenth of the path, so later revisits are unlikely within reach.
pub fn exactly_once_blocks(traj: &Trajectory, block: i64) -> BlockVisitCounts {
    assert!(block >= 1);
    let pos = traj.positions();
    let tail = (pos.len() / 10).max(1);
    let floor = pos[pos.len() - tail..].iter().copied().min().unwrap();
    // blocks j with (j + 1) * block - 1 < floor
    let explored = if floor <= 0 { 0 } else { (floor / block) as usize };
    let mut visits = vec![0u32; explored];
    for &y in pos {
        if y >= 0 {
            let j = (y / block) as usize;
            if j < explored {
                visits[j] = visits[j].saturating_add(1);
            }
        }
    }
    BlockVisitCounts {
        explored: explored as u64,
        exactly_once: visits.iter().filter(|&&v| v == 1).count() as u64,
    }
}

/// Pathwise bracket `J_k / tau_{k+1} <= Y_t / t <= J_{k+1} / tau_k` for
/// `tau_k <= t < tau_{k+1}`, `t >= 1`.
pub fn check_speed_sandwich(traj: &Trajectory, records: &[CutTimeRecord]) -> Result<(), StepViolation> {
    let pos = traj.positions();
    for w in records.windows(2) {
        let (a, b) = (w[0], w[1]);
        for (t, &yt) in pos.iter().enumerate().take(b.tau).skip(a.tau.max(1)) {
            let y = i128::from(yt);
            let t_ = t as i128;
            let lower_ok = i128::from(a.position) * t_ <= y * b.tau as i128;
            let upper_ok = a.tau == 0 || y * (a.tau as i128) <= i128::from(b.position) * t_;
            if !(lower_ok && upper_ok) {
                return Err(StepViolation {
                    step: t,
                    detail: format!(
                        "Y_t/t = {}/{t} outside [{}/{}, {}/{}]",
                        yt, a.position, b.tau, b.position, a.tau
                    ),
                });
            }
        }
    }
    Ok(())
}
