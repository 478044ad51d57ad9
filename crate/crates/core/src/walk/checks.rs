//! Pathwise properties every simulated trajectory must satisfy.

use rustc_hash::FxHashSet;

use super::{coin_step, Trajectory};
use crate::uniform::UniformSource;

/// A step at which a pathwise property failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepViolation {
    pub step: usize,
    pub detail: String,
}

/// A forward move onto an already-visited vertex must cross only visited
/// vertices: if `Y_t` is in `R_{t-1}` and `Y_{t-1} < Y_t`, then
/// `[Y_{t-1}, Y_t]` is contained in `R_{t-1}`.
pub fn check_no_jump_over_range(traj: &Trajectory) -> Result<(), StepViolation> {
    let pos = traj.positions();
    let mut range = FxHashSet::default();
    range.insert(pos[0]);
    for t in 1..pos.len() {
        let (prev, cur) = (pos[t - 1], pos[t]);
        if cur > prev && range.contains(&cur) {
            if let Some(v) = (prev..=cur).find(|v| !range.contains(v)) {
                return Err(StepViolation {
                    step: t,
                    detail: format!("revisit of {cur} from {prev} jumps over unvisited {v}"),
                });
            }
        }
        range.insert(cur);
    }
    Ok(())
}

/// Increments lie in the excited support on cookie-carrying sites and in
/// `{-1, +1}` elsewhere.
pub fn check_increment_support(traj: &Trajectory) -> Result<(), StepViolation> {
    let env = traj.env();
    let mut visits = rustc_hash::FxHashMap::default();
    let pos = traj.positions();
    for t in 0..traj.horizon() {
        let m = visits.entry(pos[t]).or_insert(0u32);
        *m += 1;
        let inc = pos[t + 1] - pos[t];
        let ok = match env.law_for_visit(*m) {
            Some(q) => q.prob(inc) > 0.0,
            None => inc == 1 || inc == -1,
        };
        if !ok {
            return Err(StepViolation {
                step: t,
                detail: format!("increment {inc} impossible on visit {m} to {}", pos[t]),
            });
        }
    }
    Ok(())
}

/// Re-drives the stream that generated `traj` and checks each increment is at
/// least the fair-coin step `+1{u <= 1/2} - 1{u > 1/2}` of the same uniform.
///
/// Holds whenever every excited law has `Q(1) > 1/2`.
pub fn check_coin_domination(traj: &Trajectory) -> Result<(), StepViolation> {
    let mut src = UniformSource::new(traj.seed(), traj.stream());
    for (t, inc) in traj.increments().enumerate() {
        let coin = coin_step(src.next_uniform());
        if inc < coin {
            return Err(StepViolation {
                step: t,
                detail: format!("increment {inc} below coin step {coin}"),
            });
        }
    }
    Ok(())
}

/// Checks the trajectory is exactly the one its key regenerates.
pub fn check_reproducible(traj: &Trajectory) -> bool {
    let again = super::simulate_replica(traj.env(), traj.seed(), traj.stream(), traj.horizon());
    again.positions() == traj.positions()
}
