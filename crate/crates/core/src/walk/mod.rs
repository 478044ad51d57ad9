//! The long-range cookie walk driven by a uniform stream.

mod distribution;
mod environment;
mod record;
mod spec;

pub mod checks;

use std::collections::BTreeSet;
use std::sync::Arc;

use rustc_hash::{FxHashMap, FxHashSet};

pub use distribution::{sample_jump, JumpDistribution, MASS_TOLERANCE};
pub use environment::{AssumptionReport, CookieEnvironment};
pub use spec::{DistributionSpec, EnvironmentSpec};

use crate::error::{Error, Result};
use crate::uniform::UniformSource;

/// Symmetric nearest-neighbour move used once a site has no cookies left.
#[inline]
pub fn coin_step(u: f64) -> i64 {
    if u <= 0.5 {
        1
    } else {
        -1
    }
}

/// Position, clock and local times of a walk in progress.
#[derive(Clone, Debug)]
pub struct WalkState {
    position: i64,
    time: usize,
    /// Occupations up to and including the current time.
    visits: FxHashMap<i64, u32>,
    running_max: i64,
    running_min: i64,
}

impl Default for WalkState {
    fn default() -> Self {
        Self::new()
    }
}

impl WalkState {
    pub fn new() -> Self {
        let mut visits = FxHashMap::default();
        visits.insert(0, 1);
        Self {
            position: 0,
            time: 0,
            visits,
            running_max: 0,
            running_min: 0,
        }
    }

    pub fn position(&self) -> i64 {
        self.position
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn running_max(&self) -> i64 {
        self.running_max
    }

    pub fn running_min(&self) -> i64 {
        self.running_min
    }

    pub fn visits(&self, v: i64) -> u32 {
        self.visits.get(&v).copied().unwrap_or(0)
    }

    /// Cookies left at `v` once every occupation so far has eaten one.
    pub fn cookies_at(&self, env: &CookieEnvironment, v: i64) -> usize {
        env.cookies().saturating_sub(self.visits(v) as usize)
    }

    /// Advances one step with uniform `u` and returns the increment.
    ///
    /// The current occupation is the `m`-th visit to the site; while `m <= C`
    /// the jump is drawn from `q_m`, afterwards by the fair coin.
    #[inline]
    pub fn step(&mut self, env: &CookieEnvironment, u: f64) -> i64 {
        let visit = self.visits(self.position);
        let inc = match env.law_for_visit(visit) {
            Some(q) => q.sample(u),
            None => coin_step(u),
        };
        self.position += inc;
        self.time += 1;
        *self.visits.entry(self.position).or_insert(0) += 1;
        self.running_max = self.running_max.max(self.position);
        self.running_min = self.running_min.min(self.position);
        inc
    }

    /// Total occupations recorded; equals `time + 1`.
    pub fn total_visits(&self) -> u64 {
        self.visits.values().map(|&v| u64::from(v)).sum()
    }
}

/// A realized path `Y_0, ..., Y_T` with the key needed to regenerate it.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    positions: Vec<i64>,
    seed: u64,
    stream: u64,
    env: Arc<CookieEnvironment>,
}

impl Trajectory {
    /// Wraps an externally built path. `positions` must start at 0.
    pub fn from_positions(
        positions: Vec<i64>,
        env: Arc<CookieEnvironment>,
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        match positions.first() {
            Some(0) => Ok(Self {
                positions,
                seed,
                stream,
                env,
            }),
            _ => Err(Error::Precondition("a trajectory must start at 0".into())),
        }
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    pub fn position(&self, t: usize) -> i64 {
        self.positions[t]
    }

    pub fn horizon(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn env(&self) -> &Arc<CookieEnvironment> {
        &self.env
    }

    pub fn final_position(&self) -> i64 {
        *self.positions.last().unwrap()
    }

    pub fn increments(&self) -> impl Iterator<Item = i64> + '_ {
        self.positions.windows(2).map(|w| w[1] - w[0])
    }

    /// Distinct vertices visited up to and including time `t`.
    pub fn range_at(&self, t: usize) -> Result<BTreeSet<i64>> {
        if t > self.horizon() {
            return Err(Error::OutOfBounds {
                t,
                horizon: self.horizon(),
            });
        }
        Ok(self.positions[..=t].iter().copied().collect())
    }

    /// `fresh[t]` is true iff `Y_t` was not visited before time `t`.
    pub fn fresh_flags(&self) -> Vec<bool> {
        let mut seen = FxHashSet::default();
        self.positions.iter().map(|&y| seen.insert(y)).collect()
    }

    /// `|R_t|` for every `t`.
    pub fn range_sizes(&self) -> Vec<usize> {
        let mut n = 0;
        self.fresh_flags()
            .into_iter()
            .map(|f| {
                n += usize::from(f);
                n
            })
            .collect()
    }

    pub fn min_position(&self) -> i64 {
        *self.positions.iter().min().unwrap()
    }
}

/// Simulates replica 0 of `(env, seed)` up to `horizon`.
pub fn simulate(env: &Arc<CookieEnvironment>, seed: u64, horizon: usize) -> Trajectory {
    simulate_replica(env, seed, 0, horizon)
}

/// Simulates the walk driven by stream `replica` of `seed`.
///
/// Step `t -> t + 1` consumes the `t`-th uniform of the stream, so the path is
/// a pure function of `(env, seed, replica, horizon)`.
pub fn simulate_replica(
    env: &Arc<CookieEnvironment>,
    seed: u64,
    replica: u64,
    horizon: usize,
) -> Trajectory {
    let mut source = UniformSource::new(seed, replica);
    let mut state = WalkState::new();
    let mut positions = Vec::with_capacity(horizon + 1);
    positions.push(0);
    for _ in 0..horizon {
        state.step(env, source.next_uniform());
        positions.push(state.position());
    }
    Trajectory {
        positions,
        seed,
        stream: replica,
        env: Arc::clone(env),
    }
}
