//! Checkers for three generic facts used by the coupling argument: exit times
//! of walks that dominate a fair coin, a strong law under bounded conditional
//! second moments, and monotone coupling of ordered laws.
//!
//! Every check drives both sides of an inequality from one uniform stream, so
//! almost-sure statements become per-path assertions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::replicas::run_replicas;
use crate::stats::{ks_distance_discrete, Moments};
use crate::uniform::UniformSource;
use crate::walk::{coin_step, CookieEnvironment, WalkState};

/// Safety cap on the length of a single exit-time run.
pub const MAX_EXIT_STEPS: usize = 1 << 32;

/// A process on the integers driven by one uniform per step.
pub trait StepProcess {
    fn position(&self) -> i64;
    /// Moves one step using `u` and returns the new position.
    fn step(&mut self, u: f64) -> i64;
}

/// The `±1` walk with `+1` iff `u <= 1/2`.
#[derive(Clone, Debug)]
pub struct CoinWalk(pub i64);

impl StepProcess for CoinWalk {
    fn position(&self) -> i64 {
        self.0
    }

    fn step(&mut self, u: f64) -> i64 {
        self.0 += coin_step(u);
        self.0
    }
}

/// A cookie walk started from `offset` (its internal coordinates start at 0).
pub struct ShiftedCookieWalk<'a> {
    pub env: &'a CookieEnvironment,
    pub state: WalkState,
    pub offset: i64,
}

impl<'a> ShiftedCookieWalk<'a> {
    pub fn new(env: &'a CookieEnvironment, start: i64) -> Self {
        Self {
            env,
            state: WalkState::new(),
            offset: start,
        }
    }
}

impl StepProcess for ShiftedCookieWalk<'_> {
    fn position(&self) -> i64 {
        self.state.position() + self.offset
    }

    fn step(&mut self, u: f64) -> i64 {
        self.state.step(self.env, u) + self.offset
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ExitTimeSample {
    #[serde(rename = "T")]
    pub exit_time: usize,
    pub exit_side: Side,
    pub a: i64,
    pub b: i64,
}

/// `(b - a) 2^(2(b - a) + 1)`.
pub fn exit_moment_bound(a: i64, b: i64) -> f64 {
    let w = (b - a) as f64;
    w * 2f64.powf(2.0 * w + 1.0)
}

/// Runs `process` until it leaves `(a, b)`, checking at each step that its
/// increment is at least the coin step for the same uniform.
pub fn exit_time<P: StepProcess>(process: &mut P, a: i64, b: i64, uniforms: &mut UniformSource) -> Result<ExitTimeSample> {
    if a >= b {
        return Err(Error::Precondition(format!("empty interval ({a}, {b})")));
    }
    let mut x = process.position();
    let mut t = 0;
    while a < x && x < b {
        if t == MAX_EXIT_STEPS {
            return Err(Error::Precondition(format!("no exit from ({a}, {b}) within {t} steps")));
        }
        let u = uniforms.next_uniform();
        let next = process.step(u);
        t += 1;
        if next - x < coin_step(u) {
            return Err(Error::HypothesisViolation {
                step: t,
                detail: format!("increment {} below coin step {} at u = {u}", next - x, coin_step(u)),
            });
        }
        x = next;
    }
    Ok(ExitTimeSample {
        exit_time: t,
        exit_side: if x <= a { Side::Left } else { Side::Right },
        a,
        b,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExitTimeReport {
    pub a: i64,
    pub b: i64,
    pub replicas: u64,
    pub mean: f64,
    pub mean_se: f64,
    pub second_moment: f64,
    pub second_moment_se: f64,
    pub bound: f64,
    pub max_exit_time: usize,
    pub within_bound: bool,
}

/// Empirical first and second moments of the exit time from `(a, b)` over
/// `replicas` runs of processes built by `make`; replica `r` uses stream `r`.
pub fn exit_time_moments<P, F>(make: F, a: i64, b: i64, replicas: usize, seed: u64) -> Result<ExitTimeReport>
where
    P: StepProcess,
    F: Fn() -> P + Sync,
{
    let samples = run_replicas(replicas, |r| {
        let mut src = UniformSource::new(seed, r);
        exit_time(&mut make(), a, b, &mut src)
    });
    let mut first = Moments::default();
    let mut second = Moments::default();
    let mut max_t = 0;
    for s in samples {
        let t = s?.exit_time;
        max_t = max_t.max(t);
        first.push(t as f64);
        second.push((t as f64).powi(2));
    }
    let bound = exit_moment_bound(a, b);
    Ok(ExitTimeReport {
        a,
        b,
        replicas: replicas as u64,
        mean: first.mean(),
        mean_se: first.std_error(),
        second_moment: second.mean(),
        second_moment_se: second.std_error(),
        bound,
        max_exit_time: max_t,
        within_bound: second.mean() <= bound + 3.0 * second.std_error(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BlockBoundSample {
    /// Exit time, if the process left before the uniforms ran out.
    pub exit_time: Option<usize>,
    /// Index (from 1) of the first block of `b - a` consecutive uniforms all
    /// at most 1/2.
    pub g: Option<usize>,
    pub holds: bool,
}

/// Pathwise `T <= G (b - a)` for a process started inside `(a, b)` and a
/// stream of at most `horizon` uniforms.
///
/// A block of `b - a` small uniforms moves a coin-dominating process right by
/// at least `b - a`, so the exit happens by the end of that block.
pub fn geometric_block_bound<P, I>(process: &mut P, uniforms: I, a: i64, b: i64, horizon: usize) -> Result<BlockBoundSample>
where
    P: StepProcess,
    I: IntoIterator<Item = f64>,
{
    if a >= b {
        return Err(Error::Precondition(format!("empty interval ({a}, {b})")));
    }
    let width = (b - a) as usize;
    let mut x = process.position();
    let mut exit = (x <= a || x >= b).then_some(0);
    let mut g = None;
    let mut run = 0;
    for (i, u) in uniforms.into_iter().take(horizon).enumerate() {
        if g.is_none() {
            run = if i % width == 0 { 0 } else { run };
            run += usize::from(u <= 0.5);
            if (i + 1) % width == 0 && run == width {
                g = Some((i + 1) / width);
            }
        }
        if exit.is_none() {
            let next = process.step(u);
            if next - x < coin_step(u) {
                return Err(Error::HypothesisViolation {
                    step: i + 1,
                    detail: format!("increment {} below coin step", next - x),
                });
            }
            x = next;
            if x <= a || x >= b {
                exit = Some(i + 1);
            }
        }
        if exit.is_some() && g.is_some() {
            break;
        }
    }
    let holds = match (exit, g) {
        (Some(t), Some(g)) => t <= g * width,
        (None, Some(_)) => false,
        (_, None) => true,
    };
    Ok(BlockBoundSample { exit_time: exit, g, holds })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MartingaleReport {
    pub n: usize,
    pub k: f64,
    pub slope: f64,
    pub bound: f64,
    pub holds: bool,
    /// Largest batch mean of `xi^2`.
    pub max_batch_second_moment: f64,
    /// A batch mean of `xi^2` exceeded `K^2` by more than 5 standard errors.
    pub second_moment_warning: bool,
}

pub const MARTINGALE_BATCH: usize = 1000;

/// Sums `n` increments drawn by `xi(i, uniforms)` and checks
/// `X_n / n <= K + 3 K / sqrt(n)`.
pub fn martingale_lln_check<F>(mut xi: F, k: f64, n: usize, seed: u64) -> MartingaleReport
where
    F: FnMut(usize, &mut UniformSource) -> f64,
{
    assert!(n > 0 && k > 0.0);
    let mut src = UniformSource::new(seed, 0);
    let mut sum = 0.0;
    let mut batch = Moments::default();
    let mut max_batch: f64 = 0.0;
    let mut warning = false;
    for i in 0..n {
        let x = xi(i, &mut src);
        sum += x;
        batch.push(x * x);
        if batch.n as usize == MARTINGALE_BATCH || i + 1 == n {
            max_batch = max_batch.max(batch.mean());
            if batch.mean() > k * k + 5.0 * batch.std_error() {
                warning = true;
            }
            batch = Moments::default();
        }
    }
    let slope = sum / n as f64;
    let bound = k + 3.0 * k / (n as f64).sqrt();
    MartingaleReport {
        n,
        k,
        slope,
        bound,
        holds: slope <= bound,
        max_batch_second_moment: max_batch,
        second_moment_warning: warning,
    }
}

/// A law on finitely many reals.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteLaw {
    values: Vec<f64>,
    cdf: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(atoms: &[(f64, f64)]) -> Result<Self> {
        let mut atoms: Vec<(f64, f64)> = atoms.iter().copied().filter(|a| a.1 > 0.0).collect();
        if atoms.is_empty() || atoms.iter().any(|a| !a.0.is_finite() || !a.1.is_finite()) {
            return Err(Error::InvalidDistribution("need finite atoms with positive mass".into()));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        if atoms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidDistribution("repeated atom".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > crate::walk::MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("total mass {total}")));
        }
        let mut acc = 0.0;
        let mut cdf = Vec::with_capacity(atoms.len());
        for a in &atoms {
            acc += a.1 / total;
            cdf.push(acc);
        }
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Self {
            values: atoms.iter().map(|a| a.0).collect(),
            probs: atoms.iter().map(|a| a.1 / total).collect(),
            cdf,
        })
    }

    pub fn from_jumps(q: &crate::walk::JumpDistribution) -> Self {
        let atoms: Vec<(f64, f64)> = q.support().into_iter().map(|k| (k as f64, q.prob(k))).collect();
        Self::new(&atoms).expect("jump laws are valid")
    }

    pub fn shifted(&self, by: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + by).collect(),
            ..self.clone()
        }
    }

    pub fn atoms(&self) -> Vec<(f64, f64)> {
        self.values.iter().copied().zip(self.probs.iter().copied()).collect()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.values.partition_point(|&v| v <= x) {
            0 => 0.0,
            i => self.cdf[i - 1],
        }
    }

    /// `min { x : F(x) >= u }`.
    pub fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < u).min(self.values.len() - 1);
        self.values[i]
    }

    /// `F(x) <= other.F(x)` for every `x`.
    pub fn dominates(&self, other: &Self) -> bool {
        self.values
            .iter()
            .chain(other.values.iter())
            .all(|&x| self.cdf(x) <= other.cdf(x) + 1e-12)
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct StrassenSamples {
    /// Copy of the dominating sequence.
    pub upper: Vec<f64>,
    /// Independent sequence with the dominated laws.
    pub lower: Vec<f64>,
    pub strict: u64,
}

impl StrassenSamples {
    pub fn ks_upper(&self, law: &DiscreteLaw) -> f64 {
        ks_distance_discrete(&self.upper, &law.atoms())
    }

    pub fn ks_lower(&self, law: &DiscreteLaw) -> f64 {
        ks_distance_discrete(&self.lower, &law.atoms())
    }
}

/// Couples `n` steps of a sequence whose conditional law `upper(i, past)`
/// dominates `lower(i)` with an independent sequence of laws `lower(i)`, both
/// read off one uniform per index through their quantile functions.
pub fn strassen_pair<U, L>(mut upper: U, mut lower: L, seed: u64, n: usize) -> Result<StrassenSamples>
where
    U: FnMut(usize, &[f64]) -> DiscreteLaw,
    L: FnMut(usize) -> DiscreteLaw,
{
    let mut src = UniformSource::new(seed, 0);
    let mut out = StrassenSamples {
        upper: Vec::with_capacity(n),
        lower: Vec::with_capacity(n),
        strict: 0,
    };
    for i in 0..n {
        let f = upper(i, &out.upper);
        let g = lower(i);
        if !f.dominates(&g) {
            return Err(Error::CouplingViolation {
                index: i.to_string(),
                detail: "declared law does not dominate the target law".into(),
            });
        }
        let u = src.next_uniform();
        let (x, y) = (f.quantile(u), g.quantile(u));
        if x < y {
            return Err(Error::CouplingViolation {
                index: i.to_string(),
                detail: format!("upper {x} below lower {y}"),
            });
        }
        out.strict += u64::from(x > y);
        out.upper.push(x);
        out.lower.push(y);
    }
    Ok(out)
}
