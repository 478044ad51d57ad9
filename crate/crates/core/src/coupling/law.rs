//! The comparison system `M` of independent arrows, and its monotone coupling
//! with any arrow sampler whose plus-probabilities sit above `M`'s.

use super::MegaVertexConfig;
use crate::arrows::{ArrowSource, ArrowSystem};
use crate::error::{Error, Result};
use crate::uniform::KeyedUniforms;
use crate::walk::JumpDistribution;

/// Independent arrows: `+1` with probability `p` for the first `cookies`
/// arrows of a stack and `1/2` afterwards. The arrow at `(j, k)` is a fixed
/// function of the seed, so queries can come in any order.
#[derive(Clone, Debug)]
pub struct IndependentArrows {
    keys: KeyedUniforms,
    p: f64,
    cookies: u32,
}

impl IndependentArrows {
    pub fn new(p: f64, cookies: u32, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Precondition(format!("arrow probability {p} not in [0, 1]")));
        }
        Ok(Self {
            keys: KeyedUniforms::new(seed),
            p,
            cookies,
        })
    }

    pub fn prob_plus(&self, k: u32) -> f64 {
        if k <= self.cookies {
            self.p
        } else {
            0.5
        }
    }

    /// `c (2p - 1)`.
    pub fn total_drift(&self) -> f64 {
        f64::from(self.cookies) * (2.0 * self.p - 1.0)
    }

    /// The uniform that decides arrow `(j, k)`.
    pub fn uniform(&self, j: i64, k: u32) -> f64 {
        self.keys.at(j, u64::from(k))
    }

    pub fn materialize(&self, sites: impl IntoIterator<Item = i64>, depth: u32) -> ArrowSystem {
        let mut sys = ArrowSystem::new();
        for j in sites {
            for k in 1..=depth {
                sys.set(j, k, self.arrow(j, k));
            }
        }
        sys
    }
}

impl ArrowSource for IndependentArrows {
    fn arrow(&self, j: i64, k: u32) -> i8 {
        if self.uniform(j, k) < self.prob_plus(k) {
            1
        } else {
            -1
        }
    }
}

/// `M` for blocks `cfg` and law `q`: `p = (1 - (c-1)/l) Q(l + c - 1)`.
pub fn build_m(cfg: &MegaVertexConfig, q: &JumpDistribution, seed: u64) -> IndependentArrows {
    IndependentArrows::new(cfg.arrow_bound(q), cfg.c, seed).expect("tail values lie in [0, 1]")
}

/// Conditional plus-probability of the next arrow given what was drawn so far.
pub trait PlusSampler {
    fn prob_plus(&mut self, j: i64, k: u32, past: &ArrowSystem) -> f64;
}

impl<F: FnMut(i64, u32, &ArrowSystem) -> f64> PlusSampler for F {
    fn prob_plus(&mut self, j: i64, k: u32, past: &ArrowSystem) -> f64 {
        self(j, k, past)
    }
}

/// `upper` drawn from the sampler, `lower` from `M`, on shared uniforms.
#[derive(Clone, Debug, Default)]
pub struct StrassenPair {
    pub upper: ArrowSystem,
    pub lower: ArrowSystem,
    pub indices: u64,
    /// Indices where `upper = +1` and `lower = -1`.
    pub strict: u64,
}

/// Draws both systems at `indices` in order. Arrow `(j, k)` of either system
/// is `+1` iff the shared uniform falls below its plus-probability, so
/// `lower <= upper` wherever the sampler respects `M`'s probabilities.
pub fn strassen_bundle<S: PlusSampler + ?Sized>(
    sampler: &mut S,
    law: &IndependentArrows,
    indices: impl IntoIterator<Item = (i64, u32)>,
) -> Result<StrassenPair> {
    let mut pair = StrassenPair::default();
    for (j, k) in indices {
        let p_hat = sampler.prob_plus(j, k, &pair.upper);
        let p_m = law.prob_plus(k);
        if p_hat.is_nan() || p_hat < p_m {
            return Err(Error::CouplingViolation {
                index: format!("({j}, {k})"),
                detail: format!("sampler plus-probability {p_hat} below bound {p_m}"),
            });
        }
        let u = law.uniform(j, k);
        let up: i8 = if u < p_hat { 1 } else { -1 };
        let lo: i8 = if u < p_m { 1 } else { -1 };
        if lo > up {
            return Err(Error::CouplingViolation {
                index: format!("({j}, {k})"),
                detail: "lower arrow exceeds upper arrow".into(),
            });
        }
        pair.upper.set(j, k, up);
        pair.lower.set(j, k, lo);
        pair.indices += 1;
        pair.strict += u64::from(up > lo);
    }
    Ok(pair)
}
