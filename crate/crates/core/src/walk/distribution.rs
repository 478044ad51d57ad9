use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of an input probability vector before it is
/// renormalized.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// A law on integer jumps in `[-1, L]`, stored densely together with its tail
/// function `Q(j) = P(jump >= j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr", into = "DistributionRepr")]
pub struct JumpDistribution {
    /// `probs[i]` is the probability of the jump `i - 1`.
    probs: Vec<f64>,
    /// `tail[i]` is `Q(i - 1)`; the last entry is `Q(L + 1) = 0`.
    tail: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct DistributionRepr {
    support: Vec<i64>,
    probs: Vec<f64>,
}

impl TryFrom<DistributionRepr> for JumpDistribution {
    type Error = Error;

    fn try_from(r: DistributionRepr) -> Result<Self> {
        JumpDistribution::from_pairs(&r.support, &r.probs)
    }
}

impl From<JumpDistribution> for DistributionRepr {
    fn from(q: JumpDistribution) -> Self {
        DistributionRepr {
            support: (-1..=q.max_jump()).collect(),
            probs: q.probs,
        }
    }
}

impl JumpDistribution {
    /// Builds a law from parallel `support` / `probs` slices.
    ///
    /// Jumps must lie in `[-1, ..]` and the largest listed jump must be at
    /// least 1. The mass is renormalized after checking it is within
    /// [`MASS_TOLERANCE`] of one.
    pub fn from_pairs(support: &[i64], probs: &[f64]) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "support has {} entries but probs has {}",
                support.len(),
                probs.len()
            )));
        }
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        let max_jump = *support.iter().max().unwrap();
        let min_jump = *support.iter().min().unwrap();
        if min_jump < -1 {
            return Err(Error::InvalidDistribution(format!(
                "jump {min_jump} is below -1; walks must be skip-free to the left"
            )));
        }
        if max_jump < 1 {
            return Err(Error::InvalidDistribution(format!(
                "largest jump {max_jump} must be at least 1"
            )));
        }
        let mut dense = vec![0.0; (max_jump + 2) as usize];
        let mut seen = vec![false; dense.len()];
        for (&k, &p) in support.iter().zip(probs) {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "probability {p} of jump {k} is not a non-negative number"
                )));
            }
            let i = (k + 1) as usize;
            if seen[i] {
                return Err(Error::InvalidDistribution(format!("jump {k} listed twice")));
            }
            seen[i] = true;
            dense[i] = p;
        }
        Self::from_dense(dense)
    }

    /// Builds a law from `probs[i] = P(jump = i - 1)`.
    pub fn from_dense(mut probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 3 {
            return Err(Error::InvalidDistribution(
                "dense vector must cover jumps -1, 0 and 1 at least".into(),
            ));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution(
                "probabilities must be non-negative numbers".into(),
            ));
        }
        let mass = ascending_sum(probs.iter().copied());
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "total mass {mass} differs from 1"
            )));
        }
        for p in &mut probs {
            *p /= mass;
        }
        let tail = tail_table(&probs);
        Ok(Self { probs, tail })
    }

    /// The two-point law `{-1: eps, L: 1 - eps}`.
    pub fn epsilon_family(max_jump: i64, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidDistribution(format!(
                "epsilon {eps} is not in [0, 1]"
            )));
        }
        Self::from_pairs(&[-1, max_jump], &[eps, 1.0 - eps])
    }

    /// The symmetric law on `{-1, +1}`.
    pub fn symmetric() -> Self {
        Self::from_pairs(&[-1, 1], &[0.5, 0.5]).expect("symmetric law is valid")
    }

    /// A point mass at `jump >= 1`.
    pub fn point_mass(jump: i64) -> Result<Self> {
        Self::from_pairs(&[jump], &[1.0])
    }

    /// Largest representable jump `L`.
    pub fn max_jump(&self) -> i64 {
        self.probs.len() as i64 - 2
    }

    /// `q(k)`, zero outside `[-1, L]`.
    pub fn prob(&self, k: i64) -> f64 {
        if k < -1 || k > self.max_jump() {
            0.0
        } else {
            self.probs[(k + 1) as usize]
        }
    }

    /// `Q(j)`: 1 below the support, 0 above `L`.
    pub fn tail(&self, j: i64) -> f64 {
        if j <= -1 {
            1.0
        } else if j > self.max_jump() {
            0.0
        } else {
            self.tail[(j + 1) as usize]
        }
    }

    /// `Q(-1), ..., Q(L + 1)`.
    pub fn tail_table(&self) -> &[f64] {
        &self.tail
    }

    /// Jumps with positive probability, in increasing order.
    pub fn support(&self) -> Vec<i64> {
        (-1..=self.max_jump()).filter(|&k| self.prob(k) > 0.0).collect()
    }

    pub fn mean(&self) -> f64 {
        ascending_sum_signed((-1..=self.max_jump()).map(|k| k as f64 * self.prob(k)))
    }

    /// The unique `j` with `Q(j) > u >= Q(j + 1)`.
    ///
    /// Short tables are scanned from the top of the support, so laws
    /// concentrated on long jumps resolve in one comparison; long ones are
    /// bisected.
    #[inline]
    pub fn sample(&self, u: f64) -> i64 {
        debug_assert!(u > 0.0 && u < 1.0, "uniform {u} outside (0, 1)");
        if self.tail.len() > LINEAR_SCAN_MAX {
            // tail[0] = 1 > u and the last entry is 0, so the prefix of
            // entries above u is non-empty and proper.
            return self.tail.partition_point(|&t| t > u) as i64 - 2;
        }
        let mut i = self.tail.len() - 2;
        while i > 0 && self.tail[i] <= u {
            i -= 1;
        }
        i as i64 - 1
    }

    /// Stable hash input: `L` and the bit patterns of the probabilities.
    pub(crate) fn canonical_bytes(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.max_jump().to_le_bytes());
        for p in &self.probs {
            out.extend_from_slice(&p.to_bits().to_le_bytes());
        }
    }
}

const LINEAR_SCAN_MAX: usize = 24;

/// Inverse-tail sampling of a jump from a uniform in (0, 1).
pub fn sample_jump(q: &JumpDistribution, u: f64) -> i64 {
    q.sample(u)
}

fn tail_table(probs: &[f64]) -> Vec<f64> {
    let n = probs.len();
    let mut tail = vec![0.0; n + 1];
    for j in 0..n {
        tail[j] = ascending_sum(probs[j..].iter().copied()).min(1.0);
    }
    tail[0] = 1.0;
    for j in 1..=n {
        tail[j] = tail[j].min(tail[j - 1]);
    }
    tail
}

/// Sums non-negative terms from smallest to largest.
pub(crate) fn ascending_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = terms.collect();
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

/// Sums terms in order of increasing magnitude.
pub(crate) fn ascending_sum_signed(terms: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = terms.collect();
    v.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    v.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `Q(j)` by direct enumeration of the listed atoms.
    fn enumerated_tail(atoms: &[(i64, f64)], j: i64) -> f64 {
        atoms.iter().filter(|(k, _)| *k >= j).map(|(_, p)| p).sum()
    }

    /// The `j` with `Q(j) > u >= Q(j+1)`, found by checking every candidate.
    fn enumerated_sample(atoms: &[(i64, f64)], u: f64) -> i64 {
        let hi = atoms.iter().map(|a| a.0).max().unwrap();
        (-1..=hi)
            .filter(|&j| enumerated_tail(atoms, j) > u && u >= enumerated_tail(atoms, j + 1))
            .exactly_one()
    }

    trait ExactlyOne: Iterator<Item = i64> + Sized {
        fn exactly_one(mut self) -> i64 {
            let first = self.next().expect("no candidate");
            assert!(self.next().is_none(), "several candidates");
            first
        }
    }
    impl<I: Iterator<Item = i64>> ExactlyOne for I {}

    #[test]
    fn single_atom_always_returns_the_atom() {
        let q = JumpDistribution::point_mass(15).unwrap();
        assert_eq!(sample_jump(&q, 0.3), 15);
        assert_eq!(sample_jump(&q, 1e-12), 15);
        assert_eq!(sample_jump(&q, 1.0 - 1e-12), 15);
    }

    #[test]
    fn epsilon_family_upper_uniform_selects_backstep() {
        let atoms = [(-1, 0.01), (15, 0.99)];
        assert_eq!(enumerated_sample(&atoms, 0.995), -1);
        let q = JumpDistribution::epsilon_family(15, 0.01).unwrap();
        assert_eq!(sample_jump(&q, 0.995), -1);
        assert_eq!(sample_jump(&q, 0.5), 15);
    }

    #[test]
    fn symmetric_law_below_half_steps_right() {
        let atoms = [(-1, 0.5), (1, 0.5)];
        assert_eq!(enumerated_sample(&atoms, 0.4), 1);
        assert_eq!(sample_jump(&JumpDistribution::symmetric(), 0.4), 1);
        assert_eq!(sample_jump(&JumpDistribution::symmetric(), 0.6), -1);
    }

    #[test]
    fn exact_tail_value_resolves_by_half_open_rule() {
        // u = Q(1) = 0.5 satisfies Q(0) > u >= Q(1), so the jump is 0.
        let q = JumpDistribution::from_pairs(&[-1, 0, 1], &[0.25, 0.25, 0.5]).unwrap();
        assert_eq!(sample_jump(&q, 0.5), 0);
        assert_eq!(enumerated_sample(&[(-1, 0.25), (0, 0.25), (1, 0.5)], 0.5), 0);
    }

    #[test]
    fn sampler_matches_enumeration_on_grid() {
        let atoms = [(-1, 0.2), (0, 0.3), (2, 0.15), (5, 0.35)];
        let (s, p): (Vec<i64>, Vec<f64>) = atoms.iter().copied().unzip();
        let q = JumpDistribution::from_pairs(&s, &p).unwrap();
        for i in 1..1000 {
            let u = i as f64 / 1000.0 - 0.0003;
            assert_eq!(q.sample(u), enumerated_sample(&atoms, u), "u = {u}");
        }
    }

    #[test]
    fn long_support_bisection_matches_enumeration() {
        let atoms: Vec<(i64, f64)> = (-1..=60).filter(|k| k % 7 != 3).map(|k| (k, 1.0 + (k % 5) as f64)).collect();
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let atoms: Vec<(i64, f64)> = atoms.into_iter().map(|(k, w)| (k, w / total)).collect();
        let (s, p): (Vec<i64>, Vec<f64>) = atoms.iter().copied().unzip();
        let q = JumpDistribution::from_pairs(&s, &p).unwrap();
        for i in 1..5000 {
            let u = i as f64 / 5000.0 - 0.00003;
            assert_eq!(q.sample(u), enumerated_sample(&atoms, u), "u = {u}");
        }
        // exact table values follow the half-open rule on the stored tail
        let table = q.tail_table();
        for &t in &table[1..table.len() - 1] {
            if t > 0.0 && t < 1.0 {
                let j = (0..table.len() - 1).filter(|&i| table[i] > t).max().unwrap() as i64 - 1;
                assert_eq!(q.sample(t), j, "u = Q = {t}");
            }
        }
    }

    #[test]
    fn rejects_malformed_inputs() {
        assert!(JumpDistribution::from_pairs(&[-2, 3], &[0.5, 0.5]).is_err());
        assert!(JumpDistribution::from_pairs(&[-1, 0], &[0.5, 0.5]).is_err());
        assert!(JumpDistribution::from_pairs(&[-1, 3], &[0.5, 0.6]).is_err());
        assert!(JumpDistribution::from_pairs(&[-1, 3], &[-0.1, 1.1]).is_err());
        assert!(JumpDistribution::from_pairs(&[3, 3], &[0.5, 0.5]).is_err());
        assert!(JumpDistribution::from_pairs(&[3], &[0.5, 0.5]).is_err());
        assert!(JumpDistribution::from_pairs(&[], &[]).is_err());
    }

    #[test]
    fn tail_is_non_increasing_from_one_to_zero() {
        let q = JumpDistribution::from_pairs(&[-1, 0, 2], &[0.2, 0.3, 0.5]).unwrap();
        let t = q.tail_table();
        assert_eq!(t[0], 1.0);
        assert_eq!(*t.last().unwrap(), 0.0);
        assert!(t.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(q.tail(-5), 1.0);
        assert_eq!(q.tail(7), 0.0);
    }

    #[test]
    fn json_round_trip_keeps_law() {
        let q = JumpDistribution::from_pairs(&[-1, 4], &[0.3, 0.7]).unwrap();
        let s = serde_json::to_string(&q).unwrap();
        let back: JumpDistribution = serde_json::from_str(&s).unwrap();
        assert_eq!(q, back);
        let parsed: JumpDistribution =
            serde_json::from_str(r#"{"support": [-1, 15], "probs": [0.01, 0.99]}"#).unwrap();
        assert_eq!(parsed.max_jump(), 15);
        assert!(serde_json::from_str::<JumpDistribution>(r#"{"support": [-1], "probs": [1.0]}"#).is_err());
    }
}
