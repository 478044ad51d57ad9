//! Arrow systems: one stack of ±1 arrows per vertex, read as the sequence of
//! departure directions of a nearest-neighbour walk.
//!
//! Stacks are stored lazily. Anything beyond the materialized prefix of a
//! stack reads as `+1`.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};

/// Anything that can answer "what is the `k`-th arrow at `j`" (`k >= 1`).
pub trait ArrowSource {
    fn arrow(&self, site: i64, k: u32) -> i8;
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ArrowSystem {
    stacks: FxHashMap<i64, Vec<i8>>,
}

fn check_value(v: i8) {
    assert!(v == 1 || v == -1, "arrow must be +1 or -1, got {v}");
}

impl ArrowSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, site: i64, k: u32) -> i8 {
        assert!(k >= 1, "arrow indices start at 1");
        self.stacks
            .get(&site)
            .and_then(|s| s.get(k as usize - 1))
            .copied()
            .unwrap_or(1)
    }

    /// Sets the `k`-th arrow at `site`, materializing `+1` below it if needed.
    pub fn set(&mut self, site: i64, k: u32, value: i8) {
        assert!(k >= 1, "arrow indices start at 1");
        check_value(value);
        let stack = self.stacks.entry(site).or_default();
        let idx = k as usize - 1;
        if stack.len() <= idx {
            stack.resize(idx + 1, 1);
        }
        stack[idx] = value;
    }

    /// Appends an arrow on top of the materialized prefix of `site`.
    pub fn push(&mut self, site: i64, value: i8) {
        check_value(value);
        self.stacks.entry(site).or_default().push(value);
    }

    pub fn stack(&self, site: i64) -> &[i8] {
        self.stacks.get(&site).map_or(&[], Vec::as_slice)
    }

    pub fn depth(&self, site: i64) -> usize {
        self.stack(site).len()
    }

    pub fn max_depth(&self) -> usize {
        self.stacks.values().map(Vec::len).max().unwrap_or(0)
    }

    /// Sites with a materialized stack, ascending.
    pub fn sites(&self) -> Vec<i64> {
        let mut v: Vec<i64> = self.stacks.keys().copied().collect();
        v.sort_unstable();
        v
    }

    /// `(j, k, value)` for every materialized arrow, sites ascending.
    pub fn materialized(&self) -> impl Iterator<Item = (i64, u32, i8)> + '_ {
        self.sites().into_iter().flat_map(move |j| {
            self.stack(j)
                .iter()
                .enumerate()
                .map(move |(i, &v)| (j, i as u32 + 1, v))
        })
    }

    pub fn len(&self) -> usize {
        self.stacks.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One `j k v` line per materialized arrow, sites ascending.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (j, k, v) in self.materialized() {
            let _ = writeln!(out, "{j} {k} {v}");
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<Self> {
        let mut sys = Self::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::Parse(format!("line {}: expected `j k v`, got {line:?}", n + 1));
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad());
            }
            let j: i64 = f[0].parse().map_err(|_| bad())?;
            let k: u32 = f[1].parse().map_err(|_| bad())?;
            let v: i8 = f[2].parse().map_err(|_| bad())?;
            if k == 0 || !(v == 1 || v == -1) {
                return Err(bad());
            }
            sys.set(j, k, v);
        }
        Ok(sys)
    }
}

impl ArrowSource for ArrowSystem {
    fn arrow(&self, site: i64, k: u32) -> i8 {
        self.get(site, k)
    }
}

impl<F: Fn(i64, u32) -> i8> ArrowSource for F {
    fn arrow(&self, site: i64, k: u32) -> i8 {
        self(site, k)
    }
}

/// Local times `m_t(j)`: number of `s <= t` with `X_s = j`.
#[derive(Clone, Debug)]
pub struct LocalTimeLedger {
    counts: FxHashMap<i64, u32>,
    current: i64,
    steps: u64,
}

impl LocalTimeLedger {
    /// Ledger for a walk sitting at `start` at time 0.
    pub fn new(start: i64) -> Self {
        let mut counts = FxHashMap::default();
        counts.insert(start, 1);
        Self {
            counts,
            current: start,
            steps: 0,
        }
    }

    pub fn current(&self) -> i64 {
        self.current
    }

    /// Visit count of the current vertex, including the present time.
    pub fn current_count(&self) -> u32 {
        self.counts[&self.current]
    }

    pub fn count(&self, v: i64) -> u32 {
        self.counts.get(&v).copied().unwrap_or(0)
    }

    pub fn arrive(&mut self, v: i64) {
        *self.counts.entry(v).or_insert(0) += 1;
        self.current = v;
        self.steps += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| u64::from(c)).sum()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// `X_0 = 0`, `X_{t+1} = X_t + E(X_t, M_t)`.
pub fn walk_from_arrows<S: ArrowSource + ?Sized>(arrows: &S, horizon: usize) -> Vec<i64> {
    let mut ledger = LocalTimeLedger::new(0);
    let mut path = Vec::with_capacity(horizon + 1);
    path.push(0);
    for _ in 0..horizon {
        let x = ledger.current();
        let next = x + i64::from(arrows.arrow(x, ledger.current_count()));
        ledger.arrive(next);
        path.push(next);
    }
    path
}

/// Arrow system whose `k`-th arrow at `j` is the `k`-th departure from `j`.
pub fn extract_arrows(path: &[i64]) -> Result<ArrowSystem> {
    let mut sys = ArrowSystem::new();
    for (t, w) in path.windows(2).enumerate() {
        let d = w[1] - w[0];
        if d != 1 && d != -1 {
            return Err(Error::NonUnitIncrement {
                step: t + 1,
                increment: d,
            });
        }
        sys.push(w[0], d as i8);
    }
    Ok(sys)
}

/// First `(site, m)` in the window at which the prefix sum of `lhs` drops
/// below that of `rhs`.
pub fn dominance_failure<A, B>(lhs: &A, rhs: &B, window: RangeInclusive<i64>, depth: u32) -> Option<(i64, u32)>
where
    A: ArrowSource + ?Sized,
    B: ArrowSource + ?Sized,
{
    for j in window {
        let (mut a, mut b) = (0i64, 0i64);
        for m in 1..=depth {
            a += i64::from(lhs.arrow(j, m));
            b += i64::from(rhs.arrow(j, m));
            if a < b {
                return Some((j, m));
            }
        }
    }
    None
}

/// `lhs ⪰ rhs` on `window` up to `depth`.
pub fn dominates<A, B>(lhs: &A, rhs: &B, window: RangeInclusive<i64>, depth: u32) -> bool
where
    A: ArrowSource + ?Sized,
    B: ArrowSource + ?Sized,
{
    dominance_failure(lhs, rhs, window, depth).is_none()
}

/// Dominance over every materialized arrow of either system. Beyond that both
/// read `+1`, so prefix sums only move in parallel.
pub fn materialized_dominance_failure(lhs: &ArrowSystem, rhs: &ArrowSystem) -> Option<(i64, u32)> {
    let mut sites = lhs.sites();
    sites.extend(rhs.sites());
    sites.sort_unstable();
    sites.dedup();
    sites.into_iter().find_map(|j| {
        let (a, b) = (lhs.stack(j), rhs.stack(j));
        let (mut sa, mut sb) = (0i64, 0i64);
        for m in 0..a.len().max(b.len()) {
            sa += i64::from(a.get(m).copied().unwrap_or(1));
            sb += i64::from(b.get(m).copied().unwrap_or(1));
            if sa < sb {
                return Some((j, m as u32 + 1));
            }
        }
        None
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uniform::{KeyedUniforms, UniformSource};
    use crate::stats::Moments;
    use proptest::prelude::*;

    fn ssrw_path(seed: u64, len: usize) -> Vec<i64> {
        let mut src = UniformSource::new(seed, 0);
        let mut p = vec![0i64];
        for _ in 0..len {
            let x = *p.last().unwrap();
            p.push(if src.next_uniform() <= 0.5 { x + 1 } else { x - 1 });
        }
        p
    }

    #[test]
    fn default_system_walks_right() {
        let p = walk_from_arrows(&ArrowSystem::new(), 6);
        assert_eq!(p, vec![0, 1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn single_left_arrow_at_origin() {
        let mut e = ArrowSystem::new();
        e.set(0, 1, -1);
        assert_eq!(walk_from_arrows(&e, 5), vec![0, -1, 0, 1, 2, 3]);
    }

    #[test]
    fn extraction_of_short_paths() {
        let e = extract_arrows(&[0, 1, 2]).unwrap();
        assert_eq!(e.dump(), "0 1 1\n1 1 1\n");
        let e = extract_arrows(&[0, -1, 0]).unwrap();
        assert_eq!((e.get(0, 1), e.get(-1, 1), e.get(0, 2)), (-1, 1, 1));
        assert_eq!(e.len(), 2);
        assert!(matches!(
            extract_arrows(&[0, 1, 3]),
            Err(Error::NonUnitIncrement { step: 2, increment: 2 })
        ));
    }

    #[test]
    fn replay_of_extracted_ssrw() {
        for seed in 0..100 {
            let p = ssrw_path(seed, 2000);
            let e = extract_arrows(&p).unwrap();
            assert_eq!(walk_from_arrows(&e, p.len() - 1), p);
        }
    }

    #[test]
    fn ledger_counts_sum_to_time_plus_one() {
        let p = ssrw_path(4, 500);
        let mut l = LocalTimeLedger::new(0);
        for &x in &p[1..] {
            l.arrive(x);
            assert!(l.current_count() >= 1);
        }
        assert_eq!(l.total(), p.len() as u64);
    }

    #[test]
    fn dump_round_trip() {
        let e = extract_arrows(&ssrw_path(9, 300)).unwrap();
        assert_eq!(ArrowSystem::parse_dump(&e.dump()).unwrap(), e);
        assert!(ArrowSystem::parse_dump("0 0 1").is_err());
        assert!(ArrowSystem::parse_dump("0 1 2").is_err());
        assert!(ArrowSystem::parse_dump("0 1").is_err());
    }

    #[test]
    fn dominance_examples() {
        let mut a = ArrowSystem::new();
        a.set(0, 1, -1);
        a.set(0, 2, 1);
        let mut b = ArrowSystem::new();
        b.set(0, 1, 1);
        b.set(0, 2, -1);
        assert!(!dominates(&a, &b, -2..=2, 4));
        assert_eq!(dominance_failure(&a, &b, -2..=2, 4), Some((0, 1)));
        assert!(dominates(&b, &a, -2..=2, 4));
        assert!(dominates(&a, &a, -2..=2, 4));
        assert!(dominates(&ArrowSystem::new(), &a, -2..=2, 4));
        assert_eq!(materialized_dominance_failure(&a, &b), Some((0, 1)));
        assert_eq!(materialized_dominance_failure(&b, &a), None);
    }

    fn system() -> impl Strategy<Value = ArrowSystem> {
        prop::collection::vec((-3i64..=3, 1u32..=6, prop::bool::ANY), 0..30).prop_map(|v| {
            let mut s = ArrowSystem::new();
            for (j, k, up) in v {
                s.set(j, k, if up { 1 } else { -1 });
            }
            s
        })
    }

    fn same_prefix_sums(a: &ArrowSystem, b: &ArrowSystem) -> bool {
        dominates(a, b, -3..=3, 6) && dominates(b, a, -3..=3, 6)
    }

    proptest! {
        #[test]
        fn dominance_is_a_partial_order(a in system(), b in system(), c in system()) {
            prop_assert!(dominates(&a, &a, -3..=3, 6));
            if dominates(&a, &b, -3..=3, 6) && dominates(&b, &c, -3..=3, 6) {
                prop_assert!(dominates(&a, &c, -3..=3, 6));
            }
            if same_prefix_sums(&a, &b) {
                for j in -3..=3 {
                    for k in 1..=6 {
                        prop_assert_eq!(a.get(j, k), b.get(j, k));
                    }
                }
            }
            prop_assert!(dominates(&ArrowSystem::new(), &a, -3..=3, 6));
        }

        #[test]
        fn pointwise_max_dominates(a in system(), b in system()) {
            let mut m = a.clone();
            for (j, k, v) in b.materialized() {
                m.set(j, k, v.max(a.get(j, k)));
            }
            for (j, k, _) in a.materialized() {
                m.set(j, k, a.get(j, k).max(b.get(j, k)));
            }
            prop_assert!(dominates(&m, &a, -3..=3, 6));
            prop_assert!(dominates(&m, &b, -3..=3, 6));
        }

        #[test]
        fn extract_replay_identity(seed in any::<u64>(), len in 0usize..400) {
            let p = ssrw_path(seed, len);
            let e = extract_arrows(&p).unwrap();
            prop_assert_eq!(walk_from_arrows(&e, len), p);
        }
    }

    /// Larger systems walk faster: max of `X_t / t` over the second half of
    /// the run, for paired systems built from one shared uniform per arrow.
    #[test]
    fn dominating_system_is_not_slower() {
        const T: usize = 100_000;
        let cookie = |p: f64, keys: KeyedUniforms| {
            move |j: i64, k: u32| -> i8 {
                let u = keys.at(j, u64::from(k));
                let bar = if k <= 3 { p } else { 0.5 };
                if u < bar { 1 } else { -1 }
            }
        };
        let mut big = Moments::default();
        let mut small = Moments::default();
        let proxy = |p: &[i64]| {
            (T / 2..=T).map(|t| p[t] as f64 / t as f64).fold(f64::NEG_INFINITY, f64::max)
        };
        let results = crate::replicas::run_replicas(100, |r| {
            let keys = KeyedUniforms::new(1000 + r);
            let e = cookie(0.8, keys.clone());
            let e_small = cookie(0.7, keys);
            assert!(dominates(&e, &e_small, -50..=50, 20));
            (proxy(&walk_from_arrows(&e, T)), proxy(&walk_from_arrows(&e_small, T)))
        });
        for (a, b) in results {
            big.push(a);
            small.push(b);
        }
        let se = (big.std_error().powi(2) + small.std_error().powi(2)).sqrt();
        assert!(big.mean() >= small.mean() - 2.0 * se, "{} vs {}", big.mean(), small.mean());
    }
}
