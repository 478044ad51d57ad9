//! Replica-level parallelism.
//!
//! Each replica owns its own uniform stream, so replicas run on the rayon pool
//! with no shared state; results come back ordered by replica index.

use rayon::prelude::*;

/// Runs `job(replica)` for `0..count` in parallel and returns the results in
/// replica order.
pub fn run_replicas<T, F>(count: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..count as u64).into_par_iter().map(job).collect()
}

/// Runs replicas and folds their results with an associative, commutative
/// `merge`.
pub fn fold_replicas<T, F, M>(count: usize, identity: T, job: F, merge: M) -> T
where
    T: Send + Sync + Clone,
    F: Fn(u64) -> T + Sync + Send,
    M: Fn(T, T) -> T + Sync + Send,
{
    (0..count as u64)
        .into_par_iter()
        .map(job)
        .reduce(|| identity.clone(), &merge)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_are_in_replica_order() {
        let v = run_replicas(64, |r| r * r);
        assert_eq!(v, (0..64u64).map(|r| r * r).collect::<Vec<_>>());
        assert_eq!(fold_replicas(100, 0u64, |r| r, |a, b| a + b), 4950);
    }
}
