//! Counter-based uniform streams.
//!
//! Every uniform is a pure function of `(seed, stream, index)`: the ChaCha8
//! keystream is itself counter-based, so a replica can be re-generated from any
//! position without replaying the ones before it, and replicas on distinct
//! streams share no state.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const TWO_POW_52: f64 = 4_503_599_627_370_496.0;

/// Maps a 64-bit word to the open interval (0, 1).
///
/// Outputs sit at the midpoints of a 2^-52 grid, so neither 0, 1 nor 1/2 is
/// ever produced.
#[inline]
pub fn open_unit(word: u64) -> f64 {
    ((word >> 12) as f64 + 0.5) / TWO_POW_52
}

/// Sequential stream of uniforms in (0, 1) keyed by `(seed, stream)`.
#[derive(Clone, Debug)]
pub struct UniformSource {
    seed: u64,
    stream: u64,
    counter: u64,
    rng: ChaCha8Rng,
}

impl UniformSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            seed,
            stream,
            counter: 0,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Index of the next uniform to be produced.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        self.counter += 1;
        open_unit(self.rng.next_u64())
    }

    /// The `index`-th uniform of the stream, without touching `self`.
    pub fn at(&self, index: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(u128::from(index) * 2);
        open_unit(rng.next_u64())
    }

    /// Repositions the stream so the next uniform is the `index`-th one.
    pub fn seek(&mut self, index: u64) {
        self.rng.set_word_pos(u128::from(index) * 2);
        self.counter = index;
    }
}

impl Iterator for UniformSource {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_uniform())
    }
}

/// Random-access uniforms indexed by a lattice pair `(site, depth)`.
///
/// Used for arrow systems with independent entries, where the `k`-th arrow at
/// site `j` must not depend on the order in which arrows are queried.
#[derive(Clone, Debug)]
pub struct KeyedUniforms {
    base: ChaCha8Rng,
}

impl KeyedUniforms {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn at(&self, site: i64, depth: u64) -> f64 {
        let mut rng = self.base.clone();
        rng.set_stream(site as u64);
        rng.set_word_pos(u128::from(depth) * 2);
        open_unit(rng.next_u64())
    }
}

/// Derives the seed for replica `index` of a run keyed by `master`.
///
/// Replicas are separated by stream, so the derived seed is the master seed
/// itself; the replica index becomes the stream id.
pub fn replica_source(master: u64, index: u64) -> UniformSource {
    UniformSource::new(master, index)
}
