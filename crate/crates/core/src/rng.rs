//! Counter-based random streams keyed by `(seed, stream)`.
//!
//! Every replica, chain or ensemble member draws from its own stream, so the
//! numbers it sees do not depend on how work is scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Identifies a random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub seed: u64,
    pub stream: u64,
}

impl StreamId {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// A sub-stream derived from this one; used to give independent noise to
    /// distinct roles (initial data, driving noise, proposals) of one replica.
    pub fn child(&self, role: u64) -> Self {
        // splitmix64 finalizer keeps children of nearby streams apart
        let mut z = self
            .stream
            .wrapping_add(role.wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add(0xD1B5_4A32_D192_ED03);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        Self {
            seed: self.seed,
            stream: z,
        }
    }

    pub fn rng(&self) -> StreamRng {
        StreamRng::new(*self)
    }
}

/// ChaCha8 generator positioned on a single stream.
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
    id: StreamId,
}

impl StreamRng {
    pub fn new(id: StreamId) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(id.seed);
        inner.set_stream(id.stream);
        Self { inner, id }
    }

    pub fn id(&self) -> StreamId {
        self.id
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}
