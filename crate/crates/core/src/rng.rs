//! Deterministic random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! user seed and a stream id. ChaCha is counter based, so distinct stream ids
//! give independent sequences and the output never depends on how work is
//! scheduled across threads. Stream ids are derived from
//! `(replication, role)` by [`stream_id`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Purpose of a random stream. Two roles never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Role {
    TrialDraw = 1,
    ExternalDraw = 2,
    EvalDraw = 3,
    Folds = 4,
    Learner = 5,
    Subsample = 6,
    Holdout = 7,
    Partition = 8,
    ClassifierCv = 9,
    Fixture = 10,
}

/// Mixes a replication index, a role and an auxiliary tag into one stream id.
pub fn stream_id(replication: u64, role: Role, tag: u64) -> u64 {
    // splitmix64 finaliser over a packed key
    let mut z = replication
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((role as u64) << 56)
        .wrapping_add(tag.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for `(seed, replication, role, tag)`.
pub fn stream(seed: u64, replication: u64, role: Role, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(replication, role, tag));
    rng
}

/// Box-Muller standard normal sampler that caches the second variate.
#[derive(Debug, Clone)]
pub struct NormalSampler<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: Rng> NormalSampler<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps ln finite
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}
