//! Deterministic, splittable random streams.
//!
//! Every stochastic routine draws from a [`SeedStream`] forked off a single
//! root seed. Forks are keyed by string tags plus integer indices, so the
//! stream a particular consumer sees does not depend on how many draws other
//! consumers made. This is what makes runs bit-reproducible: a checkpoint
//! only has to remember the root seed, and sampling K' > K trajectories
//! replays the first K exactly.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Mixes a 64-bit state into a well-distributed 64-bit output.
///
/// This is the splitmix64 finalizer; consecutive or related inputs map to
/// statistically independent outputs, which is all forking needs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix_str(state: u64, tag: &str) -> u64 {
    let mut z = state;
    for b in tag.as_bytes() {
        z = mix(z ^ u64::from(*b));
    }
    mix(z)
}

/// A forkable source of deterministic randomness.
#[derive(Debug, Clone)]
pub struct SeedStream {
    state: u64,
}

impl SeedStream {
    pub fn from_seed(seed: u64) -> Self {
        SeedStream { state: mix(seed) }
    }

    /// Derives an independent child stream named by `tag`.
    pub fn fork(&self, tag: &str) -> SeedStream {
        SeedStream {
            state: mix_str(self.state, tag),
        }
    }

    /// Derives an independent child stream for an indexed element (an epoch,
    /// a sample slot, a scene). Streams for distinct indices never collide
    /// regardless of draw counts.
    pub fn fork_idx(&self, tag: &str, idx: u64) -> SeedStream {
        SeedStream {
            state: mix(mix_str(self.state, tag) ^ idx),
        }
    }

    /// Materializes the stream as a concrete RNG.
    pub fn rng(&self) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(self.state)
    }

    /// Fills `out` with uniform draws from `[-bound, bound)`.
    pub fn fill_uniform(&self, out: &mut [f64], bound: f64) {
        let mut rng = self.rng();
        for v in out.iter_mut() {
            *v = rng.gen_range(-bound..bound);
        }
    }
}
