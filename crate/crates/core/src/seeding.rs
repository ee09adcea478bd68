//! Counter-based stream derivation.
//!
//! Every random object in the crate is addressed by `(seed, stream)`: a
//! ChaCha8 key expanded from the seed plus a 64-bit nonce. Streams never
//! overlap, so work can be split across threads in any order without
//! changing the output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Keyed generator from which independent streams are cloned.
#[derive(Clone, Debug)]
pub struct StreamFactory {
    base: ChaCha8Rng,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(id);
        rng
    }
}

/// Shorthand for a single stream.
pub fn stream_rng(seed: u64, id: u64) -> ChaCha8Rng {
    StreamFactory::new(seed).stream(id)
}

/// Child seed for trial `index` of an experiment rooted at `root` (SplitMix64 finalizer).
pub fn derive_seed(root: u64, index: u64) -> u64 {
    let mut z = root
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
