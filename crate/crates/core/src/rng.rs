//! Seed derivation for reproducible, schedule-independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer. Fixed across versions: changing it changes every
/// simulated panel.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `index` under master seed `seed`.
#[inline]
pub fn derive(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

/// Named sub-streams within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Network = 1,
    Groups = 2,
    Noise = 3,
}

pub fn rng_for(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Seed of one named stream of replication `rep`.
pub fn stream_seed(seed: u64, rep: u64, stream: Stream) -> u64 {
    derive(derive(seed, rep), stream as u64)
}

/// Generator for one named stream of replication `rep`.
pub fn stream_rng(seed: u64, rep: u64, stream: Stream) -> Rng {
    rng_for(stream_seed(seed, rep, stream))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_is_stable_and_spreads() {
        assert_eq!(derive(1, 0), derive(1, 0));
        assert_ne!(derive(1, 0), derive(1, 1));
        assert_ne!(derive(1, 0), derive(2, 0));
        // Frozen value; a change here breaks reproducibility of stored runs.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    }
}
