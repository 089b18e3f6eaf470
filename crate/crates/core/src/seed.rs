//! Seed derivation for reproducible parallel streams.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by a 64-bit
//! seed. Child seeds are derived from a master seed and a path of indices
//! (scenario row, batch index, ...) by chaining SplitMix64 finalizers, so a
//! stream depends only on its coordinates and never on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and an index path.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &i| {
        splitmix64(acc ^ splitmix64(i.wrapping_add(0xA076_1D64_78BD_642F)))
    })
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_path_sensitive() {
        let a = derive_seed(7, &[1, 2]);
        assert_eq!(a, derive_seed(7, &[1, 2]));
        assert_ne!(a, derive_seed(7, &[2, 1]));
        assert_ne!(a, derive_seed(8, &[1, 2]));
        assert_ne!(derive_seed(7, &[]), derive_seed(7, &[0]));
    }

    #[test]
    fn streams_are_reproducible() {
        let x: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(stream(11), |r, _| Some(r.random()))
            .collect();
        let y: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(stream(11), |r, _| Some(r.random()))
            .collect();
        assert_eq!(x, y);
    }
}
