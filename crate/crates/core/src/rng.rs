//! Named seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator whose seed is
//! derived from a root seed, a component name and an index. Reruns of any
//! single component therefore reproduce exactly, independent of what ran
//! before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Derives a child seed from `(root, name, index)`.
pub fn derive_seed(root: u64, name: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update((name.len() as u64).to_le_bytes());
    hasher.update(name.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_rng(root: u64, name: &str, index: u64) -> Rng {
    rng_from_seed(derive_seed(root, name, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn derivation_is_stable_and_separates_names() {
        assert_eq!(derive_seed(7, "walk", 3), derive_seed(7, "walk", 3));
        assert_ne!(derive_seed(7, "walk", 3), derive_seed(7, "walk", 4));
        assert_ne!(derive_seed(7, "walk", 3), derive_seed(7, "neg", 3));
        assert_ne!(derive_seed(7, "walk", 3), derive_seed(8, "walk", 3));
    }

    #[test]
    fn derived_streams_replay() {
        let a: Vec<u32> = (0..8).map(|_| derive_rng(1, "x", 0).random()).collect();
        let mut r = derive_rng(1, "x", 0);
        let first: u32 = r.random();
        assert!(a.iter().all(|&v| v == first));
    }
}
