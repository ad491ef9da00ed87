//! Root-seed derivation.
//!
//! Every random stream in the pipeline is derived from one root seed and a
//! component name, so a single `--seed` reproduces a whole run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate.
pub type Rng64 = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed by hashing `component` (FNV-1a) into `root`.
pub fn derive_seed(root: u64, component: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in component.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(root ^ h)
}

/// Like [`derive_seed`], for the `index`-th member of a family (grid points, trials).
pub fn derive_indexed_seed(root: u64, component: &str, index: u64) -> u64 {
    splitmix64(derive_seed(root, component) ^ splitmix64(index))
}

pub fn rng_from_seed(seed: u64) -> Rng64 {
    Rng64::seed_from_u64(seed)
}

/// Shorthand for `rng_from_seed(derive_seed(root, component))`.
pub fn component_rng(root: u64, component: &str) -> Rng64 {
    rng_from_seed(derive_seed(root, component))
}
