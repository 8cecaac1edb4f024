//! Counter-based seed derivation.
//!
//! Every random stream is a ChaCha8 generator keyed by a hash of a root
//! seed and a path of small integers (pass, replication, role, scenario).
//! Streams therefore do not depend on the order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Role tags for seed paths.
pub const ROLE_OPTIMIZE: u64 = 1;
pub const ROLE_EVALUATE: u64 = 2;
pub const ROLE_INSTANCE: u64 = 3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash `root` and `path` into a 64-bit seed.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(root), |h, &p| {
        splitmix(h ^ splitmix(p.wrapping_add(0xA5A5_A5A5)))
    })
}

pub fn stream(root: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, path))
}
