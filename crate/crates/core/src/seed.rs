//! Counter-based seed splitting.
//!
//! Every random stream in the lab is keyed by a master seed and a path of
//! integers (cell index, role, member index, ...). Streams never depend on
//! scheduling order, so parallel execution reproduces serial execution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type LabRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed: `h = splitmix(master); h = splitmix(h ^ splitmix(k))` for each `k` in `path`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |h, &k| splitmix64(h ^ splitmix64(k)))
}

pub fn rng(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, path: &[u64]) -> LabRng {
    rng(derive_seed(master, path))
}

// Stream roles used across modules.
pub(crate) mod role {
    pub const INIT_POLICY: u64 = 1;
    pub const INIT_VALUE: u64 = 2;
    pub const INIT_Q: u64 = 3;
    pub const BATCHES: u64 = 4;
    pub const INDICES: u64 = 10;
    pub const NOISE: u64 = 11;
    pub const EPISODE: u64 = 20;
    pub const EVAL: u64 = 21;
    pub const SAMPLES: u64 = 30;
    pub const CELL_CORRUPT: u64 = 40;
    pub const CELL_TRAIN: u64 = 41;
    pub const CELL_EVAL: u64 = 42;
    pub const REFERENCES: u64 = 43;
    pub const ORACLE: u64 = 44;
}
