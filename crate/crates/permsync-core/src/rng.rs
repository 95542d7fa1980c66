//! Seeded, addressable random streams.
//!
//! Every random decision in this crate draws from a stream keyed by
//! `(seed, purpose, a, b)`, where `purpose` tags the kind of decision and
//! `a`/`b` address the node, edge, or attempt it belongs to. Keying the
//! cipher directly means streams are independent of each other and of
//! iteration order, so regenerating any one object is reproducible no
//! matter what else was sampled before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Crate-wide purpose tags. Keeping them in one place guarantees two
/// different kinds of decision never share a stream.
pub(crate) mod purpose {
    pub const GRAPH: u32 = 1;
    pub const TRUTH: u32 = 2;
    pub const KEYPOINTS: u32 = 3;
    pub const SELECT: u32 = 4;
    pub const HAAR: u32 = 5;
    pub const PROPOSAL: u32 = 6;
    pub const ADVERSARIAL: u32 = 7;
    pub const SEEDS: u32 = 8;
    pub const FILL: u32 = 9;
    pub const SPECTRAL: u32 = 10;
}

pub(crate) fn stream(seed: u64, purpose: u32, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&purpose.to_le_bytes());
    key[12..20].copy_from_slice(&a.to_le_bytes());
    key[20..28].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
