//! Keyed random substreams.
//!
//! Every random decision in a run is drawn from a ChaCha8 stream whose seed is
//! derived from a path of integer labels, e.g. `(seed, trial, STREAM_REBEL,
//! investor)`. Deriving streams by key instead of by draw order makes results
//! independent of scheduling, so parallel workers and any thread count produce
//! the same bits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels. Values are arbitrary but frozen: changing one changes every output.
pub mod label {
    pub const UNIVERSE: u64 = 0x756e_6976;
    pub const POOL: u64 = 0x706f_6f6c;
    pub const CP: u64 = 0x6370;
    pub const GRAPH: u64 = 0x6772_6170;
    pub const PASSIVE: u64 = 0x7061_7373;
    pub const REBEL: u64 = 0x7265_6265;
    pub const MVIS: u64 = 0x6d76_6973;
    pub const RING: u64 = 0x7269_6e67;
    pub const CITATIONS: u64 = 0x6369_7465;
    pub const NULL_MODEL: u64 = 0x6e75_6c6c;
    pub const CYCLE: u64 = 0x6379_636c;
    pub const RUN: u64 = 0x7275_6e00;
    pub const TRIAL: u64 = 0x7472_6961;
}

/// A node in the tree of random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn root(seed: u64) -> Self {
        StreamKey(splitmix64(seed ^ 0x9e37_79b9_7f4a_7c15))
    }

    /// Child stream identified by `label`. Children of distinct labels are independent.
    pub fn child(self, label: u64) -> Self {
        StreamKey(splitmix64(self.0.rotate_left(17) ^ splitmix64(label.wrapping_add(0x632b_e59b_d9b4_e019))))
    }

    pub fn path(self, labels: &[u64]) -> Self {
        labels.iter().fold(self, |k, &l| k.child(l))
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        let mut state = self.0;
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
