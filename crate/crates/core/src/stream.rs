//! Stateless, splittable random streams.
//!
//! A [`StreamKey`] is 32 bytes of key material for a ChaCha8 generator, which
//! is counter-based: the key fixes the whole output sequence and no state is
//! shared between streams. Child keys are derived by hashing the parent key
//! with a label and an index, so any consumer can split off an independent
//! substream without coordinating with anyone else.
//!
//! Derivation (pinned; changing it invalidates the golden fixtures):
//!
//! ```text
//! root  = SHA-256("rfflab/stream/v1" || root_seed:u64le || len(id):u64le || id
//!                 || cell:u64le || trial:u64le)
//! child = SHA-256("rfflab/child/v1"  || parent[32] || len(label):u64le || label
//!                 || index:u64le)
//! ```
//!
//! Gaussian variates are drawn with `rand_distr::StandardNormal` (ziggurat);
//! uniforms with `rand`'s `random::<f64>()` (53-bit mantissa, half-open).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Generator type used for every stream in the crate.
pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey([u8; 32]);

impl std::fmt::Debug for StreamKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "StreamKey(")?;
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

impl StreamKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        StreamKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Key for a bare seed, for callers outside the experiment harness.
    pub fn from_seed(seed: u64) -> Self {
        derive_stream(seed, "", 0, 0)
    }

    pub fn child(&self, label: &str, index: u64) -> StreamKey {
        let mut h = Sha256::new();
        h.update(b"rfflab/child/v1");
        h.update(self.0);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        h.update(index.to_le_bytes());
        StreamKey(h.finalize().into())
    }

    pub fn rng(&self) -> StreamRng {
        ChaCha8Rng::from_seed(self.0)
    }
}

/// Derives the stream for one (experiment, cell, trial) triple.
pub fn derive_stream(root_seed: u64, experiment_id: &str, cell_index: u64, trial_index: u64) -> StreamKey {
    let mut h = Sha256::new();
    h.update(b"rfflab/stream/v1");
    h.update(root_seed.to_le_bytes());
    h.update((experiment_id.len() as u64).to_le_bytes());
    h.update(experiment_id.as_bytes());
    h.update(cell_index.to_le_bytes());
    h.update(trial_index.to_le_bytes());
    StreamKey(h.finalize().into())
}
