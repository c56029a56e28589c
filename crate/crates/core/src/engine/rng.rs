use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Random stream type used by the engine.
pub type Stream = ChaCha8Rng;

fn derive(tag: &[u8], seed: u64, name: &str) -> Stream {
    let mut h = Sha256::new();
    h.update(tag);
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let mut key = [0u8; 32];
    key.copy_from_slice(&h.finalize());
    ChaCha8Rng::from_seed(key)
}

/// Substream for one transition, keyed by `(seed, transition_id)`.
///
/// Adding or removing other transitions never changes the draws of this one.
pub fn rng_stream(seed: u64, transition_id: &str) -> Stream {
    derive(b"transition\0", seed, transition_id)
}

/// Stream used to choose among concurrently enabled immediate transitions.
pub fn selection_stream(seed: u64) -> Stream {
    derive(b"selection\0", seed, "")
}
