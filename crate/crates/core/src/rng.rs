//! Named, keyed random streams.
//!
//! A single master seed fans out into independent ChaCha streams, one per
//! `(label, ids...)` key. Drawing from one stream never shifts another, and
//! the server can rebuild any device's dither stream from the key alone.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha12Rng;

/// Stream labels used across the simulator.
pub mod label {
    pub const CHANNEL: &str = "channel";
    pub const NOISE: &str = "noise";
    pub const DITHER: &str = "dither";
    pub const SGD: &str = "sgd";
    pub const PARTITION: &str = "partition";
    pub const DATA: &str = "data";
    pub const INIT: &str = "init";
    pub const SECOND_MOMENT: &str = "second-moment";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamFactory {
    master: u64,
}

impl StreamFactory {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master_seed(&self) -> u64 {
        self.master
    }

    /// Deterministic stream for `label` keyed by `ids`.
    pub fn stream(&self, label: &str, ids: &[u64]) -> StreamRng {
        let mut h = Sha256::new();
        h.update(self.master.to_le_bytes());
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        for id in ids {
            h.update(id.to_le_bytes());
        }
        StreamRng::from_seed(h.finalize().into())
    }

    /// Dither stream shared by device `device` and the server in `round`.
    pub fn dither(&self, device: usize, round: usize) -> StreamRng {
        self.stream(label::DITHER, &[device as u64, round as u64])
    }
}
