//! Seeded random streams.
//!
//! Every random draw in the crate comes from a [`Seed`], a master seed plus a
//! stream index. Streams are ChaCha8 stream selectors, so a trial's draws
//! depend only on `(master, purpose, trial)` and never on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Signature = 1,
    Activity = 2,
    /// Fading and noise of one discovery round.
    Channel = 3,
    Conditional = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub master: u64,
    pub stream: u64,
}

impl Seed {
    pub fn new(master: u64, stream: u64) -> Self {
        Seed { master, stream }
    }

    /// Stream for `purpose` in trial `index`. The purpose tag occupies the
    /// top byte, the trial index the remaining 56 bits.
    pub fn derive(master: u64, purpose: Purpose, index: u64) -> Self {
        debug_assert!(index < 1 << 56);
        Seed {
            master,
            stream: ((purpose as u64) << 56) | (index & ((1 << 56) - 1)),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }
}
