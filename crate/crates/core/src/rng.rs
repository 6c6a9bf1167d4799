//! Counter-based deterministic random streams.
//!
//! A stream is keyed by `(master_seed, stream_id)`: the master seed fixes the
//! ChaCha key and the stream id selects the ChaCha stream word, so two
//! streams never share keystream blocks. Sub-streams (one per simulated node)
//! re-key from the parent pair.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Builds the stream for replication `stream_id` under `master_seed`.
pub fn derive_stream(master_seed: u64, stream_id: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    RngStream {
        master_seed,
        stream_id,
        rng,
    }
}

impl RngStream {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// An independent child stream, a pure function of
    /// `(master_seed, stream_id, sub_id)` and of nothing drawn so far.
    pub fn substream(&self, sub_id: u64) -> ChaCha8Rng {
        let key = splitmix64(self.master_seed ^ splitmix64(self.stream_id.wrapping_add(1)));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(sub_id);
        rng
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
