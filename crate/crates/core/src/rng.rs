//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator
//! (`rand_chacha::ChaCha8Rng`, platform-independent output). Independent
//! substreams are addressed by `(seed, purpose, index)`: the three words are
//! mixed with SplitMix64 into the generator's 256-bit key, so sample `i` of a
//! dataset can be regenerated on its own and in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Purposes for substreams. Changing these values changes every dataset.
pub mod purpose {
    pub const REFERENCE: u64 = 0x5245_4600;
    pub const TRAIN: u64 = 0x5452_4e00;
    pub const VALID: u64 = 0x5641_4c00;
    pub const TEST: u64 = 0x5445_5300;
    pub const DISTRACTOR: u64 = 0x4449_5300;
    pub const PRESET: u64 = 0x5052_4500;
    pub const INIT: u64 = 0x494e_4900;
    pub const SHUFFLE: u64 = 0x5348_5500;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Substream for `(seed, purpose, index)`.
pub fn substream(seed: u64, purpose: u64, index: u64) -> Stream {
    let mut state = seed ^ purpose.rotate_left(17) ^ index.rotate_left(41);
    let mut key = [0u8; 32];
    // Feed all three words through the mixer so nearby tuples diverge.
    let mut s2 = splitmix64(&mut state) ^ index;
    let mut s3 = splitmix64(&mut state) ^ purpose;
    for (k, chunk) in key.chunks_mut(8).enumerate() {
        let w = match k {
            0 => splitmix64(&mut state),
            1 => splitmix64(&mut s2),
            2 => splitmix64(&mut s3),
            _ => splitmix64(&mut state) ^ seed,
        };
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = substream(1, purpose::TRAIN, 0).gen();
        let b: u64 = substream(1, purpose::TRAIN, 0).gen();
        let c: u64 = substream(1, purpose::TRAIN, 1).gen();
        let d: u64 = substream(1, purpose::TEST, 0).gen();
        let e: u64 = substream(2, purpose::TRAIN, 0).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_ne!(a, e);
    }

    #[test]
    fn known_first_word() {
        // Pins the stream derivation; a change here changes every dataset.
        let v: u64 = substream(0, purpose::TRAIN, 0).gen();
        assert_eq!(v, 0x6a57_c848_b101_7f27);
        let w: u64 = substream(7, purpose::TEST, 3).gen();
        assert_eq!(w, 0x5622_2188_fbab_0c95);
    }
}
