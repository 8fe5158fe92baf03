//! Seed-stream derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by
//! the run's root seed. Independent consumers get independent ChaCha
//! streams (the 64-bit nonce), laid out as
//!
//! ```text
//! stream = purpose << 56 | major << 40 | minor
//! ```
//!
//! with `major < 2^16` and `minor < 2^40`. For CIR synthesis `major` is the
//! AP index and `minor` the packet index, so any frame can be regenerated on
//! its own without replaying the frames before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. The discriminant is part of the stream id and
/// must never be reordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    FrameNoise = 1,
    Cfo = 2,
    WeightInit = 3,
    Shuffle = 4,
    Dropout = 5,
    SceneLayout = 6,
    Trial = 7,
}

const MINOR_BITS: u32 = 40;
const MAJOR_BITS: u32 = 16;

pub fn stream_id(purpose: Purpose, major: u64, minor: u64) -> u64 {
    debug_assert!(major < (1 << MAJOR_BITS));
    debug_assert!(minor < (1 << MINOR_BITS));
    ((purpose as u64) << 56)
        | ((major & ((1 << MAJOR_BITS) - 1)) << MINOR_BITS)
        | (minor & ((1 << MINOR_BITS) - 1))
}

/// Generator for `(seed, purpose, major, minor)`.
pub fn stream(seed: u64, purpose: Purpose, major: u64, minor: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(purpose, major, minor));
    rng
}
