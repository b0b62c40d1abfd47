//! Counter-addressed random streams.
//!
//! Every Monte-Carlo draw is a pure function of `(seed, stream, position)`:
//! a ChaCha8 generator keyed by the master seed, with the ChaCha stream id
//! selecting the replicate and the word position selecting the draw. Results
//! therefore do not depend on how replicates are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of 32-bit ChaCha words reserved per random-walk cell (two `u64`).
pub const WORDS_PER_CELL: u128 = 4;

/// Offset that maps cell index `j` (possibly negative) to a nonnegative slot.
const CELL_ORIGIN: i128 = 1 << 40;

/// Generator for replicate `stream` under master `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator positioned at cell `j` of replicate `stream`; reading two
/// `u64`s per cell walks the cells `j, j+1, ...` in order, so the draw for a
/// given `(seed, stream, j)` is the same for every window containing `j`.
pub fn cell_rng(seed: u64, stream: u64, j: i64) -> ChaCha8Rng {
    let mut rng = stream_rng(seed, stream);
    let slot = (j as i128 + CELL_ORIGIN) as u128;
    rng.set_word_pos(slot * WORDS_PER_CELL);
    rng
}

/// Independent master seed for a named sub-experiment (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in `[0, 1)` from the top 53 bits.
#[inline]
pub fn unit_f64(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in `(0, 1]` from the top 53 bits.
#[inline]
pub fn unit_f64_open(word: u64) -> f64 {
    ((word >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}
