//! Deterministic seed splitting.
//!
//! Every random stream in the simulator is derived from one master seed and a
//! subsystem tag, so changing how many draws one subsystem makes never shifts
//! another subsystem's stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams used by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Layout = 1,
    Arrivals = 2,
    Fading = 3,
    Exploration = 4,
    Replay = 5,
    Init = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a 64-bit seed for `(master, stream, index)`.
pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ (stream as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(b ^ index.wrapping_mul(0xA076_1D64_78BD_642F))
}

pub fn stream_rng(master: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}
