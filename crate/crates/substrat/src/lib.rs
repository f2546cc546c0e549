//! Subgradient sequences on piecewise-smooth functions with declared
//! stratifications, and the instrumentation to check the convergence theory
//! behind them empirically: diameter bounds, desingularizing-exponent fits,
//! projected-iterate descent, and stratum-crossing index bookkeeping.

pub mod corpus;
pub mod diagnostics;
pub mod engine;
pub mod minnorm;
pub mod parallel;
pub mod piecewise;
pub mod poly;
pub mod strata;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// All randomness in this crate flows through explicitly seeded ChaCha streams.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// FNV-1a over bytes; used to stamp configs into outputs.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
