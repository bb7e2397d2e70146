//! Reproducible random streams.
//!
//! Every stochastic routine in this crate draws from a ChaCha12 generator, a
//! counter-based stream cipher RNG whose output is specified byte-for-byte and
//! identical on every platform. Streams are split by the rule
//! `stream(seed, r) = ChaCha12::seed_from_u64(seed ^ r)`: replication `r` of a
//! Monte Carlo study uses the XOR-shifted seed, so replications can run in
//! parallel on disjoint, reproducible streams.

use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;

/// The generator used throughout the crate.
pub type Stream = ChaCha12Rng;

/// Root stream for a given seed (replication 0).
pub fn stream(seed: u64) -> Stream {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Split stream for replication `r`: seeded with `seed ^ r`.
///
/// `seed_from_u64` expands the 64-bit value through SplitMix64, so nearby
/// replication indices still produce unrelated key schedules.
pub fn split_stream(seed: u64, r: u64) -> Stream {
    ChaCha12Rng::seed_from_u64(seed ^ r)
}

/// Per-draw stream for inner Monte Carlo loops: ChaCha's native 64-bit
/// stream id on top of the seed-derived key.
///
/// Unlike [`split_stream`], distinct `(seed, rep)` pairs can never collide,
/// so the draws of two runs with different seeds share no stream even when
/// `rep` ranges over values comparable to the seed.
pub fn rep_stream(seed: u64, rep: u64) -> Stream {
    let mut rng = stream(seed);
    rng.set_stream(rep);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_deterministic() {
        let mut a = stream(42);
        let mut b = stream(42);
        for _ in 0..16 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn split_streams_differ() {
        let mut a = split_stream(42, 1);
        let mut b = split_stream(42, 2);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn rep_streams_differ_across_seed_and_rep() {
        assert_ne!(rep_stream(5, 3).next_u64(), rep_stream(6, 3).next_u64());
        assert_ne!(rep_stream(5, 3).next_u64(), rep_stream(5, 6).next_u64());
        // key and stream id do not alias: (5 xor 3, 0) vs (5, 3)
        assert_ne!(rep_stream(5, 3).next_u64(), split_stream(5, 3).next_u64());
        assert_eq!(rep_stream(7, 9).next_u64(), rep_stream(7, 9).next_u64());
    }
}
