//! Distributed lossless compression of correlated bit strings.
//!
//! Senders independently compress by naming a random right neighbor of
//! their input in a bipartite graph with the rich-owner property; a
//! receiver reconstructs every input by enumerating candidate sets of a
//! computable description system and matching graph neighborhoods and
//! prime fingerprints. The crate provides:
//!
//! - [`bits`]: bit strings, sender index sets and framed tuples;
//! - [`primes`]: prime tables and modulus fingerprints with the
//!   isolation guarantee;
//! - [`extractor`]: seeded extractors (Toeplitz and keyed random table)
//!   with exact statistical-distance verification;
//! - [`graph`]: left-regular bipartite graphs, rich/poor owner
//!   classification, the heavy/bad-node counting checks and the
//!   prime-splitting transform that produces rich-owner graphs;
//! - [`machine`]: the toy description system (bounded conditional
//!   complexity, set enumeration, complexity profiles);
//! - [`schedule`]: the per-sender parameter schedule;
//! - [`codec`]: encoders, the complexity-approximation recursion, rate
//!   validation and the full decoder including profile guessing.

pub mod bits;
pub mod codec;
pub mod extractor;
pub mod graph;
pub mod machine;
pub mod primes;
pub mod schedule;

pub use bits::{concat_framed, decode_framed, BitString, IndexSet, StringTuple};
pub use machine::DescriptionSystem;

/// Version tag of the description machine. Complexity values, schedules
/// and reports are only comparable within one machine revision.
pub const MACHINE_VERSION: &str = "toy-1";

/// 64-bit FNV-1a, used for schedule digests and derived seeds.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
