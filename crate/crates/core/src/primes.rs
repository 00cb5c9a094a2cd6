//! Prime tables and modulus fingerprints.
//!
//! The isolation guarantee: among the first t = (1/δ)·s·n primes, each
//! of s distinct n-bit strings keeps a unique residue under at least a
//! (1-δ) fraction of the primes. It rests on a counting fact — a
//! difference of two integers below 2^(n+1) has fewer than n+1 distinct
//! prime divisors — so it holds for every input, adversarial or not.

use num_rational::Ratio;
use thiserror::Error;

use crate::bits::BitString;

/// Hard cap on materialized prime tables.
pub const PRIME_COUNT_GUARD: u64 = 1 << 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrimeError {
    #[error("requested {0} primes, guard is {PRIME_COUNT_GUARD}")]
    CountGuard(u64),
    #[error("prime count must be at least 1")]
    Empty,
    #[error("duplicate input strings at positions {0} and {1}")]
    DuplicateStrings(usize, usize),
}

/// Deterministic integer upper bound on the t-th prime (1-indexed):
/// 2·t·bitlen(t) dominates t(ln t + ln ln t) and stays float-free.
/// Saturates instead of overflowing; callers guard on the result.
pub fn nth_prime_bound(t: u64) -> u64 {
    let bits = 64 - t.leading_zeros() as u64;
    2u64.saturating_mul(t).saturating_mul(bits.max(2)).max(16)
}

/// All primes strictly below `limit`, by a bit-packed odd sieve.
pub fn primes_below(limit: u64) -> Vec<u64> {
    if limit <= 2 {
        return Vec::new();
    }
    let n = limit as usize;
    // bit i of the sieve represents the odd number 2i + 1
    let half = n / 2;
    let mut composite = vec![0u64; half.div_ceil(64)];
    let mut i = 1usize; // 3
    while (2 * i + 1) * (2 * i + 1) < n {
        if composite[i / 64] >> (i % 64) & 1 == 0 {
            let p = 2 * i + 1;
            let mut j = (p * p) / 2;
            while j < half {
                composite[j / 64] |= 1 << (j % 64);
                j += p;
            }
        }
        i += 1;
    }
    let mut out = Vec::with_capacity(half / 8);
    out.push(2);
    for i in 1..half {
        if composite[i / 64] >> (i % 64) & 1 == 0 {
            out.push((2 * i + 1) as u64);
        }
    }
    out
}

/// Exactly the first `t` primes, ascending.
pub fn first_primes(t: u64) -> Result<Vec<u64>, PrimeError> {
    if t == 0 {
        return Err(PrimeError::Empty);
    }
    if t > PRIME_COUNT_GUARD {
        return Err(PrimeError::CountGuard(t));
    }
    // start near t (ln t + ln ln t): ln t <= 0.7 bitlen(t), ln ln t <= 3
    // in the supported range; the retry keeps correctness independent
    // of the estimate.
    let bits = 64 - t.leading_zeros() as u64;
    let mut limit = (t.saturating_mul(7 * bits + 30) / 10).max(16);
    loop {
        let mut primes = primes_below(limit);
        if primes.len() as u64 >= t {
            primes.truncate(t as usize);
            return Ok(primes);
        }
        limit = limit.saturating_mul(2);
    }
}

/// A prime modulus fingerprint of a string.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Fingerprint {
    pub q: u64,
    pub residue: u64,
}

pub fn fingerprint(x: &BitString, q: u64) -> Fingerprint {
    Fingerprint {
        q,
        residue: x.mod_u64(q),
    }
}

/// Report of [`verify_isolation`]: for each input string, the fraction
/// of primes under which its residue is unique in the set.
#[derive(Clone, Debug)]
pub struct IsolationReport {
    pub t: u64,
    pub fractions: Vec<Ratio<u64>>,
    /// min over strings, the quantity compared against 1 - delta
    pub worst: Ratio<u64>,
    pub pass: bool,
}

/// Check residue uniqueness of `strings` over the first
/// t = (1/delta)·s·n primes, where delta = 2^-delta_log2.
///
/// Every fraction must be at least 1 - delta; the counting argument
/// makes this unconditional, so a failure here is a bug.
pub fn verify_isolation(
    strings: &[BitString],
    n: usize,
    delta_log2: u32,
) -> Result<IsolationReport, PrimeError> {
    let s = strings.len() as u64;
    let t = (1u64 << delta_log2) * s * n as u64;
    let primes = first_primes(t.max(1))?;

    for (i, a) in strings.iter().enumerate() {
        for (j, b) in strings.iter().enumerate().skip(i + 1) {
            if a == b {
                return Err(PrimeError::DuplicateStrings(i, j));
            }
        }
    }

    let mut unique_counts = vec![0u64; strings.len()];
    let mut residues = vec![0u64; strings.len()];
    for &q in &primes {
        for (r, x) in residues.iter_mut().zip(strings) {
            *r = x.mod_u64(q);
        }
        for i in 0..strings.len() {
            let unique = residues
                .iter()
                .enumerate()
                .all(|(j, &r)| j == i || r != residues[i]);
            if unique {
                unique_counts[i] += 1;
            }
        }
    }

    let fractions: Vec<Ratio<u64>> = unique_counts
        .iter()
        .map(|&c| Ratio::new(c, t))
        .collect();
    let worst = fractions
        .iter()
        .copied()
        .min()
        .unwrap_or_else(|| Ratio::new(1, 1));
    let threshold = Ratio::new((1u64 << delta_log2) - 1, 1u64 << delta_log2);
    Ok(IsolationReport {
        t,
        pass: worst >= threshold,
        fractions,
        worst,
    })
}

/// Number of distinct prime divisors of `v`.
pub fn distinct_prime_divisors(mut v: u64) -> u32 {
    let mut count = 0;
    let mut p = 2u64;
    while p * p <= v {
        if v.is_multiple_of(p) {
            count += 1;
            while v.is_multiple_of(p) {
                v /= p;
            }
        }
        p += 1;
    }
    if v > 1 {
        count += 1;
    }
    count
}
