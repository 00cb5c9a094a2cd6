//! Bit-exact string and index-set primitives.
//!
//! Everything here is MSB-first: bit 0 of a [`BitString`] is the most
//! significant bit of its integer interpretation, and serialization
//! orders match. A single convention end to end keeps encoder and
//! decoder fingerprints on the same modulus.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitsError {
    #[error("part length {0} exceeds the 32-bit framing header")]
    PartTooLong(usize),
    #[error("framed data truncated at bit {0}")]
    FramingTruncated(usize),
    #[error("tuple expects senders 1..={ell}, got index {index}")]
    BadSenderIndex { ell: usize, index: usize },
    #[error("index set member {member} outside 1..={ell}")]
    MemberOutOfRange { member: usize, ell: usize },
}

/// A fixed-length sequence of bits, MSB-first.
///
/// The integer interpretation of an `n`-bit string is its value in
/// `[0, 2^n)` reading bit 0 as the highest bit; the pair (length, value)
/// is bijective with the string.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    len: usize,
    // Bit i lives at words[i / 64], position 63 - i % 64. Trailing bits
    // of the last word are kept zero so Eq/Hash see canonical values.
    words: Vec<u64>,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = BitString::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                s.set(i, true);
            }
        }
        s
    }

    /// The `len` low bits of `value`, written MSB-first.
    pub fn from_u128(value: u128, len: usize) -> Self {
        assert!(len <= 128, "from_u128 supports at most 128 bits");
        if len < 128 {
            debug_assert!(value < (1u128 << len), "value does not fit in {len} bits");
        }
        let mut s = BitString::zeros(len);
        for i in 0..len {
            if (value >> (len - 1 - i)) & 1 == 1 {
                s.set(i, true);
            }
        }
        s
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Self {
        let mut s = BitString::zeros(len);
        for w in s.words.iter_mut() {
            *w = rng.gen();
        }
        s.mask_tail();
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len);
        (self.words[i / 64] >> (63 - (i % 64))) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len);
        let mask = 1u64 << (63 - (i % 64));
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        let b = self.get(i);
        self.set(i, !b);
    }

    fn mask_tail(&mut self) {
        let tail = self.len % 64;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= !0u64 << (64 - tail);
            }
        }
        if self.len == 0 {
            self.words.clear();
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// MSB-first integer value. Panics above 128 bits; longer strings
    /// are reduced with [`BitString::mod_u64`] instead.
    pub fn as_u128(&self) -> u128 {
        assert!(self.len <= 128, "as_u128 supports at most 128 bits");
        let mut v: u128 = 0;
        for b in self.iter() {
            v = (v << 1) | b as u128;
        }
        v
    }

    /// Integer value modulo `q`, for any length. Horner's rule over the
    /// MSB-first value, so the result equals `as_integer(self) mod q`.
    pub fn mod_u64(&self, q: u64) -> u64 {
        assert!(q > 0);
        let q128 = q as u128;
        let mut r: u128 = 0;
        let mut remaining = self.len;
        for &w in &self.words {
            let take = remaining.min(64);
            let chunk = if take == 0 { 0 } else { (w >> (64 - take)) as u128 };
            r = ((r << take) | chunk) % q128;
            remaining -= take;
        }
        r as u64
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        out.extend(other);
        out
    }

    pub fn extend(&mut self, other: &BitString) {
        // Bit-by-bit; framing and label packing are not hot paths.
        let start = self.len;
        self.len += other.len;
        self.words.resize(self.len.div_ceil(64), 0);
        for (i, b) in other.iter().enumerate() {
            if b {
                self.set(start + i, true);
            }
        }
    }

    pub fn prefix(&self, m: usize) -> BitString {
        assert!(m <= self.len);
        let mut out = self.clone();
        out.len = m;
        out.words.truncate(m.div_ceil(64));
        out.mask_tail();
        out
    }

    pub fn slice(&self, start: usize, len: usize) -> BitString {
        assert!(start + len <= self.len);
        let mut out = BitString::zeros(len);
        for i in 0..len {
            if self.get(start + i) {
                out.set(i, true);
            }
        }
        out
    }

    pub fn xor(&self, other: &BitString) -> BitString {
        assert_eq!(self.len, other.len, "xor requires equal lengths");
        let mut out = self.clone();
        for (w, o) in out.words.iter_mut().zip(&other.words) {
            *w ^= o;
        }
        out
    }

    /// Parity of the AND with `other` (GF(2) inner product).
    pub fn dot(&self, other: &BitString) -> bool {
        assert_eq!(self.len, other.len, "dot requires equal lengths");
        let mut acc = 0u64;
        for (w, o) in self.words.iter().zip(&other.words) {
            acc ^= w & o;
        }
        acc.count_ones() % 2 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Raw storage: 64-bit words, MSB-first, tail bits zero.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Packed big-endian bytes, zero-padded to a byte boundary.
    pub fn to_padded_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len.div_ceil(8)];
        for (i, b) in self.iter().enumerate() {
            if b {
                out[i / 8] |= 1 << (7 - i % 8);
            }
        }
        out
    }

    pub fn from_padded_bytes(bytes: &[u8], len: usize) -> Self {
        assert!(bytes.len() >= len.div_ceil(8));
        let mut s = BitString::zeros(len);
        for i in 0..len {
            if (bytes[i / 8] >> (7 - i % 8)) & 1 == 1 {
                s.set(i, true);
            }
        }
        s
    }

    /// Binary serialization: 32-bit big-endian bit count, then packed bits.
    pub fn write_binary(&self, out: &mut Vec<u8>) -> Result<(), BitsError> {
        if self.len >= (1usize << 32) {
            return Err(BitsError::PartTooLong(self.len));
        }
        out.extend_from_slice(&(self.len as u32).to_be_bytes());
        out.extend_from_slice(&self.to_padded_bytes());
        Ok(())
    }

    pub fn read_binary(input: &[u8]) -> Result<(BitString, &[u8]), BitsError> {
        if input.len() < 4 {
            return Err(BitsError::FramingTruncated(0));
        }
        let len = u32::from_be_bytes(input[..4].try_into().unwrap()) as usize;
        let nbytes = len.div_ceil(8);
        if input.len() < 4 + nbytes {
            return Err(BitsError::FramingTruncated(len));
        }
        let s = BitString::from_padded_bytes(&input[4..4 + nbytes], len);
        Ok((s, &input[4 + nbytes..]))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b\"{self}\"")
    }
}

impl FromStr for BitString {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return Err(format!("invalid bit character {c:?}")),
            }
        }
        Ok(BitString::from_bits(&bits))
    }
}

/// Shorthand used throughout the tests.
pub fn bs(s: &str) -> BitString {
    s.parse().expect("valid bit literal")
}

/// Concatenate parts with unambiguous framing: each part is preceded by
/// a 32-bit big-endian bit count. The empty sequence frames to the
/// empty string.
pub fn concat_framed(parts: &[BitString]) -> Result<BitString, BitsError> {
    let mut out = BitString::zeros(0);
    for p in parts {
        if p.len() >= (1usize << 32) {
            return Err(BitsError::PartTooLong(p.len()));
        }
        out.extend(&BitString::from_u128(p.len() as u128, 32));
        out.extend(p);
    }
    Ok(out)
}

/// Inverse of [`concat_framed`]. Fails on trailing or truncated data.
pub fn decode_framed(framed: &BitString) -> Result<Vec<BitString>, BitsError> {
    let mut parts = Vec::new();
    let mut pos = 0usize;
    while pos < framed.len() {
        if framed.len() - pos < 32 {
            return Err(BitsError::FramingTruncated(pos));
        }
        let len = framed.slice(pos, 32).as_u128() as usize;
        pos += 32;
        if framed.len() - pos < len {
            return Err(BitsError::FramingTruncated(pos));
        }
        parts.push(framed.slice(pos, len));
        pos += len;
    }
    Ok(parts)
}

/// A sorted, duplicate-free set of sender indices drawn from 1..=ell.
///
/// Canonical order is ascending, so tuple projections are deterministic.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndexSet {
    members: Vec<usize>,
}

impl IndexSet {
    pub fn new(members: impl IntoIterator<Item = usize>) -> Self {
        let mut m: Vec<usize> = members.into_iter().collect();
        m.sort_unstable();
        m.dedup();
        IndexSet { members: m }
    }

    pub fn empty() -> Self {
        IndexSet { members: Vec::new() }
    }

    pub fn full(ell: usize) -> Self {
        IndexSet::new(1..=ell)
    }

    pub fn validate(&self, ell: usize) -> Result<(), BitsError> {
        for &m in &self.members {
            if m == 0 || m > ell {
                return Err(BitsError::MemberOutOfRange { member: m, ell });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn insert(&self, i: usize) -> IndexSet {
        IndexSet::new(self.members.iter().copied().chain(std::iter::once(i)))
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.members.iter().all(|m| other.contains(*m))
    }

    pub fn complement(&self, ell: usize) -> IndexSet {
        IndexSet::new((1..=ell).filter(|i| !self.contains(*i)))
    }

    /// All nonempty subsets of {1..ell}, ordered by bitmask value. The
    /// order is part of the deterministic guess enumeration downstream.
    pub fn nonempty_subsets(ell: usize) -> Vec<IndexSet> {
        assert!(ell <= 16);
        (1u32..(1 << ell))
            .map(|mask| IndexSet::new((1..=ell).filter(|i| mask >> (i - 1) & 1 == 1)))
            .collect()
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, m) in self.members.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// The inputs of all ell senders, indexed 1..=ell.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct StringTuple {
    entries: Vec<BitString>,
}

impl StringTuple {
    pub fn new(entries: Vec<BitString>) -> Self {
        StringTuple { entries }
    }

    pub fn ell(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, sender: usize) -> Result<&BitString, BitsError> {
        if sender == 0 || sender > self.entries.len() {
            return Err(BitsError::BadSenderIndex {
                ell: self.entries.len(),
                index: sender,
            });
        }
        Ok(&self.entries[sender - 1])
    }

    pub fn entries(&self) -> &[BitString] {
        &self.entries
    }

    /// Framed concatenation of the components at `set`, ascending.
    pub fn project(&self, set: &IndexSet) -> Result<BitString, BitsError> {
        set.validate(self.ell())?;
        let parts: Vec<BitString> = set.iter().map(|i| self.entries[i - 1].clone()).collect();
        concat_framed(&parts)
    }

    pub fn components(&self, set: &IndexSet) -> Result<Vec<BitString>, BitsError> {
        set.validate(self.ell())?;
        Ok(set.iter().map(|i| self.entries[i - 1].clone()).collect())
    }
}

/// Map from nonempty index sets to description-system values; the
/// complexity profile of a tuple.
pub type ProfileValues = BTreeMap<IndexSet, u32>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn framing_identity_and_forced_layouts() {
        // [] -> empty string.
        assert_eq!(concat_framed(&[]).unwrap(), BitString::zeros(0));

        // ["1"] -> header value 1 then the bit, 33 bits total.
        let f = concat_framed(&[bs("1")]).unwrap();
        assert_eq!(f.len(), 33);
        assert_eq!(f.slice(0, 32).as_u128(), 1);
        assert!(f.get(32));

        // ["10", "0"] -> header 2, bits 10, header 1, bit 0: 67 bits.
        let f = concat_framed(&[bs("10"), bs("0")]).unwrap();
        assert_eq!(f.len(), 67);
        assert_eq!(f.slice(0, 32).as_u128(), 2);
        assert_eq!(f.slice(32, 2), bs("10"));
        assert_eq!(f.slice(34, 32).as_u128(), 1);
        assert!(!f.get(66));
    }

    #[test]
    fn as_integer_examples() {
        assert_eq!(bs("0000").as_u128(), 0);
        assert_eq!(bs("1101").as_u128(), 13);
        assert_eq!(bs("").as_u128(), 0);
    }

    #[test]
    fn mod_matches_value_for_long_strings() {
        let mut s = BitString::zeros(200);
        s.set(0, true); // 2^199
        s.set(199, true); // +1
        // 2^199 + 1 mod 7: 2^199 mod 7 = 2^(199 mod 3) = 2^1 = 2, so 3.
        assert_eq!(s.mod_u64(7), 3);
        assert_eq!(bs("1101").mod_u64(5), 3);
    }

    #[test]
    fn framing_round_trip_smoke() {
        let parts = vec![bs(""), bs("1"), bs("0110"), BitString::from_u128(0xdead, 16)];
        let framed = concat_framed(&parts).unwrap();
        assert_eq!(decode_framed(&framed).unwrap(), parts);
    }

    #[test]
    fn truncated_framing_rejected() {
        let f = concat_framed(&[bs("101")]).unwrap();
        let cut = f.prefix(f.len() - 1);
        assert!(matches!(
            decode_framed(&cut),
            Err(BitsError::FramingTruncated(_))
        ));
    }

    #[test]
    fn index_set_basics() {
        let v = IndexSet::new([3, 1, 3]);
        assert_eq!(v.to_string(), "{1,3}");
        assert!(v.is_subset(&IndexSet::full(3)));
        assert_eq!(v.complement(3), IndexSet::new([2]));
        assert_eq!(IndexSet::nonempty_subsets(2).len(), 3);
        assert!(v.validate(2).is_err());
    }

    #[test]
    fn projection_is_ascending_and_framed() {
        let t = StringTuple::new(vec![bs("10"), bs("0"), bs("111")]);
        let p = t.project(&IndexSet::new([3, 1])).unwrap();
        assert_eq!(p, concat_framed(&[bs("10"), bs("111")]).unwrap());
    }

    #[test]
    fn slice_prefix_xor_dot() {
        let a = bs("10110");
        assert_eq!(a.prefix(3), bs("101"));
        assert_eq!(a.slice(1, 3), bs("011"));
        assert_eq!(a.xor(&bs("11011")), bs("01101"));
        assert!(bs("110").dot(&bs("101"))); // 1&1 ^ 1&0 ^ 0&1 = 1
        assert!(!bs("110").dot(&bs("001"))); // 0 ^ 0 ^ 0

    }
}
