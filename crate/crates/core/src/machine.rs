//! The toy description system: a fixed computable machine standing in
//! for conditional Kolmogorov complexity.
//!
//! A program is a 2-bit opcode followed by a body:
//!
//! - `00` LITERAL: output = body.
//! - `01` COPY-XOR: body = component index (8) + flip count c (8) +
//!   c positions (16 each, MSB-first, 0-based). Output = the indexed
//!   framed component of the condition with the listed bits flipped.
//! - `10` SPLICE: body = component index (8) + cut position (16) +
//!   suffix literal (rest). Output = component prefix up to cut, then
//!   the suffix.
//! - `11`: reserved, invalid.
//!
//! A program's length is 2 + |body|. The condition string is a framed
//! tuple; with an empty (or malformed) condition the indexed opcodes
//! are invalid and LITERAL is the only route, so unconditional values
//! sit at |x| + 2 — random strings are incompressible here, as they
//! should be. Complexity values are exact minima over all programs of
//! bounded length; enumeration order is (length, lexicographic value),
//! which fixes every downstream tie-break.

use std::collections::{BTreeMap, HashSet};

use crate::bits::{concat_framed, decode_framed, BitString, IndexSet, StringTuple};

/// Bounded program search: values are exact minima over programs of
/// length <= l_max. step_cap is a safety valve for run lengths (all
/// opcodes are linear time, so it only guards pathological sizes).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DescriptionSystem {
    pub l_max: u32,
    pub step_cap: u64,
}

impl DescriptionSystem {
    pub fn new(l_max: u32) -> Self {
        DescriptionSystem {
            l_max,
            step_cap: 1 << 24,
        }
    }

    /// The default search depth for a target of `len` bits: LITERAL
    /// always fits, so minima below `len + 2` are exact.
    pub fn auto_for(len: usize) -> Self {
        DescriptionSystem::new(len as u32 + 2)
    }

    pub fn version(&self) -> &'static str {
        crate::MACHINE_VERSION
    }
}

const OP_LITERAL: u8 = 0b00;
const OP_COPY_XOR: u8 = 0b01;
const OP_SPLICE: u8 = 0b10;

/// Parse a framed condition into components. Malformed framing leaves
/// the indexed opcodes with nothing to address, same as an empty
/// condition.
pub fn condition_components(condition: &BitString) -> Vec<BitString> {
    decode_framed(condition).unwrap_or_default()
}

/// Execute one program against a framed condition. `None` is the
/// Invalid value, not a failure.
pub fn run_program(program: &BitString, condition: &BitString) -> Option<BitString> {
    run_with_components(program, &condition_components(condition))
}

/// Execution against pre-parsed components (the enumeration hot path).
pub fn run_with_components(program: &BitString, components: &[BitString]) -> Option<BitString> {
    if program.len() < 2 {
        return None;
    }
    let opcode = (program.get(0) as u8) << 1 | program.get(1) as u8;
    let body_len = program.len() - 2;
    match opcode {
        OP_LITERAL => Some(program.slice(2, body_len)),
        OP_COPY_XOR => {
            if body_len < 16 {
                return None;
            }
            let index = program.slice(2, 8).as_u128() as usize;
            let count = program.slice(10, 8).as_u128() as usize;
            if body_len != 16 + 16 * count {
                return None;
            }
            let component = components.get(index)?;
            let mut out = component.clone();
            for i in 0..count {
                let pos = program.slice(18 + 16 * i, 16).as_u128() as usize;
                if pos >= out.len() {
                    return None;
                }
                out.flip(pos);
            }
            Some(out)
        }
        OP_SPLICE => {
            if body_len < 24 {
                return None;
            }
            let index = program.slice(2, 8).as_u128() as usize;
            let cut = program.slice(10, 16).as_u128() as usize;
            let component = components.get(index)?;
            if cut > component.len() {
                return None;
            }
            let suffix = program.slice(26, body_len - 24);
            Some(component.prefix(cut).concat(&suffix))
        }
        _ => None,
    }
}

/// Exact conditional complexity: the least program length (2 + |body|)
/// producing `x` from `condition`, over programs of length <= l_max.
/// `None` means no program of that length exists (impossible once
/// l_max >= |x| + 2).
///
/// The minimum is computed per opcode family in closed form; the
/// exhaustive program-search oracle in the tests pins this down.
pub fn complexity(x: &BitString, condition: &BitString, sys: &DescriptionSystem) -> Option<u32> {
    let components = condition_components(condition);
    complexity_with_components(x, &components, sys)
}

pub fn complexity_with_components(
    x: &BitString,
    components: &[BitString],
    sys: &DescriptionSystem,
) -> Option<u32> {
    let mut best: Option<u32> = None;
    let mut consider = |len: u32| {
        if len <= sys.l_max && best.is_none_or(|b| len < b) {
            best = Some(len);
        }
    };

    // LITERAL
    consider(x.len() as u32 + 2);

    for comp in components.iter().take(256) {
        // COPY-XOR: same length, flip the differing positions
        if comp.len() == x.len() && x.len() <= (1 << 16) {
            let flips = x.xor(comp).count_ones();
            if flips <= 255 {
                consider(2 + 16 + 16 * flips as u32);
            }
        }
        // SPLICE: longest common prefix, suffix literal for the rest
        let lcp = x
            .iter()
            .zip(comp.iter())
            .take_while(|(a, b)| a == b)
            .count()
            .min(1 << 16)
            .min(x.len());
        consider(2 + 24 + (x.len() - lcp) as u32);
    }
    best
}

/// Unconditional-friendly helper: cap at |x| + 2 so a value always
/// exists.
pub fn complexity_auto(x: &BitString, condition: &BitString) -> u32 {
    complexity(x, condition, &DescriptionSystem::auto_for(x.len()))
        .expect("LITERAL bounds the search")
}

// ---------------------------------------------------------------------------
// Set enumeration
// ---------------------------------------------------------------------------

/// One step of [`SetEnumerator::pump`]: a single program execution.
#[derive(Debug, PartialEq, Eq)]
pub enum Pump {
    /// program ran; nothing new produced
    Step,
    /// a new member of the set was produced
    Produced(BitString),
    /// the program space up to the bound is exhausted
    Exhausted,
}

/// Deterministic stream of the set {x of target length :
/// complexity(x | condition) <= bound}, in first-production order of a
/// (length, lexicographic) sweep over programs.
///
/// The sweep is clamped at target length + 2: every target-length
/// string is produced by a LITERAL of that length, and any longer
/// program's output already appeared earlier in the order, so neither
/// the set nor the production order changes.
pub struct SetEnumerator {
    components: Vec<BitString>,
    target_len: usize,
    cap: u32,
    // current program: length and lexicographic value of opcode+body
    cur_len: u32,
    cur_value: u128,
    seen: HashSet<BitString>,
    steps: u64,
    done: bool,
}

impl SetEnumerator {
    pub fn new(condition: &BitString, bound: u32, target_len: usize) -> Self {
        assert!(target_len <= 120, "program counters are 128-bit");
        let cap = bound.min(target_len as u32 + 2);
        SetEnumerator {
            components: condition_components(condition),
            target_len,
            cap,
            cur_len: 2,
            cur_value: 0,
            seen: HashSet::new(),
            steps: 0,
            done: cap < 2,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Run the next program in order. Lexicographic order over the
    /// whole program string visits opcode blocks 00, 01, 10, 11 in
    /// order within each length.
    ///
    /// Programs that cannot possibly emit a target-length output
    /// (wrong literal length, malformed bodies, out-of-range indices)
    /// are recognized from the counter alone and skipped without being
    /// materialized; they still count as one executed step, so budgets
    /// and fairness see the same numbers either way.
    pub fn pump(&mut self) -> Pump {
        if self.done {
            return Pump::Exhausted;
        }
        let len = self.cur_len as usize;
        let value = self.cur_value;
        self.steps += 1;

        // advance the cursor
        let last_value = self.cur_len >= 128 || self.cur_value + 1 == (1u128 << self.cur_len);
        if last_value {
            self.cur_value = 0;
            self.cur_len += 1;
            if self.cur_len > self.cap {
                self.done = true;
            }
        } else {
            self.cur_value += 1;
        }

        let body_len = len - 2;
        let opcode = (value >> body_len) as u8 & 0b11;
        let runnable = match opcode {
            OP_LITERAL => body_len == self.target_len,
            OP_COPY_XOR => {
                body_len >= 16 && {
                    let idx = ((value >> (body_len - 8)) & 0xff) as usize;
                    match self.components.get(idx) {
                        Some(c) if c.len() == self.target_len => {
                            let count = ((value >> (body_len - 16)) & 0xff) as usize;
                            body_len == 16 + 16 * count
                        }
                        _ => false,
                    }
                }
            }
            OP_SPLICE => {
                body_len >= 24 && {
                    let idx = ((value >> (body_len - 8)) & 0xff) as usize;
                    match self.components.get(idx) {
                        Some(c) => {
                            let cut = ((value >> (body_len - 24)) & 0xffff) as usize;
                            cut <= c.len() && cut + (body_len - 24) == self.target_len
                        }
                        None => false,
                    }
                }
            }
            _ => false,
        };
        if runnable {
            let program = BitString::from_u128(value, len);
            if let Some(x) = run_with_components(&program, &self.components) {
                debug_assert_eq!(x.len(), self.target_len);
                if self.seen.insert(x.clone()) {
                    return Pump::Produced(x);
                }
            }
        }
        Pump::Step
    }
}

impl Iterator for SetEnumerator {
    type Item = BitString;

    fn next(&mut self) -> Option<BitString> {
        loop {
            match self.pump() {
                Pump::Produced(x) => return Some(x),
                Pump::Step => continue,
                Pump::Exhausted => return None,
            }
        }
    }
}

pub fn enumerate_set(condition: &BitString, bound: u32, target_len: usize) -> SetEnumerator {
    SetEnumerator::new(condition, bound, target_len)
}

// ---------------------------------------------------------------------------
// Complexity profiles
// ---------------------------------------------------------------------------

/// The tuple of unconditional complexities of every nonempty projection
/// of the inputs, under this machine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComplexityProfile {
    pub ell: usize,
    pub values: BTreeMap<IndexSet, u32>,
}

impl ComplexityProfile {
    pub fn get(&self, set: &IndexSet) -> u32 {
        self.values[set]
    }

    /// Framing slack used by the monotonicity invariant and the guess
    /// pruning: 2 * ell * 32 header bits.
    pub fn framing_slack(ell: usize) -> u32 {
        2 * ell as u32 * 32
    }

    /// V subset of W implies values[V] <= values[W] + slack.
    pub fn is_monotone(&self) -> bool {
        let slack = Self::framing_slack(self.ell);
        self.values.iter().all(|(v, &cv)| {
            self.values
                .iter()
                .all(|(w, &cw)| !v.is_subset(w) || cv <= cw + slack)
        })
    }

    pub fn digest(&self) -> u64 {
        let mut bytes = Vec::new();
        for (set, value) in &self.values {
            for m in set.iter() {
                bytes.push(m as u8);
            }
            bytes.push(0xff);
            bytes.extend_from_slice(&value.to_be_bytes());
        }
        crate::fnv1a64(&bytes)
    }
}

/// Profile of a tuple: values[V] = complexity of the framed projection
/// at V with an empty condition.
pub fn profile(tuple: &StringTuple) -> ComplexityProfile {
    let ell = tuple.ell();
    let empty = concat_framed(&[]).expect("empty framing");
    let mut values = BTreeMap::new();
    for set in IndexSet::nonempty_subsets(ell) {
        let projected = tuple.project(&set).expect("valid projection");
        let sys = DescriptionSystem::auto_for(projected.len());
        let c = complexity(&projected, &empty, &sys).expect("LITERAL bound");
        values.insert(set, c);
    }
    ComplexityProfile { ell, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bs;

    fn framed(parts: &[BitString]) -> BitString {
        concat_framed(parts).unwrap()
    }

    #[test]
    fn literal_runs() {
        let p = bs("00").concat(&bs("1011"));
        assert_eq!(run_program(&p, &BitString::zeros(0)), Some(bs("1011")));
        assert_eq!(run_program(&bs("00"), &BitString::zeros(0)), Some(bs("")));
    }

    #[test]
    fn copy_xor_identity_and_flips() {
        // index 0, zero flips: copies the component
        let cond = framed(&[bs("0110")]);
        let p = bs("01")
            .concat(&BitString::from_u128(0, 8))
            .concat(&BitString::from_u128(0, 8));
        assert_eq!(run_program(&p, &cond), Some(bs("0110")));

        // flips {1,3} on an 8-bit zero component, MSB-first 0-based:
        // hand-executed, bits 1 and 3 raise -> 01010000
        let cond = framed(&[bs("00000000")]);
        let p = bs("01")
            .concat(&BitString::from_u128(0, 8))
            .concat(&BitString::from_u128(2, 8))
            .concat(&BitString::from_u128(1, 16))
            .concat(&BitString::from_u128(3, 16));
        assert_eq!(run_program(&p, &cond), Some(bs("01010000")));
    }

    #[test]
    fn copy_xor_invalid_cases() {
        let cond = framed(&[bs("0110")]);
        // index out of range
        let p = bs("01")
            .concat(&BitString::from_u128(1, 8))
            .concat(&BitString::from_u128(0, 8));
        assert_eq!(run_program(&p, &cond), None);
        // position out of range
        let p = bs("01")
            .concat(&BitString::from_u128(0, 8))
            .concat(&BitString::from_u128(1, 8))
            .concat(&BitString::from_u128(9, 16));
        assert_eq!(run_program(&p, &cond), None);
        // body length disagrees with the count field
        let p = bs("01")
            .concat(&BitString::from_u128(0, 8))
            .concat(&BitString::from_u128(1, 8))
            .concat(&BitString::from_u128(1, 8));
        assert_eq!(run_program(&p, &cond), None);
        // no components at all (empty condition)
        let p = bs("01")
            .concat(&BitString::from_u128(0, 8))
            .concat(&BitString::from_u128(0, 8));
        assert_eq!(run_program(&p, &BitString::zeros(0)), None);
    }

    #[test]
    fn splice_prefix_plus_suffix() {
        let cond = framed(&[bs("110100")]);
        // cut 3, suffix "01"
        let p = bs("10")
            .concat(&BitString::from_u128(0, 8))
            .concat(&BitString::from_u128(3, 16))
            .concat(&bs("01"));
        assert_eq!(run_program(&p, &cond), Some(bs("11001")));
        // cut beyond the component is invalid
        let p = bs("10")
            .concat(&BitString::from_u128(0, 8))
            .concat(&BitString::from_u128(7, 16));
        assert_eq!(run_program(&p, &cond), None);
    }

    #[test]
    fn reserved_opcode_invalid() {
        let p = bs("11").concat(&bs("0000"));
        assert_eq!(run_program(&p, &BitString::zeros(0)), None);
    }

    /// Exhaustive oracle: sweep every program up to `cap` in the same
    /// order and record the first (= shortest) producer of x.
    fn oracle_complexity(x: &BitString, condition: &BitString, cap: u32) -> Option<u32> {
        let components = condition_components(condition);
        for len in 2..=cap {
            let total = 1u128 << len;
            for v in 0..total {
                let p = BitString::from_u128(v, len as usize);
                if run_with_components(&p, &components).as_ref() == Some(x) {
                    return Some(len);
                }
            }
        }
        None
    }

    #[test]
    fn complexity_matches_exhaustive_oracle() {
        let sys = DescriptionSystem::new(14);
        let conditions = [
            BitString::zeros(0),
            framed(&[bs("0110")]),
            framed(&[bs("10"), bs("0111011")]),
        ];
        for cond in &conditions {
            for n in 0..=6usize {
                for v in 0..(1u128 << n) {
                    let x = BitString::from_u128(v, n);
                    assert_eq!(
                        complexity(&x, cond, &sys),
                        oracle_complexity(&x, cond, 14),
                        "x={x} cond={cond}"
                    );
                }
            }
        }
    }

    #[test]
    fn complexity_witness_bounds() {
        // LITERAL bound
        let x = bs("1011001110001011");
        assert_eq!(complexity_auto(&x, &BitString::zeros(0)), 18);
        // equal to a condition component: zero-flip COPY-XOR ties LITERAL at n=16
        let cond = framed(std::slice::from_ref(&x));
        assert_eq!(complexity_auto(&x, &cond), 18);
        // at n=64 a single flip is cheaper than LITERAL: 2+16+16 = 34 < 66
        let long = BitString::from_u128(0xDEAD_BEEF_DEAD_BEEF, 64);
        let mut flipped = long.clone();
        flipped.flip(13);
        let cond = framed(&[long]);
        assert_eq!(complexity_auto(&flipped, &cond), 34);
        // two flips at n=16: the exhaustive-order minimum is LITERAL
        // (18), not COPY-XOR (50)
        let base = bs("1010101010101010");
        let mut two = base.clone();
        two.flip(1);
        two.flip(5);
        assert_eq!(complexity_auto(&two, &framed(&[base])), 18);
    }

    #[test]
    fn complexity_infinity_below_literal() {
        let sys = DescriptionSystem::new(4);
        assert_eq!(complexity(&bs("10110"), &BitString::zeros(0), &sys), None);
    }

    #[test]
    fn appending_condition_components_never_hurts() {
        let sys = DescriptionSystem::new(40);
        let x = bs("110010");
        let b = framed(&[bs("110011")]);
        let b_more = framed(&[bs("110011"), bs("0101")]);
        let c1 = complexity(&x, &b, &sys);
        let c2 = complexity(&x, &b_more, &sys);
        assert!(c2 <= c1);
    }

    #[test]
    fn enumerate_empty_below_minimum() {
        let mut e = enumerate_set(&BitString::zeros(0), 1, 4);
        assert_eq!(e.pump(), Pump::Exhausted);
    }

    #[test]
    fn enumerate_contains_copy_witness() {
        let cond = framed(&[bs("011011")]);
        let found: Vec<BitString> = enumerate_set(&cond, 18, 6).collect();
        assert!(found.contains(&bs("011011")));
        let set: HashSet<BitString> = found.into_iter().collect();
        assert_eq!(set.len(), 1 << 6);
    }

    #[test]
    fn enumerate_equals_bruteforce_filter() {
        let cond = framed(&[bs("01101")]);
        for n in 0..=6usize {
            for bound in 0..=12u32 {
                let stream: HashSet<BitString> = enumerate_set(&cond, bound, n).collect();
                let sys = DescriptionSystem::new(bound);
                let filter: HashSet<BitString> = (0..(1u128 << n))
                    .map(|v| BitString::from_u128(v, n))
                    .filter(|x| complexity(x, &cond, &sys).is_some())
                    .collect();
                assert_eq!(stream, filter, "n={n} bound={bound}");
            }
        }
    }

    #[test]
    fn enumerate_prefix_stable() {
        let cond = framed(&[bs("0110")]);
        for bound in 2..=10u32 {
            let shorter: Vec<BitString> = enumerate_set(&cond, bound, 4).collect();
            let sys = DescriptionSystem::new(bound);
            let longer_restricted: Vec<BitString> = enumerate_set(&cond, bound + 1, 4)
                .filter(|x| complexity(x, &cond, &sys).is_some())
                .collect();
            assert_eq!(shorter, longer_restricted, "bound={bound}");
        }
    }

    #[test]
    fn counting_bound_exhaustive() {
        // |{x : complexity(x, b) <= m}| < 2^(m+1), over all output lengths
        let cond = framed(&[bs("110")]);
        for m in 2..=14u32 {
            let mut distinct: HashSet<BitString> = HashSet::new();
            for target in 0..=(m as usize) {
                distinct.extend(enumerate_set(&cond, m, target));
            }
            assert!(
                (distinct.len() as u64) < (1u64 << (m + 1)),
                "m={m}: {}",
                distinct.len()
            );
        }
    }

    #[test]
    fn profile_values_and_monotonicity() {
        let t = StringTuple::new(vec![bs("1010101010101010"), bs("1010101010101011")]);
        let p = profile(&t);
        // framed singleton: 32 + 16 + 2
        assert_eq!(p.get(&IndexSet::new([1])), 50);
        assert_eq!(p.get(&IndexSet::new([2])), 50);
        // framed pair: 2*(32+16) + 2
        assert_eq!(p.get(&IndexSet::new([1, 2])), 98);
        assert!(p.is_monotone());
        assert_eq!(p.values.len(), 3);
    }
}
