//! The distributed codec: per-sender graphs, encoding, the
//! complexity-approximation recursion, rate validation, and decoding
//! with or without knowledge of the input's complexity profile.
//!
//! A sender's message is a random right neighbor of its input in that
//! sender's graph, plus a prime fingerprint of the input. The decoder
//! reconstructs inputs in sender order: at step k it enumerates the
//! candidate set {x : C(x | recovered prefix, later messages) <= bound}
//! and returns the first candidate adjacent to the received node.
//! Without the profile it dovetails that procedure over every profile
//! guess and lets the fingerprints pick the surviving run.
//!
//! Desk-scale sender graphs split a keyed random-table extractor with
//! 2^floor(gamma/3) primes and a seed space of the remaining gamma
//! bits, so the total left degree is 2^gamma and the right label is
//! exactly n_hat + gamma bits.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::bits::{concat_framed, BitString, BitsError, IndexSet, StringTuple};
use crate::extractor::{Rat, RandomTableExtractor};
use crate::graph::{
    transform_with_prime_count, BipartiteGraph, ExtractorGraph, GraphError, LabelWidth,
    TransformedGraph,
};
use crate::machine::{
    complexity, complexity_auto, ComplexityProfile, DescriptionSystem, Pump, SetEnumerator,
};
use crate::primes::{first_primes, PrimeError, PRIME_COUNT_GUARD};
use crate::schedule::{Schedule, SenderParams};

/// Complexity of the empty framed tuple: the two-bit LITERAL program.
pub const EMPTY_TUPLE_COMPLEXITY: u32 = 2;

/// Fingerprint list sizing: t = (1/delta_fp) * s_profile * n with
/// delta_fp = 1/4, saturating at the prime-table guard.
const FP_DELTA_INV: u128 = 4;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("schedule has no sender {0}")]
    UnknownSender(usize),
    #[error("input length {got} does not match schedule n {expected}")]
    InputLength { expected: u32, got: usize },
    #[error("expected {expected} messages, got {got}")]
    MessageCount { expected: usize, got: usize },
    #[error("messages must carry senders 1..=ell exactly once")]
    SenderSetMismatch,
    #[error("message digest {got:#018x} does not match schedule {expected:#018x}")]
    DigestMismatch { expected: u64, got: u64 },
    #[error("message fields disagree with the schedule (sender {0})")]
    InconsistentMessage(usize),
    #[error("bad magic or truncated message")]
    Malformed,
    #[error("sender {k}: gamma {gamma} unusable for a graph (need 3 <= gamma <= 36)")]
    GammaBudget { k: usize, gamma: u64 },
    #[error("sender {k}: n_hat {n_hat} too wide for a desk-scale graph")]
    WidthBudget { k: usize, n_hat: u64 },
    #[error("reconstruction failed at step {k} after {steps} enumeration steps")]
    StepFailed { k: usize, steps: u64 },
    #[error("reconstructed component {k} violates its message fingerprint")]
    FingerprintMismatch { k: usize },
    #[error("enumeration budget exhausted after {steps} steps")]
    Budget { steps: u64 },
    #[error("every profile guess failed within budget ({steps} steps)")]
    AllGuessesFailed { steps: u64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Prime(#[from] PrimeError),
    #[error(transparent)]
    Bits(#[from] BitsError),
}

// ---------------------------------------------------------------------------
// Sender graphs
// ---------------------------------------------------------------------------

pub type SenderGraph = TransformedGraph<ExtractorGraph<RandomTableExtractor>>;

/// Deterministic per-sender graph from (n, n_hat, delta, gamma) and the
/// machine version: encoder and decoder construct identical graphs
/// without exchanging descriptions.
pub fn build_sender_graph(
    n: u32,
    k: usize,
    params: &SenderParams,
) -> Result<SenderGraph, CodecError> {
    let gamma = params.gamma;
    if !(3..=36).contains(&gamma) {
        return Err(CodecError::GammaBudget { k, gamma });
    }
    if params.n_hat > 1 << 12 {
        return Err(CodecError::WidthBudget { k, n_hat: params.n_hat });
    }
    let prime_bits = (gamma / 3) as u32;
    let seed_bits = (gamma - prime_bits as u64) as usize;
    let mut seed_bytes = Vec::new();
    seed_bytes.extend_from_slice(b"ksw-graph-v1");
    seed_bytes.extend_from_slice(crate::MACHINE_VERSION.as_bytes());
    for v in [n as u64, params.n_hat, params.delta_log2, gamma] {
        seed_bytes.extend_from_slice(&v.to_be_bytes());
    }
    let prg_seed = crate::fnv1a64(&seed_bytes);
    let epsilon = Rat::new(1, 1i128 << params.delta_log2.min(62) as u32);
    let family = RandomTableExtractor::new(
        n as usize,
        seed_bits,
        params.n_hat as usize,
        prg_seed,
        epsilon,
    );
    let graph = transform_with_prime_count(
        ExtractorGraph::new(family),
        1u128 << prime_bits,
        params.delta_log2.min(63) as u32,
        LabelWidth::Total((params.n_hat + gamma) as u32),
    )?;
    debug_assert_eq!(graph.right_bits() as u64, params.n_hat + gamma);
    Ok(graph)
}

// ---------------------------------------------------------------------------
// Messages
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 4] = b"KSW1";

/// One sender's output: the chosen right node of its graph plus a
/// prime fingerprint of the input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedMessage {
    pub sender: u8,
    pub n: u16,
    pub n_k: u16,
    pub schedule_digest: u64,
    pub p: BitString,
    pub fp_prime_index: u32,
    pub fp_residue: u64,
}

impl EncodedMessage {
    /// Payload bits counted against the rate: |p| plus the fingerprint
    /// fields (32-bit index + 64-bit residue). The envelope header is
    /// not counted.
    pub fn payload_bits(&self) -> u64 {
        self.p.len() as u64 + 96
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(self.sender);
        out.extend_from_slice(&self.n.to_be_bytes());
        out.extend_from_slice(&self.n_k.to_be_bytes());
        out.extend_from_slice(&self.schedule_digest.to_be_bytes());
        self.p.write_binary(&mut out).expect("bounded label");
        out.extend_from_slice(&self.fp_prime_index.to_be_bytes());
        out.extend_from_slice(&self.fp_residue.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < 17 || &bytes[0..4] != MAGIC {
            return Err(CodecError::Malformed);
        }
        let sender = bytes[4];
        let n = u16::from_be_bytes(bytes[5..7].try_into().unwrap());
        let n_k = u16::from_be_bytes(bytes[7..9].try_into().unwrap());
        let schedule_digest = u64::from_be_bytes(bytes[9..17].try_into().unwrap());
        let (p, rest) = BitString::read_binary(&bytes[17..]).map_err(|_| CodecError::Malformed)?;
        if rest.len() != 12 {
            return Err(CodecError::Malformed);
        }
        let fp_prime_index = u32::from_be_bytes(rest[0..4].try_into().unwrap());
        let fp_residue = u64::from_be_bytes(rest[4..12].try_into().unwrap());
        Ok(EncodedMessage {
            sender,
            n,
            n_k,
            schedule_digest,
            p,
            fp_prime_index,
            fp_residue,
        })
    }
}

// ---------------------------------------------------------------------------
// Approximation recursion
// ---------------------------------------------------------------------------

/// Approximations A(x_V, p_{suffix..ell}) for every suffix start and
/// every V inside the recovered prefix. Computed from the profile and
/// the schedule alone: iteration k defines the values at suffix k from
/// those at suffix k+1 by a case split on whether sender k's input
/// looks low-complexity given V.
#[derive(Clone, Debug)]
pub struct ApproxTable {
    ell: usize,
    /// values[suffix - 1][mask]; suffix in 1..=ell+1, mask over senders
    values: Vec<Vec<i64>>,
}

/// Table from raw mask-indexed values (values[0] is the empty tuple).
pub fn approx_from_mask_values(mask_values: &[i64], schedule: &Schedule) -> ApproxTable {
    let ell = schedule.ell;
    let size = 1usize << ell;
    assert_eq!(mask_values.len(), size);
    let mut values = vec![vec![0i64; size]; ell + 1];
    values[ell] = mask_values.to_vec();
    let slack = schedule.slack_term() as i64;
    for k in (1..=ell).rev() {
        let params = schedule.sender(k);
        let threshold =
            params.n_k as i64 + 8 * schedule.gamma_after(k) as i64 + slack;
        let bit = 1usize << (k - 1);
        for mask in 0..bit {
            let with_k = values[k][mask | bit];
            let without = values[k][mask];
            values[k - 1][mask] = if with_k - without <= threshold {
                with_k
            } else {
                without + params.n_k as i64 + params.eta as i64
            };
        }
    }
    ApproxTable { ell, values }
}

/// Table from a complexity profile. The messages themselves never
/// enter: the recursion reads only the profile and the schedule.
pub fn approx_complexities(profile: &ComplexityProfile, schedule: &Schedule) -> ApproxTable {
    let ell = schedule.ell;
    assert_eq!(profile.ell, ell);
    let mut mask_values = vec![EMPTY_TUPLE_COMPLEXITY as i64; 1 << ell];
    for (set, &v) in &profile.values {
        let mut mask = 0usize;
        for i in set.iter() {
            mask |= 1 << (i - 1);
        }
        mask_values[mask] = v as i64;
    }
    approx_from_mask_values(&mask_values, schedule)
}

impl ApproxTable {
    /// A(x_V, p_{suffix..ell}); V must sit inside [suffix-1].
    pub fn a_value(&self, suffix_start: usize, set: &IndexSet) -> i64 {
        assert!(suffix_start >= 1 && suffix_start <= self.ell + 1);
        let mut mask = 0usize;
        for i in set.iter() {
            assert!(i < suffix_start, "V must precede the suffix");
            mask |= 1 << (i - 1);
        }
        self.values[suffix_start - 1][mask]
    }

    /// The step-k candidate bound before clamping:
    /// A(x_k | x_[k-1], p_[k+1..]) + 8 gamma_{k+1} + slack, with the
    /// conditional value taken by the difference formula.
    pub fn step_bound(&self, k: usize, schedule: &Schedule) -> i64 {
        let full = (1usize << k) - 1;
        let prefix = (1usize << (k - 1)) - 1;
        let conditional = self.values[k][full] - self.values[k][prefix];
        conditional + 8 * schedule.gamma_after(k) as i64 + schedule.slack_term() as i64
    }
}

// ---------------------------------------------------------------------------
// Rate validation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RateViolation {
    pub set: IndexSet,
    pub conditional_complexity: u32,
    pub rate_sum: u64,
}

/// Check C(x_V | x_complement) <= sum of rates over V for every
/// nonempty V. Singleton targets are the raw strings; larger V use the
/// framed projection (the framing headers are part of what a decoder
/// must pin down for a joint target).
pub fn validate_rates(tuple: &StringTuple, targets: &[u32]) -> Result<Vec<RateViolation>, CodecError> {
    let ell = tuple.ell();
    assert_eq!(targets.len(), ell);
    let mut violations = Vec::new();
    for set in IndexSet::nonempty_subsets(ell) {
        let condition = tuple.project(&set.complement(ell))?;
        let lhs = if set.len() == 1 {
            let i = set.iter().next().unwrap();
            complexity_auto(tuple.get(i)?, &condition)
        } else {
            complexity_auto(&tuple.project(&set)?, &condition)
        };
        let rate_sum: u64 = set.iter().map(|i| targets[i - 1] as u64).sum();
        if lhs as u64 > rate_sum {
            violations.push(RateViolation {
                set,
                conditional_complexity: lhs,
                rate_sum,
            });
        }
    }
    Ok(violations)
}

// ---------------------------------------------------------------------------
// Reconstruction primitives
// ---------------------------------------------------------------------------

/// Enumerate {x : C(x | b) <= bound} and return the first member
/// adjacent to the received node, with the number of program
/// executions spent. Used in the small regime, where the winner is
/// unique with high probability.
pub fn reconstruct_low<G: BipartiteGraph + ?Sized>(
    graph: &G,
    b: &BitString,
    p: &BitString,
    bound: u32,
    target_len: usize,
    budget: u64,
) -> (Option<BitString>, u64) {
    let mut e = SetEnumerator::new(b, bound, target_len);
    loop {
        if e.steps() >= budget {
            return (None, e.steps());
        }
        match e.pump() {
            Pump::Produced(x) => {
                if graph.is_adjacent(&x, p) {
                    let steps = e.steps();
                    return (Some(x), steps);
                }
            }
            Pump::Step => {}
            Pump::Exhausted => return (None, e.steps()),
        }
    }
}

/// High-complexity variant: collect p's neighbors in discovery order
/// and return the one at the rank named by `rank_hint` (an index
/// string, MSB-first). None when the stream holds fewer neighbors.
pub fn reconstruct_high<G: BipartiteGraph + ?Sized>(
    graph: &G,
    b: &BitString,
    p: &BitString,
    bound: u32,
    target_len: usize,
    rank_hint: &BitString,
    budget: u64,
) -> (Option<BitString>, u64) {
    let rank = rank_hint.as_u128();
    let mut e = SetEnumerator::new(b, bound, target_len);
    let mut seen: u128 = 0;
    loop {
        if e.steps() >= budget {
            return (None, e.steps());
        }
        match e.pump() {
            Pump::Produced(x) => {
                if graph.is_adjacent(&x, p) {
                    if seen == rank {
                        let steps = e.steps();
                        return (Some(x), steps);
                    }
                    seen += 1;
                }
            }
            Pump::Step => {}
            Pump::Exhausted => return (None, e.steps()),
        }
    }
}

// ---------------------------------------------------------------------------
// The codec
// ---------------------------------------------------------------------------

/// How the decoder obtains its per-step candidate bounds.
pub enum BoundMode<'a> {
    /// from the approximation recursion over the given profile
    Approximated,
    /// testing mode: exact conditional complexity of the true inputs
    DirectOracle(&'a StringTuple),
}

#[derive(Clone, Debug)]
pub struct ProfileDecode {
    pub tuple: StringTuple,
    pub steps: u64,
    /// the clamped per-step bounds actually used
    pub bounds: Vec<u32>,
}

#[derive(Clone, Debug, Default)]
pub struct AnyProfileReport {
    pub guesses: u64,
    pub pruned: u64,
    pub classes: usize,
    pub class_steps: Vec<u64>,
    /// classes whose run had died (exhausted or rejected) at the end
    pub class_dead: Vec<bool>,
    pub total_steps: u64,
    pub winner_class: Option<usize>,
}

pub struct Codec {
    schedule: Schedule,
    graphs: Vec<SenderGraph>,
    fp_primes: Vec<u32>,
}

/// Number of profile guesses the wrapper sweeps: one value per
/// nonempty V in [0, |V| (n+32) + 2].
pub fn profile_guess_count(ell: usize, n: u32) -> u128 {
    let mut product: u128 = 1;
    for set in IndexSet::nonempty_subsets(ell) {
        let u = set.len() as u128 * (n as u128 + 32) + 2;
        product = product.saturating_mul(u + 1);
    }
    product
}

/// Fingerprint prime-list size: (1/delta_fp) * s_profile * n, capped
/// at the prime-table guard (the isolation margin degrades gracefully
/// past the cap; at two senders and desk n it is never reached).
pub fn fingerprint_prime_count(ell: usize, n: u32) -> u64 {
    let t = FP_DELTA_INV
        .saturating_mul(profile_guess_count(ell, n))
        .saturating_mul(n as u128);
    t.min(PRIME_COUNT_GUARD as u128) as u64
}

impl Codec {
    pub fn new(schedule: Schedule) -> Result<Self, CodecError> {
        let graphs = schedule
            .senders
            .iter()
            .enumerate()
            .map(|(i, p)| build_sender_graph(schedule.n, i + 1, p))
            .collect::<Result<Vec<_>, _>>()?;
        let t = fingerprint_prime_count(schedule.ell, schedule.n);
        let fp_primes = first_primes(t)?.into_iter().map(|q| q as u32).collect();
        Ok(Codec {
            schedule,
            graphs,
            fp_primes,
        })
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn graph(&self, k: usize) -> &SenderGraph {
        &self.graphs[k - 1]
    }

    pub fn fingerprint_primes(&self) -> usize {
        self.fp_primes.len()
    }

    fn fp_prime(&self, index: u32) -> Result<u64, CodecError> {
        self.fp_primes
            .get(index as usize)
            .map(|&q| q as u64)
            .ok_or(CodecError::Malformed)
    }

    /// Sender k's message: a uniformly random edge slot names the right
    /// node; the fingerprint prime is uniform over the first t primes.
    pub fn encode<R: Rng + ?Sized>(
        &self,
        k: usize,
        x: &BitString,
        rng: &mut R,
    ) -> Result<EncodedMessage, CodecError> {
        if k == 0 || k > self.schedule.ell {
            return Err(CodecError::UnknownSender(k));
        }
        if x.len() != self.schedule.n as usize {
            return Err(CodecError::InputLength {
                expected: self.schedule.n,
                got: x.len(),
            });
        }
        let graph = &self.graphs[k - 1];
        let slot = rng.gen_range(0..graph.degree());
        let p = graph.neighbor(x, slot);
        let fp_prime_index = rng.gen_range(0..self.fp_primes.len() as u64) as u32;
        let q = self.fp_primes[fp_prime_index as usize] as u64;
        let msg = EncodedMessage {
            sender: k as u8,
            n: self.schedule.n as u16,
            n_k: self.schedule.sender(k).n_k as u16,
            schedule_digest: self.schedule.digest(),
            p,
            fp_prime_index,
            fp_residue: x.mod_u64(q),
        };
        debug_assert_eq!(
            msg.payload_bits(),
            self.schedule.sender(k).n_k as u64 + self.schedule.alpha(k),
            "message length must match the schedule's overhead formula"
        );
        Ok(msg)
    }

    /// Messages must carry senders 1..=ell exactly once, with matching
    /// digests and field widths. Returns them in sender order.
    fn checked_messages<'a>(
        &self,
        msgs: &'a [EncodedMessage],
    ) -> Result<Vec<&'a EncodedMessage>, CodecError> {
        let ell = self.schedule.ell;
        if msgs.len() != ell {
            return Err(CodecError::MessageCount {
                expected: ell,
                got: msgs.len(),
            });
        }
        let mut ordered: Vec<Option<&EncodedMessage>> = vec![None; ell];
        for m in msgs {
            let k = m.sender as usize;
            if k == 0 || k > ell || ordered[k - 1].is_some() {
                return Err(CodecError::SenderSetMismatch);
            }
            let expected = self.schedule.digest();
            if m.schedule_digest != expected {
                return Err(CodecError::DigestMismatch {
                    expected,
                    got: m.schedule_digest,
                });
            }
            let params = self.schedule.sender(k);
            if m.n as u32 != self.schedule.n
                || m.n_k as u32 != params.n_k
                || m.p.len() != self.graphs[k - 1].right_bits() as usize
                || m.fp_prime_index as usize >= self.fp_primes.len()
            {
                return Err(CodecError::InconsistentMessage(k));
            }
            ordered[k - 1] = Some(m);
        }
        Ok(ordered.into_iter().map(|m| m.expect("checked")).collect())
    }

    fn step_condition(
        &self,
        recovered: &[BitString],
        msgs: &[&EncodedMessage],
        k: usize,
    ) -> Result<BitString, CodecError> {
        let mut parts: Vec<BitString> = recovered.to_vec();
        for m in msgs.iter().skip(k) {
            parts.push(m.p.clone());
        }
        Ok(concat_framed(&parts)?)
    }

    fn clamp_bound(&self, raw: i64) -> u32 {
        let cap = self.schedule.n + 2;
        raw.clamp(0, cap as i64) as u32
    }

    /// Decode knowing the complexity profile: reconstruct x_1..x_ell in
    /// order, each by low-regime enumeration against its message.
    pub fn decode_with_profile(
        &self,
        msgs: &[EncodedMessage],
        profile: &ComplexityProfile,
        mode: BoundMode<'_>,
        budget: u64,
    ) -> Result<ProfileDecode, CodecError> {
        let ordered = self.checked_messages(msgs)?;
        let table = approx_complexities(profile, &self.schedule);
        let n = self.schedule.n as usize;
        let mut recovered: Vec<BitString> = Vec::with_capacity(self.schedule.ell);
        let mut bounds = Vec::with_capacity(self.schedule.ell);
        let mut steps_total = 0u64;
        for k in 1..=self.schedule.ell {
            let b = self.step_condition(&recovered, &ordered, k)?;
            let bound = match &mode {
                BoundMode::Approximated => self.clamp_bound(table.step_bound(k, &self.schedule)),
                BoundMode::DirectOracle(truth) => {
                    let sys = DescriptionSystem::auto_for(n);
                    complexity(truth.get(k)?, &b, &sys).unwrap_or(n as u32 + 2)
                }
            };
            bounds.push(bound);
            let remaining = budget.saturating_sub(steps_total);
            let (found, steps) =
                reconstruct_low(&self.graphs[k - 1], &b, &ordered[k - 1].p, bound, n, remaining);
            steps_total += steps;
            match found {
                Some(x) => recovered.push(x),
                None if steps_total >= budget => {
                    return Err(CodecError::Budget { steps: steps_total })
                }
                None => return Err(CodecError::StepFailed { k, steps: steps_total }),
            }
        }
        // soundness: never return a tuple that violates a fingerprint
        for (i, (x, m)) in recovered.iter().zip(&ordered).enumerate() {
            let q = self.fp_prime(m.fp_prime_index)?;
            if x.mod_u64(q) != m.fp_residue {
                return Err(CodecError::FingerprintMismatch { k: i + 1 });
            }
        }
        Ok(ProfileDecode {
            tuple: StringTuple::new(recovered),
            steps: steps_total,
            bounds,
        })
    }

    fn fingerprints_match(
        &self,
        tuple: &[BitString],
        msgs: &[&EncodedMessage],
    ) -> Result<bool, CodecError> {
        for (x, m) in tuple.iter().zip(msgs) {
            let q = self.fp_prime(m.fp_prime_index)?;
            if x.mod_u64(q) != m.fp_residue {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The fingerprint modulus for a received prime index.
    pub fn fingerprint_prime(&self, index: u32) -> Option<u64> {
        self.fp_primes.get(index as usize).map(|&q| q as u64)
    }

    /// Decode without the profile: sweep every profile guess, dedupe
    /// guesses into behavior classes by the candidate bounds they
    /// induce, dovetail the classes round-robin one program execution
    /// at a time, and accept the first completed run whose outputs
    /// match every fingerprint.
    pub fn decode_any_profile(
        &self,
        msgs: &[EncodedMessage],
        budget: u64,
    ) -> Result<(StringTuple, AnyProfileReport), CodecError> {
        let (result, report) = self.decode_any_profile_instrumented(msgs, budget)?;
        result.map(|tuple| (tuple, report))
    }

    /// Instrumented variant: the dovetailing report (per-class step
    /// counts in arbitration order) is returned even when the run ends
    /// in budget exhaustion or all-guesses failure.
    pub fn decode_any_profile_instrumented(
        &self,
        msgs: &[EncodedMessage],
        budget: u64,
    ) -> Result<(Result<StringTuple, CodecError>, AnyProfileReport), CodecError> {
        let ordered = self.checked_messages(msgs)?;
        let ell = self.schedule.ell;
        let n = self.schedule.n;
        let slack = ComplexityProfile::framing_slack(ell) as i64;

        // guess space: one value per nonempty subset, mask-ascending
        let subsets = IndexSet::nonempty_subsets(ell);
        let limits: Vec<i64> = subsets
            .iter()
            .map(|s| s.len() as i64 * (n as i64 + 32) + 2)
            .collect();
        let subset_masks: Vec<usize> = subsets
            .iter()
            .map(|s| s.iter().fold(0usize, |m, i| m | 1 << (i - 1)))
            .collect();

        let mut report = AnyProfileReport::default();
        let mut class_keys: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
        let mut runs: Vec<ClassRun> = Vec::new();

        let mut guess: Vec<i64> = vec![0; subsets.len()];
        let mut mask_values = vec![EMPTY_TUPLE_COMPLEXITY as i64; 1 << ell];
        'sweep: loop {
            report.guesses += 1;
            // monotonicity pruning: V subset of W needs g_V <= g_W + slack
            let mut ok = true;
            'prune: for i in 0..subsets.len() {
                for j in 0..subsets.len() {
                    if i != j
                        && subset_masks[i] & subset_masks[j] == subset_masks[i]
                        && guess[i] > guess[j] + slack
                    {
                        ok = false;
                        break 'prune;
                    }
                }
            }
            if ok {
                for (i, &mask) in subset_masks.iter().enumerate() {
                    mask_values[mask] = guess[i];
                }
                let table = approx_from_mask_values(&mask_values, &self.schedule);
                let bounds: Vec<u32> = (1..=ell)
                    .map(|k| self.clamp_bound(table.step_bound(k, &self.schedule)))
                    .collect();
                class_keys.entry(bounds.clone()).or_insert_with(|| {
                    runs.push(ClassRun::new(bounds));
                    runs.len() - 1
                });
            } else {
                report.pruned += 1;
            }
            // next guess, mixed radix
            let mut pos = subsets.len();
            loop {
                if pos == 0 {
                    break 'sweep;
                }
                pos -= 1;
                if guess[pos] < limits[pos] {
                    guess[pos] += 1;
                    break;
                }
                guess[pos] = 0;
            }
        }
        report.classes = runs.len();

        // dovetail: one program execution per live class per round
        let target_len = n as usize;
        loop {
            let mut alive = false;
            for idx in 0..runs.len() {
                if runs[idx].dead || runs[idx].complete() {
                    continue;
                }
                alive = true;
                if report.total_steps >= budget {
                    report.class_steps = runs.iter().map(|r| r.steps).collect();
                    report.class_dead = runs.iter().map(|r| r.dead).collect();
                    let steps = report.total_steps;
                    return Ok((Err(CodecError::Budget { steps }), report));
                }
                // lazily open the enumerator for the current step
                if runs[idx].enumerator.is_none() {
                    let k = runs[idx].found.len() + 1;
                    let b = self.step_condition(&runs[idx].found, &ordered, k)?;
                    let bound = runs[idx].bounds[k - 1];
                    runs[idx].enumerator = Some(SetEnumerator::new(&b, bound, target_len));
                }
                let run = &mut runs[idx];
                let k = run.found.len() + 1;
                let e = run.enumerator.as_mut().expect("opened above");
                match e.pump() {
                    Pump::Produced(x) => {
                        if self.graphs[k - 1].is_neighbor(&x, &ordered[k - 1].p) {
                            run.found.push(x);
                            run.enumerator = None;
                            if run.complete() {
                                if self.fingerprints_match(&run.found, &ordered)? {
                                    runs[idx].steps += 1;
                                    report.total_steps += 1;
                                    report.class_steps =
                                        runs.iter().map(|r| r.steps).collect();
                                    report.class_dead =
                                        runs.iter().map(|r| r.dead).collect();
                                    report.winner_class = Some(idx);
                                    let tuple = StringTuple::new(runs[idx].found.clone());
                                    return Ok((Ok(tuple), report));
                                }
                                runs[idx].dead = true;
                            }
                        }
                    }
                    Pump::Step => {}
                    Pump::Exhausted => run.dead = true,
                }
                runs[idx].steps += 1;
                report.total_steps += 1;
            }
            if !alive {
                report.class_steps = runs.iter().map(|r| r.steps).collect();
                report.class_dead = runs.iter().map(|r| r.dead).collect();
                let steps = report.total_steps;
                return Ok((Err(CodecError::AllGuessesFailed { steps }), report));
            }
        }
    }

}

struct ClassRun {
    bounds: Vec<u32>,
    enumerator: Option<SetEnumerator>,
    found: Vec<BitString>,
    steps: u64,
    dead: bool,
}

impl ClassRun {
    fn new(bounds: Vec<u32>) -> Self {
        ClassRun {
            enumerator: None,
            found: Vec::with_capacity(bounds.len()),
            steps: 0,
            dead: false,
            bounds,
        }
    }

    fn complete(&self) -> bool {
        self.found.len() == self.bounds.len()
    }
}
