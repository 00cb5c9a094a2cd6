//! Left-regular bipartite multigraphs and the rich-owner machinery.
//!
//! Two counting conventions coexist, both needed:
//!
//! - [`b_degree`] counts *edges* from a subset B into a right node
//!   (multi-edges once per edge). The heavy-node and bad-node checks
//!   use it; their proofs are edge-counting arguments.
//! - Ownership classification counts *distinct* B-members adjacent to
//!   a right node: a node is owned by x when x is the only member of B
//!   it touches, however many parallel edges carry it. A singleton B is
//!   always fully rich, multiplicities or not.
//!
//! The transform splits each source edge (x, z) into one edge per prime
//! q_i of a fixed list, landing on (q_i, x mod q_i, z). Residues
//! disambiguate left nodes sharing z: only primes dividing a difference
//! of two left values can still collide, and there are fewer than n+1
//! such divisors per pair below 2^(n+1).

use std::collections::{HashMap, HashSet};
use std::sync::Mutex;

use thiserror::Error;

use crate::bits::BitString;
use crate::extractor::{ExtractorFamily, Rat, ToeplitzExtractor};
use crate::primes::{first_primes, nth_prime_bound, primes_below, PrimeError, PRIME_COUNT_GUARD};

/// Edge budget for the generic (slot-scanning) classification paths.
pub const SCAN_GUARD: u128 = 1 << 26;

/// Prime-candidate budget for graph construction: the transform must be
/// able to locate its largest prime below this bound.
pub const PRIME_CANDIDATE_GUARD: u64 = 1 << 40;

/// Prime lists up to this count are materialized eagerly.
const MATERIALIZE_CAP: u64 = 1 << 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("operation needs {needed} edge evaluations, guard is {SCAN_GUARD}")]
    ScanGuard { needed: u128 },
    #[error("prime generation would scan past 2^40 candidates (estimated bound {estimate})")]
    PrimeOverflow { estimate: u128 },
    #[error("graph degree overflows 63 bits: source degree {source_degree} x {ell_primes} primes")]
    DegreeOverflow { source_degree: u64, ell_primes: u64 },
    #[error("left node is not a member of B")]
    NotInB,
    #[error("fast ownership path needs source right side of at most {max} bits, got {got}")]
    RightWidth { got: u32, max: u32 },
    #[error("left values wider than 120 bits are not supported here")]
    LeftWidth,
    #[error(transparent)]
    Prime(#[from] PrimeError),
}

/// A left-regular bipartite multigraph given functionally: slots
/// 0..degree() label the parallel edges out of each left node.
pub trait BipartiteGraph {
    fn left_bits(&self) -> u32;
    fn right_bits(&self) -> u32;
    fn degree(&self) -> u64;
    /// The right endpoint of edge `slot` out of `x`. Deterministic and
    /// total for slot < degree().
    fn neighbor(&self, x: &BitString, slot: u64) -> BitString;

    /// Whether some edge joins x and y. The default scans every slot.
    fn is_adjacent(&self, x: &BitString, y: &BitString) -> bool {
        assert!(
            (self.degree() as u128) <= SCAN_GUARD,
            "default adjacency scan needs a small degree"
        );
        (0..self.degree()).any(|s| &self.neighbor(x, s) == y)
    }
}

/// Graphs that can count parallel edges between a pair without a scan.
pub trait PreimageGraph: BipartiteGraph {
    fn adjacency_multiplicity(&self, x: &BitString, y: &BitString) -> u128;
}

// ---------------------------------------------------------------------------
// Concrete graphs
// ---------------------------------------------------------------------------

/// Dense tabulated graph for small instances and oracles.
#[derive(Clone, Debug)]
pub struct ExplicitGraph {
    left_bits: u32,
    right_bits: u32,
    /// neighbors[x_value][slot] = right value
    neighbors: Vec<Vec<u64>>,
}

impl ExplicitGraph {
    pub fn new(left_bits: u32, right_bits: u32, neighbors: Vec<Vec<u64>>) -> Self {
        assert_eq!(neighbors.len(), 1 << left_bits);
        let d = neighbors[0].len();
        for row in &neighbors {
            assert_eq!(row.len(), d, "left-regularity");
            for &y in row {
                assert!(y < (1u64 << right_bits));
            }
        }
        ExplicitGraph {
            left_bits,
            right_bits,
            neighbors,
        }
    }

    pub fn random<R: rand::Rng>(
        rng: &mut R,
        left_bits: u32,
        right_bits: u32,
        log_degree: u32,
    ) -> Self {
        let rows = (0..(1usize << left_bits))
            .map(|_| {
                (0..(1u64 << log_degree))
                    .map(|_| rng.gen_range(0..(1u64 << right_bits)))
                    .collect()
            })
            .collect();
        ExplicitGraph::new(left_bits, right_bits, rows)
    }

    /// The complete bipartite graph: slot z goes to right node z.
    pub fn complete(left_bits: u32, right_bits: u32) -> Self {
        let rows = (0..(1usize << left_bits))
            .map(|_| (0..(1u64 << right_bits)).collect())
            .collect();
        ExplicitGraph::new(left_bits, right_bits, rows)
    }
}

impl BipartiteGraph for ExplicitGraph {
    fn left_bits(&self) -> u32 {
        self.left_bits
    }
    fn right_bits(&self) -> u32 {
        self.right_bits
    }
    fn degree(&self) -> u64 {
        self.neighbors[0].len() as u64
    }
    fn neighbor(&self, x: &BitString, slot: u64) -> BitString {
        let xv = x.as_u128() as usize;
        BitString::from_u128(
            self.neighbors[xv][slot as usize] as u128,
            self.right_bits as usize,
        )
    }
}

impl PreimageGraph for ExplicitGraph {
    fn adjacency_multiplicity(&self, x: &BitString, y: &BitString) -> u128 {
        let yv = y.as_u128() as u64;
        self.neighbors[x.as_u128() as usize]
            .iter()
            .filter(|&&v| v == yv)
            .count() as u128
    }
}

/// The bipartite view of a seeded extractor: slots are seeds, the
/// neighbor is the extractor output.
#[derive(Clone, Debug)]
pub struct ExtractorGraph<E: ExtractorFamily> {
    family: E,
}

impl<E: ExtractorFamily> ExtractorGraph<E> {
    pub fn new(family: E) -> Self {
        assert!(family.spec().d < 64, "slot indices are u64");
        ExtractorGraph { family }
    }

    pub fn family(&self) -> &E {
        &self.family
    }
}

impl<E: ExtractorFamily> BipartiteGraph for ExtractorGraph<E> {
    fn left_bits(&self) -> u32 {
        self.family.spec().n as u32
    }
    fn right_bits(&self) -> u32 {
        self.family.spec().m as u32
    }
    fn degree(&self) -> u64 {
        1u64 << self.family.spec().d
    }
    fn neighbor(&self, x: &BitString, slot: u64) -> BitString {
        let d = self.family.spec().d;
        self.family.evaluate(x, &BitString::from_u128(slot as u128, d))
    }
    fn is_adjacent(&self, x: &BitString, y: &BitString) -> bool {
        self.family.preimage_exists(x, y)
    }
}

impl<E: ExtractorFamily> PreimageGraph for ExtractorGraph<E> {
    fn adjacency_multiplicity(&self, x: &BitString, y: &BitString) -> u128 {
        self.family.preimage_count(x, y)
    }
}

// ---------------------------------------------------------------------------
// Edge counting: B-degrees, heavy nodes, bad nodes
// ---------------------------------------------------------------------------

/// Number of edges from members of B into right node y, counting
/// multi-edges once per edge.
pub fn b_degree<G: BipartiteGraph + ?Sized>(g: &G, y: &BitString, b: &[BitString]) -> u64 {
    b.iter()
        .map(|x| (0..g.degree()).filter(|&s| &g.neighbor(x, s) == y).count() as u64)
        .sum()
}

fn edge_histogram<G: BipartiteGraph + ?Sized>(
    g: &G,
    b: &[BitString],
) -> Result<HashMap<BitString, u64>, GraphError> {
    let needed = b.len() as u128 * g.degree() as u128;
    if needed > SCAN_GUARD {
        return Err(GraphError::ScanGuard { needed });
    }
    let mut hist = HashMap::new();
    for x in b {
        for s in 0..g.degree() {
            *hist.entry(g.neighbor(x, s)).or_insert(0u64) += 1;
        }
    }
    Ok(hist)
}

/// Right nodes whose B-degree reaches t * |B| * D / |R|, in exact
/// rational arithmetic. Zero-degree nodes can never qualify since
/// t > 0, so only the B-side image is scanned.
pub fn heavy_right_nodes<G: BipartiteGraph + ?Sized>(
    g: &G,
    b: &[BitString],
    t: Rat,
) -> Result<Vec<BitString>, GraphError> {
    assert!(t > Rat::new(0, 1), "t must be positive");
    assert!(g.right_bits() <= 100, "exact threshold needs |R| <= 2^100");
    let hist = edge_histogram(g, b)?;
    let r_size = 1i128 << g.right_bits();
    let threshold = t * Rat::new(b.len() as i128 * g.degree() as i128, r_size);
    let mut heavy: Vec<BitString> = hist
        .into_iter()
        .filter(|(_, deg)| Rat::new(*deg as i128, 1) >= threshold)
        .map(|(y, _)| y)
        .collect();
    heavy.sort();
    Ok(heavy)
}

#[derive(Clone, Debug)]
pub struct HeavyReport {
    pub heavy_count: u64,
    /// |R| / t, the cap the counting argument guarantees
    pub cap: Rat,
    pub holds: bool,
}

/// |heavy nodes| <= |R| / t — a pure counting fact; `holds` is
/// reported but a false value means an implementation bug.
pub fn check_lemma_heavy<G: BipartiteGraph + ?Sized>(
    g: &G,
    b: &[BitString],
    t: Rat,
) -> Result<HeavyReport, GraphError> {
    let heavy = heavy_right_nodes(g, b, t)?;
    let cap = Rat::new(1i128 << g.right_bits(), 1) / t;
    Ok(HeavyReport {
        heavy_count: heavy.len() as u64,
        holds: Rat::new(heavy.len() as i128, 1) <= cap,
        cap,
    })
}

#[derive(Clone, Debug)]
pub struct BadReport {
    /// exact fraction of B that is delta-bad
    pub fraction: Rat,
    /// (1/delta) (1/t + epsilon)
    pub bound: Rat,
    pub within: bool,
}

/// Fraction of x in B with at least a delta fraction of edge slots
/// landing on t-heavy nodes, against the (1/delta)(1/t + epsilon)
/// bound that holds when the source is a verified (k, epsilon)
/// extractor and |B| >= 2^k.
pub fn check_lemma_bad<G: BipartiteGraph + ?Sized>(
    g: &G,
    b: &[BitString],
    t: Rat,
    delta: Rat,
    epsilon: Rat,
) -> Result<BadReport, GraphError> {
    let heavy: HashSet<BitString> = heavy_right_nodes(g, b, t)?.into_iter().collect();
    let mut bad = 0u64;
    for x in b {
        let into_heavy = (0..g.degree())
            .filter(|&s| heavy.contains(&g.neighbor(x, s)))
            .count() as i128;
        if Rat::new(into_heavy, g.degree() as i128) >= delta {
            bad += 1;
        }
    }
    let fraction = Rat::new(bad as i128, b.len() as i128);
    let bound = (Rat::new(1, 1) / t + epsilon) / delta;
    Ok(BadReport {
        fraction,
        within: fraction <= bound,
        bound,
    })
}

// ---------------------------------------------------------------------------
// Ownership classification
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OwnerClass {
    Rich,
    Poor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RichOwnerParams {
    /// small regime applies while |B| <= 2^k
    pub k: u32,
    pub delta: Rat,
}

#[derive(Clone, Debug)]
pub struct OwnerStat {
    pub x: BitString,
    pub class: OwnerClass,
    /// fraction of edge slots whose right node passes the regime test
    pub owned_fraction: Rat,
}

fn small_regime(b_len: usize, k: u32) -> bool {
    if k >= 127 {
        return true;
    }
    (b_len as u128) <= (1u128 << k)
}

/// Distinct-membership counts: for each right node in B's image, the
/// number of distinct members of B adjacent to it.
fn distinct_counts<G: BipartiteGraph + ?Sized>(
    g: &G,
    b: &[BitString],
) -> Result<HashMap<BitString, u32>, GraphError> {
    let needed = b.len() as u128 * g.degree() as u128;
    if needed > SCAN_GUARD {
        return Err(GraphError::ScanGuard { needed });
    }
    let mut counts: HashMap<BitString, u32> = HashMap::new();
    for x in b {
        let mut seen: HashSet<BitString> = HashSet::new();
        for s in 0..g.degree() {
            let y = g.neighbor(x, s);
            if seen.insert(y.clone()) {
                *counts.entry(y).or_insert(0) += 1;
            }
        }
    }
    Ok(counts)
}

/// Classify every member of B at once (the per-node scan reuses one
/// distinct-count table). Slot fractions count multi-edges separately.
pub fn classify_all<G: BipartiteGraph + ?Sized>(
    g: &G,
    b: &[BitString],
    params: &RichOwnerParams,
) -> Result<Vec<OwnerStat>, GraphError> {
    let counts = distinct_counts(g, b)?;
    let small = small_regime(b.len(), params.k);
    // large-regime sharing cap: (2/delta^2) |B| D / 2^k
    let cap = Rat::new(2, 1) / (params.delta * params.delta)
        * Rat::new(b.len() as i128 * g.degree() as i128, 1i128 << params.k.min(100));
    let threshold = Rat::new(1, 1) - params.delta;

    let mut out = Vec::with_capacity(b.len());
    for x in b {
        let mut good = 0u64;
        for s in 0..g.degree() {
            let y = g.neighbor(x, s);
            let c = counts[&y];
            let ok = if small {
                c == 1
            } else {
                Rat::new(c as i128, 1) <= cap
            };
            if ok {
                good += 1;
            }
        }
        let owned_fraction = Rat::new(good as i128, g.degree() as i128);
        out.push(OwnerStat {
            x: x.clone(),
            class: if owned_fraction >= threshold {
                OwnerClass::Rich
            } else {
                OwnerClass::Poor
            },
            owned_fraction,
        });
    }
    Ok(out)
}

/// Classification of one member of B. Errors if x is not in B.
pub fn classify_owner<G: BipartiteGraph + ?Sized>(
    g: &G,
    x: &BitString,
    b: &[BitString],
    params: &RichOwnerParams,
) -> Result<OwnerStat, GraphError> {
    if !b.contains(x) {
        return Err(GraphError::NotInB);
    }
    let all = classify_all(g, b, params)?;
    Ok(all.into_iter().find(|s| &s.x == x).expect("x scanned"))
}

/// Poor owners of B, in B's own order.
pub fn poor_owners<G: BipartiteGraph + ?Sized>(
    g: &G,
    b: &[BitString],
    params: &RichOwnerParams,
) -> Result<Vec<BitString>, GraphError> {
    Ok(classify_all(g, b, params)?
        .into_iter()
        .filter(|s| s.class == OwnerClass::Poor)
        .map(|s| s.x)
        .collect())
}

// ---------------------------------------------------------------------------
// The prime-splitting transform
// ---------------------------------------------------------------------------

/// A right node of a transformed graph, unpacked.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformedRightNode {
    pub prime_index: u64,
    pub q: u64,
    pub residue: u64,
    pub source_node: BitString,
}

/// Prime supply of a transformed graph: fully materialized for counts
/// up to 2^20, otherwise only an on-demand cache plus the
/// divisor-relevant primes.
struct PrimeSupply {
    count: u64,
    materialized: Mutex<Vec<u64>>,
    res_bits: u32,
}

impl PrimeSupply {
    fn new(count: u64) -> Result<Self, GraphError> {
        let estimate = nth_prime_bound(count) as u128;
        if estimate > PRIME_CANDIDATE_GUARD as u128 {
            return Err(GraphError::PrimeOverflow { estimate });
        }
        let (list, res_bits) = if count <= MATERIALIZE_CAP {
            let list = first_primes(count)?;
            let max = *list.last().expect("count >= 1");
            (list, 64 - max.leading_zeros())
        } else {
            // width from the deterministic bound, not the actual prime
            (Vec::new(), 64 - nth_prime_bound(count).leading_zeros())
        };
        Ok(PrimeSupply {
            count,
            materialized: Mutex::new(list),
            res_bits,
        })
    }

    /// q_index (0-based). Extends the cache when needed; indices past
    /// the first_primes guard cannot be served and panic with the
    /// budget in the message.
    fn get(&self, index: u64) -> u64 {
        assert!(index < self.count, "prime index out of range");
        let mut list = self.materialized.lock().expect("prime cache");
        if index as usize >= list.len() {
            let want = (index + 1)
                .next_power_of_two()
                .min(self.count)
                .min(PRIME_COUNT_GUARD);
            assert!(
                index < want,
                "prime index {index} is past the materialization budget {PRIME_COUNT_GUARD}"
            );
            *list = first_primes(want).expect("guarded above");
        }
        list[index as usize]
    }

    /// The primes among the first `count` that can divide a difference
    /// of two values below 2^(n+1).
    fn divisor_primes(&self, n: u32) -> Vec<u64> {
        let limit = 1u64 << (n + 1).min(40);
        let list = self.materialized.lock().expect("prime cache");
        if list.len() as u64 == self.count {
            return list.iter().copied().take_while(|&q| q < limit).collect();
        }
        // unmaterialized lists are larger than 2^20 entries, which
        // covers every prime below the n+1-bit limit for n <= 23
        let below = primes_below(limit);
        assert!((below.len() as u64) <= self.count);
        below
    }
}

/// How to pad the packed right label.
pub enum LabelWidth {
    /// 3 * ceil(log2 ell_primes) + source bits, the standard shape
    ThreeLog,
    /// pad to an exact total (the codec pins n_hat + gamma)
    Total(u32),
}

/// The split graph: one edge (x, (z, i)) per source edge (x, z) and
/// prime index i, landing on (q_i, x mod q_i, source neighbor).
///
/// Right labels pack fixed-width fields [prime index | residue |
/// source node | zero pad]; the constructor decides the total width.
pub struct TransformedGraph<G: BipartiteGraph> {
    source: G,
    primes: PrimeSupply,
    idx_bits: u32,
    pad_bits: u32,
    delta_log2: u32,
}

pub fn transform<G: BipartiteGraph>(
    source: G,
    s: u64,
    delta_log2: u32,
) -> Result<TransformedGraph<G>, GraphError> {
    let n = source.left_bits() as u128;
    let ell = (1u128 << delta_log2) * s as u128 * n.max(1);
    transform_with_prime_count(source, ell, delta_log2, LabelWidth::ThreeLog)
}

pub fn transform_with_prime_count<G: BipartiteGraph>(
    source: G,
    ell_primes: u128,
    delta_log2: u32,
    width: LabelWidth,
) -> Result<TransformedGraph<G>, GraphError> {
    let ell = u64::try_from(ell_primes).map_err(|_| GraphError::PrimeOverflow {
        estimate: ell_primes,
    })?;
    let total_degree = source.degree() as u128 * ell as u128;
    if total_degree > (1u128 << 63) {
        return Err(GraphError::DegreeOverflow {
            source_degree: source.degree(),
            ell_primes: ell,
        });
    }
    let primes = PrimeSupply::new(ell)?;
    let idx_bits = (64 - (ell - 1).leading_zeros()).max(1);
    let pad_bits = match width {
        LabelWidth::ThreeLog => (3 * idx_bits)
            .checked_sub(idx_bits + primes.res_bits)
            .expect("residue width fits in 2 log ell"),
        LabelWidth::Total(total) => total
            .checked_sub(idx_bits + primes.res_bits + source.right_bits())
            .expect("declared label width too small"),
    };
    Ok(TransformedGraph {
        source,
        primes,
        idx_bits,
        pad_bits,
        delta_log2,
    })
}

impl<G: BipartiteGraph> TransformedGraph<G> {
    pub fn source(&self) -> &G {
        &self.source
    }

    pub fn ell_primes(&self) -> u64 {
        self.primes.count
    }

    pub fn delta_log2(&self) -> u32 {
        self.delta_log2
    }

    pub fn prime(&self, index: u64) -> u64 {
        self.primes.get(index)
    }

    pub fn pack(&self, prime_index: u64, residue: u64, source_node: &BitString) -> BitString {
        let mut label = BitString::from_u128(prime_index as u128, self.idx_bits as usize);
        label.extend(&BitString::from_u128(
            residue as u128,
            self.primes.res_bits as usize,
        ));
        label.extend(source_node);
        label.extend(&BitString::zeros(self.pad_bits as usize));
        label
    }

    pub fn unpack(&self, label: &BitString) -> Option<TransformedRightNode> {
        if label.len() != self.right_bits() as usize {
            return None;
        }
        let idx_bits = self.idx_bits as usize;
        let res_bits = self.primes.res_bits as usize;
        let src_bits = self.source.right_bits() as usize;
        let prime_index = label.slice(0, idx_bits).as_u128() as u64;
        let residue = label.slice(idx_bits, res_bits).as_u128() as u64;
        let source_node = label.slice(idx_bits + res_bits, src_bits);
        if prime_index >= self.primes.count {
            return None;
        }
        let pad = label.slice(idx_bits + res_bits + src_bits, self.pad_bits as usize);
        if pad.count_ones() != 0 {
            return None;
        }
        let q = self.primes.get(prime_index);
        if residue >= q {
            return None;
        }
        Some(TransformedRightNode {
            prime_index,
            q,
            residue,
            source_node,
        })
    }

    /// Exact adjacency against a packed label: residue check plus
    /// source adjacency. This is what the decoder runs per candidate.
    pub fn is_neighbor(&self, x: &BitString, label: &BitString) -> bool {
        match self.unpack(label) {
            Some(node) => {
                x.mod_u64(node.q) == node.residue && self.source.is_adjacent(x, &node.source_node)
            }
            None => false,
        }
    }

    /// Test/debug dump: one line per edge, "x_hex z_hex -> q residue z1_hex".
    pub fn edge_dump(&self) -> Result<String, GraphError> {
        let edges = (1u128 << self.left_bits()) * self.degree() as u128;
        if edges > 1 << 22 {
            return Err(GraphError::ScanGuard { needed: edges });
        }
        let mut out = String::new();
        for xv in 0..(1u128 << self.left_bits()) {
            let x = BitString::from_u128(xv, self.left_bits() as usize);
            for slot in 0..self.degree() {
                let node = self
                    .unpack(&self.neighbor(&x, slot))
                    .expect("own labels unpack");
                out.push_str(&format!(
                    "{:x} {:x} -> {} {} {:x}\n",
                    xv,
                    slot,
                    node.q,
                    node.residue,
                    node.source_node.as_u128(),
                ));
            }
        }
        Ok(out)
    }
}

impl<G: BipartiteGraph> BipartiteGraph for TransformedGraph<G> {
    fn left_bits(&self) -> u32 {
        self.source.left_bits()
    }
    fn right_bits(&self) -> u32 {
        self.idx_bits + self.primes.res_bits + self.source.right_bits() + self.pad_bits
    }
    fn degree(&self) -> u64 {
        self.source.degree() * self.primes.count
    }
    /// Slot layout: slot = source_slot * ell_primes + prime_index.
    fn neighbor(&self, x: &BitString, slot: u64) -> BitString {
        let source_slot = slot / self.primes.count;
        let prime_index = slot % self.primes.count;
        let q = self.primes.get(prime_index);
        self.pack(prime_index, x.mod_u64(q), &self.source.neighbor(x, source_slot))
    }
    fn is_adjacent(&self, x: &BitString, y: &BitString) -> bool {
        self.is_neighbor(x, y)
    }
}

// ---------------------------------------------------------------------------
// Fast ownership for transformed graphs
// ---------------------------------------------------------------------------

impl<G: PreimageGraph> TransformedGraph<G> {
    /// Ownership statistics over B without touching the (enormous)
    /// edge space. For a source right node w in x's neighborhood,
    /// ownership of the split copy at prime index i depends only on
    /// which other B-members are adjacent to w and share x's residue
    /// mod q_i, and only divisor primes (q < 2^(n+1)) can collide.
    pub fn ownership_stats(
        &self,
        b: &[BitString],
        params: &RichOwnerParams,
    ) -> Result<Vec<OwnerStat>, GraphError> {
        let m = self.source.right_bits();
        if m > 16 {
            return Err(GraphError::RightWidth { got: m, max: 16 });
        }
        if self.left_bits() > 120 {
            return Err(GraphError::LeftWidth);
        }
        let ell = self.primes.count as i128;
        let divisors = self.primes.divisor_primes(self.left_bits());
        let words = divisors.len().div_ceil(64).max(1);
        let ints: Vec<u128> = b.iter().map(|x| x.as_u128()).collect();

        // prime-divisor mask per unordered pair
        let mut masks: HashMap<(usize, usize), Vec<u64>> = HashMap::new();
        for i in 0..b.len() {
            for j in i + 1..b.len() {
                let diff = ints[i].abs_diff(ints[j]);
                let mut mask = vec![0u64; words];
                for (p, &q) in divisors.iter().enumerate() {
                    if diff.is_multiple_of(q as u128) {
                        mask[p / 64] |= 1 << (p % 64);
                    }
                }
                masks.insert((i, j), mask);
            }
        }
        let mask_of = |i: usize, j: usize| -> &Vec<u64> {
            let key = if i < j { (i, j) } else { (j, i) };
            &masks[&key]
        };

        // members adjacent to each source right node (by B index)
        let mut members: Vec<Vec<usize>> = Vec::with_capacity(1 << m);
        let mut multiplicity: Vec<Vec<u128>> = vec![vec![0; 1 << m]; b.len()];
        for wv in 0..(1u64 << m) {
            let w = BitString::from_u128(wv as u128, m as usize);
            let mut adj = Vec::new();
            for (i, x) in b.iter().enumerate() {
                let mult = self.source.adjacency_multiplicity(x, &w);
                multiplicity[i][wv as usize] = mult;
                if mult > 0 {
                    adj.push(i);
                }
            }
            members.push(adj);
        }

        let small = small_regime(b.len(), params.k);
        let degree_total = self.source.degree() as i128 * ell;
        let threshold = Rat::new(1, 1) - params.delta;
        let cap = Rat::new(2, 1) / (params.delta * params.delta)
            * Rat::new(b.len() as i128, 1)
            * Rat::new(degree_total, 1i128 << params.k.min(100));

        let mut out = Vec::with_capacity(b.len());
        for (i, x) in b.iter().enumerate() {
            let mut good_weight: i128 = 0;
            for wv in 0..(1usize << m) {
                let mult = multiplicity[i][wv];
                if mult == 0 {
                    continue;
                }
                let colliders: Vec<usize> =
                    members[wv].iter().copied().filter(|&j| j != i).collect();
                let good_indices: i128 = if small {
                    // owned: no collider shares the residue
                    if colliders.is_empty() {
                        ell
                    } else {
                        let mut union = vec![0u64; words];
                        for &j in &colliders {
                            for (u, v) in union.iter_mut().zip(mask_of(i, j)) {
                                *u |= v;
                            }
                        }
                        let bad: i128 = union.iter().map(|w| w.count_ones() as i128).sum();
                        ell - bad
                    }
                } else {
                    // shared with at most `cap` distinct members
                    let worst = 1 + colliders.len() as i128;
                    if Rat::new(worst, 1) <= cap {
                        ell
                    } else {
                        // per divisor prime: class size = 1 + colliding count
                        let mut counts = vec![0u32; divisors.len()];
                        for &j in &colliders {
                            for (wi, &word) in mask_of(i, j).iter().enumerate() {
                                let mut bits = word;
                                while bits != 0 {
                                    let p = wi * 64 + bits.trailing_zeros() as usize;
                                    counts[p] += 1;
                                    bits &= bits - 1;
                                }
                            }
                        }
                        let singleton_ok = Rat::new(1, 1) <= cap;
                        let mut good = if singleton_ok {
                            ell - divisors.len() as i128
                        } else {
                            0
                        };
                        for &c in &counts {
                            if Rat::new(1 + c as i128, 1) <= cap {
                                good += 1;
                            }
                        }
                        good
                    }
                };
                good_weight += mult as i128 * good_indices;
            }
            let owned_fraction = Rat::new(good_weight, degree_total);
            out.push(OwnerStat {
                x: x.clone(),
                class: if owned_fraction >= threshold {
                    OwnerClass::Rich
                } else {
                    OwnerClass::Poor
                },
                owned_fraction,
            });
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// The rich-owner construction
// ---------------------------------------------------------------------------

pub type RichOwnerGraph = TransformedGraph<ExtractorGraph<ToeplitzExtractor>>;

/// Build a graph with the (k, delta_target)-rich owner property from a
/// Toeplitz extractor with output length k: epsilon = delta_target^2/8
/// makes the transform's internal delta = sqrt(2 epsilon) half the
/// target, and the split uses s = (2/delta^2) * 2^d1 — the collision
/// cap that the extractor's k'-bit prefixes guarantee for sets of size
/// 2^k' — so ell_primes = (1/delta) * s * n primes isolate the sharers.
///
/// delta_target = 2^-delta_target_log2; every delta stays dyadic.
pub fn rich_owner_graph_from_extractor(
    n: usize,
    k: usize,
    delta_target_log2: u32,
) -> Result<(RichOwnerGraph, RichOwnerParams), GraphError> {
    let e = delta_target_log2;
    let inner_delta_log2 = e + 1; // delta = target/2, 2*delta = target
    let epsilon = Rat::new(1, 1i128 << (2 * e + 3).min(126));
    let d1 = n + k - 1;
    // s = (2/delta^2) * 2^d1 = 2^(2(e+1)+1+d1); ell = (1/delta)*s*n
    let s_log2 = 2 * inner_delta_log2 as usize + 1 + d1;
    let ell = (1u128 << inner_delta_log2)
        .checked_shl(s_log2 as u32)
        .and_then(|v| v.checked_mul(n as u128))
        .ok_or(GraphError::PrimeOverflow { estimate: u128::MAX })?;
    if ell > u64::MAX as u128 {
        return Err(GraphError::PrimeOverflow { estimate: ell });
    }
    let estimate = nth_prime_bound(ell as u64) as u128;
    if estimate > PRIME_CANDIDATE_GUARD as u128 {
        return Err(GraphError::PrimeOverflow { estimate });
    }
    let family = ToeplitzExtractor::new(n, k, epsilon);
    let graph = transform_with_prime_count(
        ExtractorGraph::new(family),
        ell,
        inner_delta_log2,
        LabelWidth::ThreeLog,
    )?;
    Ok((
        graph,
        RichOwnerParams {
            k: k as u32,
            delta: Rat::new(1, 1i128 << delta_target_log2),
        },
    ))
}
