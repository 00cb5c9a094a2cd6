//! Correlated-source generators. The codec accepts arbitrary tuples;
//! these models exist to populate interesting complexity profiles.

use ksw_core::bits::{BitString, StringTuple};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("sparse_flips wants r <= n, got r={r} n={n}")]
    FlipsExceedLength { r: usize, n: usize },
    #[error("shared_prefix wants len <= n, got len={len} n={n}")]
    PrefixExceedsLength { len: usize, n: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrelationModel {
    /// every component drawn independently
    Independent,
    /// all components equal
    Copy,
    /// each component flips exactly r fresh distinct positions of the
    /// previous one
    SparseFlips { flips: usize },
    /// common prefix of the given length, independent suffixes
    SharedPrefix { len: usize },
    /// x_{i+1} is a fixed function of x_i: first half kept, second
    /// half replaced by a keyed hash of x_i
    FunctionChain,
}

/// Deterministic tuple for (model, seed).
pub fn generate(
    model: &CorrelationModel,
    ell: usize,
    n: usize,
    trial_seed: u64,
) -> Result<StringTuple, ModelError> {
    let mut rng = ChaCha12Rng::seed_from_u64(trial_seed);
    let first = BitString::random(&mut rng, n);
    let mut entries = vec![first];
    for _ in 1..ell {
        let prev = entries.last().expect("nonempty");
        let next = match model {
            CorrelationModel::Independent => BitString::random(&mut rng, n),
            CorrelationModel::Copy => prev.clone(),
            CorrelationModel::SparseFlips { flips } => {
                if *flips > n {
                    return Err(ModelError::FlipsExceedLength { r: *flips, n });
                }
                let mut positions: Vec<usize> = Vec::with_capacity(*flips);
                while positions.len() < *flips {
                    let p = rng.gen_range(0..n);
                    if !positions.contains(&p) {
                        positions.push(p);
                    }
                }
                let mut x = prev.clone();
                for p in positions {
                    x.flip(p);
                }
                x
            }
            CorrelationModel::SharedPrefix { len } => {
                if *len > n {
                    return Err(ModelError::PrefixExceedsLength { len: *len, n });
                }
                let mut x = BitString::random(&mut rng, n);
                for i in 0..*len {
                    x.set(i, prev.get(i));
                }
                x
            }
            CorrelationModel::FunctionChain => {
                let keep = n / 2;
                let mut x = prev.prefix(keep);
                let digest = ksw_core::fnv1a64(&prev.to_padded_bytes());
                let mut fill = ChaCha12Rng::seed_from_u64(digest);
                x.extend(&BitString::random(&mut fill, n - keep));
                x
            }
        };
        entries.push(next);
    }
    Ok(StringTuple::new(entries))
}
