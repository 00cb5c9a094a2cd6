//! Per-sender parameter schedule.
//!
//! The faithful recursion explodes for any feasible input length (the
//! delta exponent for sender k is 17 times the next sender's gamma), so
//! the derivation accepts per-sender overrides; the faithful arithmetic
//! stays implemented and tested. All deltas are reciprocals of powers
//! of two and are carried as exponents, which keeps every derived
//! quantity exact even when the exponents run to the tens of thousands.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("sender count must be between 1 and 8, got {0}")]
    BadEll(usize),
    #[error("need one target length per sender: ell={ell}, got {got}")]
    TargetCount { ell: usize, got: usize },
    #[error("n must be at least 2, got {0}")]
    BadN(u32),
    #[error("c * n = {0} must be a power of two so delta_ell stays dyadic; override delta instead")]
    DeltaNotDyadic(u64),
    #[error("derived width n_hat + gamma = {width} exceeds 4n = {limit} for sender {k}; supply overrides")]
    WidthGuard { k: usize, width: u128, limit: u128 },
    #[error("gamma coefficient must have a nonzero denominator")]
    BadCoefficient,
}

/// Optional direct values for one sender; anything set here bypasses
/// the faithful recursion (and its width guard) for that sender.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SenderOverride {
    pub gamma: Option<u64>,
    /// delta_k = 2^-delta_log2
    pub delta_log2: Option<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SenderParams {
    pub n_k: u32,
    /// delta_k = 2^-delta_log2 (exponent form; faithful values are huge)
    pub delta_log2: u64,
    pub gamma: u64,
    /// eta_k = 2 gamma_k + log2(2 / delta_k^2) = 2 gamma_k + 2 e_k + 1
    pub eta: u64,
    /// n_hat_k = n_k + eta_k + 1
    pub n_hat: u64,
    /// hat delta_k = 2 hat delta_{k+1} + delta_k, exact
    pub delta_hat: BigRational,
    pub overridden: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub ell: usize,
    pub n: u32,
    /// senders[k-1] holds sender k
    pub senders: Vec<SenderParams>,
    pub c: u32,
    /// gamma coefficient a as a fraction
    pub a_num: u32,
    pub a_den: u32,
    /// stand-in coefficient for every O(log n) slack
    pub slack_log_coeff: u32,
}

pub fn ceil_log2(v: u64) -> u32 {
    assert!(v >= 1);
    64 - (v - 1).leading_zeros()
}

fn dyadic(neg_log2: u64) -> BigRational {
    BigRational::new(BigInt::from(1), BigInt::from(2).pow(neg_log2 as u32))
}

/// Derive the schedule for `ell` senders of `n`-bit strings at target
/// lengths `targets`. `c` scales delta_ell = 1/(c n); `a = a_num/a_den`
/// scales gamma = ceil(a * ceil(log2(n/delta))^3).
pub fn derive_schedule(
    ell: usize,
    n: u32,
    targets: &[u32],
    c: u32,
    a: (u32, u32),
    slack_log_coeff: u32,
    overrides: &BTreeMap<usize, SenderOverride>,
) -> Result<Schedule, ScheduleError> {
    if ell == 0 || ell > 8 {
        return Err(ScheduleError::BadEll(ell));
    }
    if targets.len() != ell {
        return Err(ScheduleError::TargetCount { ell, got: targets.len() });
    }
    if n < 2 {
        return Err(ScheduleError::BadN(n));
    }
    if a.1 == 0 {
        return Err(ScheduleError::BadCoefficient);
    }

    // descending pass: delta_k needs gamma_{k+1}
    let mut senders: Vec<Option<SenderParams>> = vec![None; ell];
    let mut gamma_next: u64 = 0; // gamma_{ell+1} = 0
    for k in (1..=ell).rev() {
        let over = overrides.get(&k).copied().unwrap_or_default();
        let delta_log2: u64 = match over.delta_log2 {
            Some(e) => e as u64,
            None if k == ell => {
                let cn = c as u64 * n as u64;
                if !cn.is_power_of_two() {
                    return Err(ScheduleError::DeltaNotDyadic(cn));
                }
                cn.trailing_zeros() as u64
            }
            None => 17u64.saturating_mul(gamma_next),
        };
        let gamma: u64 = match over.gamma {
            Some(g) => g,
            None => {
                // L = ceil(log2(n * 2^e)) = ceil(log2 n) + e
                let l = ceil_log2(n as u64) as u128 + delta_log2 as u128;
                let cubed = l.saturating_mul(l).saturating_mul(l);
                let num = cubed.saturating_mul(a.0 as u128);
                (num.div_ceil(a.1 as u128)).min(u64::MAX as u128) as u64
            }
        };
        let eta = 2 * gamma + 2 * delta_log2 + 1;
        let n_hat = targets[k - 1] as u64 + eta + 1;
        let overridden = over.gamma.is_some() || over.delta_log2.is_some();
        if !overridden {
            let width = n_hat as u128 + gamma as u128;
            let limit = 4 * n as u128;
            if width > limit {
                return Err(ScheduleError::WidthGuard { k, width, limit });
            }
        }
        senders[k - 1] = Some(SenderParams {
            n_k: targets[k - 1],
            delta_log2,
            gamma,
            eta,
            n_hat,
            delta_hat: BigRational::from(BigInt::from(0)), // ascending pass below
            overridden,
        });
        gamma_next = gamma;
    }

    let mut senders: Vec<SenderParams> = senders.into_iter().map(|s| s.expect("filled")).collect();
    // hat-delta recursion, also descending: hat_ell = delta_ell
    let mut hat = dyadic(senders[ell - 1].delta_log2);
    senders[ell - 1].delta_hat = hat.clone();
    for k in (1..ell).rev() {
        hat = BigRational::from(BigInt::from(2)) * hat + dyadic(senders[k - 1].delta_log2);
        senders[k - 1].delta_hat = hat.clone();
    }

    Ok(Schedule {
        ell,
        n,
        senders,
        c,
        a_num: a.0,
        a_den: a.1,
        slack_log_coeff,
    })
}

impl Schedule {
    pub fn sender(&self, k: usize) -> &SenderParams {
        &self.senders[k - 1]
    }

    /// gamma_{k+1}, taking gamma_{ell+1} = 0.
    pub fn gamma_after(&self, k: usize) -> u64 {
        if k >= self.ell {
            0
        } else {
            self.senders[k].gamma
        }
    }

    /// The collapsed O(log n) slack: slack_log_coeff * ceil(log2 n).
    pub fn slack_term(&self) -> u64 {
        self.slack_log_coeff as u64 * ceil_log2(self.n as u64) as u64
    }

    /// Per-message overhead above n_k: eta + 1 + gamma + fingerprint
    /// bits (32-bit prime index + 64-bit residue).
    pub fn alpha(&self, k: usize) -> u64 {
        let s = self.sender(k);
        s.eta + 1 + s.gamma + 96
    }

    pub fn digest(&self) -> u64 {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"KSW-SCHED1");
        bytes.extend_from_slice(crate::MACHINE_VERSION.as_bytes());
        bytes.extend_from_slice(&(self.ell as u32).to_be_bytes());
        bytes.extend_from_slice(&self.n.to_be_bytes());
        bytes.extend_from_slice(&self.c.to_be_bytes());
        bytes.extend_from_slice(&self.a_num.to_be_bytes());
        bytes.extend_from_slice(&self.a_den.to_be_bytes());
        bytes.extend_from_slice(&self.slack_log_coeff.to_be_bytes());
        for s in &self.senders {
            bytes.extend_from_slice(&s.n_k.to_be_bytes());
            bytes.extend_from_slice(&s.delta_log2.to_be_bytes());
            bytes.extend_from_slice(&s.gamma.to_be_bytes());
        }
        crate::fnv1a64(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn over(gamma: u64, delta_log2: u32) -> SenderOverride {
        SenderOverride {
            gamma: Some(gamma),
            delta_log2: Some(delta_log2),
        }
    }

    #[test]
    fn faithful_single_sender_trips_guard() {
        // ell=1, n=16, c=4: delta_1 = 1/64, L = log2(1024) = 10,
        // gamma_1 = 1000 with a = 1 — far past the 4n width guard.
        let err = derive_schedule(1, 16, &[16], 4, (1, 1), 2, &BTreeMap::new()).unwrap_err();
        match err {
            ScheduleError::WidthGuard { k: 1, width, limit } => {
                // eta = 2*1000 + 13, n_hat = 16 + eta + 1, + gamma
                assert_eq!(limit, 64);
                assert_eq!(width, 16 + (2 * 1000 + 13) + 1 + 1000);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn override_arithmetic_example() {
        // gamma_1 = 8, delta_1 = 1/64: eta = 16 + 13 = 29, n_hat = n_1 + 30
        let mut o = BTreeMap::new();
        o.insert(1, over(8, 6));
        let s = derive_schedule(1, 16, &[10], 4, (1, 1), 2, &o).unwrap();
        let p = s.sender(1);
        assert_eq!(p.eta, 29);
        assert_eq!(p.n_hat, 10 + 30);
        assert_eq!(s.alpha(1), 29 + 1 + 8 + 96);
    }

    #[test]
    fn delta_hat_recursion_example() {
        // ell=2, gamma=(6,4), delta=(1/64,1/16):
        // hat_2 = 1/16, hat_1 = 2/16 + 1/64 = 9/64
        let mut o = BTreeMap::new();
        o.insert(1, over(6, 6));
        o.insert(2, over(4, 4));
        let s = derive_schedule(2, 16, &[10, 10], 4, (1, 1), 2, &o).unwrap();
        assert_eq!(
            s.sender(2).delta_hat,
            BigRational::new(BigInt::from(1), BigInt::from(16))
        );
        assert_eq!(
            s.sender(1).delta_hat,
            BigRational::new(BigInt::from(9), BigInt::from(64))
        );
    }

    #[test]
    fn faithful_delta_recursion_is_exact_in_exponents() {
        // gamma_2 overridden small so the faithful delta_1 = 2^(-17 g2)
        // stays visible; gamma_1 still derived (and huge).
        let mut o = BTreeMap::new();
        o.insert(
            2,
            SenderOverride {
                gamma: Some(3),
                delta_log2: Some(2),
            },
        );
        o.insert(
            1,
            SenderOverride {
                gamma: Some(12),
                delta_log2: None,
            },
        );
        let s = derive_schedule(2, 16, &[18, 18], 4, (1, 1), 2, &o).unwrap();
        assert_eq!(s.sender(1).delta_log2, 17 * 3);
        assert_eq!(s.sender(1).eta, 2 * 12 + 2 * 51 + 1);
        // hat_1 = 2 * (1/4) + 2^-51
        let expect = BigRational::new(BigInt::from(1), BigInt::from(2))
            + BigRational::new(BigInt::from(1), BigInt::from(2).pow(51));
        assert_eq!(s.sender(1).delta_hat, expect);
    }

    #[test]
    fn gamma_formula_uses_integer_ceil_log2() {
        // no overrides, with a small enough to slip under the guard:
        // n = 4, c = 1 -> delta = 1/4, L = 2 + 2 = 4, gamma = ceil(64/32)
        let s = derive_schedule(1, 4, &[1], 1, (1, 32), 2, &BTreeMap::new()).unwrap();
        assert_eq!(s.sender(1).gamma, 2);
        // eta = 2*2 + 2*2 + 1 = 9, width = (1 + 9 + 1) + 2 = 13 <= 16
        assert_eq!(s.sender(1).eta, 9);
        assert_eq!(s.slack_term(), 2 * 2);
    }

    #[test]
    fn dyadic_delta_enforced() {
        let err = derive_schedule(1, 12, &[8], 4, (1, 1), 2, &BTreeMap::new()).unwrap_err();
        assert_eq!(err, ScheduleError::DeltaNotDyadic(48));
    }

    #[test]
    fn digest_tracks_parameters() {
        let mut o = BTreeMap::new();
        o.insert(1, over(8, 6));
        let s1 = derive_schedule(1, 16, &[10], 4, (1, 1), 2, &o).unwrap();
        let s2 = derive_schedule(1, 16, &[11], 4, (1, 1), 2, &o).unwrap();
        assert_ne!(s1.digest(), s2.digest());
        let s3 = derive_schedule(1, 16, &[10], 4, (1, 1), 2, &o).unwrap();
        assert_eq!(s1.digest(), s3.digest());
    }
}
