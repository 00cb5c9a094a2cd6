//! End-to-end protocol runs with CSV reporting.
//!
//! Everything on the decision path is exact or integer, so a report is
//! reproducible bit for bit from its configuration; wall-clock times
//! are carried for convenience and excluded from determinism claims.

use std::collections::BTreeMap;
use std::time::Instant;

use ksw_core::bits::IndexSet;
use ksw_core::codec::{BoundMode, Codec, CodecError, EncodedMessage};
use ksw_core::machine::{complexity_auto, profile};
use ksw_core::schedule::{derive_schedule, Schedule, ScheduleError, SenderOverride};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{generate, CorrelationModel, ModelError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("rates must list one target per sender")]
    RateCount,
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    /// decode_with_profile on the true profile
    Oracle,
    /// profile-free dovetailing decoder
    Any,
    /// decode_with_profile with exact conditional bounds (diagnostic)
    Direct,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub c: u32,
    /// gamma coefficient a as [num, den]
    pub a: (u32, u32),
    pub slack_log_coeff: u32,
    #[serde(default)]
    pub overrides: Vec<OverrideSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OverrideSpec {
    pub k: usize,
    pub gamma: Option<u64>,
    pub delta_log2: Option<u32>,
}

impl ScheduleSpec {
    pub fn derive(&self, ell: usize, n: u32, rates: &[u32]) -> Result<Schedule, ScheduleError> {
        let mut overrides = BTreeMap::new();
        for o in &self.overrides {
            overrides.insert(
                o.k,
                SenderOverride {
                    gamma: o.gamma,
                    delta_log2: o.delta_log2,
                },
            );
        }
        derive_schedule(
            ell,
            n,
            rates,
            self.c,
            self.a,
            self.slack_log_coeff,
            &overrides,
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub ell: usize,
    pub n: u32,
    pub rates: Vec<u32>,
    pub trials: u32,
    pub mode: DecodeMode,
    pub seed: u64,
    pub budget: u64,
    pub model: CorrelationModel,
    pub schedule: ScheduleSpec,
    /// optional CSV destination for the trial rows
    #[serde(default)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialRow {
    pub trial_id: u32,
    pub success: bool,
    pub msg_bits: Vec<u64>,
    pub c_profile_digest: u64,
    pub enum_steps: u64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug)]
pub struct TrialDetail {
    pub rate_violations: usize,
    /// sum of message payloads minus C_t of the full framed tuple
    pub overhead_bits: i64,
    /// |C(x_12) - C(x_1) - C(x_2 | x_1)| sample (two senders and up)
    pub chain_rule_slack: Option<i64>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    /// results are only comparable within one machine revision
    pub machine_version: &'static str,
    pub mode: DecodeMode,
    pub rows: Vec<TrialRow>,
    pub details: Vec<TrialDetail>,
    pub successes: u32,
    pub trials: u32,
}

impl RunReport {
    /// Exact success fraction as (successes, trials).
    pub fn success_fraction(&self) -> (u32, u32) {
        (self.successes, self.trials)
    }

    pub fn csv_header(ell: usize) -> String {
        let mut cols = vec!["trial_id".to_string(), "success".to_string()];
        for k in 1..=ell {
            cols.push(format!("len_msg_{k}"));
        }
        cols.push("c_profile_digest".to_string());
        cols.push("enum_steps".to_string());
        cols.push("wall_ms".to_string());
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let ell = self.rows.first().map_or(0, |r| r.msg_bits.len());
        let mut out = Self::csv_header(ell);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{}", r.trial_id, r.success));
            for b in &r.msg_bits {
                out.push_str(&format!(",{b}"));
            }
            out.push_str(&format!(
                ",{:016x},{},{}\n",
                r.c_profile_digest, r.enum_steps, r.wall_ms
            ));
        }
        out
    }

    /// Parse rows back out of the documented schema.
    pub fn parse_csv(text: &str) -> Result<Vec<TrialRow>, ExperimentError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| ExperimentError::Csv("empty".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 5 || cols[0] != "trial_id" {
            return Err(ExperimentError::Csv("bad header".into()));
        }
        let ell = cols.len() - 5;
        let mut rows = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != cols.len() {
                return Err(ExperimentError::Csv(format!("short row: {line}")));
            }
            let parse = |s: &str| -> Result<u64, ExperimentError> {
                s.parse().map_err(|_| ExperimentError::Csv(format!("bad number {s}")))
            };
            rows.push(TrialRow {
                trial_id: parse(f[0])? as u32,
                success: f[1] == "true",
                msg_bits: f[2..2 + ell]
                    .iter()
                    .map(|s| parse(s))
                    .collect::<Result<_, _>>()?,
                c_profile_digest: u64::from_str_radix(f[2 + ell], 16)
                    .map_err(|_| ExperimentError::Csv("bad digest".into()))?,
                enum_steps: parse(f[3 + ell])?,
                wall_ms: parse(f[4 + ell])?,
            });
        }
        Ok(rows)
    }
}

/// Counter-mode trial seed splitting, so concurrent execution orders
/// cannot change per-trial randomness.
pub fn trial_seed(master: u64, trial: u32) -> u64 {
    let mut bytes = Vec::with_capacity(12);
    bytes.extend_from_slice(&master.to_be_bytes());
    bytes.extend_from_slice(&trial.to_be_bytes());
    ksw_core::fnv1a64(&bytes)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, ExperimentError> {
    if cfg.trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    if cfg.rates.len() != cfg.ell {
        return Err(ExperimentError::RateCount);
    }
    let schedule = cfg.schedule.derive(cfg.ell, cfg.n, &cfg.rates)?;
    let codec = Codec::new(schedule)?;
    let full_set = IndexSet::full(cfg.ell);

    let mut rows = Vec::with_capacity(cfg.trials as usize);
    let mut details = Vec::with_capacity(cfg.trials as usize);
    let mut successes = 0u32;
    for trial in 0..cfg.trials {
        let started = Instant::now();
        let seed = trial_seed(cfg.seed, trial);
        let tuple = generate(&cfg.model, cfg.ell, cfg.n as usize, seed)?;
        let prof = profile(&tuple);
        let violations = ksw_core::codec::validate_rates(&tuple, &cfg.rates)?;

        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5c5c_5c5c);
        let msgs: Vec<EncodedMessage> = (1..=cfg.ell)
            .map(|k| codec.encode(k, tuple.get(k).expect("in range"), &mut rng))
            .collect::<Result<_, _>>()?;
        let msg_bits: Vec<u64> = msgs.iter().map(|m| m.payload_bits()).collect();

        let (decoded, steps, failure) = match cfg.mode {
            DecodeMode::Oracle => {
                match codec.decode_with_profile(&msgs, &prof, BoundMode::Approximated, cfg.budget)
                {
                    Ok(d) => (Some(d.tuple), d.steps, None),
                    Err(e) => (None, steps_of(&e), Some(e.to_string())),
                }
            }
            DecodeMode::Direct => {
                match codec.decode_with_profile(
                    &msgs,
                    &prof,
                    BoundMode::DirectOracle(&tuple),
                    cfg.budget,
                ) {
                    Ok(d) => (Some(d.tuple), d.steps, None),
                    Err(e) => (None, steps_of(&e), Some(e.to_string())),
                }
            }
            DecodeMode::Any => match codec.decode_any_profile(&msgs, cfg.budget) {
                Ok((tuple, report)) => (Some(tuple), report.total_steps, None),
                Err(e) => (None, steps_of(&e), Some(e.to_string())),
            },
        };

        let success = decoded.as_ref() == Some(&tuple);
        if success {
            successes += 1;
        }
        let overhead_bits =
            msg_bits.iter().sum::<u64>() as i64 - prof.get(&full_set) as i64;
        let chain_rule_slack = (cfg.ell >= 2).then(|| {
            let pair = IndexSet::new([1, 2]);
            let c12 = profile_value_of(&prof, &pair);
            let c1 = profile_value_of(&prof, &IndexSet::new([1]));
            let cond = tuple.project(&IndexSet::new([1])).expect("projection");
            let c2_given =
                complexity_auto(tuple.get(2).expect("sender 2"), &cond) as i64;
            (c12 - c1 - c2_given).abs()
        });

        rows.push(TrialRow {
            trial_id: trial,
            success,
            msg_bits,
            c_profile_digest: prof.digest(),
            enum_steps: steps,
            wall_ms: started.elapsed().as_millis() as u64,
        });
        details.push(TrialDetail {
            rate_violations: violations.len(),
            overhead_bits,
            chain_rule_slack,
            failure,
        });
    }
    let report = RunReport {
        machine_version: ksw_core::MACHINE_VERSION,
        mode: cfg.mode,
        rows,
        details,
        successes,
        trials: cfg.trials,
    };
    if let Some(path) = &cfg.out {
        std::fs::write(path, report.to_csv())?;
    }
    Ok(report)
}

fn profile_value_of(prof: &ksw_core::machine::ComplexityProfile, set: &IndexSet) -> i64 {
    prof.get(set) as i64
}

fn steps_of(e: &CodecError) -> u64 {
    match e {
        CodecError::StepFailed { steps, .. }
        | CodecError::Budget { steps }
        | CodecError::AllGuessesFailed { steps } => *steps,
        _ => 0,
    }
}
