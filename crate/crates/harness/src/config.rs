//! Structured text configuration (TOML) for the CLI.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::experiment::ExperimentConfig;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    /// minimum success fraction for roundtrip runs, as [num, den]
    pub min_success: Option<(u32, u32)>,
    pub extractor: Option<ExtractorConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtractorConfig {
    Toeplitz {
        n: usize,
        m: usize,
        /// min-entropy of the sampled flat sources
        k: usize,
        /// acceptance threshold as [num, den]
        epsilon: (i64, i64),
        #[serde(default = "default_subsets")]
        random_subsets: usize,
    },
    RandomTable {
        n: usize,
        d: usize,
        m: usize,
        prg_seed: u64,
        k: usize,
        epsilon: (i64, i64),
        #[serde(default = "default_subsets")]
        random_subsets: usize,
    },
}

fn default_subsets() -> usize {
    100
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {0}: {1}")]
    Read(String, std::io::Error),
    #[error("cannot parse {0}: {1}")]
    Parse(String, toml::de::Error),
}

pub fn load(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Read(path.display().to_string(), e))?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::DecodeMode;
    use crate::model::CorrelationModel;

    #[test]
    fn parse_full_config() {
        let text = r#"
            ell = 2
            n = 16
            rates = [18, 26]
            trials = 5
            mode = "oracle"
            seed = 7
            budget = 1000000
            min_success = [9, 10]

            [model]
            kind = "sparse_flips"
            flips = 2

            [schedule]
            c = 4
            a = [1, 1]
            slack_log_coeff = 2

            [[schedule.overrides]]
            k = 1
            gamma = 12
            delta_log2 = 6

            [[schedule.overrides]]
            k = 2
            gamma = 3
            delta_log2 = 2

            [extractor]
            kind = "toeplitz"
            n = 10
            m = 2
            k = 6
            epsilon = [1, 8]
            random_subsets = 25
        "#;
        let cfg: FileConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.experiment.ell, 2);
        assert_eq!(cfg.experiment.mode, DecodeMode::Oracle);
        assert_eq!(
            cfg.experiment.model,
            CorrelationModel::SparseFlips { flips: 2 }
        );
        assert_eq!(cfg.experiment.schedule.overrides.len(), 2);
        assert_eq!(cfg.min_success, Some((9, 10)));
        assert!(matches!(
            cfg.extractor,
            Some(ExtractorConfig::Toeplitz { n: 10, m: 2, .. })
        ));
    }

    #[test]
    fn parse_rejects_malformed() {
        assert!(toml::from_str::<FileConfig>("ell = \"two\"").is_err());
    }
}
