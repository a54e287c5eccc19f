//! Run configuration: a TOML file whose values command-line flags override.
//!
//! ```toml
//! [data]
//! input = "tbm3.csv"       # CSV with a date column and a rate column
//! date_column = "0"        # zero-based index or header name
//! rate_column = "1"
//!
//! [shift]
//! mode = "none"            # none | fixed | fit
//! value = 0.0              # used when mode = "fixed"
//! bins = 40                # conditional-sdv bins when mode = "fit"
//! min_occupancy = 50
//!
//! [fit]
//! models = ["cev-normal", "msm9", "garch"]
//! linear_drift = false     # append "-linear" to every model id
//! starts = 2               # Latin-hypercube starts besides the warm starts
//! restarts = 2
//! max_iter = 5000
//! seed = 7
//! max_levels = 16          # largest MSM order accepted
//! variance_init = "sample" # sample | unconditional
//!
//! [evaluate]               # evaluate at fixed parameters instead of fitting
//! msm9 = [6.93e-5, 0.1984, 1.462, 3.864, 0.931, 0.06029]
//!
//! [warm_start]             # extra starting points per model
//! garch = [[1e-4, 0.2, 1e-5, 0.1, 0.85, 4.0]]
//!
//! [start_box.msm9]         # Latin-hypercube box per parameter
//! b = [2.0, 6.0]
//!
//! [vuong]
//! reference = "msm9"
//! hac_lag = 12             # default floor(4 (m/100)^(2/9))
//!
//! [output]
//! dir = "out"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub shift: ShiftConfig,
    pub fit: FitConfig,
    pub evaluate: BTreeMap<String, Vec<f64>>,
    pub warm_start: BTreeMap<String, Vec<Vec<f64>>>,
    pub start_box: BTreeMap<String, BTreeMap<String, [f64; 2]>>,
    pub vuong: VuongConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub input: Option<PathBuf>,
    pub date_column: String,
    pub rate_column: String,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            input: None,
            date_column: "0".into(),
            rate_column: "1".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftMode {
    #[default]
    None,
    Fixed,
    Fit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftConfig {
    pub mode: ShiftMode,
    pub value: f64,
    pub bins: usize,
    pub min_occupancy: usize,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            mode: ShiftMode::None,
            value: 0.0,
            bins: 40,
            min_occupancy: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceInitConfig {
    #[default]
    Sample,
    Unconditional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub models: Vec<String>,
    pub linear_drift: bool,
    pub starts: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: Option<u64>,
    pub max_levels: usize,
    pub variance_init: VarianceInitConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            models: Vec::new(),
            linear_drift: false,
            starts: 2,
            restarts: 2,
            max_iter: 5000,
            seed: None,
            max_levels: levelmsm::msm::DEFAULT_MAX_LEVELS,
            variance_init: VarianceInitConfig::Sample,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VuongConfig {
    pub reference: Option<String>,
    pub hac_lag: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Canonical TOML of the effective configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical TOML, as lowercase hex.
    pub fn hash(&self) -> String {
        hex_digest(self.to_toml().as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_parses() {
        let doc: String = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start_matches(' '))
            .collect::<Vec<_>>()
            .join("\n");
        let c = RunConfig::parse(&doc).unwrap();
        assert_eq!(c.fit.models.len(), 3);
        assert_eq!(c.fit.seed, Some(7));
        assert_eq!(c.shift.mode, ShiftMode::None);
        assert_eq!(c.evaluate["msm9"].len(), 6);
        assert_eq!(c.start_box["msm9"]["b"], [2.0, 6.0]);
        assert_eq!(c.vuong.hac_lag, Some(12));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("[fit]\nstart = 3\n").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.fit.seed = Some(1);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn canonical_form_round_trips() {
        let mut c = RunConfig::default();
        c.fit.models = vec!["msm3".into()];
        c.evaluate.insert("msm3".into(), vec![0.0, 0.5, 1.5, 3.0, 0.5, 0.1]);
        let back = RunConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }
}
