//! Declarative experiment configuration.
//!
//! A run is described by one TOML file whose sections mirror the embedded
//! defaults; anything omitted falls back to those defaults and unknown keys
//! are rejected. Command-line flags override file values. Every output file
//! embeds a hash of the fully resolved configuration so results stay
//! traceable to their inputs.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sic_core::presets::SynthDefaults;
use sic_core::sigmodel::{OfdmParams, PaTerm, TxChainConfig};

use crate::CliError;

#[derive(Debug, Default, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub n_samples: Option<usize>,
    pub n_carriers: Option<usize>,
    pub oversample: Option<usize>,
    pub sample_rate_hz: Option<f64>,
    pub iq_gain_mismatch: Option<f64>,
    pub iq_phase_mismatch: Option<f64>,
    pub snr_db: Option<f64>,
    pub si_channel: Option<Vec<[f64; 2]>>,
    pub pa: Option<Vec<PaTerm>>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CancellerSection {
    pub linear_l: Option<u32>,
    pub poly_l: Option<u32>,
    pub poly_p: Option<u32>,
    pub nn_l: Option<u32>,
    pub nn_n_h: Option<u32>,
    pub nn_n_l: Option<u32>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct QuantizationSection {
    pub poly_q: Option<u32>,
    pub nn_q: Option<u32>,
    pub poly_int_bits: Option<u32>,
    pub nn_int_bits: Option<u32>,
    pub sweep_q_min: Option<u32>,
    pub sweep_q_max: Option<u32>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct HardwareSection {
    /// `equi`, `peak`, `poly` or `all`.
    pub preset: Option<String>,
    pub n_pe: Option<Vec<u32>>,
    pub n_cpe_linear: Option<u32>,
    pub n_cpe: Option<u32>,
    pub n_cpe_bf: Option<u32>,
    pub clock_hz: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub family: Option<String>,
    pub l_values: Option<Vec<u32>>,
    pub p_values: Option<Vec<u32>>,
    pub n_h_values: Option<Vec<u32>>,
    /// Back-off below the family maximum tolerated when picking the
    /// cheapest configuration.
    pub backoff_db: Option<f64>,
}

/// Whole-experiment description. Everything optional; omissions resolve to
/// the embedded defaults.
#[derive(Debug, Default, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub dataset: DatasetSection,
    pub cancellers: CancellerSection,
    pub train: TrainSection,
    pub quantization: QuantizationSection,
    pub hardware: HardwareSection,
    pub sweep: SweepSection,
}

impl RunConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self, CliError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&raw)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
    }
}

/// Fully resolved parameters for one run: defaults overlaid with the config
/// file and command-line flags.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub defaults: SynthDefaults,
    pub cfg: RunConfig,
    pub seed: u64,
}

impl Resolved {
    pub fn new(cfg: RunConfig, seed_flag: Option<u64>) -> Self {
        let defaults = SynthDefaults::load();
        let seed = seed_flag.or(cfg.seed).unwrap_or(defaults.dataset.seed);
        Self { defaults, cfg, seed }
    }

    pub fn n_samples(&self) -> usize {
        self.cfg.dataset.n_samples.unwrap_or(self.defaults.dataset.n_samples)
    }

    pub fn tx_chain(&self) -> TxChainConfig {
        let d = &self.defaults;
        let s = &self.cfg.dataset;
        TxChainConfig {
            iq_gain_mismatch: s.iq_gain_mismatch.unwrap_or(d.chain.iq_gain_mismatch),
            iq_phase_mismatch: s.iq_phase_mismatch.unwrap_or(d.chain.iq_phase_mismatch),
            pa_terms: s.pa.clone().unwrap_or_else(|| d.chain.pa.clone()),
            si_channel: s.si_channel.clone().unwrap_or_else(|| d.chain.si_channel.clone()),
            snr_db: s.snr_db.unwrap_or(d.chain.snr_db),
            seed: self.seed,
            ofdm: OfdmParams {
                n_carriers: s.n_carriers.unwrap_or(d.dataset.n_carriers),
                oversample: s.oversample.unwrap_or(d.dataset.oversample),
                sample_rate_hz: s.sample_rate_hz.unwrap_or(d.dataset.sample_rate_hz),
            },
        }
    }

    pub fn train_config(&self) -> sic_core::nncanc::TrainConfig {
        let d = &self.defaults;
        sic_core::nncanc::TrainConfig {
            batch_size: self.cfg.train.batch_size.unwrap_or(d.train.batch_size),
            learning_rate: self.cfg.train.learning_rate.unwrap_or(d.train.learning_rate),
            epochs: self.cfg.train.epochs.unwrap_or(d.train.epochs),
            seed: self.cfg.train.seed.unwrap_or(d.train.seed),
            ..sic_core::nncanc::TrainConfig::default()
        }
    }

    pub fn nn_fmt(&self, q: u32) -> Result<sic_core::FxpFormat, CliError> {
        let int_bits =
            self.cfg.quantization.nn_int_bits.unwrap_or(self.defaults.quantization.nn_int_bits);
        sic_core::FxpFormat::new(q, q.saturating_sub(int_bits))
            .map_err(|e| CliError::Config(format!("invalid network bit-width {q}: {e}")))
    }

    pub fn poly_fmt(&self, q: u32) -> Result<sic_core::FxpFormat, CliError> {
        let int_bits =
            self.cfg.quantization.poly_int_bits.unwrap_or(self.defaults.quantization.poly_int_bits);
        sic_core::FxpFormat::new(q, q.saturating_sub(int_bits))
            .map_err(|e| CliError::Config(format!("invalid polynomial bit-width {q}: {e}")))
    }

    /// Hash of the resolved run parameters plus a command tag; embedded in
    /// every output artifact.
    pub fn config_hash(&self, command: &str) -> u64 {
        let canonical = format!(
            "command={command}\nseed={}\nconfig={}\n",
            self.seed,
            toml::to_string(&self.cfg).expect("run config serializes")
        );
        fnv1a64(canonical.as_bytes())
    }
}

/// FNV-1a, 64-bit: small, stable, dependency-free provenance hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
