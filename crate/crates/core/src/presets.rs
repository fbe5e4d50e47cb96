//! Default experiment parameters, parsed from one embedded TOML file.
//!
//! `defaults.toml` is the single home for the synthetic-chain coefficients,
//! canceller dimensions, training schedule, quantization presets and
//! hardware presets, so experiments can be reproduced from data rather than
//! from constants scattered through code.

use serde::Deserialize;

use crate::fxp::FxpFormat;
use crate::hwmodel::{NnDims, NnHwConfig, PolyHwConfig};
use crate::nncanc::TrainConfig;
use crate::sigmodel::{OfdmParams, PaTerm, TxChainConfig};

const DEFAULTS_TOML: &str = include_str!("sigmodel/defaults.toml");

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DatasetDefaults {
    pub n_samples: usize,
    pub n_carriers: usize,
    pub oversample: usize,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChainDefaults {
    pub iq_gain_mismatch: f64,
    pub iq_phase_mismatch: f64,
    pub snr_db: f64,
    pub si_channel: Vec<[f64; 2]>,
    pub pa: Vec<PaTerm>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CancellerDefaults {
    pub linear_l: u32,
    pub poly_l: u32,
    pub poly_p: u32,
    pub nn_small_l: u32,
    pub nn_small_n_h: u32,
    pub nn_large_l: u32,
    pub nn_large_n_h: u32,
    pub n_l: u32,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrainDefaults {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct QuantizationDefaults {
    pub poly_int_bits: u32,
    pub nn_int_bits: u32,
    pub nn_small_q: u32,
    pub nn_large_q: u32,
    pub poly_q: u32,
    pub sweep_q_min: u32,
    pub sweep_q_max: u32,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NnHwPreset {
    pub n_pe: Vec<u32>,
    pub n_cpe_linear: u32,
    pub clock_hz: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PolyHwPreset {
    pub n_cpe: u32,
    pub n_cpe_bf: u32,
    pub clock_hz: f64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HwDefaults {
    pub equi: NnHwPreset,
    pub peak: NnHwPreset,
    pub poly: PolyHwPreset,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CalibrationDefaults {
    pub min_nonlinear_gain_db: f64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SynthDefaults {
    pub dataset: DatasetDefaults,
    pub chain: ChainDefaults,
    pub cancellers: CancellerDefaults,
    pub train: TrainDefaults,
    pub quantization: QuantizationDefaults,
    pub hw: HwDefaults,
    pub calibration: CalibrationDefaults,
}

impl SynthDefaults {
    /// Parse the embedded defaults file.
    pub fn load() -> Self {
        toml::from_str(DEFAULTS_TOML).expect("embedded defaults must parse")
    }

    /// The raw defaults file contents (for CLI `--dump-defaults` style use).
    pub fn raw_toml() -> &'static str {
        DEFAULTS_TOML
    }

    /// Transmit-chain configuration with an optional seed override.
    pub fn tx_chain(&self, seed: Option<u64>) -> TxChainConfig {
        TxChainConfig {
            iq_gain_mismatch: self.chain.iq_gain_mismatch,
            iq_phase_mismatch: self.chain.iq_phase_mismatch,
            pa_terms: self.chain.pa.clone(),
            si_channel: self.chain.si_channel.clone(),
            snr_db: self.chain.snr_db,
            seed: seed.unwrap_or(self.dataset.seed),
            ofdm: OfdmParams {
                n_carriers: self.dataset.n_carriers,
                oversample: self.dataset.oversample,
                sample_rate_hz: self.dataset.sample_rate_hz,
            },
        }
    }

    pub fn train_config(&self, seed: Option<u64>) -> TrainConfig {
        TrainConfig {
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            epochs: self.train.epochs,
            seed: seed.unwrap_or(self.train.seed),
            ..TrainConfig::default()
        }
    }

    /// Polynomial-datapath format for a bit-width: `q - poly_int_bits`
    /// fraction bits.
    pub fn fxp_format_poly(&self, q: u32) -> FxpFormat {
        let frac = q.saturating_sub(self.quantization.poly_int_bits);
        FxpFormat::new(q, frac).expect("bit-widths in 5..=32 are valid under the default split")
    }

    /// Network-datapath format for a bit-width: `q - nn_int_bits` fraction
    /// bits (clamped so tiny widths keep zero fraction bits).
    pub fn fxp_format_nn(&self, q: u32) -> FxpFormat {
        let frac = q.saturating_sub(self.quantization.nn_int_bits);
        FxpFormat::new(q, frac).expect("bit-widths in 5..=32 are valid under the default split")
    }

    pub fn equi_hw(&self) -> NnHwConfig {
        let dims = NnDims {
            l: self.cancellers.nn_small_l,
            n_l: self.cancellers.n_l,
            n_h: self.cancellers.nn_small_n_h,
        };
        NnHwConfig::for_network(
            dims,
            &self.hw.equi.n_pe,
            self.hw.equi.n_cpe_linear,
            self.fxp_format_nn(self.quantization.nn_small_q),
            Some(self.hw.equi.clock_hz),
        )
        .expect("default preset is consistent")
    }

    pub fn peak_hw(&self) -> NnHwConfig {
        let dims = NnDims {
            l: self.cancellers.nn_large_l,
            n_l: self.cancellers.n_l,
            n_h: self.cancellers.nn_large_n_h,
        };
        NnHwConfig::for_network(
            dims,
            &self.hw.peak.n_pe,
            self.hw.peak.n_cpe_linear,
            self.fxp_format_nn(self.quantization.nn_large_q),
            Some(self.hw.peak.clock_hz),
        )
        .expect("default preset is consistent")
    }

    pub fn poly_hw(&self) -> PolyHwConfig {
        PolyHwConfig {
            p: self.cancellers.poly_p,
            l: self.cancellers.poly_l,
            n_cpe: self.hw.poly.n_cpe,
            n_cpe_bf: self.hw.poly.n_cpe_bf,
            fmt: self.fxp_format_poly(self.quantization.poly_q),
            clock_hz: Some(self.hw.poly.clock_hz),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_validate() {
        let d = SynthDefaults::load();
        assert_eq!(d.dataset.n_samples, 20480);
        d.tx_chain(None).validate().unwrap();
        assert_eq!(d.train_config(None).batch_size, 32);
        assert_eq!(d.fxp_format_poly(25).frac_bits(), 21);
        assert_eq!(d.fxp_format_nn(16).frac_bits(), 10);
    }

    #[test]
    fn hw_presets_hit_published_numbers() {
        let d = SynthDefaults::load();
        let equi = crate::hwmodel::nn_pipeline_report(&d.equi_hw()).unwrap();
        assert_eq!(equi.throughput_samples_per_cycle(), "1/4");
        let peak = crate::hwmodel::nn_pipeline_report(&d.peak_hw()).unwrap();
        assert_eq!(peak.throughput_samples_per_cycle(), "1/7");
        let poly = crate::hwmodel::poly_hw_report(&d.poly_hw()).unwrap();
        assert_eq!(poly.analytical_latency_cycles, Some(8));
        assert_eq!(poly.throughput_samples_per_cycle(), "1/7");
    }

    #[test]
    fn chain_noise_sits_below_distortion() {
        let d = SynthDefaults::load();
        // The synthetic design premise: distortion above the noise floor.
        assert!(d.chain.snr_db >= 30.0);
        assert!(d.chain.pa.iter().any(|t| t.p >= 3 && t.coeff().norm() > 0.0));
    }
}
