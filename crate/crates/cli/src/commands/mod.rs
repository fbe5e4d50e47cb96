//! Subcommand implementations and shared evaluation plumbing.

pub mod eval;
pub mod fit;
pub mod gen;
pub mod hwreport;
pub mod qsweep;
pub mod sweep;
pub mod train;

use std::path::{Path, PathBuf};

use sic_core::metrics;
use sic_core::sigmodel::{file as dsfile, Dataset};
use sic_core::Complex64;

use crate::CliError;

/// Load a dataset file with data-error mapping.
pub fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    dsfile::load_dataset(path)
        .map_err(|e| CliError::Data(format!("dataset {}: {e}", path.display())))
}

/// Cancellation ratio over the test split, excluding `warmup` samples from
/// the front of the sequence so every canceller is compared on the same
/// support.
pub fn cdb_test(ds: &Dataset, recon: &[Complex64], warmup: usize) -> Result<f64, CliError> {
    let from = ds.split_index.max(warmup);
    metrics::c_db(&ds.y.samples()[from..], &recon[from..])
        .map_err(|e| CliError::Data(e.to_string()))
}

/// Cancellation ratio over the training split.
pub fn cdb_train(ds: &Dataset, recon: &[Complex64], warmup: usize) -> Result<f64, CliError> {
    metrics::c_db(&ds.y.samples()[warmup..ds.split_index], &recon[warmup..ds.split_index])
        .map_err(|e| CliError::Data(e.to_string()))
}

/// Companion linear-model path of a polynomial model file:
/// `model_poly.json` -> `model_poly_linear.json`.
pub fn poly_companion_path(poly: &Path) -> PathBuf {
    let stem = poly.file_stem().and_then(|s| s.to_str()).unwrap_or("model_poly");
    poly.with_file_name(format!("{stem}_linear.json"))
}

pub fn write_text(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

/// Standard first line of every CSV artifact.
pub fn csv_provenance(hash: u64) -> String {
    format!("# config_hash=0x{hash:016x}\n")
}

/// File stem used to label a model column in reports.
pub fn model_label(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("model").to_string()
}
