//! Hybrid network canceller training.

use std::path::Path;

use serde::Serialize;
use sic_core::metrics::{complexity, ComplexityReport, ComplexitySpec};
use sic_core::nncanc::{self, TrainError};
use sic_core::opcount::OpCounter;

use crate::config::Resolved;
use crate::CliError;

use super::{cdb_test, cdb_train, csv_provenance, load_dataset, write_text};

#[derive(Serialize)]
struct TrainReport {
    l: u32,
    n_l: u32,
    n_h: u32,
    epochs: usize,
    c_db_train: f64,
    c_db_test: f64,
    c_db_linear_only_test: f64,
    final_train_mse: f64,
    final_test_mse: f64,
    complexity: ComplexityReport,
    config_hash: String,
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    r: &Resolved,
    out_dir: &Path,
    dataset: &Path,
    l_flag: Option<u32>,
    n_h_flag: Option<u32>,
    n_l_flag: Option<u32>,
    epochs_flag: Option<usize>,
    out_name: &str,
) -> Result<(), CliError> {
    let ds = load_dataset(dataset)?;
    let l = l_flag.or(r.cfg.cancellers.nn_l).unwrap_or(r.defaults.cancellers.nn_small_l);
    let n_h = n_h_flag.or(r.cfg.cancellers.nn_n_h).unwrap_or(r.defaults.cancellers.nn_small_n_h);
    let n_l = n_l_flag.or(r.cfg.cancellers.nn_n_l).unwrap_or(r.defaults.cancellers.n_l);
    let mut tc = r.train_config();
    if let Some(e) = epochs_flag {
        tc.epochs = e;
    }

    let outcome = nncanc::train(&ds, l, n_l, n_h, &tc).map_err(|e| match e {
        TrainError::BadConfig(m) => CliError::Config(m),
        other => CliError::Data(other.to_string()),
    })?;

    let mut ops = OpCounter::new();
    let hybrid = nncanc::apply_hybrid(&outcome.model, ds.x.samples(), &mut ops);
    let lin_only = sic_core::lincanc::apply_linear(&outcome.model.lin, ds.x.samples(), &mut ops);
    let warmup = l as usize - 1;
    let hash = r.config_hash("train");
    let last = outcome.log.epochs.last().expect("at least one epoch");
    let report = TrainReport {
        l,
        n_l,
        n_h,
        epochs: tc.epochs,
        c_db_train: cdb_train(&ds, &hybrid.samples, warmup)?,
        c_db_test: cdb_test(&ds, &hybrid.samples, warmup)?,
        c_db_linear_only_test: cdb_test(&ds, &lin_only.samples, warmup)?,
        final_train_mse: last.train_mse,
        final_test_mse: last.test_mse,
        complexity: complexity(ComplexitySpec::Nn { l, n_l, n_h })
            .map_err(|e| CliError::Config(e.to_string()))?,
        config_hash: format!("0x{hash:016x}"),
    };

    write_text(&out_dir.join(out_name), &outcome.model.to_json())?;
    let stem = Path::new(out_name).file_stem().and_then(|s| s.to_str()).unwrap_or("model_nn");
    let log_name = format!("{stem}_train_log.csv");
    let mut csv = csv_provenance(hash);
    csv.push_str(&outcome.log.to_csv());
    write_text(&out_dir.join(&log_name), &csv)?;
    write_text(
        &out_dir.join(format!("{stem}_report.json")),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;

    println!("model:     {}", out_dir.join(out_name).display());
    println!("train log: {}", out_dir.join(log_name).display());
    println!(
        "C_dB train {:.2}, test {:.2} (linear stage alone {:.2})",
        report.c_db_train, report.c_db_test, report.c_db_linear_only_test
    );
    Ok(())
}
