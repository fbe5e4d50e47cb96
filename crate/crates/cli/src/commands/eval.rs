//! Canceller evaluation: cancellation ratios, operation counts, residual
//! spectra.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sic_core::metrics::{self, complexity, ComplexityReport, ComplexitySpec};
use sic_core::opcount::OpCounter;
use sic_core::signal::ComplexSeq;
use sic_core::sigmodel::Dataset;
use sic_core::{lincanc, nncanc, polycanc, Complex64, LinModel, NnModel, PolyModel};

use crate::config::Resolved;
use crate::CliError;

use super::{cdb_test, cdb_train, csv_provenance, load_dataset, model_label, read_text, write_text};

struct Entry {
    name: String,
    recon: Vec<Complex64>,
    lin_only: Vec<Complex64>,
    warmup: usize,
    complexity: ComplexityReport,
}

#[derive(Serialize)]
struct EntryReport {
    name: String,
    c_db_total_test: f64,
    c_db_total_train: f64,
    c_db_linear_only_test: f64,
    nonlinear_increment_db: f64,
    complexity: ComplexityReport,
}

#[derive(Serialize)]
struct EvalReport {
    config_hash: String,
    shared_warmup: usize,
    cancellers: Vec<EntryReport>,
}

pub fn run(
    r: &Resolved,
    out_dir: &Path,
    dataset: &Path,
    linear: Option<PathBuf>,
    poly: Option<PathBuf>,
    nn: &[PathBuf],
    psd: bool,
) -> Result<(), CliError> {
    if linear.is_none() && poly.is_none() && nn.is_empty() {
        return Err(CliError::Config(
            "eval needs at least one model (--linear, --poly or --nn)".into(),
        ));
    }
    let ds = load_dataset(dataset)?;
    let x = ds.x.samples();
    let mut ops = OpCounter::new();
    let mut entries: Vec<Entry> = Vec::new();

    if let Some(path) = &linear {
        let model = LinModel::from_json(&read_text(path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let rec = lincanc::apply_linear(&model, x, &mut ops);
        let l = model.memory_len() as u32;
        entries.push(Entry {
            name: format!("linear:{}", model_label(path)),
            recon: rec.samples.clone(),
            lin_only: rec.samples,
            warmup: l as usize - 1,
            complexity: complexity(ComplexitySpec::Linear { l })
                .map_err(|e| CliError::Data(e.to_string()))?,
        });
    }
    if let Some(path) = &poly {
        let model = PolyModel::from_json(&read_text(path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let companion = super::poly_companion_path(path);
        let lin = LinModel::from_json(&read_text(&companion)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", companion.display())))?;
        let lin_hat = lincanc::apply_linear(&lin, x, &mut ops);
        let poly_hat = polycanc::apply_poly(&model, x, &mut ops);
        let total: Vec<Complex64> =
            lin_hat.samples.iter().zip(&poly_hat.samples).map(|(a, b)| a + b).collect();
        let warmup = (model.memory_len().max(lin.memory_len() as u32) - 1) as usize;
        entries.push(Entry {
            name: format!("poly:{}", model_label(path)),
            recon: total,
            lin_only: lin_hat.samples,
            warmup,
            complexity: complexity(ComplexitySpec::Poly {
                l: model.memory_len(),
                p: model.p_max(),
            })
            .map_err(|e| CliError::Data(e.to_string()))?,
        });
    }
    for path in nn {
        let model = NnModel::from_json(&read_text(path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let hybrid = nncanc::apply_hybrid(&model, x, &mut ops);
        let lin_hat = lincanc::apply_linear(&model.lin, x, &mut ops);
        entries.push(Entry {
            name: format!("nn:{}", model_label(path)),
            recon: hybrid.samples,
            lin_only: lin_hat.samples,
            warmup: model.window_len() as usize - 1,
            complexity: complexity(ComplexitySpec::Nn {
                l: model.window_len(),
                n_l: model.hidden_layers(),
                n_h: model.hidden_width(),
            })
            .map_err(|e| CliError::Data(e.to_string()))?,
        });
    }

    // Compare every canceller on the same support: the largest warm-up wins.
    let shared_warmup = entries.iter().map(|e| e.warmup).max().unwrap_or(0);
    let hash = r.config_hash("eval");
    let mut reports = Vec::with_capacity(entries.len());
    for e in &entries {
        let total_test = cdb_test(&ds, &e.recon, shared_warmup)?;
        let lin_test = cdb_test(&ds, &e.lin_only, shared_warmup)?;
        reports.push(EntryReport {
            name: e.name.clone(),
            c_db_total_test: total_test,
            c_db_total_train: cdb_train(&ds, &e.recon, shared_warmup)?,
            c_db_linear_only_test: lin_test,
            nonlinear_increment_db: total_test - lin_test,
            complexity: e.complexity,
        });
    }
    let report = EvalReport {
        config_hash: format!("0x{hash:016x}"),
        shared_warmup,
        cancellers: reports,
    };
    write_text(
        &out_dir.join("eval_report.json"),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    for e in &report.cancellers {
        println!(
            "{:<24} total {:6.2} dB  (linear {:6.2} dB, nonlinear +{:5.2} dB)  \
             {} add / {} mul per sample",
            e.name,
            e.c_db_total_test,
            e.c_db_linear_only_test,
            e.nonlinear_increment_db,
            e.complexity.n_add,
            e.complexity.n_mul
        );
    }

    if psd {
        write_psds(r, out_dir, &ds, &entries, shared_warmup, hash)?;
    }
    Ok(())
}

/// Residual spectra in the usual comparison layout: the uncancelled signal,
/// one residual per canceller and the receiver noise floor when the dataset
/// carries its noiseless copy.
fn write_psds(
    _r: &Resolved,
    out_dir: &Path,
    ds: &Dataset,
    entries: &[Entry],
    warmup: usize,
    hash: u64,
) -> Result<(), CliError> {
    let from = ds.split_index.max(warmup);
    let fs = ds.x.sample_rate_hz();
    let y = &ds.y.samples()[from..];
    let nfft = (y.len() / 4).next_power_of_two().min(1024).max(64);

    let emit = |name: &str, samples: Vec<Complex64>| -> Result<(), CliError> {
        let seq = ComplexSeq::new(samples, fs).map_err(|e| CliError::Data(e.to_string()))?;
        let est = metrics::psd(&seq, nfft, 0.5).map_err(|e| CliError::Data(e.to_string()))?;
        let mut csv = csv_provenance(hash);
        csv.push_str(&est.to_csv());
        write_text(&out_dir.join(format!("psd_{name}.csv")), &csv)
    };

    emit("no_cancellation", y.to_vec())?;
    for e in entries {
        let residual: Vec<Complex64> =
            y.iter().zip(&e.recon[from..]).map(|(a, b)| a - b).collect();
        let name = e.name.replace(':', "_");
        emit(&format!("residual_{name}"), residual)?;
    }
    if let Some(clean) = &ds.y_clean {
        let noise: Vec<Complex64> =
            y.iter().zip(&clean.samples()[from..]).map(|(a, b)| a - b).collect();
        emit("noise_floor", noise)?;
    }
    Ok(())
}
