//! Datapath bit-width sweep: fixed-point cancellation per canceller as a
//! function of `Q`, with the smallest width that stays within half a dB of
//! the float reference marked per canceller.

use std::path::{Path, PathBuf};

use sic_core::nncanc::fxp::{apply_hybrid_fxp, quantize_nn, FxpNnPlan};
use sic_core::opcount::OpCounter;
use sic_core::polycanc::fxp::{apply_poly_fxp, QuantizedPoly};
use sic_core::sigmodel::Dataset;
use sic_core::{lincanc, nncanc, polycanc, Complex64, LinModel, NnModel, PolyModel};

use crate::config::Resolved;
use crate::CliError;

use super::{cdb_test, csv_provenance, load_dataset, model_label, read_text, write_text};

enum Canceller {
    Poly { model: PolyModel, lin: LinModel },
    Nn { model: NnModel },
}

struct Column {
    name: String,
    canceller: Canceller,
    float_c_db: f64,
    warmup: usize,
}

fn fxp_cdb(
    r: &Resolved,
    ds: &Dataset,
    col: &Column,
    q: u32,
    peak: f64,
) -> Result<f64, CliError> {
    let x = ds.x.samples();
    let mut ops = OpCounter::new();
    match &col.canceller {
        Canceller::Poly { model, lin } => {
            let fmt = r.poly_fmt(q)?;
            let qp = QuantizedPoly::new(model, fmt, peak);
            let n_cpe = r.defaults.hw.poly.n_cpe as usize;
            let fx = apply_poly_fxp(&qp, x, n_cpe.min(qp.n_bf()), &mut ops)
                .map_err(|e| CliError::Data(e.to_string()))?;
            let lin_fx = lincanc::apply_linear_fxp(lin, x, fmt, 1, &mut ops)
                .map_err(|e| CliError::Data(e.to_string()))?;
            let total: Vec<Complex64> = lin_fx
                .samples
                .iter()
                .zip(&fx.samples)
                .map(|(a, b)| a.to_complex64() + b.to_complex64())
                .collect();
            cdb_test(ds, &total, col.warmup)
        }
        Canceller::Nn { model } => {
            let fmt = r.nn_fmt(q)?;
            let dims = nncanc::layer_dims(
                model.window_len(),
                model.hidden_layers(),
                model.hidden_width(),
            );
            let qm = quantize_nn(model, fmt, FxpNnPlan::fully_parallel(&dims));
            let fx = apply_hybrid_fxp(&qm, x, &mut ops)
                .map_err(|e| CliError::Data(e.to_string()))?;
            let total: Vec<Complex64> = fx.samples.iter().map(|s| s.to_complex64()).collect();
            cdb_test(ds, &total, col.warmup)
        }
    }
}

pub fn run(
    r: &Resolved,
    out_dir: &Path,
    dataset: &Path,
    poly: Option<PathBuf>,
    nn: &[PathBuf],
    q_min_flag: Option<u32>,
    q_max_flag: Option<u32>,
) -> Result<(), CliError> {
    if poly.is_none() && nn.is_empty() {
        return Err(CliError::Config("qsweep needs at least one model (--poly or --nn)".into()));
    }
    let q_min = q_min_flag
        .or(r.cfg.quantization.sweep_q_min)
        .unwrap_or(r.defaults.quantization.sweep_q_min);
    let q_max = q_max_flag
        .or(r.cfg.quantization.sweep_q_max)
        .unwrap_or(r.defaults.quantization.sweep_q_max);
    if q_min < 2 || q_max > 32 || q_min > q_max {
        return Err(CliError::Config(format!(
            "bit-width range {q_min}..={q_max} must sit inside 2..=32"
        )));
    }

    let ds = load_dataset(dataset)?;
    let x = ds.x.samples();
    let peak = x.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let mut ops = OpCounter::new();
    let mut columns: Vec<Column> = Vec::new();

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
        columns.push(Column {
            name: format!("poly_{}", model_label(path)),
            float_c_db: cdb_test(&ds, &total, warmup)?,
            canceller: Canceller::Poly { model, lin },
            warmup,
        });
    }
    for path in nn {
        let model = NnModel::from_json(&read_text(path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let hybrid = nncanc::apply_hybrid(&model, x, &mut ops);
        let warmup = model.window_len() as usize - 1;
        columns.push(Column {
            name: format!("nn_{}", model_label(path)),
            float_c_db: cdb_test(&ds, &hybrid.samples, warmup)?,
            canceller: Canceller::Nn { model },
            warmup,
        });
    }

    let hash = r.config_hash("qsweep");
    let mut csv = csv_provenance(hash);
    for col in &columns {
        csv.push_str(&format!("# float_{}={}\n", col.name, col.float_c_db));
    }
    csv.push('q');
    for col in &columns {
        csv.push_str(&format!(",{}", col.name));
    }
    csv.push('\n');

    let mut table: Vec<Vec<f64>> = Vec::new();
    for q in q_min..=q_max {
        let mut row = Vec::with_capacity(columns.len());
        csv.push_str(&q.to_string());
        for col in &columns {
            let c = fxp_cdb(r, &ds, col, q, peak)?;
            csv.push_str(&format!(",{c}"));
            row.push(c);
        }
        csv.push('\n');
        table.push(row);
    }
    // Smallest width within 0.5 dB of the float reference, per canceller.
    for (i, col) in columns.iter().enumerate() {
        let min_q = (q_min..=q_max)
            .zip(table.iter())
            .find(|(_, row)| row[i] >= col.float_c_db - 0.5)
            .map(|(q, _)| q);
        match min_q {
            Some(q) => csv.push_str(&format!("# min_q_within_0.5db_{}={q}\n", col.name)),
            None => csv.push_str(&format!("# min_q_within_0.5db_{}=none\n", col.name)),
        }
    }
    write_text(&out_dir.join("qsweep.csv"), &csv)?;
    println!("qsweep: {} widths x {} cancellers -> qsweep.csv", q_max - q_min + 1, columns.len());
    for col in &columns {
        println!("  {}: float {:.2} dB", col.name, col.float_c_db);
    }
    Ok(())
}
