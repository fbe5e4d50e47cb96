//! Least-squares canceller fitting.

use std::path::Path;

use serde::Serialize;
use sic_core::metrics::{complexity, ComplexityReport, ComplexitySpec};
use sic_core::opcount::OpCounter;
use sic_core::{lincanc, polycanc, Complex64};

use crate::config::Resolved;
use crate::CliError;

use super::{cdb_test, cdb_train, load_dataset, write_text};

#[derive(Serialize)]
struct FitReport {
    kind: String,
    l: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<u32>,
    c_db_train: f64,
    c_db_test: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_db_linear_only_test: Option<f64>,
    complexity: ComplexityReport,
    config_hash: String,
}

pub fn run(
    r: &Resolved,
    out_dir: &Path,
    dataset: &Path,
    kind: &str,
    l_flag: Option<u32>,
    p_flag: Option<u32>,
    out_name: Option<&str>,
) -> Result<(), CliError> {
    let ds = load_dataset(dataset)?;
    let x = ds.x.samples();
    let split = ds.split_index;
    let hash = r.config_hash("fit");
    let mut ops = OpCounter::new();

    match kind {
        "linear" => {
            let l = l_flag
                .or(r.cfg.cancellers.linear_l)
                .unwrap_or(r.defaults.cancellers.linear_l);
            let model = lincanc::fit_linear(&x[..split], &ds.y.samples()[..split], l as usize)?;
            let recon = lincanc::apply_linear(&model, x, &mut ops);
            let report = FitReport {
                kind: "linear".into(),
                l,
                p: None,
                c_db_train: cdb_train(&ds, &recon.samples, recon.valid_from)?,
                c_db_test: cdb_test(&ds, &recon.samples, recon.valid_from)?,
                c_db_linear_only_test: None,
                complexity: complexity(ComplexitySpec::Linear { l })
                    .map_err(|e| CliError::Config(e.to_string()))?,
                config_hash: format!("0x{hash:016x}"),
            };
            let name = out_name.unwrap_or("model_linear.json");
            write_text(&out_dir.join(name), &model.to_json())?;
            finish(out_dir, name, report)
        }
        "poly" => {
            let l = l_flag.or(r.cfg.cancellers.poly_l).unwrap_or(r.defaults.cancellers.poly_l);
            let p = p_flag.or(r.cfg.cancellers.poly_p).unwrap_or(r.defaults.cancellers.poly_p);
            let lin = lincanc::fit_linear(&x[..split], &ds.y.samples()[..split], l as usize)?;
            let lin_hat = lincanc::apply_linear(&lin, x, &mut ops);
            let residual: Vec<Complex64> = ds.y.samples()[..split]
                .iter()
                .zip(&lin_hat.samples[..split])
                .map(|(a, b)| a - b)
                .collect();
            let model = polycanc::fit_poly(&x[..split], &residual, p, l)?;
            let poly_hat = polycanc::apply_poly(&model, x, &mut ops);
            let total: Vec<Complex64> = lin_hat
                .samples
                .iter()
                .zip(&poly_hat.samples)
                .map(|(a, b)| a + b)
                .collect();
            let warmup = l as usize - 1;
            let report = FitReport {
                kind: "poly".into(),
                l,
                p: Some(p),
                c_db_train: cdb_train(&ds, &total, warmup)?,
                c_db_test: cdb_test(&ds, &total, warmup)?,
                c_db_linear_only_test: Some(cdb_test(&ds, &lin_hat.samples, warmup)?),
                complexity: complexity(ComplexitySpec::Poly { l, p })
                    .map_err(|e| CliError::Config(e.to_string()))?,
                config_hash: format!("0x{hash:016x}"),
            };
            let name = out_name.unwrap_or("model_poly.json");
            let path = out_dir.join(name);
            write_text(&path, &model.to_json())?;
            write_text(&super::poly_companion_path(&path), &lin.to_json())?;
            finish(out_dir, name, report)
        }
        other => Err(CliError::Config(format!(
            "unknown canceller kind '{other}' (expected 'linear' or 'poly')"
        ))),
    }
}

fn finish(out_dir: &Path, model_name: &str, report: FitReport) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let report_name = format!(
        "{}_report.json",
        Path::new(model_name).file_stem().and_then(|s| s.to_str()).unwrap_or("model")
    );
    write_text(&out_dir.join(&report_name), &json)?;
    println!("model:  {}", out_dir.join(model_name).display());
    println!("report: {}", out_dir.join(report_name).display());
    println!(
        "C_dB train {:.2}, test {:.2}{}",
        report.c_db_train,
        report.c_db_test,
        report
            .c_db_linear_only_test
            .map(|v| format!(" (linear stage alone {v:.2})"))
            .unwrap_or_default()
    );
    Ok(())
}
