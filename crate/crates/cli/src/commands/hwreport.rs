//! Hardware reports: closed-form timing next to measured cycle-simulation
//! results for the preset architectures.
//!
//! The cycle simulators run real quantized parameters over a deterministic
//! input stream. When no model file is supplied, seeded pseudo-random
//! parameters stand in; the timing does not depend on parameter values,
//! only the datapath contents do.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sic_core::hwmodel::{
    nn_pipeline_report, poly_hw_report, simulate_nn_pipeline, simulate_poly, HwReport, NnHwConfig,
    PolyHwConfig,
};
use sic_core::nncanc::fxp::{quantize_nn, FxpNnPlan};
use sic_core::nncanc::{layer_dims, NnModel, RealMat};
use sic_core::polycanc::fxp::QuantizedPoly;
use sic_core::polycanc::PolyModel;
use sic_core::{lincanc::LinModel, Complex64};

use crate::config::Resolved;
use crate::CliError;

use super::{read_text, write_text};

fn random_input(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
}

/// Placeholder network with seeded parameters matching the preset shape.
fn stand_in_nn(cfg: &NnHwConfig, seed: u64) -> NnModel {
    let dims = layer_dims(cfg.dims.l, cfg.dims.n_l, cfg.dims.n_h);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<RealMat> = (0..dims.len() - 1)
        .map(|i| {
            let mut m = RealMat::zeros(dims[i + 1], dims[i]);
            m.data.iter_mut().for_each(|v| *v = 0.5 * (rng.gen::<f64>() - 0.5));
            m
        })
        .collect();
    let biases: Vec<Vec<f64>> =
        (1..dims.len()).map(|i| (0..dims[i]).map(|_| 0.1 * (rng.gen::<f64>() - 0.5)).collect()).collect();
    let lin = LinModel::new(
        (0..cfg.dims.l)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect(),
    );
    NnModel::new(
        cfg.dims.l,
        cfg.dims.n_l,
        cfg.dims.n_h,
        weights,
        biases,
        lin,
        (-2, -2),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        1.0,
    )
}

fn stand_in_poly(cfg: &PolyHwConfig, seed: u64) -> PolyModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sic_core::metrics::bf_count(cfg.l, cfg.p) as usize;
    PolyModel::new(
        cfg.p,
        cfg.l,
        (0..n)
            .map(|_| Complex64::new(0.1 * (rng.gen::<f64>() - 0.5), 0.1 * (rng.gen::<f64>() - 0.5)))
            .collect(),
    )
}

#[derive(Serialize)]
struct ReportFile {
    preset: String,
    config_hash: String,
    report: HwReport,
}

fn nn_preset_report(
    r: &Resolved,
    out_dir: &Path,
    name: &str,
    cfg: &NnHwConfig,
    model: Option<&NnModel>,
) -> Result<(), CliError> {
    let stand_in;
    let model = match model {
        Some(m) => {
            let dims_ok = m.window_len() == cfg.dims.l
                && m.hidden_layers() == cfg.dims.n_l
                && m.hidden_width() == cfg.dims.n_h;
            if !dims_ok {
                return Err(CliError::Constraint(format!(
                    "model dimensions do not match the '{name}' preset \
                     (expected L={}, N_l={}, N_h={})",
                    cfg.dims.l, cfg.dims.n_l, cfg.dims.n_h
                )));
            }
            m
        }
        None => {
            stand_in = stand_in_nn(cfg, r.seed);
            &stand_in
        }
    };
    let dims = layer_dims(cfg.dims.l, cfg.dims.n_l, cfg.dims.n_h);
    let n_pe: Vec<u32> = cfg.stages.iter().map(|s| s.n_pe).collect();
    let mut qm = quantize_nn(model, cfg.stages[0].fmt, FxpNnPlan::from_pe_counts(&dims, &n_pe));
    qm.lin_cpe = cfg.n_cpe_linear as usize;
    let x = random_input(cfg.dims.l as usize + 40, r.seed ^ 0x5157);
    let (_, report) = simulate_nn_pipeline(&qm, cfg, &x)?;
    emit(r, out_dir, name, report)
}

fn poly_preset_report(
    r: &Resolved,
    out_dir: &Path,
    cfg: &PolyHwConfig,
    model: Option<&PolyModel>,
) -> Result<(), CliError> {
    let stand_in;
    let model = match model {
        Some(m) => {
            if m.p_max() != cfg.p || m.memory_len() != cfg.l {
                return Err(CliError::Constraint(format!(
                    "model dimensions do not match the polynomial preset \
                     (expected L={}, P={})",
                    cfg.l, cfg.p
                )));
            }
            m
        }
        None => {
            stand_in = stand_in_poly(cfg, r.seed);
            &stand_in
        }
    };
    let x = random_input(cfg.l as usize + 40, r.seed ^ 0x9019);
    let peak = x.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let qp = QuantizedPoly::new(model, cfg.fmt, peak);
    let (_, report) = simulate_poly(&qp, cfg, &x)?;
    emit(r, out_dir, "poly", report)
}

fn emit(r: &Resolved, out_dir: &Path, name: &str, report: HwReport) -> Result<(), CliError> {
    let hash = r.config_hash("hwreport");
    print!("{}", report.to_text_table());
    let file = ReportFile {
        preset: name.into(),
        config_hash: format!("0x{hash:016x}"),
        report,
    };
    write_text(
        &out_dir.join(format!("hwreport_{name}.json")),
        &serde_json::to_string_pretty(&file).expect("report serializes"),
    )?;
    let txt_name = format!("hwreport_{name}.txt");
    let mut txt = format!("# config_hash=0x{hash:016x}\n");
    txt.push_str(&file.report.to_text_table());
    write_text(&out_dir.join(txt_name), &txt)
}

pub fn run(
    r: &Resolved,
    out_dir: &Path,
    preset: &str,
    nn_model_path: Option<PathBuf>,
    poly_model_path: Option<PathBuf>,
) -> Result<(), CliError> {
    let nn_model = match &nn_model_path {
        Some(p) => Some(
            NnModel::from_json(&read_text(p)?)
                .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    let poly_model = match &poly_model_path {
        Some(p) => Some(
            PolyModel::from_json(&read_text(p)?)
                .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };

    // Explicit hardware section overrides the named presets.
    if let Some(n_pe) = &r.cfg.hardware.n_pe {
        let d = &r.defaults;
        let dims = sic_core::hwmodel::NnDims {
            l: r.cfg.cancellers.nn_l.unwrap_or(d.cancellers.nn_small_l),
            n_l: r.cfg.cancellers.nn_n_l.unwrap_or(d.cancellers.n_l),
            n_h: r.cfg.cancellers.nn_n_h.unwrap_or(d.cancellers.nn_small_n_h),
        };
        let fmt = r.nn_fmt(r.cfg.quantization.nn_q.unwrap_or(d.quantization.nn_small_q))?;
        let cfg = NnHwConfig::for_network(
            dims,
            n_pe,
            r.cfg.hardware.n_cpe_linear.unwrap_or(1),
            fmt,
            r.cfg.hardware.clock_hz,
        )?;
        let analytical = nn_pipeline_report(&cfg)?;
        let _ = analytical;
        return nn_preset_report(r, out_dir, "custom", &cfg, nn_model.as_ref());
    }

    match preset {
        "equi" => nn_preset_report(r, out_dir, "equi", &r.defaults.equi_hw(), nn_model.as_ref()),
        "peak" => nn_preset_report(r, out_dir, "peak", &r.defaults.peak_hw(), nn_model.as_ref()),
        "poly" => {
            let mut cfg = r.defaults.poly_hw();
            if let Some(n_cpe) = r.cfg.hardware.n_cpe {
                cfg.n_cpe = n_cpe;
            }
            if let Some(n_cpe_bf) = r.cfg.hardware.n_cpe_bf {
                cfg.n_cpe_bf = n_cpe_bf;
            }
            let _ = poly_hw_report(&cfg)?;
            poly_preset_report(r, out_dir, &cfg, poly_model.as_ref())
        }
        "all" => {
            nn_preset_report(r, out_dir, "equi", &r.defaults.equi_hw(), None)?;
            nn_preset_report(r, out_dir, "peak", &r.defaults.peak_hw(), None)?;
            poly_preset_report(r, out_dir, &r.defaults.poly_hw(), poly_model.as_ref())
        }
        other => Err(CliError::Config(format!(
            "unknown preset '{other}' (expected 'equi', 'peak', 'poly' or 'all')"
        ))),
    }
}
