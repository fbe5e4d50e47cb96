//! End-to-end walkthrough on the default synthetic dataset: fit the linear
//! and polynomial cancellers, train the two network cancellers, and print
//! cancellation ratios for the float and fixed-point paths.

use sic_core::metrics::c_db;
use sic_core::nncanc::fxp::{apply_hybrid_fxp, quantize_nn, FxpNnPlan};
use sic_core::opcount::OpCounter;
use sic_core::polycanc::fxp::{apply_poly_fxp, QuantizedPoly};
use sic_core::presets::SynthDefaults;
use sic_core::{lincanc, metrics, nncanc, polycanc, sigmodel, Complex64};

fn main() {
    let d = SynthDefaults::load();
    let cfg = d.tx_chain(None);
    eprintln!("generating {} samples ...", d.dataset.n_samples);
    let ds = sigmodel::make_dataset(&cfg, d.dataset.n_samples).unwrap();
    let x = ds.x.samples();
    let y = ds.y.samples();
    let split = ds.split_index;
    eprintln!(
        "dataset: power {:.3}, PAPR {:.1} dB, split at {split}",
        ds.x.power(),
        ds.x.papr_db()
    );

    // Shared evaluation support: the longest warm-up across cancellers.
    let warmup = d.cancellers.linear_l.max(d.cancellers.nn_large_l) as usize - 1;
    let from = split.max(warmup);
    let y_test = &y[from..];

    let mut ops = OpCounter::new();

    // Linear-only canceller.
    let lin = lincanc::fit_linear(&x[..split], &y[..split], d.cancellers.linear_l as usize).unwrap();
    let lin_hat = lincanc::apply_linear(&lin, x, &mut ops);
    let c_lin = c_db(y_test, &lin_hat.samples[from..]).unwrap();
    println!("linear (L={})            : {:6.2} dB", d.cancellers.linear_l, c_lin);

    // Polynomial canceller on the linear residual.
    let residual: Vec<Complex64> =
        y[..split].iter().zip(&lin_hat.samples[..split]).map(|(a, b)| a - b).collect();
    let poly = polycanc::fit_poly(
        &x[..split],
        &residual,
        d.cancellers.poly_p,
        d.cancellers.poly_l,
    )
    .unwrap();
    let poly_hat = polycanc::apply_poly(&poly, x, &mut ops);
    let total_poly: Vec<Complex64> = lin_hat.samples[from..]
        .iter()
        .zip(&poly_hat.samples[from..])
        .map(|(a, b)| a + b)
        .collect();
    let c_poly = c_db(y_test, &total_poly).unwrap();
    println!(
        "linear + poly (L={}, P={}) : {:6.2} dB",
        d.cancellers.poly_l, d.cancellers.poly_p, c_poly
    );

    // Fixed-point polynomial path at the preset bit-width.
    let peak = x.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let qpoly = QuantizedPoly::new(&poly, d.fxp_format_poly(d.quantization.poly_q), peak);
    let fx_poly = apply_poly_fxp(&qpoly, x, d.hw.poly.n_cpe as usize, &mut ops).unwrap();
    let total_poly_fx: Vec<Complex64> = lin_hat.samples[from..]
        .iter()
        .zip(&fx_poly.samples[from..])
        .map(|(a, b)| a + b.to_complex64())
        .collect();
    let c_poly_fx = c_db(y_test, &total_poly_fx).unwrap();
    println!(
        "  fixed point Q={}        : {:6.2} dB (sat: {})",
        d.quantization.poly_q,
        c_poly_fx,
        fx_poly.any_saturated()
    );

    // Network cancellers.
    for (name, l, n_h, q) in [
        ("small", d.cancellers.nn_small_l, d.cancellers.nn_small_n_h, d.quantization.nn_small_q),
        ("large", d.cancellers.nn_large_l, d.cancellers.nn_large_n_h, d.quantization.nn_large_q),
    ] {
        let t0 = std::time::Instant::now();
        let out = nncanc::train(&ds, l, d.cancellers.n_l, n_h, &d.train_config(None)).unwrap();
        let hybrid = nncanc::apply_hybrid(&out.model, x, &mut ops);
        let c_nn = c_db(y_test, &hybrid.samples[from..]).unwrap();
        println!(
            "linear + nn {name} (L={l}, N_h={n_h}): {:6.2} dB  (trained in {:.1?})",
            c_nn,
            t0.elapsed()
        );
        let dims = nncanc::layer_dims(l, d.cancellers.n_l, n_h);
        let fmt = d.fxp_format_nn(q);
        let qm = quantize_nn(&out.model, fmt, FxpNnPlan::fully_parallel(&dims));
        let fx = apply_hybrid_fxp(&qm, x, &mut ops).unwrap();
        let fx_samples: Vec<Complex64> =
            fx.samples[from..].iter().map(|s| s.to_complex64()).collect();
        let c_fx = c_db(y_test, &fx_samples).unwrap();
        println!("  fixed point Q={q}        : {c_fx:6.2} dB (sat: {})", fx.any_saturated());
        // Low-precision degradation probe.
        for probe_q in [6u32, 5] {
            let qf = d.fxp_format_nn(probe_q);
            let qm = quantize_nn(&out.model, qf, FxpNnPlan::fully_parallel(&dims));
            let fx = apply_hybrid_fxp(&qm, x, &mut ops).unwrap();
            let fx_samples: Vec<Complex64> =
                fx.samples[from..].iter().map(|s| s.to_complex64()).collect();
            let c_fx = c_db(y_test, &fx_samples).unwrap();
            println!("  fixed point Q={probe_q}         : {c_fx:6.2} dB");
        }
        let report =
            metrics::complexity(metrics::ComplexitySpec::Nn { l, n_l: d.cancellers.n_l, n_h })
                .unwrap();
        println!("  ops/sample              : {} add, {} mul", report.n_add, report.n_mul);
    }
}
