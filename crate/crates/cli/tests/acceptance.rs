//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measured numbers (run with `-- --nocapture` to see
//! them). Expensive artifacts (the default dataset and the trained
//! cancellers) are built once and shared.

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sic_core::hwmodel::{simulate_nn_pipeline, simulate_poly, NnHwConfig};
use sic_core::metrics::{self, bf_count, bf_mul_count, complexity, ComplexitySpec};
use sic_core::nncanc::fxp::{apply_hybrid_fxp, quantize_nn, FxpNnPlan};
use sic_core::nncanc::{self, NnModel};
use sic_core::opcount::OpCounter;
use sic_core::polycanc::fxp::{apply_poly_fxp, QuantizedPoly};
use sic_core::polycanc::bf::BfValue;
use sic_core::polycanc::{self, bf_direct, bf_dp, bf_indices, GaussianInt, PolyModel};
use sic_core::presets::SynthDefaults;
use sic_core::sigmodel::{self, Dataset};
use sic_core::{lincanc, Complex64, LinModel};

struct Fixture {
    defaults: SynthDefaults,
    ds: Dataset,
    lin: LinModel,
    lin_recon: Vec<Complex64>,
    poly: PolyModel,
    poly_total: Vec<Complex64>,
    nn_small: NnModel,
    nn_small_total: Vec<Complex64>,
    nn_large: NnModel,
    nn_large_total: Vec<Complex64>,
    /// Shared evaluation support: test split minus the largest warm-up.
    from: usize,
    train_time: Duration,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let defaults = SynthDefaults::load();
        let chain = defaults.tx_chain(None);
        let ds = sigmodel::make_dataset(&chain, defaults.dataset.n_samples).expect("dataset");
        let x = ds.x.samples();
        let y = ds.y.samples();
        let split = ds.split_index;
        let mut ops = OpCounter::new();

        let t0 = Instant::now();
        let lin = lincanc::fit_linear(&x[..split], &y[..split], defaults.cancellers.linear_l as usize)
            .expect("linear fit");
        let lin_hat = lincanc::apply_linear(&lin, x, &mut ops);

        let residual: Vec<Complex64> =
            y[..split].iter().zip(&lin_hat.samples[..split]).map(|(a, b)| a - b).collect();
        let poly = polycanc::fit_poly(
            &x[..split],
            &residual,
            defaults.cancellers.poly_p,
            defaults.cancellers.poly_l,
        )
        .expect("poly fit");
        let poly_hat = polycanc::apply_poly(&poly, x, &mut ops);
        let poly_total: Vec<Complex64> =
            lin_hat.samples.iter().zip(&poly_hat.samples).map(|(a, b)| a + b).collect();

        let tc = defaults.train_config(None);
        let small = nncanc::train(
            &ds,
            defaults.cancellers.nn_small_l,
            defaults.cancellers.n_l,
            defaults.cancellers.nn_small_n_h,
            &tc,
        )
        .expect("small network");
        let large = nncanc::train(
            &ds,
            defaults.cancellers.nn_large_l,
            defaults.cancellers.n_l,
            defaults.cancellers.nn_large_n_h,
            &tc,
        )
        .expect("large network");
        let train_time = t0.elapsed();

        let nn_small_total = nncanc::apply_hybrid(&small.model, x, &mut ops).samples;
        let nn_large_total = nncanc::apply_hybrid(&large.model, x, &mut ops).samples;

        let warmup = defaults
            .cancellers
            .linear_l
            .max(defaults.cancellers.poly_l)
            .max(defaults.cancellers.nn_large_l) as usize
            - 1;
        Fixture {
            from: split.max(warmup),
            defaults,
            ds,
            lin,
            lin_recon: lin_hat.samples,
            poly,
            poly_total,
            nn_small: small.model,
            nn_small_total,
            nn_large: large.model,
            nn_large_total,
            train_time,
        }
    })
}

fn cdb(f: &Fixture, recon: &[Complex64]) -> f64 {
    metrics::c_db(&f.ds.y.samples()[f.from..], &recon[f.from..]).expect("cancellation ratio")
}

fn random_x(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
}

#[test]
fn criterion_1_complexity_formulas_exact() {
    let start = Instant::now();
    let poly = complexity(ComplexitySpec::Poly { l: 3, p: 7 }).unwrap();
    assert_eq!((poly.n_add, poly.n_mul), (418, 180), "reference polynomial point");
    for l in 1..=8u32 {
        let lin = complexity(ComplexitySpec::Linear { l }).unwrap();
        assert_eq!((lin.n_add, lin.n_mul), (7 * l as u64 - 2, 3 * l as u64));
    }

    // Instrumented runtime counters across the full grid.
    let x = random_x(48, 71);
    let mut ops = OpCounter::new();
    for l in 1..=6u32 {
        for p in [1u32, 3, 5, 7] {
            let n = bf_count(l, p) as usize;
            let model = PolyModel::new(p, l, vec![Complex64::new(0.01, -0.02); n]);
            ops.reset();
            let rec = polycanc::apply_poly(&model, &x, &mut ops);
            let valid = (x.len() - rec.valid_from) as u64;
            let expect = complexity(ComplexitySpec::Poly { l, p }).unwrap();
            assert_eq!(ops.real_add, valid * expect.n_add, "poly adds L={l} P={p}");
            assert_eq!(ops.real_mul, valid * expect.n_mul, "poly mults L={l} P={p}");
        }
        let lin_model = LinModel::new(vec![Complex64::new(0.5, -0.25); l as usize]);
        ops.reset();
        let rec = lincanc::apply_linear(&lin_model, &x, &mut ops);
        let valid = (x.len() - rec.valid_from) as u64;
        let expect = complexity(ComplexitySpec::Linear { l }).unwrap();
        assert_eq!(ops.real_add, valid * expect.n_add, "linear adds L={l}");
        assert_eq!(ops.real_mul, valid * expect.n_mul, "linear mults L={l}");
        for n_l in 1..=3u32 {
            for n_h in 1..=16u32 {
                let model = nn_test_model(l, n_l, n_h, (l * 1000 + n_l * 100 + n_h) as u64);
                ops.reset();
                let rec = nncanc::apply_hybrid(&model, &x, &mut ops);
                let valid = (x.len() - rec.valid_from) as u64;
                let expect = complexity(ComplexitySpec::Nn { l, n_l, n_h }).unwrap();
                assert_eq!(ops.real_add, valid * expect.n_add, "nn adds L={l} N_l={n_l} N_h={n_h}");
                assert_eq!(ops.real_mul, valid * expect.n_mul, "nn mults L={l} N_l={n_l} N_h={n_h}");
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(10), "criterion 1 took {elapsed:?}");
    println!("acceptance 1 (complexity formulas exact, grid instrumented): PASS in {elapsed:?}");
}

fn nn_test_model(l: u32, n_l: u32, n_h: u32, seed: u64) -> NnModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = nncanc::layer_dims(l, n_l, n_h);
    let weights: Vec<nncanc::RealMat> = (0..dims.len() - 1)
        .map(|i| {
            let mut m = nncanc::RealMat::zeros(dims[i + 1], dims[i]);
            m.data.iter_mut().for_each(|v| *v = rng.gen::<f64>() - 0.5);
            m
        })
        .collect();
    let biases: Vec<Vec<f64>> =
        (1..dims.len()).map(|i| (0..dims[i]).map(|_| rng.gen::<f64>() - 0.5).collect()).collect();
    let lin = LinModel::new(
        (0..l).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect(),
    );
    NnModel::new(
        l,
        n_l,
        n_h,
        weights,
        biases,
        lin,
        (0, 0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        1.0,
    )
}

#[test]
fn criterion_2_basis_function_properties_exact() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n_inputs = 10_000usize;
    for p_max in [1u32, 3, 5, 7, 9] {
        let indices = bf_indices(p_max);
        for _ in 0..n_inputs {
            let x = GaussianInt::new(rng.gen_range(-128..=128), rng.gen_range(-128..=128));
            let set = bf_dp(x, p_max).unwrap();
            for idx in &indices {
                let direct = bf_direct(x, idx.p, idx.q);
                assert_eq!(set.get(idx.p, idx.q), direct, "dp != direct at ({}, {})", idx.p, idx.q);
                // Conjugate-symmetry identity.
                assert_eq!(
                    direct,
                    bf_direct(x, idx.p, idx.p - idx.q).bf_conj(),
                    "conjugate symmetry at ({}, {})",
                    idx.p,
                    idx.q
                );
                // Order recurrence.
                if idx.p >= 3 && idx.q >= 2 {
                    let xsq = GaussianInt::new(
                        x.re * x.re - x.im * x.im,
                        x.re * x.im + x.im * x.re,
                    );
                    let prev = bf_direct(x, idx.p - 2, idx.q - 2);
                    let expect = GaussianInt::new(
                        xsq.re * prev.re - xsq.im * prev.im,
                        xsq.re * prev.im + xsq.im * prev.re,
                    );
                    assert_eq!(direct, expect, "order recurrence at ({}, {})", idx.p, idx.q);
                }
            }
            assert_eq!(set.mul_count, bf_mul_count(p_max), "multiplication count for P={p_max}");
        }
    }
    assert_eq!(bf_mul_count(7), 9);
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(30), "criterion 2 took {elapsed:?}");
    println!(
        "acceptance 2 (basis functions: recurrence == definition, exact arithmetic, \
         {n_inputs} inputs/order, 9 muls at P=7): PASS in {elapsed:?}"
    );
}

#[test]
fn criterion_3_basis_function_count_enumeration() {
    for l in 1..=10u32 {
        for p in [1u32, 3, 5, 7, 9] {
            let enumerated = (bf_indices(p).len() * l as usize) as u64;
            assert_eq!(
                enumerated,
                l as u64 * (p as u64 + 1) * (p as u64 + 3) / 4,
                "enumerated count at L={l}, P={p}"
            );
        }
    }
    assert_eq!(bf_count(3, 7), 60);
    println!("acceptance 3 (basis-function count enumeration, 60 at L=3/P=7): PASS");
}

#[test]
fn criterion_4_hardware_cycle_model() {
    let d = SynthDefaults::load();

    let equi_cfg = d.equi_hw();
    let equi = sic_core::hwmodel::nn_pipeline_report(&equi_cfg).unwrap();
    assert_eq!(equi.throughput_cycles_per_sample, 4, "equi preset throughput");

    let peak_cfg = d.peak_hw();
    let peak = sic_core::hwmodel::nn_pipeline_report(&peak_cfg).unwrap();
    assert_eq!(peak.throughput_cycles_per_sample, 7, "peak preset throughput");

    let poly_cfg = d.poly_hw();
    let poly = sic_core::hwmodel::poly_hw_report(&poly_cfg).unwrap();
    assert_eq!(poly.analytical_latency_cycles, Some(8), "poly preset latency");
    assert_eq!(poly.throughput_cycles_per_sample, 7, "poly preset throughput");

    // Simulators agree with the closed forms.
    let x = random_x(64, 4001);
    let (_, equi_sim) = simulate_nn_pipeline(&quantized_nn_for(&equi_cfg, 1), &equi_cfg, &x).unwrap();
    assert_eq!(equi_sim.simulated_throughput_cycles_per_sample, Some(4));
    let equi_lat = equi_sim.simulated_latency_cycles.unwrap();
    assert!(equi_lat <= equi_sim.analytical_latency_cycles.unwrap());

    let (_, peak_sim) = simulate_nn_pipeline(&quantized_nn_for(&peak_cfg, 2), &peak_cfg, &x).unwrap();
    assert_eq!(peak_sim.simulated_throughput_cycles_per_sample, Some(7));
    assert!(peak_sim.simulated_latency_cycles.unwrap() <= peak_sim.analytical_latency_cycles.unwrap());

    let poly_model = random_poly_model(poly_cfg.p, poly_cfg.l, 3);
    let qp = QuantizedPoly::new(&poly_model, poly_cfg.fmt, 1.0);
    let (_, poly_sim) = simulate_poly(&qp, &poly_cfg, &x).unwrap();
    assert_eq!(poly_sim.simulated_latency_cycles, Some(8), "poly simulated latency");
    assert_eq!(poly_sim.simulated_throughput_cycles_per_sample, Some(7));

    println!(
        "acceptance 4 (hardware cycle model: equi 1/4, peak 1/7, poly 8 cycles & 1/7, \
         simulated == analytical; equi simulated latency {equi_lat} reported, closed form {}): PASS",
        equi_sim.analytical_latency_cycles.unwrap()
    );
}

fn quantized_nn_for(cfg: &NnHwConfig, seed: u64) -> sic_core::nncanc::QuantizedNn {
    let model = nn_test_model(cfg.dims.l, cfg.dims.n_l, cfg.dims.n_h, seed);
    let dims = nncanc::layer_dims(cfg.dims.l, cfg.dims.n_l, cfg.dims.n_h);
    let n_pe: Vec<u32> = cfg.stages.iter().map(|s| s.n_pe).collect();
    let mut qm = quantize_nn(&model, cfg.stages[0].fmt, FxpNnPlan::from_pe_counts(&dims, &n_pe));
    qm.lin_cpe = cfg.n_cpe_linear as usize;
    qm
}

fn random_poly_model(p: u32, l: u32, seed: u64) -> PolyModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = bf_count(l, p) as usize;
    PolyModel::new(
        p,
        l,
        (0..n)
            .map(|_| Complex64::new(0.1 * (rng.gen::<f64>() - 0.5), 0.1 * (rng.gen::<f64>() - 0.5)))
            .collect(),
    )
}

#[test]
fn criterion_5_bit_exact_simulators() {
    let start = Instant::now();
    let d = SynthDefaults::load();
    let n = 1000usize;

    // Network pipelines: equi and peak presets.
    for (cfg, seed) in [(d.equi_hw(), 11u64), (d.peak_hw(), 12)] {
        let qm = quantized_nn_for(&cfg, seed);
        let x = random_x(cfg.dims.l as usize - 1 + n, seed ^ 0xbeef);
        let (sim, _) = simulate_nn_pipeline(&qm, &cfg, &x).unwrap();
        let mut ops = OpCounter::new();
        let reference = apply_hybrid_fxp(&qm, &x, &mut ops).unwrap();
        assert_eq!(
            sim.samples[sim.valid_from..],
            reference.samples[reference.valid_from..],
            "network pipeline diverged from the functional evaluator"
        );
    }

    // Polynomial array.
    let poly_cfg = d.poly_hw();
    let model = random_poly_model(poly_cfg.p, poly_cfg.l, 13);
    let qp = QuantizedPoly::new(&model, poly_cfg.fmt, 1.0);
    let x = random_x(poly_cfg.l as usize - 1 + n, 14);
    let (sim, _) = simulate_poly(&qp, &poly_cfg, &x).unwrap();
    let mut ops = OpCounter::new();
    let reference = apply_poly_fxp(&qp, &x, poly_cfg.n_cpe as usize, &mut ops).unwrap();
    assert_eq!(
        sim.samples[sim.valid_from..],
        reference.samples[reference.valid_from..],
        "polynomial array diverged from the functional evaluator"
    );

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(120), "criterion 5 took {elapsed:?}");
    println!(
        "acceptance 5 (simulators bit-exact vs fixed-point references, {n} samples each): \
         PASS in {elapsed:?}"
    );
}

#[test]
fn criterion_6_identification_oracles() {
    // Linear: noiseless two-tap channel recovered to 1e-8.
    let x = random_x(2048, 61);
    let taps = vec![Complex64::new(0.8, -0.3), Complex64::new(-0.2, 0.45)];
    let mut ops = OpCounter::new();
    let y = lincanc::apply_linear(&LinModel::new(taps.clone()), &x, &mut ops);
    let fitted = lincanc::fit_linear(&x, &y.samples, 2).unwrap();
    let worst_tap = fitted
        .taps()
        .iter()
        .zip(&taps)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0f64, f64::max);
    assert!(worst_tap <= 1e-8, "linear tap error {worst_tap}");

    // Polynomial: noiseless self-identification to 1e-6 relative.
    let truth = random_poly_model(5, 2, 62);
    let x = random_x(6000, 63);
    let y = polycanc::apply_poly(&truth, &x, &mut ops);
    let fitted = polycanc::fit_poly(&x[1..], &y.samples[1..], 5, 2).unwrap();
    let scale: f64 = truth.coeffs().iter().map(|c| c.norm()).sum();
    let worst_coeff = fitted
        .coeffs()
        .iter()
        .zip(truth.coeffs())
        .map(|(a, b)| (a - b).norm() / scale)
        .fold(0.0f64, f64::max);
    assert!(worst_coeff <= 1e-6, "polynomial coefficient relative error {worst_coeff}");

    // Network gradients against central differences.
    let worst_grad = nncanc::gradient_check(2, 2, 4, 12, 64);
    assert!(worst_grad <= 1e-5, "gradient relative error {worst_grad}");

    println!(
        "acceptance 6 (identification: taps {worst_tap:.2e}, coefficients {worst_coeff:.2e}, \
         gradients {worst_grad:.2e}): PASS"
    );
}

#[test]
fn criterion_7_qualitative_cancellation_ordering() {
    let f = fixture();
    let c_lin = cdb(f, &f.lin_recon);
    let c_poly = cdb(f, &f.poly_total);
    let c_small = cdb(f, &f.nn_small_total);
    let c_large = cdb(f, &f.nn_large_total);
    let floor = f.defaults.calibration.min_nonlinear_gain_db;

    assert!(c_lin < c_poly, "linear {c_lin} must fall below polynomial {c_poly}");
    assert!(c_lin < c_small, "linear {c_lin} must fall below the small network {c_small}");
    assert!(
        c_poly >= c_lin + floor,
        "polynomial gain {:.2} dB below the {floor} dB floor",
        c_poly - c_lin
    );
    assert!(
        c_small >= c_lin + floor,
        "network gain {:.2} dB below the {floor} dB floor",
        c_small - c_lin
    );
    assert!(c_large >= c_small, "large network {c_large} must not fall below small {c_small}");
    assert!(
        f.train_time < Duration::from_secs(300),
        "fits and trainings took {:?}",
        f.train_time
    );
    println!(
        "acceptance 7 (desk-scale ordering: linear {c_lin:.2} < small nn {c_small:.2} <= \
         large nn {c_large:.2}, poly {c_poly:.2}; fits+training {:?}): PASS",
        f.train_time
    );
}

#[test]
fn criterion_8_quantization_presets() {
    let start = Instant::now();
    let f = fixture();
    let d = &f.defaults;
    let x = f.ds.x.samples();

    // Polynomial canceller at its preset width.
    let c_poly_float = cdb(f, &f.poly_total);
    let peak = x.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let poly_fxp_at = |q: u32| -> f64 {
        let fmt = d.fxp_format_poly(q);
        let qp = QuantizedPoly::new(&f.poly, fmt, peak);
        let mut ops = OpCounter::new();
        let fx = apply_poly_fxp(&qp, x, d.hw.poly.n_cpe as usize, &mut ops).unwrap();
        let lin_fx = lincanc::apply_linear_fxp(&f.lin, x, fmt, 1, &mut ops).unwrap();
        let total: Vec<Complex64> = lin_fx
            .samples
            .iter()
            .zip(&fx.samples)
            .map(|(a, b)| a.to_complex64() + b.to_complex64())
            .collect();
        cdb(f, &total)
    };
    let c_poly_q25 = poly_fxp_at(d.quantization.poly_q);
    assert!(
        (c_poly_float - c_poly_q25).abs() <= 0.5,
        "poly at Q={} is {c_poly_q25:.2} dB vs float {c_poly_float:.2} dB",
        d.quantization.poly_q
    );
    let c_poly_q6 = poly_fxp_at(6);
    assert!(
        c_poly_float - c_poly_q6 >= 3.0,
        "poly at Q=6 only degrades by {:.2} dB",
        c_poly_float - c_poly_q6
    );

    // Network cancellers at their preset widths.
    let nn_fxp_at = |model: &NnModel, q: u32| -> f64 {
        let dims = nncanc::layer_dims(model.window_len(), model.hidden_layers(), model.hidden_width());
        let qm = quantize_nn(model, d.fxp_format_nn(q), FxpNnPlan::fully_parallel(&dims));
        let mut ops = OpCounter::new();
        let fx = apply_hybrid_fxp(&qm, x, &mut ops).unwrap();
        let total: Vec<Complex64> = fx.samples.iter().map(|s| s.to_complex64()).collect();
        cdb(f, &total)
    };
    let c_small_float = cdb(f, &f.nn_small_total);
    let c_small_q16 = nn_fxp_at(&f.nn_small, d.quantization.nn_small_q);
    assert!(
        (c_small_float - c_small_q16).abs() <= 0.5,
        "small network at Q={} is {c_small_q16:.2} dB vs float {c_small_float:.2} dB",
        d.quantization.nn_small_q
    );
    let c_large_float = cdb(f, &f.nn_large_total);
    let c_large_q18 = nn_fxp_at(&f.nn_large, d.quantization.nn_large_q);
    assert!(
        (c_large_float - c_large_q18).abs() <= 0.5,
        "large network at Q={} is {c_large_q18:.2} dB vs float {c_large_float:.2} dB",
        d.quantization.nn_large_q
    );
    let c_small_q6 = nn_fxp_at(&f.nn_small, 6);
    assert!(
        c_small_float - c_small_q6 >= 3.0,
        "small network at Q=6 only degrades by {:.2} dB",
        c_small_float - c_small_q6
    );
    let c_large_q6 = nn_fxp_at(&f.nn_large, 6);
    assert!(
        c_large_float - c_large_q6 >= 3.0,
        "large network at Q=6 only degrades by {:.2} dB",
        c_large_float - c_large_q6
    );

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(300), "criterion 8 took {elapsed:?}");
    println!(
        "acceptance 8 (quantization: poly {c_poly_q25:.2}@Q25 vs {c_poly_float:.2} float, \
         nn {c_small_q16:.2}@Q16 vs {c_small_float:.2}, {c_large_q18:.2}@Q18 vs \
         {c_large_float:.2}; Q=6 drops {:.1}/{:.1}/{:.1} dB): PASS in {elapsed:?}",
        c_poly_float - c_poly_q6,
        c_small_float - c_small_q6,
        c_large_float - c_large_q6
    );
}

fn run_cli(args: &[&str], out_dir: &Path) -> std::process::Output {
    let mut all: Vec<String> = vec!["--out-dir".into(), out_dir.display().to_string()];
    all.extend(args.iter().map(|s| s.to_string()));
    Command::new(env!("CARGO_BIN_EXE_sicsim"))
        .args(&all)
        .output()
        .expect("binary runs")
}

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.expect("entry");
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).expect("file"))
        })
        .collect();
    entries.sort();
    entries
}

#[test]
fn criterion_9_cli_determinism() {
    let base = std::env::temp_dir().join(format!("sicsim-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);

    let scenarios: Vec<(&str, Vec<Vec<String>>)> = vec![
        (
            "gen+fit+train+eval",
            vec![
                vec!["--seed", "5", "gen", "--samples", "2048"]
                    .into_iter()
                    .map(String::from)
                    .collect(),
                vec!["--seed", "5", "fit", "--dataset", "DATASET", "--kind", "poly", "--l", "3", "--p", "5"]
                    .into_iter()
                    .map(String::from)
                    .collect(),
                vec!["--seed", "5", "fit", "--dataset", "DATASET", "--kind", "linear", "--l", "4"]
                    .into_iter()
                    .map(String::from)
                    .collect(),
                vec![
                    "--seed", "5", "train", "--dataset", "DATASET", "--l", "2", "--n-h", "4",
                    "--epochs", "3",
                ]
                .into_iter()
                .map(String::from)
                .collect(),
                vec![
                    "--seed", "5", "eval", "--dataset", "DATASET", "--linear",
                    "model_linear.json", "--poly", "model_poly.json", "--nn", "model_nn.json",
                    "--psd",
                ]
                .into_iter()
                .map(String::from)
                .collect(),
                vec![
                    "--seed", "5", "qsweep", "--dataset", "DATASET", "--poly", "model_poly.json",
                    "--q-min", "10", "--q-max", "14",
                ]
                .into_iter()
                .map(String::from)
                .collect(),
                vec!["--seed", "5", "hwreport", "--preset", "all"]
                    .into_iter()
                    .map(String::from)
                    .collect(),
                vec![
                    "--config", "CONFIG", "--seed", "5", "sweep", "--dataset", "DATASET",
                    "--family", "poly",
                ]
                .into_iter()
                .map(String::from)
                .collect(),
            ],
        ),
    ];

    let sweep_config = "[sweep]\nl_values = [2, 3]\np_values = [3, 5]\n";

    for (name, commands) in &scenarios {
        let mut snapshots = Vec::new();
        for round in 0..2 {
            let dir = base.join(format!("{name}-{round}"));
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(dir.join("sweep.toml"), sweep_config).unwrap();
            for cmd in commands {
                let args: Vec<String> = cmd
                    .iter()
                    .map(|a| {
                        if a == "DATASET" {
                            dir.join("dataset.sicd").display().to_string()
                        } else if a == "CONFIG" {
                            dir.join("sweep.toml").display().to_string()
                        } else if a.ends_with(".json") {
                            dir.join(a).display().to_string()
                        } else {
                            a.clone()
                        }
                    })
                    .collect();
                let arg_refs: Vec<&str> = args.iter().map(String::as_str).collect();
                let out = run_cli(&arg_refs, &dir);
                assert!(
                    out.status.success(),
                    "command {args:?} failed: {}",
                    String::from_utf8_lossy(&out.stderr)
                );
            }
            snapshots.push(dir_snapshot(&dir));
        }
        let (a, b) = (&snapshots[0], &snapshots[1]);
        assert_eq!(a.len(), b.len(), "{name}: run output sets differ");
        for ((name_a, bytes_a), (name_b, bytes_b)) in a.iter().zip(b) {
            assert_eq!(name_a, name_b, "{name}: file set differs");
            assert_eq!(
                bytes_a, bytes_b,
                "{name}: file {name_a} differs between identically-seeded runs"
            );
        }
    }
    let _ = std::fs::remove_dir_all(&base);
    println!("acceptance 9 (seeded CLI runs byte-identical across the command set): PASS");
}
