//! Cycle-level simulation of the polynomial canceller array.
//!
//! One array of `N_CPE` complex MACs processes the weighted-sum terms of a
//! sample while the basis-function unit computes the new sample's basis
//! functions; terms whose basis functions already sit in the circular
//! buffer are scheduled first, so most of the basis-function latency hides
//! behind useful MAC work. When the buffered terms finish before the new
//! basis functions are ready, the array stalls until they are. A pipeline
//! register separates the MAC phase from the output adder tree, so the next
//! sample's MAC phase overlaps the tree of the previous one.
//!
//! Coefficients live in a word-addressed parameter memory of
//! `2*Q*N_CPE`-bit words (one complex coefficient per CPE lane), written in
//! the exact schedule order.

use std::collections::BTreeMap;

use crate::fxp::{cadd, cmul3, fxp_tree_sum_complex, FxpComplex, FxpReconstruction};
use crate::opcount::OpCounter;
use crate::polycanc::bf;
use crate::polycanc::fxp::{bf_dp_fxp, QuantizedPoly};
use crate::Complex64;

use super::{poly_hw_report, HwError, HwReport, PolyHwConfig, WordMemory};

/// Run the canceller array over `x`; outputs are bit-exact against the
/// functional fixed-point evaluator with the same CPE count.
pub fn simulate_poly(
    qp: &QuantizedPoly,
    cfg: &PolyHwConfig,
    x: &[Complex64],
) -> Result<(FxpReconstruction, HwReport), HwError> {
    let mut report = poly_hw_report(cfg)?;
    if qp.p_max() != cfg.p || qp.memory_len() != cfg.l {
        return Err(HwError::Constraint(
            "quantized model dimensions do not match the hardware configuration".into(),
        ));
    }
    if qp.fmt() != cfg.fmt {
        return Err(HwError::Constraint(format!(
            "quantized model format {} does not match the configured datapath {}",
            qp.fmt(),
            cfg.fmt
        )));
    }
    let timing = cfg.timing()?;
    let l = cfg.l as usize;
    let n_cpe = cfg.n_cpe as usize;
    let n_bf = qp.n_bf();
    if x.len() < l + 2 {
        return Err(HwError::Constraint("need at least L+2 samples to simulate".into()));
    }

    // Parameter memory in schedule order: word c feeds CPE lanes with the
    // coefficients of terms c*N_CPE .. c*N_CPE+N_CPE-1.
    let mut params = WordMemory::new(2 * n_cpe, cfg.fmt.total_bits(), n_bf.div_ceil(n_cpe));
    for w in 0..params.n_words() {
        let mut lanes = vec![0i64; 2 * n_cpe];
        for s in 0..n_cpe {
            let t = w * n_cpe + s;
            if t < n_bf {
                let c = qp.term_coeff(t);
                lanes[2 * s] = c.re().raw();
                lanes[2 * s + 1] = c.im().raw();
            }
        }
        params.write_word(w, &lanes).expect("layout within bounds");
    }

    let order = crate::polycanc::fxp::term_order(cfg.p, cfg.l);
    let old_terms = n_bf - n_bf / l; // lag >= 1 terms come first
    let dense = timing.bf_old >= timing.bf_new;

    let mut buffer: bf::BfBuffer<FxpComplex> = bf::BfBuffer::new(l, cfg.p);
    let mut ops = OpCounter::new();
    let mut bf_ops = OpCounter::new();
    let mut bf_muls_per_sample = 0u64;
    let mut samples = vec![FxpComplex::zero(qp.fmt()); x.len()];
    let mut out_cycle: BTreeMap<usize, u64> = BTreeMap::new();
    let mut in_cycle: BTreeMap<usize, u64> = BTreeMap::new();

    // Per-sample pipeline state.
    let mut cycle: u64 = 0;
    let mut pending_tree: Option<(usize, Vec<FxpComplex>)> = None;
    let budget = 10 * (timing.latency + x.len() as u64 * timing.cycles_per_sample + 50);

    for n in 0..x.len() {
        let mac_start = cycle + 1;
        in_cycle.insert(n, mac_start - 1);
        let xin = qp.quantize_input(x[n]);
        let (fresh, muls) = bf_dp_fxp(xin, cfg.p, &mut bf_ops)?;
        bf_muls_per_sample = muls;
        let bf_ready = mac_start + timing.bf_new; // first cycle new terms may issue
        let valid = n + 1 >= l;

        let mut partials: Vec<Option<FxpComplex>> = vec![None; n_cpe];
        let mut cursor = 0usize;
        while cursor < n_bf {
            cycle += 1;
            if cycle > budget {
                return Err(HwError::Deadlock {
                    cycles: cycle,
                    trace: vec![format!(
                        "poly array: sample {n}, term {cursor}/{n_bf}, bf_ready {bf_ready}"
                    )],
                });
            }
            let word_idx = cursor / n_cpe;
            let end = (cursor + n_cpe).min(n_bf);
            // When the buffered terms cannot cover the basis-function
            // latency, a word touching fresh terms stalls until the unit is
            // done. In the covered case the closed form treats the schedule
            // as seamless and so does the simulation.
            if !dense && end > old_terms && cycle < bf_ready {
                continue;
            }
            let word = params.read(word_idx).to_vec();
            if valid {
                for t in cursor..end {
                    let s = t - word_idx * n_cpe;
                    let coeff = FxpComplex::new(
                        crate::fxp::FxpReal::from_raw(word[2 * s], qp.fmt())?,
                        crate::fxp::FxpReal::from_raw(word[2 * s + 1], qp.fmt())?,
                    )?;
                    let term = &order[t];
                    let value = if term.lag == 0 {
                        fresh[bf::flat_index(term.p, term.q)]
                    } else {
                        buffer.lagged(term.lag as usize)[bf::flat_index(term.p, term.q)]
                    };
                    let prod = cmul3(coeff, value, &mut ops)?;
                    let slot = t % n_cpe;
                    partials[slot] = Some(match partials[slot] {
                        None => prod,
                        Some(acc) => cadd(acc, prod, &mut ops)?,
                    });
                }
            }
            cursor = end;
        }

        // The previous sample's adder tree ran concurrently with this MAC
        // phase; commit it now that its cycle has certainly passed.
        if let Some((prev, lanes)) = pending_tree.take() {
            let sum = fxp_tree_sum_complex(&lanes, &mut ops)?;
            samples[prev] = sum;
        }

        // This sample's tree occupies the cycle after its MAC phase.
        if valid {
            let lanes: Vec<FxpComplex> = partials
                .into_iter()
                .map(|p| p.unwrap_or(FxpComplex::zero(qp.fmt())))
                .collect();
            pending_tree = Some((n, lanes));
            out_cycle.insert(n, cycle + 1);
        }
        buffer.push(fresh);
    }
    if let Some((prev, lanes)) = pending_tree.take() {
        let sum = fxp_tree_sum_complex(&lanes, &mut ops)?;
        samples[prev] = sum;
    }

    // Measured latency and steady-state spacing.
    let first_valid = l - 1;
    let sim_latency = out_cycle[&first_valid] - in_cycle[&first_valid];
    let outs: Vec<u64> = out_cycle.values().copied().collect();
    let tail = &outs[outs.len() / 2..];
    let spacing =
        tail.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(timing.cycles_per_sample);

    // Per-sample operation counts measured from the run.
    let valid_count = (x.len() - first_valid) as u64;
    let measured = crate::metrics::ComplexityReport {
        n_add: ops.real_add / valid_count,
        n_mul: ops.real_mul / valid_count,
        n_bf: Some(n_bf as u64),
        n_mul_bf: Some(bf_muls_per_sample),
    };
    report.ops_per_sample = measured;
    report.simulated_latency_cycles = Some(sim_latency);
    report.simulated_throughput_cycles_per_sample = Some(spacing);
    Ok((FxpReconstruction { samples, valid_from: first_valid }, report))
}
