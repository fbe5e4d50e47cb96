//! Cycle-level simulation of the macro-pipeline network canceller.
//!
//! Every unit is stepped once per clock cycle, downstream first, so values
//! committed by a unit become visible to its consumer one cycle later,
//! which is the registered interconnect. An NBN stage snapshots a completed group
//! of neuron partial sums into its interface register and flushes it the
//! following cycle (tree, bias, activation), which is the extra cycle in the
//! stage latency. An IBI stage consumes the value stream of the preceding
//! NBN stage as it arrives, stalls when no valid inputs are present, and
//! releases all its neurons at once through the same interface register.
//!
//! Weights and biases are fetched from word-addressed memories laid out
//! exactly as the PE arrays consume them (`N_PE` lanes per weight word);
//! the memories accept external writes, so a canceller can be reconfigured
//! without rebuilding the simulator.
//!
//! The arithmetic per neuron is identical, operation for operation, to the
//! functional fixed-point evaluator; the simulation must reproduce it bit
//! for bit.

use std::collections::{BTreeMap, VecDeque};

use crate::fxp::{
    cadd, cmul3, fxp_add, fxp_mul, fxp_shift, fxp_tree_sum, fxp_tree_sum_complex,
    quantize_complex, FxpComplex, FxpReal, FxpReconstruction,
};
use crate::nncanc::{Activation, QuantizedNn};
use crate::opcount::OpCounter;
use crate::Complex64;

use super::{
    nn_pipeline_report, HwError, HwReport, NnHwConfig, Schedule, StageConfig, WordMemory,
};

/// NBN weight-word lane: PE `s` of cycle `c` in group `grp` multiplies input
/// `c*g + s%g` of neuron `grp*k + s/g`.
fn nbn_weight_lane(
    s: usize,
    c: usize,
    grp: usize,
    k: usize,
    g: usize,
    ne_in: usize,
    ne_out: usize,
    weights: &[FxpReal],
) -> i64 {
    let neuron = grp * k + s / g;
    let input = c * g + (s % g);
    if neuron < ne_out && input < ne_in {
        weights[neuron * ne_in + input].raw()
    } else {
        0
    }
}

/// IBI weight-word lane for the wide case (`N_PE = k'*NE_out`): PE `s` of
/// step `t` multiplies input `t*k' + s/NE_out` into neuron `s % NE_out`.
fn ibi_weight_lane_wide(
    s: usize,
    t: usize,
    kp: usize,
    ne_in: usize,
    ne_out: usize,
    weights: &[FxpReal],
) -> i64 {
    let input = t * kp + s / ne_out;
    let neuron = s % ne_out;
    if input < ne_in {
        weights[neuron * ne_in + input].raw()
    } else {
        0
    }
}

/// IBI weight-word lane for the narrow case (`N_PE <= NE_out`): sub-step `u`
/// of input `i` updates neurons `u*N_PE + s`.
fn ibi_weight_lane_narrow(
    s: usize,
    i: usize,
    u: usize,
    n_pe: usize,
    ne_in: usize,
    ne_out: usize,
    weights: &[FxpReal],
) -> i64 {
    let neuron = u * n_pe + s;
    if neuron < ne_out && i < ne_in {
        weights[neuron * ne_in + i].raw()
    } else {
        0
    }
}

struct NbnStage {
    cfg: StageConfig,
    k: usize,
    g: usize,
    cpg: usize,
    n_groups: usize,
    weights: WordMemory,
    biases: WordMemory,
    activation: Activation,
    input: Option<(u64, Vec<FxpReal>)>,
    grp: usize,
    cyc: usize,
    partials: Vec<Option<FxpReal>>,
    /// Completed group awaiting its interface cycle:
    /// (sample, first neuron, lanes).
    iface: Option<(u64, usize, Vec<Option<FxpReal>>)>,
    /// Group finished while the interface register was still busy.
    blocked: Option<(u64, usize, Vec<Option<FxpReal>>)>,
}

impl NbnStage {
    fn new(cfg: StageConfig, layer_weights: &[FxpReal], layer_biases: &[FxpReal]) -> Self {
        let k = cfg.parallel_factor() as usize;
        let g = cfg.group_width() as usize;
        let (ne_in, ne_out) = (cfg.ne_in as usize, cfg.ne_out as usize);
        let cpg = ne_in.div_ceil(g);
        let n_groups = ne_out.div_ceil(k);
        let mut weights = WordMemory::new(cfg.n_pe as usize, cfg.fmt.total_bits(), n_groups * cpg);
        for grp in 0..n_groups {
            for c in 0..cpg {
                let lanes: Vec<i64> = (0..cfg.n_pe as usize)
                    .map(|s| nbn_weight_lane(s, c, grp, k, g, ne_in, ne_out, layer_weights))
                    .collect();
                weights.write_word(grp * cpg + c, &lanes).expect("layout within bounds");
            }
        }
        let mut biases = WordMemory::new(k, cfg.fmt.total_bits(), n_groups);
        for grp in 0..n_groups {
            let lanes: Vec<i64> = (0..k)
                .map(|o| {
                    let j = grp * k + o;
                    if j < ne_out { layer_biases[j].raw() } else { 0 }
                })
                .collect();
            biases.write_word(grp, &lanes).expect("layout within bounds");
        }
        Self {
            cfg,
            k,
            g,
            cpg,
            n_groups,
            weights,
            biases,
            activation: Activation::Relu,
            input: None,
            grp: 0,
            cyc: 0,
            partials: vec![None; cfg.n_pe as usize],
            iface: None,
            blocked: None,
        }
    }

    fn can_accept(&self) -> bool {
        self.input.is_none()
    }

    fn accept(&mut self, sample: u64, values: Vec<FxpReal>) {
        debug_assert!(self.can_accept());
        debug_assert_eq!(values.len(), self.cfg.ne_in as usize);
        self.input = Some((sample, values));
        self.grp = 0;
        self.cyc = 0;
    }

    /// One clock cycle. Outputs flushed from the interface register land in
    /// `out` tagged with their neuron indices.
    fn step(
        &mut self,
        out: &mut VecDeque<(u64, usize, FxpReal)>,
        out_capacity: usize,
        ops: &mut OpCounter,
    ) -> Result<bool, HwError> {
        let mut progressed = false;

        // Interface register: tree + bias + activation, one cycle after the
        // group's MACs complete.
        if let Some((sample, first_neuron, lanes)) = self.iface.take() {
            if out.len() + self.k <= out_capacity.max(self.k) {
                for o in 0..self.k {
                    let j = first_neuron + o;
                    if j >= self.cfg.ne_out as usize {
                        break;
                    }
                    let slot_lanes: Vec<FxpReal> = lanes[o * self.g..(o + 1) * self.g]
                        .iter()
                        .map(|p| p.expect("every lane of a valid neuron accumulates"))
                        .collect();
                    let sum = fxp_tree_sum(&slot_lanes, ops)?;
                    let bias =
                        FxpReal::from_raw(self.biases.read(first_neuron / self.k)[o], self.cfg.fmt)?;
                    ops.add(1);
                    let pre = fxp_add(sum, bias)?;
                    let act = match self.activation {
                        Activation::Relu => {
                            ops.add(1);
                            pre.relu()
                        }
                        Activation::Identity => pre,
                    };
                    out.push_back((sample, j, act));
                }
                progressed = true;
            } else {
                // Downstream full: hold the register.
                self.iface = Some((sample, first_neuron, lanes));
            }
        }

        // A group that finished while the register was busy moves in as soon
        // as the register frees up.
        if self.iface.is_none() {
            if let Some(job) = self.blocked.take() {
                self.iface = Some(job);
                progressed = true;
            }
        }

        // MAC cycle.
        if self.blocked.is_none() {
            if let Some((sample, input)) = &self.input {
                if self.grp < self.n_groups {
                    let word = self.weights.read(self.grp * self.cpg + self.cyc).to_vec();
                    for s in 0..self.cfg.n_pe as usize {
                        let neuron = self.grp * self.k + s / self.g;
                        let idx = self.cyc * self.g + (s % self.g);
                        if neuron < self.cfg.ne_out as usize && idx < input.len() {
                            let w = FxpReal::from_raw(word[s], self.cfg.fmt)?;
                            let prod = fxp_mul(w, input[idx])?;
                            ops.mul(1);
                            self.partials[s] = Some(match self.partials[s] {
                                None => prod,
                                Some(acc) => {
                                    ops.add(1);
                                    fxp_add(acc, prod)?
                                }
                            });
                        }
                    }
                    self.cyc += 1;
                    progressed = true;
                    if self.cyc == self.cpg {
                        let snapshot =
                            (*sample, self.grp * self.k, std::mem::take(&mut self.partials));
                        self.partials = vec![None; self.cfg.n_pe as usize];
                        if self.iface.is_none() {
                            self.iface = Some(snapshot);
                        } else {
                            self.blocked = Some(snapshot);
                        }
                        self.grp += 1;
                        self.cyc = 0;
                        if self.grp == self.n_groups {
                            self.input = None; // PEs free for the next sample
                        }
                    }
                }
            }
        }
        Ok(progressed)
    }

    fn state(&self) -> String {
        format!(
            "NBN[{}x{} n_pe={} grp={}/{} cyc={} iface={} blocked={} input={}]",
            self.cfg.ne_in,
            self.cfg.ne_out,
            self.cfg.n_pe,
            self.grp,
            self.n_groups,
            self.cyc,
            self.iface.is_some(),
            self.blocked.is_some(),
            self.input.is_some()
        )
    }
}

struct IbiStage {
    cfg: StageConfig,
    kp: usize,
    sub_total: usize,
    weights: WordMemory,
    biases: WordMemory,
    activation: Activation,
    sample: Option<u64>,
    consumed: usize,
    sub: usize,
    current_input: Option<FxpReal>,
    accums: Vec<Option<FxpReal>>,
    iface: Option<(u64, Vec<Option<FxpReal>>)>,
}

impl IbiStage {
    fn new(cfg: StageConfig, layer_weights: &[FxpReal], layer_biases: &[FxpReal]) -> Self {
        let (ne_in, ne_out, n_pe) = (cfg.ne_in as usize, cfg.ne_out as usize, cfg.n_pe as usize);
        let wide = n_pe >= ne_out;
        let kp = if wide { n_pe / ne_out } else { 0 };
        let sub_total = if wide { 0 } else { ne_out.div_ceil(n_pe) };
        let n_words = if wide { ne_in.div_ceil(kp) } else { ne_in * sub_total };
        let mut weights = WordMemory::new(n_pe, cfg.fmt.total_bits(), n_words);
        if wide {
            for t in 0..n_words {
                let lanes: Vec<i64> = (0..n_pe)
                    .map(|s| ibi_weight_lane_wide(s, t, kp, ne_in, ne_out, layer_weights))
                    .collect();
                weights.write_word(t, &lanes).expect("layout within bounds");
            }
        } else {
            for i in 0..ne_in {
                for u in 0..sub_total {
                    let lanes: Vec<i64> = (0..n_pe)
                        .map(|s| ibi_weight_lane_narrow(s, i, u, n_pe, ne_in, ne_out, layer_weights))
                        .collect();
                    weights.write_word(i * sub_total + u, &lanes).expect("layout within bounds");
                }
            }
        }
        let mut biases = WordMemory::new(ne_out, cfg.fmt.total_bits(), 1);
        biases
            .write_word(0, &layer_biases.iter().map(|b| b.raw()).collect::<Vec<_>>())
            .expect("layout within bounds");
        Self {
            cfg,
            kp,
            sub_total,
            weights,
            biases,
            activation: Activation::Identity,
            sample: None,
            consumed: 0,
            sub: 0,
            current_input: None,
            accums: vec![None; ne_out],
            iface: None,
        }
    }

    /// One clock cycle: flush the interface register, then consume inputs.
    /// Returns a completed output vector if one left the register.
    fn step(
        &mut self,
        queue: &mut VecDeque<(u64, usize, FxpReal)>,
        downstream_free: bool,
        ops: &mut OpCounter,
    ) -> Result<(Option<(u64, Vec<FxpReal>)>, bool), HwError> {
        let mut progressed = false;
        let mut emitted = None;

        if let Some((sample, acc)) = self.iface.take() {
            if downstream_free {
                let bias_word = self.biases.read(0).to_vec();
                let mut outputs = Vec::with_capacity(self.cfg.ne_out as usize);
                for (j, a) in acc.into_iter().enumerate() {
                    let sum = a.expect("every neuron accumulates all inputs");
                    let bias = FxpReal::from_raw(bias_word[j], self.cfg.fmt)?;
                    ops.add(1);
                    let pre = fxp_add(sum, bias)?;
                    outputs.push(match self.activation {
                        Activation::Relu => {
                            ops.add(1);
                            pre.relu()
                        }
                        Activation::Identity => pre,
                    });
                }
                emitted = Some((sample, outputs));
                progressed = true;
            } else {
                self.iface = Some((sample, acc));
            }
        }

        let ne_in = self.cfg.ne_in as usize;
        let ne_out = self.cfg.ne_out as usize;
        let n_pe = self.cfg.n_pe as usize;
        if self.consumed < ne_in || self.sample.is_none() {
            if n_pe >= ne_out {
                // Wide: consume up to k' inputs this cycle, whole word or
                // nothing (stall until the word's inputs are all present).
                let remaining = ne_in - self.consumed;
                let want = self.kp.min(remaining);
                let available = queue.len() >= want && want > 0;
                if available && self.iface.is_none() {
                    let t = self.consumed / self.kp;
                    let word = self.weights.read(t).to_vec();
                    for c in 0..want {
                        let (sample, idx, value) =
                            queue.pop_front().expect("availability checked");
                        debug_assert_eq!(idx, self.consumed + c);
                        if self.sample.is_none() {
                            self.sample = Some(sample);
                        }
                        debug_assert_eq!(self.sample, Some(sample));
                        for j in 0..ne_out {
                            let lane = c * ne_out + j;
                            let w = FxpReal::from_raw(word[lane], self.cfg.fmt)?;
                            let prod = fxp_mul(w, value)?;
                            ops.mul(1);
                            self.accums[j] = Some(match self.accums[j] {
                                None => prod,
                                Some(acc) => {
                                    ops.add(1);
                                    fxp_add(acc, prod)?
                                }
                            });
                        }
                    }
                    self.consumed += want;
                    progressed = true;
                }
            } else {
                // Narrow: one input spread over ceil(NE_out/N_PE) sub-cycles.
                if self.current_input.is_none() {
                    if let Some((sample, idx, value)) = queue.pop_front() {
                        debug_assert_eq!(idx, self.consumed);
                        if self.sample.is_none() {
                            self.sample = Some(sample);
                        }
                        self.current_input = Some(value);
                        self.sub = 0;
                    }
                }
                if let Some(value) = self.current_input {
                    let word =
                        self.weights.read(self.consumed * self.sub_total + self.sub).to_vec();
                    for s in 0..n_pe {
                        let j = self.sub * n_pe + s;
                        if j < ne_out {
                            let w = FxpReal::from_raw(word[s], self.cfg.fmt)?;
                            let prod = fxp_mul(w, value)?;
                            ops.mul(1);
                            self.accums[j] = Some(match self.accums[j] {
                                None => prod,
                                Some(acc) => {
                                    ops.add(1);
                                    fxp_add(acc, prod)?
                                }
                            });
                        }
                    }
                    self.sub += 1;
                    progressed = true;
                    if self.sub == self.sub_total {
                        self.sub = 0;
                        self.current_input = None;
                        self.consumed += 1;
                    }
                }
            }
            if self.consumed == ne_in && self.iface.is_none() {
                let sample = self.sample.take().expect("sample id tracked");
                self.iface = Some((sample, std::mem::replace(&mut self.accums, vec![None; ne_out])));
                self.consumed = 0;
            }
        }
        Ok((emitted, progressed))
    }

    fn state(&self) -> String {
        format!(
            "IBI[{}x{} n_pe={} consumed={}/{} iface={}]",
            self.cfg.ne_in,
            self.cfg.ne_out,
            self.cfg.n_pe,
            self.consumed,
            self.cfg.ne_in,
            self.iface.is_some()
        )
    }
}

/// The parallel linear canceller: a complex FIR over the raw window with
/// `ceil(L / N_CPE)` MAC cycles per sample and no output register.
struct LinearUnit {
    taps: Vec<FxpComplex>,
    n_cpe: usize,
    cycles: usize,
    job: Option<(u64, Vec<FxpComplex>, usize, Vec<Option<FxpComplex>>)>,
}

impl LinearUnit {
    fn new(taps: Vec<FxpComplex>, n_cpe: usize) -> Self {
        let cycles = taps.len().div_ceil(n_cpe);
        Self { taps, n_cpe, cycles, job: None }
    }

    fn can_accept(&self) -> bool {
        self.job.is_none()
    }

    fn accept(&mut self, sample: u64, window: Vec<FxpComplex>) {
        debug_assert!(self.can_accept());
        self.job = Some((sample, window, 0, vec![None; self.n_cpe]));
    }

    fn step(
        &mut self,
        ops: &mut OpCounter,
    ) -> Result<(Option<(u64, FxpComplex)>, bool), HwError> {
        let Some((sample, window, cyc, mut partials)) = self.job.take() else {
            return Ok((None, false));
        };
        for v in 0..self.n_cpe {
            let lag = cyc * self.n_cpe + v;
            if lag < self.taps.len() {
                let prod = cmul3(self.taps[lag], window[lag], ops)?;
                partials[v] = Some(match partials[v] {
                    None => prod,
                    Some(acc) => cadd(acc, prod, ops)?,
                });
            }
        }
        let next = cyc + 1;
        if next == self.cycles {
            let fmt = self.taps[0].fmt();
            let lanes: Vec<FxpComplex> =
                partials.into_iter().map(|p| p.unwrap_or(FxpComplex::zero(fmt))).collect();
            let used = lanes.len().min(self.taps.len());
            let sum = fxp_tree_sum_complex(&lanes[..used], ops)?;
            Ok((Some((sample, sum)), true))
        } else {
            self.job = Some((sample, window, next, partials));
            Ok((None, true))
        }
    }
}

enum StageSim {
    Nbn(NbnStage),
    Ibi(IbiStage),
}

/// Run the full pipeline over `x` and return the bit-exact outputs together
/// with a report carrying the measured latency and steady-state throughput.
///
/// The quantized model's accumulation plan must match the configuration's PE
/// counts; a mismatch would silently change the saturating-add order.
pub fn simulate_nn_pipeline(
    qm: &QuantizedNn,
    cfg: &NnHwConfig,
    x: &[Complex64],
) -> Result<(FxpReconstruction, HwReport), HwError> {
    let mut report = nn_pipeline_report(cfg)?;
    let dims = cfg.dims.layer_widths();
    if qm.dims.iter().map(|&d| d as u32).ne(dims.iter().copied()) {
        return Err(HwError::Constraint("quantized model does not match the hw dimensions".into()));
    }
    let expected_plan =
        crate::nncanc::fxp::FxpNnPlan::from_pe_counts(&qm.dims, &cfg.stages.iter().map(|s| s.n_pe).collect::<Vec<_>>());
    if qm.plan != expected_plan {
        return Err(HwError::Constraint(
            "quantized model was prepared for a different PE plan; requantize with \
             FxpNnPlan::from_pe_counts for this configuration"
                .into(),
        ));
    }
    if qm.lin_cpe != cfg.n_cpe_linear as usize {
        return Err(HwError::Constraint(format!(
            "quantized model assumes {} linear CPEs, configuration has {}",
            qm.lin_cpe, cfg.n_cpe_linear
        )));
    }
    let l = qm.window_len();
    if x.len() < l + 3 {
        return Err(HwError::Constraint("need at least L+3 samples to simulate".into()));
    }

    let mut stages: Vec<StageSim> = Vec::with_capacity(cfg.stages.len());
    for (i, sc) in cfg.stages.iter().enumerate() {
        match sc.schedule {
            Schedule::Nbn => {
                let mut st = NbnStage::new(*sc, &qm.weights[i], &qm.biases[i]);
                st.activation = qm.activations[i];
                stages.push(StageSim::Nbn(st));
            }
            Schedule::Ibi => {
                let mut st = IbiStage::new(*sc, &qm.weights[i], &qm.biases[i]);
                st.activation = qm.activations[i];
                stages.push(StageSim::Ibi(st));
            }
        }
    }
    let mut linear = LinearUnit::new(qm.lin_taps.clone(), cfg.n_cpe_linear as usize);

    // One value queue in front of every IBI stage; one full-vector latch in
    // front of every NBN stage (owned by the stage itself).
    let n_stages = stages.len();
    let mut queues: Vec<VecDeque<(u64, usize, FxpReal)>> =
        (0..n_stages).map(|_| VecDeque::new()).collect();
    let queue_caps: Vec<usize> = cfg.stages.iter().map(|s| s.ne_in as usize).collect();

    let mut ops = OpCounter::new();
    let mut next_sample = l - 1;
    let mut in_cycle: BTreeMap<u64, u64> = BTreeMap::new();
    let mut nn_parts: BTreeMap<u64, [Option<FxpReal>; 2]> = BTreeMap::new();
    let mut nn_done: BTreeMap<u64, [FxpReal; 2]> = BTreeMap::new();
    let mut lin_done: BTreeMap<u64, FxpComplex> = BTreeMap::new();
    let mut out_cycle: BTreeMap<u64, u64> = BTreeMap::new();
    let mut samples = vec![FxpComplex::zero(qm.fmt); x.len()];
    let total = x.len() - (l - 1);

    let per_sample_bound = report.throughput_cycles_per_sample;
    let latency_bound = report
        .analytical_latency_cycles
        .unwrap_or_else(|| report.stage_timing.iter().map(|t| t.latency).sum::<u64>() + 2);
    let budget = 10 * (latency_bound + total as u64 * per_sample_bound + 50);

    let mut cycle: u64 = 0;
    let mut window_scratch: Vec<FxpReal> = Vec::new();
    let mut idle_cycles: u64 = 0;
    while out_cycle.len() < total {
        cycle += 1;
        if cycle > budget {
            let mut trace: Vec<String> = stages
                .iter()
                .map(|s| match s {
                    StageSim::Nbn(st) => st.state(),
                    StageSim::Ibi(st) => st.state(),
                })
                .collect();
            trace.push(format!("outputs {}/{total}", out_cycle.len()));
            return Err(HwError::Deadlock { cycles: cycle, trace });
        }
        let mut progressed = false;

        // Downstream first: later stages see values committed in earlier
        // cycles only.
        for i in (0..n_stages).rev() {
            let is_ibi = matches!(stages[i], StageSim::Ibi(_));
            if is_ibi {
                // The stage after an IBI stage is an NBN latch, or the
                // pipeline output when this is the last stage.
                let downstream_free = if i + 1 < n_stages {
                    match &stages[i + 1] {
                        StageSim::Nbn(n) => n.can_accept(),
                        StageSim::Ibi(_) => unreachable!("schedules alternate"),
                    }
                } else {
                    true
                };
                let mut queue = std::mem::take(&mut queues[i]);
                let (emitted, p) = {
                    let StageSim::Ibi(st) = &mut stages[i] else { unreachable!() };
                    st.step(&mut queue, downstream_free, &mut ops)?
                };
                queues[i] = queue;
                progressed |= p;
                if let Some((sample, vec)) = emitted {
                    if i + 1 < n_stages {
                        let StageSim::Nbn(n) = &mut stages[i + 1] else { unreachable!() };
                        n.accept(sample, vec);
                    } else {
                        nn_done.insert(sample, [vec[0], vec[1]]);
                    }
                }
            } else {
                let cap = if i + 1 < n_stages { queue_caps[i + 1] } else { 4 };
                // Split borrow: take the downstream queue out briefly.
                let mut down = if i + 1 < n_stages {
                    std::mem::take(&mut queues[i + 1])
                } else {
                    VecDeque::new()
                };
                let p = {
                    let StageSim::Nbn(st) = &mut stages[i] else { unreachable!() };
                    st.step(&mut down, cap, &mut ops)?
                };
                progressed |= p;
                if i + 1 < n_stages {
                    queues[i + 1] = down;
                } else {
                    // Last stage is NBN (odd stage count): its two outputs
                    // may arrive through separate interface flushes.
                    while let Some((sample, idx, v)) = down.pop_front() {
                        let entry = nn_parts.entry(sample).or_insert([None, None]);
                        entry[idx.min(1)] = Some(v);
                        if let [Some(a), Some(b)] = *entry {
                            nn_parts.remove(&sample);
                            nn_done.insert(sample, [a, b]);
                        }
                    }
                }
            }
        }

        // Linear unit.
        let (lin_emit, lp) = linear.step(&mut ops)?;
        progressed |= lp;
        if let Some((sample, value)) = lin_emit {
            lin_done.insert(sample, value);
        }

        // Combine finished branches (free adders, no extra cycle).
        let ready: Vec<u64> = nn_done.keys().filter(|s| lin_done.contains_key(s)).copied().collect();
        for sample in ready {
            let nn = nn_done.remove(&sample).expect("present");
            let lin = lin_done.remove(&sample).expect("present");
            let nl = FxpComplex::new(
                fxp_shift(nn[0], qm.denorm_shift.0),
                fxp_shift(nn[1], qm.denorm_shift.1),
            )?;
            let y = cadd(lin, nl, &mut ops)?;
            samples[sample as usize] = y;
            out_cycle.insert(sample, cycle);
            progressed = true;
        }

        // Feeder: present the next window to the first stage and the linear
        // unit in lockstep.
        if next_sample < x.len() {
            let first_free = match &stages[0] {
                StageSim::Nbn(st) => st.can_accept(),
                StageSim::Ibi(_) => unreachable!("first stage is NBN"),
            };
            if first_free && linear.can_accept() {
                let n = next_sample;
                qm.quantize_window(x, n, &mut window_scratch);
                let StageSim::Nbn(st) = &mut stages[0] else { unreachable!() };
                st.accept(n as u64, window_scratch.clone());
                let fir_window: Vec<FxpComplex> =
                    (0..l).map(|lag| quantize_complex(x[n - lag], qm.fmt)).collect();
                linear.accept(n as u64, fir_window);
                in_cycle.insert(n as u64, cycle);
                next_sample += 1;
                progressed = true;
            }
        }

        if !progressed {
            idle_cycles += 1;
            if idle_cycles > latency_bound * 10 + 100 {
                let trace: Vec<String> = stages
                    .iter()
                    .map(|s| match s {
                        StageSim::Nbn(st) => st.state(),
                        StageSim::Ibi(st) => st.state(),
                    })
                    .collect();
                return Err(HwError::Deadlock { cycles: cycle, trace });
            }
        } else {
            idle_cycles = 0;
        }
    }

    // Measured latency: first sample, from presentation (end of its feed
    // cycle) to output.
    let first = (l - 1) as u64;
    let sim_latency = out_cycle[&first] - in_cycle[&first];
    // Steady-state spacing over the trailing half of the run.
    let outs: Vec<u64> = out_cycle.values().copied().collect();
    let tail = &outs[outs.len() / 2..];
    let spacing = tail.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(per_sample_bound);

    report.simulated_latency_cycles = Some(sim_latency);
    report.simulated_throughput_cycles_per_sample = Some(spacing);
    Ok((FxpReconstruction { samples, valid_from: l - 1 }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fxp::FxpFormat;
    use crate::hwmodel::NnDims;
    use crate::nncanc::fxp::{apply_hybrid_fxp, quantize_nn, FxpNnPlan};
    use crate::nncanc::tests::random_model;
    use crate::signal::c;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_x(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
    }

    fn quantize_for(cfg: &NnHwConfig, seed: u64) -> QuantizedNn {
        let m = random_model(cfg.dims.l, cfg.dims.n_l, cfg.dims.n_h, seed);
        let dims = crate::nncanc::layer_dims(cfg.dims.l, cfg.dims.n_l, cfg.dims.n_h);
        let n_pe: Vec<u32> = cfg.stages.iter().map(|s| s.n_pe).collect();
        let mut qm = quantize_nn(&m, cfg.stages[0].fmt, FxpNnPlan::from_pe_counts(&dims, &n_pe));
        qm.lin_cpe = cfg.n_cpe_linear as usize;
        qm
    }

    #[test]
    fn balanced_pipeline_matches_reference_bit_for_bit() {
        let fmt = FxpFormat::new(16, 12).unwrap();
        let cfg = NnHwConfig::for_network(NnDims { l: 2, n_l: 1, n_h: 8 }, &[8, 4], 1, fmt, None)
            .unwrap();
        let qm = quantize_for(&cfg, 2024);
        let x = random_x(64, 9);
        let (sim, report) = simulate_nn_pipeline(&qm, &cfg, &x).unwrap();
        let mut ops = OpCounter::new();
        let reference = apply_hybrid_fxp(&qm, &x, &mut ops).unwrap();
        assert_eq!(sim.samples[sim.valid_from..], reference.samples[reference.valid_from..]);
        assert_eq!(report.simulated_throughput_cycles_per_sample, Some(4));
        assert!(report.simulated_latency_cycles.unwrap() <= report.analytical_latency_cycles.unwrap());
    }

    #[test]
    fn wide_pipeline_matches_reference_and_throughput() {
        let fmt = FxpFormat::new(18, 13).unwrap();
        let cfg = NnHwConfig::for_network(NnDims { l: 4, n_l: 1, n_h: 34 }, &[40, 10], 1, fmt, None)
            .unwrap();
        let qm = quantize_for(&cfg, 77);
        let x = random_x(64, 10);
        let (sim, report) = simulate_nn_pipeline(&qm, &cfg, &x).unwrap();
        let mut ops = OpCounter::new();
        let reference = apply_hybrid_fxp(&qm, &x, &mut ops).unwrap();
        assert_eq!(sim.samples[sim.valid_from..], reference.samples[reference.valid_from..]);
        assert_eq!(report.simulated_throughput_cycles_per_sample, Some(7));
        assert!(report.simulated_latency_cycles.unwrap() <= 10);
    }

    #[test]
    fn fully_parallel_single_pair_streams_every_cycle() {
        let fmt = FxpFormat::new(16, 12).unwrap();
        // NBN fully parallel (n_pe = ne_in*ne_out) and IBI fully parallel.
        let cfg = NnHwConfig::for_network(NnDims { l: 1, n_l: 1, n_h: 4 }, &[8, 8], 1, fmt, None)
            .unwrap();
        let qm = quantize_for(&cfg, 5);
        let x = random_x(40, 11);
        let (_, report) = simulate_nn_pipeline(&qm, &cfg, &x).unwrap();
        assert_eq!(report.simulated_throughput_cycles_per_sample, Some(1));
    }

    #[test]
    fn narrow_pe_counts_still_match_reference() {
        let fmt = FxpFormat::new(16, 12).unwrap();
        // Fewer PEs than inputs/outputs in both stages.
        let cfg = NnHwConfig::for_network(NnDims { l: 2, n_l: 1, n_h: 6 }, &[2, 2], 1, fmt, None)
            .unwrap();
        let qm = quantize_for(&cfg, 6);
        let x = random_x(48, 12);
        let (sim, report) = simulate_nn_pipeline(&qm, &cfg, &x).unwrap();
        let mut ops = OpCounter::new();
        let reference = apply_hybrid_fxp(&qm, &x, &mut ops).unwrap();
        assert_eq!(sim.samples[sim.valid_from..], reference.samples[reference.valid_from..]);
        // NBN: 6 neurons * ceil(4/2) = 12; IBI: 6 inputs * ceil(2/2) = 6.
        assert_eq!(report.simulated_throughput_cycles_per_sample, Some(12));
        assert_eq!(report.throughput_cycles_per_sample, 12);
    }

    #[test]
    fn three_stage_pipeline_runs_without_closed_form() {
        let fmt = FxpFormat::new(16, 12).unwrap();
        let cfg = NnHwConfig::for_network(NnDims { l: 2, n_l: 2, n_h: 4 }, &[4, 4, 4], 1, fmt, None)
            .unwrap();
        let qm = quantize_for(&cfg, 8);
        let x = random_x(48, 13);
        let (sim, report) = simulate_nn_pipeline(&qm, &cfg, &x).unwrap();
        assert!(report.analytical_latency_cycles.is_none());
        assert!(report.simulated_latency_cycles.is_some());
        let mut ops = OpCounter::new();
        let reference = apply_hybrid_fxp(&qm, &x, &mut ops).unwrap();
        assert_eq!(sim.samples[sim.valid_from..], reference.samples[reference.valid_from..]);
    }

    #[test]
    fn simulated_mac_counts_match_closed_forms() {
        let fmt = FxpFormat::new(16, 12).unwrap();
        let cfg = NnHwConfig::for_network(NnDims { l: 2, n_l: 1, n_h: 8 }, &[8, 4], 1, fmt, None)
            .unwrap();
        let qm = quantize_for(&cfg, 3);
        let x = random_x(40, 14);
        // Count by re-running the reference on the same range.
        let mut ops = OpCounter::new();
        let reference = apply_hybrid_fxp(&qm, &x, &mut ops).unwrap();
        let valid = (x.len() - reference.valid_from) as u64;
        let expect =
            crate::metrics::complexity(crate::metrics::ComplexitySpec::Nn { l: 2, n_l: 1, n_h: 8 })
                .unwrap();
        assert_eq!(ops.real_mul, valid * expect.n_mul);
        assert_eq!(ops.real_add, valid * expect.n_add);
    }

    #[test]
    fn plan_mismatch_is_rejected() {
        let fmt = FxpFormat::new(16, 12).unwrap();
        let cfg = NnHwConfig::for_network(NnDims { l: 2, n_l: 1, n_h: 8 }, &[8, 4], 1, fmt, None)
            .unwrap();
        let m = random_model(2, 1, 8, 4);
        let dims = crate::nncanc::layer_dims(2, 1, 8);
        // Sequential plan instead of the configuration's PE plan.
        let mut qm = quantize_nn(&m, fmt, FxpNnPlan::from_pe_counts(&dims, &[1, 1]));
        qm.lin_cpe = 1;
        let x = random_x(16, 15);
        match simulate_nn_pipeline(&qm, &cfg, &x) {
            Err(HwError::Constraint(msg)) => assert!(msg.contains("PE plan")),
            other => panic!("expected plan mismatch, got {:?}", other.map(|_| ())),
        }
    }
}
