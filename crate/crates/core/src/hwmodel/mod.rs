//! Hardware models of the two canceller architectures.
//!
//! Two levels are provided for each architecture and they must agree:
//!
//! * closed-form timing: per-stage latency, first-output latency and
//!   steady-state throughput of the macro-pipeline network canceller, and
//!   the basis-function/MAC schedule of the polynomial canceller;
//! * cycle-level simulation: processing-element arrays with per-cycle MAC
//!   updates, registered stage interfaces, stall logic and word-addressed
//!   parameter memories, producing bit-exact fixed-point outputs.
//!
//! The network canceller maps each layer to one macro-pipeline stage.
//! Neuron-by-neuron (NBN) stages emit a few neurons at a time, which lets
//! the following input-by-input (IBI) stage start before the layer
//! finishes; stages therefore alternate NBN, IBI, NBN, ... A complex-MAC
//! array with a circular basis-function buffer implements the polynomial
//! canceller.

mod nn_sim;
mod poly_sim;

pub use nn_sim::simulate_nn_pipeline;
pub use poly_sim::simulate_poly;

use serde::Serialize;
use thiserror::Error;

use crate::fxp::FxpFormat;
use crate::metrics::{self, ComplexityReport};

#[derive(Debug, Error)]
pub enum HwError {
    #[error("{0}")]
    Constraint(String),
    #[error("simulation deadlock after {cycles} cycles; stage states: {trace:?}")]
    Deadlock { cycles: u64, trace: Vec<String> },
    #[error("fixed-point fault in simulation: {0}")]
    Fxp(#[from] crate::fxp::FxpError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
}

/// Processing-element schedule of a macro-pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Schedule {
    /// Neurons processed sequentially; the PE array shares one neuron's sum.
    Nbn,
    /// Inputs processed sequentially; each PE owns whole neuron sums.
    Ibi,
}

/// One macro-pipeline stage: layer fan-in/fan-out, PE count and datapath
/// format.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageConfig {
    pub schedule: Schedule,
    pub ne_in: u32,
    pub ne_out: u32,
    pub n_pe: u32,
    pub fmt: FxpFormat,
}

/// Closed-form timing of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StageTiming {
    /// Cycles from first input to the last output of one sample.
    pub latency: u64,
    /// Cycles until the first outputs become available.
    pub first_output: u64,
    /// Steady-state cycles between samples (throughput is its inverse).
    pub cycles_per_sample: u64,
}

impl StageConfig {
    fn check(&self) -> Result<(), HwError> {
        if self.ne_in == 0 || self.ne_out == 0 || self.n_pe == 0 {
            return Err(HwError::Constraint(
                "stage dimensions and PE count must be positive".into(),
            ));
        }
        match self.schedule {
            Schedule::Nbn => {
                if self.n_pe > self.ne_in && self.n_pe % self.ne_in != 0 {
                    return Err(HwError::Constraint(format!(
                        "NBN stage with N_PE > NE_in requires N_PE = k*NE_in \
                         (got N_PE={}, NE_in={})",
                        self.n_pe, self.ne_in
                    )));
                }
            }
            Schedule::Ibi => {
                if self.n_pe > self.ne_out && self.n_pe % self.ne_out != 0 {
                    return Err(HwError::Constraint(format!(
                        "IBI stage with N_PE > NE_out requires N_PE = k*NE_out \
                         (got N_PE={}, NE_out={})",
                        self.n_pe, self.ne_out
                    )));
                }
            }
        }
        Ok(())
    }

    /// Neurons processed in parallel (NBN) or inputs consumed per cycle (IBI).
    pub(crate) fn parallel_factor(&self) -> u32 {
        match self.schedule {
            Schedule::Nbn => (self.n_pe / self.ne_in).max(1),
            Schedule::Ibi => (self.n_pe / self.ne_out).max(1),
        }
    }

    /// PEs cooperating on one neuron (NBN group width).
    pub(crate) fn group_width(&self) -> u32 {
        self.n_pe.min(self.ne_in).max(1)
    }

    /// MAC cycles to process one full sample through this stage.
    pub(crate) fn mac_cycles(&self) -> u64 {
        let (ne_in, ne_out, n_pe) = (self.ne_in as u64, self.ne_out as u64, self.n_pe as u64);
        match self.schedule {
            Schedule::Nbn => {
                if n_pe <= ne_in {
                    ne_out * ne_in.div_ceil(n_pe)
                } else {
                    (ne_out * ne_in).div_ceil(n_pe)
                }
            }
            Schedule::Ibi => {
                if n_pe <= ne_out {
                    ne_in * ne_out.div_ceil(n_pe)
                } else {
                    (ne_in * ne_out).div_ceil(n_pe)
                }
            }
        }
    }
}

/// Closed-form stage timing. One cycle on top of the MAC count covers the
/// register between the PE array and the output interface; an NBN stage
/// additionally exposes an earlier first-output time because it emits
/// neurons as they complete.
pub fn stage_latency(s: &StageConfig) -> Result<StageTiming, HwError> {
    s.check()?;
    let cycles = s.mac_cycles();
    let first = match s.schedule {
        Schedule::Nbn => (s.ne_in as u64).div_ceil(s.n_pe as u64) + 1,
        Schedule::Ibi => cycles + 1,
    };
    Ok(StageTiming { latency: cycles + 1, first_output: first, cycles_per_sample: cycles })
}

/// Network dimensions seen by the hardware.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NnDims {
    pub l: u32,
    pub n_l: u32,
    pub n_h: u32,
}

impl NnDims {
    pub fn layer_widths(&self) -> Vec<u32> {
        let mut v = Vec::with_capacity(self.n_l as usize + 2);
        v.push(2 * self.l);
        v.extend(std::iter::repeat(self.n_h).take(self.n_l as usize));
        v.push(2);
        v
    }
}

/// Full network-canceller hardware configuration: one stage per layer
/// (alternating NBN/IBI from the input side) plus the parallel linear
/// canceller.
#[derive(Debug, Clone, PartialEq)]
pub struct NnHwConfig {
    pub dims: NnDims,
    pub stages: Vec<StageConfig>,
    pub n_cpe_linear: u32,
    pub clock_hz: Option<f64>,
}

impl NnHwConfig {
    /// Build the stage list for a network from per-layer PE counts.
    pub fn for_network(
        dims: NnDims,
        n_pe: &[u32],
        n_cpe_linear: u32,
        fmt: FxpFormat,
        clock_hz: Option<f64>,
    ) -> Result<Self, HwError> {
        let widths = dims.layer_widths();
        if n_pe.len() != widths.len() - 1 {
            return Err(HwError::Constraint(format!(
                "expected {} PE counts (one per layer), got {}",
                widths.len() - 1,
                n_pe.len()
            )));
        }
        if n_cpe_linear == 0 {
            return Err(HwError::Constraint("linear canceller needs at least one CPE".into()));
        }
        let stages: Vec<StageConfig> = (0..n_pe.len())
            .map(|i| StageConfig {
                schedule: if i % 2 == 0 { Schedule::Nbn } else { Schedule::Ibi },
                ne_in: widths[i],
                ne_out: widths[i + 1],
                n_pe: n_pe[i],
                fmt,
            })
            .collect();
        for s in &stages {
            s.check()?;
        }
        Ok(Self { dims, stages, n_cpe_linear, clock_hz })
    }

    /// Cycles per sample of the parallel linear canceller,
    /// `ceil(L / N_CPE)`; it is not pipelined, so this is also its latency.
    pub fn linear_cycles(&self) -> u64 {
        (self.dims.l as u64).div_ceil(self.n_cpe_linear as u64)
    }
}

/// Combined analytical/simulated report for one canceller instance.
#[derive(Debug, Clone, Serialize)]
pub struct HwReport {
    pub kind: String,
    pub stage_timing: Vec<StageTiming>,
    /// Steady-state cycles between output samples (min throughput over all
    /// units).
    pub throughput_cycles_per_sample: u64,
    /// Closed-form pipeline latency, when the stage structure admits one.
    pub analytical_latency_cycles: Option<u64>,
    pub simulated_latency_cycles: Option<u64>,
    pub simulated_throughput_cycles_per_sample: Option<u64>,
    pub ops_per_sample: ComplexityReport,
    pub clock_hz: Option<f64>,
    pub notes: Vec<String>,
}

impl HwReport {
    pub fn throughput_samples_per_cycle(&self) -> String {
        format!("1/{}", self.throughput_cycles_per_sample)
    }

    /// Aligned text table mirroring the usual implementation-result rows.
    pub fn to_text_table(&self) -> String {
        let mut rows: Vec<(String, String)> = Vec::new();
        rows.push(("Throughput (samples/cycle)".into(), self.throughput_samples_per_cycle()));
        if let Some(lat) = self.analytical_latency_cycles {
            rows.push(("Latency (cycles, analytical)".into(), lat.to_string()));
        }
        if let Some(lat) = self.simulated_latency_cycles {
            rows.push(("Latency (cycles, simulated)".into(), lat.to_string()));
        }
        if let Some(t) = self.simulated_throughput_cycles_per_sample {
            rows.push(("Throughput (simulated)".into(), format!("1/{t}")));
        }
        if let Some(f) = self.clock_hz {
            rows.push(("Frequency (MHz)".into(), format!("{:.0}", f / 1e6)));
            rows.push((
                "T/P (Msamples/s)".into(),
                format!("{:.2}", f / self.throughput_cycles_per_sample as f64 / 1e6),
            ));
            if let Some(lat) = self.simulated_latency_cycles.or(self.analytical_latency_cycles) {
                rows.push(("Latency (ns)".into(), format!("{:.2}", lat as f64 / f * 1e9)));
            }
        }
        rows.push(("Real Add./sample".into(), self.ops_per_sample.n_add.to_string()));
        rows.push(("Real Mult./sample".into(), self.ops_per_sample.n_mul.to_string()));
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = format!("{}\n", self.kind);
        for (k, v) in rows {
            out.push_str(&format!("  {k:<width$}  {v}\n"));
        }
        for n in &self.notes {
            out.push_str(&format!("  note: {n}\n"));
        }
        out
    }
}

/// Analytical report for the macro-pipeline network canceller. The overall
/// throughput is the slowest of the linear unit and every stage. The
/// closed-form latency exists when the stage count is even (the NBN/IBI
/// pairing is then complete): it sums each NBN first-output time with the
/// following IBI latency, bounded below by the linear-canceller latency.
pub fn nn_pipeline_report(cfg: &NnHwConfig) -> Result<HwReport, HwError> {
    let widths = cfg.dims.layer_widths();
    if cfg.stages.len() != widths.len() - 1 {
        return Err(HwError::Constraint("stage list does not match the network depth".into()));
    }
    for (i, s) in cfg.stages.iter().enumerate() {
        if (s.ne_in, s.ne_out) != (widths[i], widths[i + 1]) {
            return Err(HwError::Constraint(format!(
                "stage {i} has fan-in/out {}x{}, network needs {}x{}",
                s.ne_in,
                s.ne_out,
                widths[i],
                widths[i + 1]
            )));
        }
        let expect = if i % 2 == 0 { Schedule::Nbn } else { Schedule::Ibi };
        if s.schedule != expect {
            return Err(HwError::Constraint(format!(
                "stage {i} must use the {expect:?} schedule (stages alternate from NBN)"
            )));
        }
    }
    let timing: Vec<StageTiming> =
        cfg.stages.iter().map(stage_latency).collect::<Result<_, _>>()?;
    let lin_cycles = cfg.linear_cycles();
    let throughput = timing
        .iter()
        .map(|t| t.cycles_per_sample)
        .chain(std::iter::once(lin_cycles))
        .max()
        .expect("at least one stage");

    // The closed-form latency assumes a stall-free schedule: it exists when
    // stages pair up NBN/IBI and no IBI stage can starve, i.e. each NBN
    // stage emits neurons at least as fast as its successor consumes them.
    let mut stall_free = cfg.stages.len() % 2 == 0;
    for pair in cfg.stages.chunks(2) {
        if pair.len() < 2 {
            break;
        }
        let (nbn, ibi) = (&pair[0], &pair[1]);
        let k = nbn.parallel_factor() as u64;
        let cpg = (nbn.ne_in as u64).div_ceil(nbn.group_width() as u64);
        // IBI demand in inputs per cycle, as the rational demand_num/demand_den.
        let (demand_num, demand_den) = if ibi.n_pe >= ibi.ne_out {
            (ibi.parallel_factor() as u64, 1u64)
        } else {
            (1u64, (ibi.ne_out as u64).div_ceil(ibi.n_pe as u64))
        };
        if k * demand_den < demand_num * cpg {
            stall_free = false;
        }
    }
    let analytical = if stall_free {
        let mut sum = 0u64;
        for pair in timing.chunks(2) {
            sum += pair[0].first_output + pair[1].latency;
        }
        Some(sum.max(lin_cycles))
    } else {
        None
    };

    let ops = metrics::complexity(metrics::ComplexitySpec::Nn {
        l: cfg.dims.l,
        n_l: cfg.dims.n_l,
        n_h: cfg.dims.n_h,
    })?;
    let mut notes = Vec::new();
    if analytical.is_none() {
        if cfg.stages.len() % 2 != 0 {
            notes.push(
                "odd stage count: closed-form latency not defined, use the simulated value".into(),
            );
        } else {
            notes.push(
                "schedule can stall (an NBN stage feeds its successor slower than it consumes): \
                 closed-form latency not applicable, use the simulated value"
                    .into(),
            );
        }
    }
    Ok(HwReport {
        kind: "nn-pipeline".into(),
        stage_timing: timing,
        throughput_cycles_per_sample: throughput,
        analytical_latency_cycles: analytical,
        simulated_latency_cycles: None,
        simulated_throughput_cycles_per_sample: None,
        ops_per_sample: ops,
        clock_hz: cfg.clock_hz,
        notes,
    })
}

/// Polynomial-canceller hardware configuration: a single array of `n_cpe`
/// complex MACs fed by `n_cpe_bf` basis-function CPEs and a circular buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyHwConfig {
    pub p: u32,
    pub l: u32,
    pub n_cpe: u32,
    pub n_cpe_bf: u32,
    pub fmt: FxpFormat,
    pub clock_hz: Option<f64>,
}

/// Closed-form timing pieces of the polynomial canceller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PolyTiming {
    /// Cycles to compute the new sample's basis functions (one for the
    /// squaring, then the inner loop per order).
    pub bf_new: u64,
    /// Cycles to process every term whose basis function is already
    /// buffered.
    pub bf_old: u64,
    /// Cycles from sample input to its output (the final cycle is the adder
    /// tree behind the pipeline register).
    pub latency: u64,
    pub cycles_per_sample: u64,
}

impl PolyHwConfig {
    pub fn check(&self) -> Result<(), HwError> {
        if self.p == 0 || self.p % 2 == 0 {
            return Err(HwError::Constraint(format!(
                "polynomial order must be odd and positive, got {}",
                self.p
            )));
        }
        if self.l == 0 {
            return Err(HwError::Constraint("memory length must be >= 1".into()));
        }
        if self.n_cpe == 0 || self.n_cpe as u64 > metrics::bf_count(self.l, self.p) {
            return Err(HwError::Constraint(format!(
                "CPE count must be in 1..=N_BF ({})",
                metrics::bf_count(self.l, self.p)
            )));
        }
        if self.n_cpe_bf == 0 || self.n_cpe_bf > (self.p + 1) / 2 {
            return Err(HwError::Constraint(format!(
                "basis-function CPE count must be in 1..=(P+1)/2 (= {})",
                (self.p + 1) / 2
            )));
        }
        Ok(())
    }

    pub fn n_bf(&self) -> u64 {
        metrics::bf_count(self.l, self.p)
    }

    pub fn timing(&self) -> Result<PolyTiming, HwError> {
        self.check()?;
        let n_bf = self.n_bf();
        let (l, n_cpe) = (self.l as u64, self.n_cpe as u64);
        let mut bf_new = 1u64; // squaring cycle
        let mut p = 3;
        while p <= self.p {
            bf_new += ((p as u64 + 1) / 2).div_ceil(self.n_cpe_bf as u64);
            p += 2;
        }
        let bf_old = ((l - 1) * n_bf).div_ceil(l * n_cpe);
        let latency = if bf_old >= bf_new {
            n_bf.div_ceil(n_cpe) + 1
        } else {
            bf_new + n_bf.div_ceil(l * n_cpe) + 1
        };
        Ok(PolyTiming { bf_new, bf_old, latency, cycles_per_sample: latency - 1 })
    }
}

/// Analytical report for the polynomial canceller.
pub fn poly_hw_report(cfg: &PolyHwConfig) -> Result<HwReport, HwError> {
    let t = cfg.timing()?;
    let ops = metrics::complexity(metrics::ComplexitySpec::Poly { l: cfg.l, p: cfg.p })?;
    Ok(HwReport {
        kind: "poly-array".into(),
        stage_timing: vec![StageTiming {
            latency: t.latency,
            first_output: t.latency,
            cycles_per_sample: t.cycles_per_sample,
        }],
        throughput_cycles_per_sample: t.cycles_per_sample,
        analytical_latency_cycles: Some(t.latency),
        simulated_latency_cycles: None,
        simulated_throughput_cycles_per_sample: None,
        ops_per_sample: ops,
        clock_hz: cfg.clock_hz,
        notes: vec![format!(
            "basis-function schedule: {} new-BF cycles vs {} buffered-term cycles",
            t.bf_new, t.bf_old
        )],
    })
}

/// Word-addressed parameter memory: `lanes` raw values of `lane_bits` each
/// per word, writable externally to reconfigure a canceller without
/// rebuilding it.
#[derive(Debug, Clone, PartialEq)]
pub struct WordMemory {
    lanes: usize,
    lane_bits: u32,
    words: Vec<Vec<i64>>,
}

impl WordMemory {
    pub fn new(lanes: usize, lane_bits: u32, n_words: usize) -> Self {
        Self { lanes, lane_bits, words: vec![vec![0; lanes]; n_words] }
    }

    pub fn word_width_bits(&self) -> u32 {
        self.lanes as u32 * self.lane_bits
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn read(&self, addr: usize) -> &[i64] {
        &self.words[addr]
    }

    pub fn write_word(&mut self, addr: usize, lanes: &[i64]) -> Result<(), HwError> {
        if addr >= self.words.len() {
            return Err(HwError::Constraint(format!(
                "word address {addr} out of range (memory has {} words)",
                self.words.len()
            )));
        }
        if lanes.len() != self.lanes {
            return Err(HwError::Constraint(format!(
                "word must carry {} lanes, got {}",
                self.lanes,
                lanes.len()
            )));
        }
        let min = -(1i64 << (self.lane_bits - 1));
        let max = (1i64 << (self.lane_bits - 1)) - 1;
        if let Some(bad) = lanes.iter().find(|&&v| v < min || v > max) {
            return Err(HwError::Constraint(format!(
                "lane value {bad} does not fit in {} bits",
                self.lane_bits
            )));
        }
        self.words[addr] = lanes.to_vec();
        Ok(())
    }
}
