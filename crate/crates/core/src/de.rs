//! Population-dynamics density evolution for asymmetric binary-input
//! channels.
//!
//! Message densities are conditioned on the transmitted bit `z`, because the
//! all-zero codeword cannot be assumed. Each conditional density is a
//! population of `N` samples. A sweep first regenerates every
//! check-to-variable population from the variable-to-check populations, then
//! every variable-to-check population from the fresh check-to-variable ones
//! and new channel draws.
//!
//! Work is cut into fixed chunks of [`CHUNK`] samples, each with its own
//! random stream derived from `(seed, sweep, phase, population, chunk)`, so a
//! run is reproducible for a given seed whatever the number of workers.

use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::BinaryInputChannel;
use crate::clip;
use crate::codes::{Ensemble, Protograph, RegularEnsemble};
use crate::error::{invalid, Result};
use crate::rng::{stream, StreamRng};

/// Samples per independently seeded work unit.
pub const CHUNK: usize = 2048;

const PHASE_CHECK: u64 = 0;
const PHASE_VAR: u64 = 1;
const PHASE_POSTERIOR: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    /// Population size `N`.
    pub population: usize,
    /// Maximum number of sweeps `T`.
    pub max_sweeps: usize,
    pub seed: u64,
    /// A sweep counts as error-free when the (worst-bundle) BER is below this.
    pub stop_ber: f64,
    /// Consecutive error-free sweeps required before stopping early.
    pub confirm_sweeps: usize,
    /// Worker threads; `None` uses the global rayon pool.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Give up early when the mean per-bundle BER, extrapolated linearly over
    /// this many sweeps, would not vanish within `2 * max_sweeps`. Meant for
    /// coupled chains, whose decoding wave removes errors at a constant rate.
    #[serde(default)]
    pub stall_window: Option<usize>,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population: 100_000,
            max_sweeps: 2000,
            seed: 1,
            stop_ber: 1e-5,
            confirm_sweeps: 10,
            workers: None,
            stall_window: None,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 1000 {
            return Err(invalid("N", format!("population must be >= 1000, got {}", self.population)));
        }
        if self.max_sweeps == 0 {
            return Err(invalid("T", "at least one sweep is required"));
        }
        if !(self.stop_ber > 0.0 && self.stop_ber < 0.5) {
            return Err(invalid("stop_ber", format!("must lie in (0, 0.5), got {}", self.stop_ber)));
        }
        if self.confirm_sweeps == 0 {
            return Err(invalid("confirm_sweeps", "must be >= 1"));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers", "must be >= 1"));
        }
        if self.stall_window == Some(0) {
            return Err(invalid("stall_window", "must be >= 1"));
        }
        Ok(())
    }
}

/// One directed edge type of the density-evolution graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeType {
    pub bundle: usize,
    /// Check-to-variable edge types summed into an outgoing variable message.
    pub var_inputs: Vec<usize>,
    /// Variable-to-check edge types combined into an outgoing check message.
    pub check_inputs: Vec<usize>,
}

/// Edge types and bundles of an ensemble, as seen by density evolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeGraph {
    edge_types: Vec<EdgeType>,
    /// Check-to-variable edge types feeding each bundle's posterior.
    bundles: Vec<Vec<usize>>,
    coupled: bool,
}

impl DeGraph {
    pub fn regular(ens: &RegularEnsemble) -> Self {
        Self {
            edge_types: vec![EdgeType {
                bundle: 0,
                var_inputs: vec![0; ens.dl() - 1],
                check_inputs: vec![0; ens.dr() - 1],
            }],
            bundles: vec![vec![0; ens.dl()]],
            coupled: false,
        }
    }

    pub fn protograph(proto: &Protograph) -> Self {
        let edges = proto.edges();
        let k = proto.k();
        let edge_types = edges
            .iter()
            .enumerate()
            .map(|(e, pe)| {
                let var_inputs = proto.bundle_edges(pe.bundle).filter(|&o| o != e).collect();
                // k messages per edge type at the check, one fewer of our own
                let check_inputs = proto
                    .check_edges(pe.check)
                    .flat_map(|o| std::iter::repeat_n(o, if o == e { k - 1 } else { k }))
                    .collect();
                EdgeType {
                    bundle: pe.bundle,
                    var_inputs,
                    check_inputs,
                }
            })
            .collect();
        let bundles = (0..proto.length()).map(|i| proto.bundle_edges(i).collect()).collect();
        Self {
            edge_types,
            bundles,
            coupled: proto.is_coupled(),
        }
    }

    pub fn from_ensemble(ensemble: &Ensemble) -> Self {
        match ensemble {
            Ensemble::Regular(e) => Self::regular(e),
            Ensemble::Protograph(p) => Self::protograph(p),
        }
    }

    pub fn edge_types(&self) -> &[EdgeType] {
        &self.edge_types
    }

    pub fn num_bundles(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_coupled(&self) -> bool {
        self.coupled
    }

    /// Two directions times two conditionings per edge type.
    pub fn population_count(&self) -> usize {
        4 * self.edge_types.len()
    }
}

/// Draw `d` bits whose XOR equals `z`: `d - 1` free fair bits, the last one
/// fixed by parity. Bit `s` of the result is the `s`-th input's conditioning.
#[inline]
pub fn draw_parity_bits<R: Rng + ?Sized>(z: u8, d: usize, rng: &mut R) -> u64 {
    debug_assert!((1..=64).contains(&d));
    let free = d - 1;
    let r = if free == 0 {
        0
    } else {
        rng.random::<u64>() & (u64::MAX >> (64 - free))
    };
    let last = u64::from(z) ^ u64::from(r.count_ones() & 1);
    r | (last << free)
}

/// BER estimate after one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub iteration: usize,
    pub per_bundle: Vec<f64>,
    /// Worst bundle.
    pub max: f64,
}

/// Populations, counters and trace of one density-evolution run.
#[derive(Debug, Clone)]
pub struct DeState<C> {
    graph: DeGraph,
    channel: C,
    n: usize,
    seed: u64,
    /// Variable-to-check populations stored as `tanh(m/2)`, `[edge][z]`.
    var_tanh: Vec<[Vec<f64>; 2]>,
    /// Check-to-variable LLR populations, `[edge][z]`.
    check: Vec<[Vec<f64>; 2]>,
    iteration: usize,
    trace: Vec<BerRecord>,
}

impl<C: BinaryInputChannel> DeState<C> {
    /// All populations start at zero.
    pub fn new(graph: DeGraph, channel: C, population: usize, seed: u64) -> Self {
        let zeros = || [vec![0.0; population], vec![0.0; population]];
        let e = graph.edge_types.len();
        assert!(
            graph.edge_types.iter().all(|t| t.check_inputs.len() <= 64),
            "check degree above 65 is not supported"
        );
        Self {
            var_tanh: (0..e).map(|_| zeros()).collect(),
            check: (0..e).map(|_| zeros()).collect(),
            graph,
            channel,
            n: population,
            seed,
            iteration: 0,
            trace: Vec::new(),
        }
    }

    pub fn graph(&self) -> &DeGraph {
        &self.graph
    }
    pub fn channel(&self) -> &C {
        &self.channel
    }
    pub fn iteration(&self) -> usize {
        self.iteration
    }
    pub fn population_size(&self) -> usize {
        self.n
    }
    pub fn trace(&self) -> &[BerRecord] {
        &self.trace
    }
    pub fn population_count(&self) -> usize {
        self.graph.population_count()
    }

    /// Variable-to-check LLR samples of one edge type given `z`.
    pub fn var_to_check(&self, edge: usize, z: u8) -> Vec<f64> {
        self.var_tanh[edge][z as usize]
            .iter()
            .map(|&t| clip::two_atanh(t))
            .collect()
    }

    /// Check-to-variable LLR samples of one edge type given `z`.
    pub fn check_to_var(&self, edge: usize, z: u8) -> &[f64] {
        &self.check[edge][z as usize]
    }

    /// One synchronous sweep over every population.
    pub fn step(&mut self) {
        self.iteration += 1;
        let sweep = self.iteration as u64;
        let n = self.n;
        let seed = self.seed;
        let Self {
            graph,
            channel,
            var_tanh,
            check,
            ..
        } = self;

        let var_ro: &Vec<[Vec<f64>; 2]> = var_tanh;
        chunk_tasks(check).into_par_iter().for_each(|(e, z, c, out)| {
            let mut rng = stream(seed, &[sweep, PHASE_CHECK, e as u64, u64::from(z), c as u64]);
            update_checks(out, z, &graph.edge_types[e].check_inputs, var_ro, n, &mut rng);
        });

        let check_ro: &Vec<[Vec<f64>; 2]> = check;
        let channel: &C = channel;
        chunk_tasks(var_tanh).into_par_iter().for_each(|(e, z, c, out)| {
            let mut rng = stream(seed, &[sweep, PHASE_VAR, e as u64, u64::from(z), c as u64]);
            update_vars(out, z, &graph.edge_types[e].var_inputs, check_ro, channel, n, &mut rng);
        });
    }

    /// Estimate the per-bundle BER from posterior messages (channel draw plus
    /// one message from every incoming edge type), append it to the trace and
    /// return it. Zero posteriors count as half an error.
    pub fn estimate_ber(&mut self) -> BerRecord {
        let n = self.n;
        let chunks = n.div_ceil(CHUNK);
        let tasks: Vec<(usize, u8, usize)> = (0..self.graph.bundles.len())
            .flat_map(|i| (0..2u8).flat_map(move |z| (0..chunks).map(move |c| (i, z, c))))
            .collect();
        let sweep = self.iteration as u64;
        let (seed, graph, check, channel) = (self.seed, &self.graph, &self.check, &self.channel);
        let half_errors: Vec<(usize, u64)> = tasks
            .into_par_iter()
            .map(|(i, z, c)| {
                let mut rng = stream(seed, &[sweep, PHASE_POSTERIOR, i as u64, u64::from(z), c as u64]);
                let len = CHUNK.min(n - c * CHUNK);
                let sources: Vec<&[f64]> =
                    graph.bundles[i].iter().map(|&src| &check[src][z as usize][..n]).collect();
                let mut halves = 0u64;
                for _ in 0..len {
                    let mut m = channel.sample_llr(z, &mut rng);
                    for pop in &sources {
                        m += pop[index(&mut rng, n)];
                    }
                    halves += posterior_half_errors(m, z);
                }
                (i, halves)
            })
            .collect();
        let mut per_bundle = vec![0.0; graph.bundles.len()];
        let mut totals = vec![0u64; graph.bundles.len()];
        for (i, h) in half_errors {
            totals[i] += h;
        }
        for (b, h) in per_bundle.iter_mut().zip(totals) {
            // halves over both conditionings: 0.5 * (e0/N + e1/N) = h / (4N)
            *b = h as f64 / (4.0 * n as f64);
        }
        let max = per_bundle.iter().copied().fold(0.0, f64::max);
        let rec = BerRecord {
            iteration: self.iteration,
            per_bundle,
            max,
        };
        self.trace.push(rec.clone());
        rec
    }
}

#[inline]
fn posterior_half_errors(m: f64, z: u8) -> u64 {
    if m == 0.0 {
        1
    } else if (m < 0.0) == (z == 0) {
        2
    } else {
        0
    }
}

type Task<'a> = (usize, u8, usize, &'a mut [f64]);

fn chunk_tasks(pops: &mut [[Vec<f64>; 2]]) -> Vec<Task<'_>> {
    let mut tasks = Vec::new();
    for (e, pair) in pops.iter_mut().enumerate() {
        for (z, pop) in pair.iter_mut().enumerate() {
            for (c, chunk) in pop.chunks_mut(CHUNK).enumerate() {
                tasks.push((e, z as u8, c, chunk));
            }
        }
    }
    tasks
}

/// Uniform index in `0..n` by multiply-shift of a 32-bit draw. The bias is
/// below `n / 2^32`, far under the Monte-Carlo noise of any population.
#[inline(always)]
fn index<R: Rng + ?Sized>(rng: &mut R, n: usize) -> usize {
    ((u64::from(rng.next_u32()) * n as u64) >> 32) as usize
}

fn update_checks(
    out: &mut [f64],
    z: u8,
    inputs: &[usize],
    var_tanh: &[[Vec<f64>; 2]],
    n: usize,
    rng: &mut StreamRng,
) {
    let d = inputs.len();
    let sources: Vec<[&[f64]; 2]> = inputs
        .iter()
        .map(|&src| [&var_tanh[src][0][..n], &var_tanh[src][1][..n]])
        .collect();
    for slot in out {
        let bits = draw_parity_bits(z, d, rng);
        let mut p = 1.0;
        for (s, pair) in sources.iter().enumerate() {
            let pop = pair[((bits >> s) & 1) as usize];
            p *= pop[index(rng, n)];
        }
        *slot = clip::two_atanh(p);
    }
}

fn update_vars<C: BinaryInputChannel>(
    out: &mut [f64],
    z: u8,
    inputs: &[usize],
    check: &[[Vec<f64>; 2]],
    channel: &C,
    n: usize,
    rng: &mut StreamRng,
) {
    let sources: Vec<&[f64]> = inputs.iter().map(|&src| &check[src][z as usize][..n]).collect();
    for slot in out {
        let mut m = channel.sample_llr(z, rng);
        for pop in &sources {
            m += pop[index(rng, n)];
        }
        *slot = (0.5 * clip::llr(m)).tanh();
    }
}

/// Create the initial state for an ensemble.
pub fn de_init<C: BinaryInputChannel>(ensemble: &Ensemble, channel: C, population: usize, seed: u64) -> DeState<C> {
    DeState::new(DeGraph::from_ensemble(ensemble), channel, population, seed)
}

/// One sweep of a regular-ensemble state.
pub fn de_step_uncoupled<C: BinaryInputChannel>(state: &mut DeState<C>) {
    assert_eq!(state.graph.edge_types.len(), 1, "state is not a regular ensemble");
    state.step();
}

/// One sweep of a protograph state.
pub fn de_step_coupled<C: BinaryInputChannel>(state: &mut DeState<C>) {
    assert!(
        state.graph.edge_types.len() > 1,
        "state is not a protograph ensemble"
    );
    state.step();
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeRun {
    pub decodable: bool,
    pub sweeps: usize,
    /// First sweep of the final run of error-free sweeps, if any.
    pub vanished_at: Option<usize>,
    /// Stopped early by the stall rule.
    #[serde(default)]
    pub stalled: bool,
    pub trace: Vec<BerRecord>,
}

pub(crate) fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        None => f(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .expect("thread pool")
            .install(f),
    }
}

/// Sweep until the worst-bundle BER stays below `stop_ber` for
/// `confirm_sweeps` consecutive sweeps, or `max_sweeps` elapse.
pub fn run_de<C: BinaryInputChannel + Send>(ensemble: &Ensemble, channel: C, cfg: &DeConfig) -> Result<DeRun> {
    cfg.validate()?;
    Ok(with_workers(cfg.workers, || {
        let mut state = de_init(ensemble, channel, cfg.population, cfg.seed);
        run_state(&mut state, cfg)
    }))
}

fn run_state<C: BinaryInputChannel>(state: &mut DeState<C>, cfg: &DeConfig) -> DeRun {
    let mut quiet_since: Option<usize> = None;
    let mut decodable = false;
    let mut stalled = false;
    let mut means = Vec::new();
    for _ in 0..cfg.max_sweeps {
        state.step();
        let rec = state.estimate_ber();
        means.push(rec.per_bundle.iter().sum::<f64>() / rec.per_bundle.len() as f64);
        if rec.max < cfg.stop_ber {
            let start = *quiet_since.get_or_insert(rec.iteration);
            if rec.iteration + 1 - start >= cfg.confirm_sweeps {
                decodable = true;
                break;
            }
        } else {
            quiet_since = None;
            if let Some(w) = cfg.stall_window {
                if is_stalled(&means, w, cfg.max_sweeps) {
                    stalled = true;
                    break;
                }
            }
        }
    }
    let last = state.trace.last().map_or(0.5, |r| r.max);
    DeRun {
        decodable: decodable || last < cfg.stop_ber,
        sweeps: state.iteration,
        vanished_at: quiet_since,
        stalled,
        trace: std::mem::take(&mut state.trace),
    }
}

/// Linear projection of the mean BER over the last `window` sweeps (after a
/// burn-in of one window) lands beyond `2 * max_sweeps`.
fn is_stalled(means: &[f64], window: usize, max_sweeps: usize) -> bool {
    let t = means.len();
    if t < 2 * window {
        return false;
    }
    let (now, then) = (means[t - 1], means[t - 1 - window]);
    let rate = (then - now) / window as f64;
    rate <= 0.0 || t as f64 + now / rate > 2.0 * max_sweeps as f64
}

/// Write a BER trace as CSV with columns `iteration,bundle,ber`. Coupled
/// traces list every bundle plus an `all` row holding the worst bundle.
pub fn write_trace_csv<W: Write>(mut w: W, trace: &[BerRecord], coupled: bool) -> io::Result<()> {
    writeln!(w, "iteration,bundle,ber")?;
    for rec in trace {
        if coupled {
            for (i, b) in rec.per_bundle.iter().enumerate() {
                writeln!(w, "{},{},{:e}", rec.iteration, i + 1, b)?;
            }
        }
        writeln!(w, "{},all,{:e}", rec.iteration, rec.max)?;
    }
    Ok(())
}
