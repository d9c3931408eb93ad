//! Finite-length validation: flooding sum-product decoding, Monte-Carlo
//! error rates and an exhaustive maximum-likelihood reference decoder.
//!
//! Errors are always counted against the XOR word `z`, which is what the
//! relay has to recover.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::channel::BinaryInputChannel;
use crate::clip;
use crate::codes::CodeInstance;
use crate::de::with_workers;
use crate::error::{invalid, Error, Result};
use crate::rng::stream;
use crate::stats::{wilson, Interval, Z95};

/// Largest code dimension accepted by [`ml_decode`].
pub const ML_MAX_DIMENSION: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    pub estimate: Vec<u8>,
    /// All parity checks hold for `estimate`.
    pub converged: bool,
    pub iterations_used: usize,
    pub posterior_llrs: Vec<f64>,
}

/// Sum-product decoder bound to one code, with reusable message buffers.
///
/// Edges are stored check-major so a check's messages are contiguous.
pub struct BpDecoder<'a> {
    code: &'a CodeInstance,
    /// Start of each check's edge range (length `m + 1`).
    check_start: Vec<usize>,
    /// Variable of each edge.
    edge_var: Vec<u32>,
    /// Edge ids of each variable, in CSR form.
    var_start: Vec<usize>,
    var_edges: Vec<u32>,
    /// `tanh(m/2)` of variable-to-check messages.
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    /// Scratch for the leave-one-out products.
    prefix: Vec<f64>,
}

impl<'a> BpDecoder<'a> {
    pub fn new(code: &'a CodeInstance) -> Self {
        let mut check_start = Vec::with_capacity(code.num_checks() + 1);
        let mut edge_var = Vec::new();
        check_start.push(0);
        for row in code.checks() {
            edge_var.extend_from_slice(row);
            check_start.push(edge_var.len());
        }
        let n = code.n();
        let mut degree = vec![0usize; n];
        for &v in &edge_var {
            degree[v as usize] += 1;
        }
        let mut var_start = vec![0usize; n + 1];
        for v in 0..n {
            var_start[v + 1] = var_start[v] + degree[v];
        }
        let mut fill = var_start.clone();
        let mut var_edges = vec![0u32; edge_var.len()];
        for (e, &v) in edge_var.iter().enumerate() {
            var_edges[fill[v as usize]] = e as u32;
            fill[v as usize] += 1;
        }
        let max_check = code.checks().iter().map(Vec::len).max().unwrap_or(0);
        let edges = edge_var.len();
        Self {
            code,
            check_start,
            edge_var,
            var_start,
            var_edges,
            v2c: vec![0.0; edges],
            c2v: vec![0.0; edges],
            prefix: vec![0.0; max_check + 1],
        }
    }

    pub fn code(&self) -> &CodeInstance {
        self.code
    }

    /// Decode from channel LLRs.
    pub fn decode(&mut self, llrs: &[f64], max_iter: usize) -> DecodeOutcome {
        self.decode_observed(llrs, max_iter, |_, _| {})
    }

    /// Decode, calling `observe(iteration, hard_decision)` after the initial
    /// channel decision (iteration 0) and after every iteration performed.
    pub fn decode_observed<F: FnMut(usize, &[u8])>(
        &mut self,
        llrs: &[f64],
        max_iter: usize,
        mut observe: F,
    ) -> DecodeOutcome {
        let n = self.code.n();
        assert_eq!(llrs.len(), n, "one LLR per code bit is required");
        let mut posterior: Vec<f64> = llrs.iter().map(|&l| clip::llr(l)).collect();
        let mut estimate: Vec<u8> = posterior.iter().map(|&p| hard(p)).collect();
        observe(0, &estimate);

        for (e, &v) in self.edge_var.iter().enumerate() {
            self.v2c[e] = (0.5 * posterior[v as usize]).tanh();
        }
        let mut iterations = 0;
        let mut converged = self.code.is_codeword(&estimate);
        while !converged && iterations < max_iter {
            iterations += 1;
            self.update_checks();
            self.update_vars(llrs, &mut posterior);
            for (z, &p) in estimate.iter_mut().zip(&posterior) {
                *z = hard(p);
            }
            observe(iterations, &estimate);
            converged = self.code.is_codeword(&estimate);
        }
        DecodeOutcome {
            estimate,
            converged,
            iterations_used: iterations,
            posterior_llrs: posterior,
        }
    }

    fn update_checks(&mut self) {
        for c in 0..self.check_start.len() - 1 {
            let (lo, hi) = (self.check_start[c], self.check_start[c + 1]);
            let t = &self.v2c[lo..hi];
            // prefix[j] = product of t[..j]; the suffix is folded in on the way back
            self.prefix[0] = 1.0;
            for j in 0..t.len() {
                self.prefix[j + 1] = self.prefix[j] * t[j];
            }
            let mut suffix = 1.0;
            for j in (0..t.len()).rev() {
                self.c2v[lo + j] = clip::two_atanh(self.prefix[j] * suffix);
                suffix *= t[j];
            }
        }
    }

    fn update_vars(&mut self, llrs: &[f64], posterior: &mut [f64]) {
        for v in 0..posterior.len() {
            let edges = &self.var_edges[self.var_start[v]..self.var_start[v + 1]];
            let total: f64 = llrs[v] + edges.iter().map(|&e| self.c2v[e as usize]).sum::<f64>();
            posterior[v] = clip::llr(total);
            for &e in edges {
                let e = e as usize;
                self.v2c[e] = (0.5 * clip::llr(total - self.c2v[e])).tanh();
            }
        }
    }
}

/// Ties go to 0.
#[inline]
fn hard(llr: f64) -> u8 {
    u8::from(llr < 0.0)
}

/// One-shot sum-product decoding of channel outputs `y`.
pub fn bp_decode<C: BinaryInputChannel>(code: &CodeInstance, y: &[f64], channel: &C, max_iter: usize) -> DecodeOutcome {
    let llrs: Vec<f64> = y.iter().map(|&v| channel.llr(v)).collect();
    BpDecoder::new(code).decode(&llrs, max_iter)
}

/// Exhaustive ML decoding: the codeword maximizing `sum_t ln L[y_t | z_t]`,
/// ties broken towards the lexicographically smallest word.
pub fn ml_decode<C: BinaryInputChannel>(code: &CodeInstance, y: &[f64], channel: &C) -> Result<Vec<u8>> {
    let k = code.dimension();
    if k > ML_MAX_DIMENSION {
        return Err(Error::CodeTooLarge {
            dimension: k,
            max: ML_MAX_DIMENSION,
        });
    }
    if y.len() != code.n() {
        return Err(invalid("y", format!("expected {} outputs, got {}", code.n(), y.len())));
    }
    let llrs: Vec<f64> = y.iter().map(|&v| channel.llr(v)).collect();
    Ok(MlSearch::new(code, &llrs).run())
}

/// Relative to the all-zero word, a codeword `c` scores `-sum_{t in c} llr_t`,
/// so the search minimizes the LLR mass on the support.
struct MlSearch<'a> {
    n: usize,
    rows: Vec<BitVec>,
    llrs: &'a [f64],
}

impl<'a> MlSearch<'a> {
    fn new(code: &CodeInstance, llrs: &'a [f64]) -> Self {
        Self {
            n: code.n(),
            rows: code.generator_rows(),
            llrs,
        }
    }

    /// Support cost summed in index order, so equal words give equal values.
    fn exact_cost(&self, word: &BitVec) -> f64 {
        (0..self.n).filter(|&t| word.get(t)).map(|t| self.llrs[t]).sum()
    }

    fn run(&self) -> Vec<u8> {
        let mut word = BitVec::zeros(self.n);
        let mut cost = 0.0;
        let mut best = word.clone();
        let mut best_cost = 0.0;
        let scale: f64 = self.llrs.iter().map(|l| l.abs()).sum::<f64>().max(1.0);
        let slack = 1e-12 * scale;
        for step in 1u64..(1u64 << self.rows.len()) {
            let row = &self.rows[step.trailing_zeros() as usize];
            for (wi, &rw) in row.words().iter().enumerate() {
                let mut bits = rw;
                while bits != 0 {
                    let t = wi * 64 + bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    cost += if word.get(t) { -self.llrs[t] } else { self.llrs[t] };
                }
            }
            word.xor_assign(row);
            if cost < best_cost - slack {
                best_cost = cost;
                best = word.clone();
            } else if cost <= best_cost + slack {
                let (exact, exact_best) = (self.exact_cost(&word), self.exact_cost(&best));
                if exact < exact_best || (exact == exact_best && lex_less(&word, &best, self.n)) {
                    best_cost = cost;
                    best = word.clone();
                }
            }
        }
        best.to_bits_len(self.n)
    }
}

/// Lexicographic order with bit 0 most significant.
fn lex_less(a: &BitVec, b: &BitVec, n: usize) -> bool {
    (0..n)
        .find(|&t| a.get(t) != b.get(t))
        .is_some_and(|t| !a.get(t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub frames: usize,
    pub max_iter: usize,
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Record the BER after every iteration (frames that converged early keep
    /// their final decision).
    #[serde(default)]
    pub trace: bool,
}

/// Mean bit error rate over frames after one decoder iteration, with the
/// standard error of that mean across frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationBer {
    pub iteration: usize,
    pub ber: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub sigma: f64,
    pub n: usize,
    pub frames: usize,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
    /// Wilson interval treating bits as independent trials.
    pub ber_ci: Interval,
    pub fer: f64,
    pub fer_ci: Interval,
    pub avg_iters: f64,
    /// Frames that stopped with every check satisfied.
    pub converged: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iteration_ber: Vec<IterationBer>,
}

impl McResult {
    pub const CSV_HEADER: &'static str = "sigma,n,frames,ber,ber_lo,ber_hi,fer,fer_lo,fer_hi,avg_iters";

    pub fn write_csv_row<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            self.sigma,
            self.n,
            self.frames,
            self.ber,
            self.ber_ci.lo,
            self.ber_ci.hi,
            self.fer,
            self.fer_ci.lo,
            self.fer_ci.hi,
            self.avg_iters
        )
    }
}

struct FrameStats {
    bit_errors: u64,
    iterations: usize,
    converged: bool,
    /// Bit errors after each iteration `0..=max_iter`.
    per_iteration: Vec<u64>,
}

/// Simulate `frames` transmissions of uniformly random codewords and decode
/// each. Frame `f` draws from the stream `(seed, f)`, so results do not
/// depend on the number of workers.
pub fn monte_carlo<C: BinaryInputChannel>(code: &CodeInstance, channel: &C, cfg: &McConfig) -> Result<McResult> {
    if cfg.frames == 0 {
        return Err(invalid("frames", "at least one frame is required"));
    }
    if cfg.workers == Some(0) {
        return Err(invalid("workers", "must be >= 1"));
    }
    let n = code.n();
    let stats: Vec<FrameStats> = with_workers(cfg.workers, || {
        (0..cfg.frames)
            .into_par_iter()
            .map_init(
                || BpDecoder::new(code),
                |dec, f| simulate_frame(dec, channel, cfg, f as u64),
            )
            .collect()
    });

    let bit_errors: u64 = stats.iter().map(|s| s.bit_errors).sum();
    let frame_errors = stats.iter().filter(|s| s.bit_errors > 0).count() as u64;
    let frames = cfg.frames as u64;
    let bits = frames * n as u64;
    let iteration_ber = if cfg.trace {
        (0..=cfg.max_iter)
            .map(|l| {
                let rates: Vec<f64> = stats.iter().map(|s| s.per_iteration[l] as f64 / n as f64).collect();
                let (mean, std_err) = mean_and_std_err(&rates);
                IterationBer {
                    iteration: l,
                    ber: mean,
                    std_err,
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(McResult {
        sigma: channel.sigma(),
        n,
        frames: cfg.frames,
        bit_errors,
        frame_errors,
        ber: bit_errors as f64 / bits as f64,
        ber_ci: wilson(bit_errors, bits, Z95),
        fer: frame_errors as f64 / frames as f64,
        fer_ci: wilson(frame_errors, frames, Z95),
        avg_iters: stats.iter().map(|s| s.iterations as f64).sum::<f64>() / frames as f64,
        converged: stats.iter().filter(|s| s.converged).count() as u64,
        iteration_ber,
    })
}

fn simulate_frame<C: BinaryInputChannel>(dec: &mut BpDecoder<'_>, channel: &C, cfg: &McConfig, frame: u64) -> FrameStats {
    let mut rng = stream(cfg.seed, &[frame]);
    let z = dec.code().sample_codeword(&mut rng);
    let llrs: Vec<f64> = z.iter().map(|&bit| channel.sample_llr(bit, &mut rng)).collect();
    let mut per_iteration = Vec::new();
    let out = dec.decode_observed(&llrs, cfg.max_iter, |_, est| {
        if cfg.trace {
            per_iteration.push(count_errors(est, &z));
        }
    });
    let bit_errors = count_errors(&out.estimate, &z);
    if cfg.trace {
        per_iteration.resize(cfg.max_iter + 1, bit_errors);
    }
    FrameStats {
        bit_errors,
        iterations: out.iterations_used,
        converged: out.converged,
        per_iteration,
    }
}

fn count_errors(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

fn mean_and_std_err(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
