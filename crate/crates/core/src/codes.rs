//! Code ensembles and sampled finite-length codes.
//!
//! [`RegularEnsemble`] and [`Protograph`] describe ensembles for density
//! evolution. [`CodeInstance`] is one sampled parity-check matrix together
//! with an [`Encoder`] that draws uniformly random codewords.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::error::{invalid, Error, Result};
use crate::rng::stream;

/// Retry budget for removing double edges.
pub const DOUBLE_EDGE_PASSES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularEnsemble {
    dl: usize,
    dr: usize,
}

impl RegularEnsemble {
    pub fn new(dl: usize, dr: usize) -> Result<Self> {
        if dl < 2 {
            return Err(invalid("dl", format!("variable degree must be >= 2, got {dl}")));
        }
        if dr <= dl {
            return Err(invalid("dr", format!("check degree must exceed dl = {dl}, got {dr}")));
        }
        Ok(Self { dl, dr })
    }

    pub fn dl(&self) -> usize {
        self.dl
    }

    pub fn dr(&self) -> usize {
        self.dr
    }

    pub fn design_rate(&self) -> f64 {
        1.0 - self.dl as f64 / self.dr as f64
    }
}

/// One edge type of a protograph: every variable node of `bundle` has exactly
/// one edge of this type, ending at `check`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtoEdge {
    pub bundle: usize,
    pub check: usize,
}

/// A `(dl, dr, L)` terminated coupled chain, or the single-copy base
/// protograph of a `(dl, dr)` code.
///
/// Bundles are indexed `0..L`, each holding `k = dr/dl` variable nodes.
/// Checks are indexed `0..L + 2*dhat`; index `a` corresponds to chain
/// position `a - dhat + 1`. Bundle `i` connects to checks `i..=i + 2*dhat`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Protograph {
    dl: usize,
    dr: usize,
    length: usize,
    k: usize,
    dhat: usize,
    num_checks: usize,
    coupled: bool,
    edges: Vec<ProtoEdge>,
}

impl Protograph {
    /// Build the coupled chain. Requires `dr` divisible by `dl` and odd `dl`.
    pub fn coupled(dl: usize, dr: usize, length: usize) -> Result<Self> {
        RegularEnsemble::new(dl, dr)?;
        if dr % dl != 0 {
            return Err(invalid("dr", format!("k = dr/dl must be an integer, got {dr}/{dl}")));
        }
        if dl % 2 == 0 {
            return Err(invalid("dl", format!("dhat = (dl-1)/2 must be an integer, dl = {dl} is even")));
        }
        if length == 0 {
            return Err(invalid("L", "chain length must be >= 1"));
        }
        let dhat = (dl - 1) / 2;
        let edges = (0..length)
            .flat_map(|i| (i..=i + 2 * dhat).map(move |a| ProtoEdge { bundle: i, check: a }))
            .collect();
        Ok(Self {
            dl,
            dr,
            length,
            k: dr / dl,
            dhat,
            num_checks: length + 2 * dhat,
            coupled: true,
            edges,
        })
    }

    /// The base protograph: `k` variable nodes joined to one check by `dl`
    /// parallel edges each.
    pub fn uncoupled(dl: usize, dr: usize) -> Result<Self> {
        RegularEnsemble::new(dl, dr)?;
        if dr % dl != 0 {
            return Err(invalid("dr", format!("k = dr/dl must be an integer, got {dr}/{dl}")));
        }
        Ok(Self {
            dl,
            dr,
            length: 1,
            k: dr / dl,
            dhat: 0,
            num_checks: 1,
            coupled: false,
            edges: vec![ProtoEdge { bundle: 0, check: 0 }; dl],
        })
    }

    pub fn dl(&self) -> usize {
        self.dl
    }
    pub fn dr(&self) -> usize {
        self.dr
    }
    pub fn length(&self) -> usize {
        self.length
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn dhat(&self) -> usize {
        self.dhat
    }
    pub fn num_checks(&self) -> usize {
        self.num_checks
    }
    pub fn is_coupled(&self) -> bool {
        self.coupled
    }
    pub fn edges(&self) -> &[ProtoEdge] {
        &self.edges
    }

    /// Chain position of check index `a`.
    pub fn check_label(&self, a: usize) -> i64 {
        a as i64 - self.dhat as i64 + 1
    }

    pub fn design_rate(&self) -> f64 {
        1.0 - self.num_checks as f64 / (self.k * self.length) as f64
    }

    pub fn has_positive_rate(&self) -> bool {
        self.design_rate() > 0.0
    }

    pub fn bundle_edges(&self, bundle: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.bundle == bundle)
            .map(|(id, _)| id)
    }

    pub fn check_edges(&self, check: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.check == check)
            .map(|(id, _)| id)
    }

    /// Distinct bundles adjacent to a check.
    pub fn check_neighbors(&self, check: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.check_edges(check).map(|e| self.edges[e].bundle).collect();
        v.dedup();
        v
    }

    /// Number of lifted-graph edges at a check, counting `k` per edge type.
    pub fn check_degree(&self, check: usize) -> usize {
        self.k * self.check_edges(check).count()
    }
}

impl fmt::Display for Protograph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coupled {
            write!(f, "({},{},{})-coupled", self.dl, self.dr, self.length)
        } else {
            write!(f, "({},{})-base", self.dl, self.dr)
        }
    }
}

/// The ensemble a density-evolution run or a code sample is drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Ensemble {
    Regular(RegularEnsemble),
    Protograph(Protograph),
}

impl Ensemble {
    pub fn design_rate(&self) -> f64 {
        match self {
            Ensemble::Regular(e) => e.design_rate(),
            Ensemble::Protograph(p) => p.design_rate(),
        }
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ensemble::Regular(e) => write!(f, "({},{})-regular", e.dl, e.dr),
            Ensemble::Protograph(p) => p.fmt(f),
        }
    }
}

impl From<RegularEnsemble> for Ensemble {
    fn from(e: RegularEnsemble) -> Self {
        Ensemble::Regular(e)
    }
}

impl From<Protograph> for Ensemble {
    fn from(p: Protograph) -> Self {
        Ensemble::Protograph(p)
    }
}

/// Where a [`CodeInstance`] came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeOrigin {
    /// Ensemble description, e.g. `(3,6)-regular`.
    pub ensemble: String,
    /// Block length for regular samples, lift size for protograph samples.
    pub size: usize,
    pub seed: u64,
    pub rank: usize,
    pub dimension: usize,
}

impl CodeOrigin {
    pub fn rank_deficient(&self, checks: usize) -> bool {
        self.rank < checks
    }
}

/// A sampled LDPC code.
#[derive(Debug, Clone)]
pub struct CodeInstance {
    n: usize,
    checks: Vec<Vec<u32>>,
    var_checks: Vec<Vec<u32>>,
    encoder: Encoder,
    origin: CodeOrigin,
}

/// Sample a code from an ensemble. `size` is the block length for a regular
/// ensemble and the lift size for a protograph.
pub fn sample_code(ensemble: &Ensemble, size: usize, seed: u64) -> Result<CodeInstance> {
    match ensemble {
        Ensemble::Regular(e) => CodeInstance::sample_regular(e, size, seed),
        Ensemble::Protograph(p) => CodeInstance::lift(p, size, seed),
    }
}

impl CodeInstance {
    /// Configuration-model sample of a `(dl, dr)`-regular code of length `n`.
    pub fn sample_regular(ens: &RegularEnsemble, n: usize, seed: u64) -> Result<Self> {
        if n == 0 || (n * ens.dl) % ens.dr != 0 {
            return Err(invalid("n", format!("n*dl must be a positive multiple of dr, got n = {n}")));
        }
        let m = n * ens.dl / ens.dr;
        let mut rng = stream(seed, &[0x5eed_c0de]);
        let mut socket_check: Vec<u32> = (0..m as u32)
            .flat_map(|c| std::iter::repeat_n(c, ens.dr))
            .collect();
        socket_check.shuffle(&mut rng);
        let classes = vec![(0..socket_check.len() as u32).collect::<Vec<u32>>()];
        remove_double_edges(ens.dl, &mut socket_check, &classes, &mut rng)?;
        Self::from_sockets(n, m, ens.dl, &socket_check, Ensemble::Regular(*ens).to_string(), n, seed)
    }

    /// Lift a protograph by `lift` with one random permutation per
    /// protograph edge.
    pub fn lift(proto: &Protograph, lift: usize, seed: u64) -> Result<Self> {
        if lift == 0 {
            return Err(invalid("lift", "lift size must be >= 1"));
        }
        let k = proto.k;
        let n = proto.length * k * lift;
        let m = proto.num_checks * lift;
        let dl = proto.dl;
        let mut rng = stream(seed, &[0x11f7]);
        // Variable (bundle i, slot s, copy c) has index (i*k + s)*lift + c.
        // Its t-th socket is the t-th edge type of bundle i.
        let mut socket_check = vec![0u32; n * dl];
        let mut classes = Vec::new();
        for i in 0..proto.length {
            let types: Vec<usize> = proto.bundle_edges(i).collect();
            for s in 0..k {
                for (t, &e) in types.iter().enumerate() {
                    let mut perm: Vec<u32> = (0..lift as u32).collect();
                    perm.shuffle(&mut rng);
                    let base = (proto.edges[e].check * lift) as u32;
                    let mut class = Vec::with_capacity(lift);
                    for c in 0..lift {
                        let v = (i * k + s) * lift + c;
                        socket_check[v * dl + t] = base + perm[c];
                        class.push((v * dl + t) as u32);
                    }
                    classes.push(class);
                }
            }
        }
        remove_double_edges(dl, &mut socket_check, &classes, &mut rng)?;
        Self::from_sockets(n, m, dl, &socket_check, format!("{proto} lift={lift}"), lift, seed)
    }

    fn from_sockets(
        n: usize,
        m: usize,
        dl: usize,
        socket_check: &[u32],
        ensemble: String,
        size: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut checks = vec![Vec::new(); m];
        for (s, &c) in socket_check.iter().enumerate() {
            checks[c as usize].push((s / dl) as u32);
        }
        for row in &mut checks {
            row.sort_unstable();
        }
        let mut code = Self::from_checks(n, checks)?;
        code.origin.ensemble = ensemble;
        code.origin.size = size;
        code.origin.seed = seed;
        Ok(code)
    }

    /// Build from explicit check rows (sorted variable indices per check).
    pub fn from_checks(n: usize, mut checks: Vec<Vec<u32>>) -> Result<Self> {
        let mut var_checks = vec![Vec::new(); n];
        for (c, row) in checks.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            for &v in row.iter() {
                if v as usize >= n {
                    return Err(invalid("checks", format!("variable index {v} out of range for n = {n}")));
                }
                var_checks[v as usize].push(c as u32);
            }
        }
        let encoder = Encoder::new(n, &checks, &var_checks);
        let origin = CodeOrigin {
            ensemble: "explicit".into(),
            size: n,
            seed: 0,
            rank: encoder.rank(),
            dimension: encoder.dimension(),
        };
        Ok(Self {
            n,
            checks,
            var_checks,
            encoder,
            origin,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn num_checks(&self) -> usize {
        self.checks.len()
    }
    pub fn checks(&self) -> &[Vec<u32>] {
        &self.checks
    }
    pub fn var_checks(&self) -> &[Vec<u32>] {
        &self.var_checks
    }
    pub fn origin(&self) -> &CodeOrigin {
        &self.origin
    }
    pub fn dimension(&self) -> usize {
        self.encoder.dimension()
    }
    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn rate(&self) -> f64 {
        self.dimension() as f64 / self.n as f64
    }

    /// True when every parity check is satisfied by `word`.
    pub fn is_codeword(&self, word: &[u8]) -> bool {
        self.checks
            .iter()
            .all(|row| row.iter().fold(0u8, |acc, &v| acc ^ word[v as usize]) == 0)
    }

    pub fn unsatisfied_checks(&self, word: &[u8]) -> usize {
        self.checks
            .iter()
            .filter(|row| row.iter().fold(0u8, |acc, &v| acc ^ word[v as usize]) != 0)
            .count()
    }

    pub fn encode(&self, message: &[u8]) -> Vec<u8> {
        self.encoder.encode(&self.checks, message)
    }

    /// Uniformly random codeword.
    pub fn sample_codeword<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u8> {
        let msg: Vec<u8> = (0..self.dimension()).map(|_| rng.random::<bool>() as u8).collect();
        self.encode(&msg)
    }

    /// Dense generator rows (images of the unit messages). Intended for short
    /// codes; memory is `dimension * n` bits.
    pub fn generator_rows(&self) -> Vec<BitVec> {
        let k = self.dimension();
        (0..k)
            .map(|i| {
                let mut msg = vec![0u8; k];
                msg[i] = 1;
                BitVec::from_bits(&self.encode(&msg))
            })
            .collect()
    }

    /// Text form: a `#` header with `n`, `m` and origin, then one line per
    /// check listing its sorted variable indices.
    pub fn to_text(&self) -> String {
        let o = &self.origin;
        let mut s = format!(
            "# n={} m={} seed={} size={} ensemble={}\n",
            self.n,
            self.checks.len(),
            o.seed,
            o.size,
            o.ensemble
        );
        for row in &self.checks {
            let line: Vec<String> = row.iter().map(u32::to_string).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            reason: "empty input".into(),
        })?;
        let header = header.strip_prefix('#').ok_or(Error::Parse {
            line: 1,
            reason: "missing header".into(),
        })?;
        let mut n = None;
        let mut m = None;
        let mut seed = 0;
        let mut size = 0;
        let mut ensemble = String::from("explicit");
        for (i, field) in header.split_whitespace().enumerate() {
            let (key, value) = field.split_once('=').ok_or(Error::Parse {
                line: 1,
                reason: format!("malformed field `{field}`"),
            })?;
            let num = || {
                value.parse::<u64>().map_err(|e| Error::Parse {
                    line: 1,
                    reason: format!("{key}: {e}"),
                })
            };
            match key {
                "n" => n = Some(num()? as usize),
                "m" => m = Some(num()? as usize),
                "seed" => seed = num()?,
                "size" => size = num()? as usize,
                "ensemble" => {
                    // the description may contain spaces; it is the last field
                    let rest: Vec<&str> = header.split_whitespace().skip(i).collect();
                    ensemble = rest.join(" ")["ensemble=".len()..].to_string();
                    break;
                }
                _ => {}
            }
        }
        let (n, m) = match (n, m) {
            (Some(n), Some(m)) => (n, m),
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    reason: "header must define n and m".into(),
                })
            }
        };
        let mut checks = Vec::with_capacity(m);
        for (ln, line) in lines {
            if line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<u32>())
                .collect::<std::result::Result<Vec<u32>, _>>()
                .map_err(|e| Error::Parse {
                    line: ln + 1,
                    reason: e.to_string(),
                })?;
            checks.push(row);
        }
        if checks.len() != m {
            return Err(Error::Parse {
                line: checks.len() + 1,
                reason: format!("expected {m} check lines, found {}", checks.len()),
            });
        }
        let mut code = Self::from_checks(n, checks)?;
        code.origin.seed = seed;
        code.origin.size = size;
        code.origin.ensemble = ensemble;
        Ok(code)
    }
}

/// Swap check assignments between sockets of the same class until no
/// variable has two sockets on one check. Sockets are laid out variable-major
/// with `dl` sockets per variable.
fn remove_double_edges<R: Rng + ?Sized>(
    dl: usize,
    socket_check: &mut [u32],
    classes: &[Vec<u32>],
    rng: &mut R,
) -> Result<()> {
    let mut class_of = vec![0u32; socket_check.len()];
    for (ci, class) in classes.iter().enumerate() {
        for &s in class {
            class_of[s as usize] = ci as u32;
        }
    }
    let duplicated = |sc: &[u32], s: usize| {
        let v = s / dl;
        (v * dl..(v + 1) * dl).any(|o| o != s && sc[o] == sc[s])
    };
    let find_bad = |sc: &[u32]| -> Vec<usize> {
        (0..sc.len() / dl)
            .flat_map(|v| {
                let base = v * dl;
                (1..dl).filter_map(move |t| {
                    let s = base + t;
                    (0..t).any(|u| sc[base + u] == sc[s]).then_some(s)
                })
            })
            .collect()
    };
    let mut bad = find_bad(socket_check);
    let mut passes = 0;
    while !bad.is_empty() {
        if passes == DOUBLE_EDGE_PASSES {
            return Err(Error::GraphSampling {
                attempts: passes,
                remaining: bad.len(),
            });
        }
        passes += 1;
        for &s in &bad {
            if !duplicated(socket_check, s) {
                continue;
            }
            let class = &classes[class_of[s] as usize];
            let t = class[rng.random_range(0..class.len())] as usize;
            if t / dl == s / dl {
                continue;
            }
            socket_check.swap(s, t);
            if duplicated(socket_check, s) || duplicated(socket_check, t) {
                socket_check.swap(s, t);
            }
        }
        bad = find_bad(socket_check);
    }
    Ok(())
}

/// Systematic encoder found by peeling the parity-check matrix.
///
/// Columns are resolved one at a time from checks with a single unresolved
/// column. When peeling stalls, columns are inactivated. Inactivated columns
/// are either message positions or the few "gap" columns fixed by the checks
/// left over after peeling; the latter are found by Gaussian elimination on
/// a dense matrix whose size is the number of leftover checks.
#[derive(Debug, Clone)]
pub struct Encoder {
    n: usize,
    /// (column, solving check) in resolution order.
    peel: Vec<(u32, u32)>,
    /// Leftover checks, in the order of bits in the dense system.
    leftover: Vec<u32>,
    /// Message positions.
    info: Vec<u32>,
    /// Gap columns and the reduced basis expressing them.
    gap: Vec<u32>,
    /// Reduced basis over leftover-check space: (pivot bit, vector, combination of gap columns).
    basis: Vec<(usize, BitVec, BitVec)>,
}

impl Encoder {
    fn new(n: usize, checks: &[Vec<u32>], var_checks: &[Vec<u32>]) -> Self {
        let m = checks.len();
        let mut resolved = vec![false; n];
        let mut used = vec![false; m];
        let mut count: Vec<usize> = checks.iter().map(Vec::len).collect();
        let max_deg = count.iter().copied().max().unwrap_or(0).max(1);
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); max_deg + 1];
        for (r, &d) in count.iter().enumerate() {
            buckets[d].push(r as u32);
        }
        let mut peel = Vec::new();
        let mut inactive = Vec::new();

        // Marks `c` resolved and updates the unresolved counts of its checks.
        fn settle(
            c: usize,
            resolved: &mut [bool],
            used: &[bool],
            count: &mut [usize],
            buckets: &mut [Vec<u32>],
            var_checks: &[Vec<u32>],
        ) {
            resolved[c] = true;
            for &r in &var_checks[c] {
                let r = r as usize;
                if !used[r] {
                    count[r] -= 1;
                    buckets[count[r]].push(r as u32);
                }
            }
        }

        loop {
            while let Some(r) = buckets[1].pop() {
                let r = r as usize;
                if used[r] || count[r] != 1 {
                    continue;
                }
                let c = checks[r]
                    .iter()
                    .map(|&c| c as usize)
                    .find(|&c| !resolved[c])
                    .expect("count tracks unresolved columns");
                used[r] = true;
                peel.push((c as u32, r as u32));
                settle(c, &mut resolved, &used, &mut count, &mut buckets, var_checks);
            }
            // Stalled: take the check with the fewest unresolved columns and
            // inactivate all but one of them.
            let mut pick = None;
            'scan: for d in 2..=max_deg {
                while let Some(r) = buckets[d].pop() {
                    if !used[r as usize] && count[r as usize] == d {
                        pick = Some(r as usize);
                        break 'scan;
                    }
                }
            }
            let Some(r) = pick else { break };
            let cols: Vec<usize> = checks[r]
                .iter()
                .map(|&c| c as usize)
                .filter(|&c| !resolved[c])
                .skip(1)
                .collect();
            for c in cols {
                inactive.push(c as u32);
                settle(c, &mut resolved, &used, &mut count, &mut buckets, var_checks);
            }
        }
        // Columns outside every remaining check are unconstrained.
        inactive.extend((0..n).filter(|&c| !resolved[c]).map(|c| c as u32));

        let leftover: Vec<u32> = (0..m).filter(|&r| !used[r]).map(|r| r as u32).collect();
        let g = leftover.len();

        // Sensitivity of the leftover-check syndrome to each column value,
        // accumulated backwards through the peeling order.
        let mut sens = vec![BitVec::zeros(g); n];
        for (j, &r) in leftover.iter().enumerate() {
            for &c in &checks[r as usize] {
                sens[c as usize].flip(j);
            }
        }
        for &(p, r) in peel.iter().rev() {
            let sp = std::mem::replace(&mut sens[p as usize], BitVec::zeros(0));
            for &c in &checks[r as usize] {
                if c != p {
                    sens[c as usize].xor_assign(&sp);
                }
            }
            sens[p as usize] = sp;
        }

        let mut info = Vec::new();
        let mut gap = Vec::new();
        let mut basis: Vec<(usize, BitVec, BitVec)> = Vec::new();
        for &c in &inactive {
            let mut v = sens[c as usize].clone();
            let mut comb = BitVec::zeros(0);
            for (pivot, b, bc) in &basis {
                if v.get(*pivot) {
                    v.xor_assign(b);
                    comb.xor_assign_grow(bc);
                }
            }
            match v.first_one() {
                None => info.push(c),
                Some(pivot) => {
                    comb.set_grow(gap.len());
                    gap.push(c);
                    basis.push((pivot, v, comb));
                }
            }
        }

        Self {
            n,
            peel,
            leftover,
            info,
            gap,
            basis,
        }
    }

    pub fn rank(&self) -> usize {
        self.peel.len() + self.gap.len()
    }

    pub fn dimension(&self) -> usize {
        self.info.len()
    }

    /// Checks left after peeling; these set the size of the dense system.
    pub fn gap_size(&self) -> usize {
        self.leftover.len()
    }

    /// Codeword positions carrying the message bits.
    pub fn info_positions(&self) -> &[u32] {
        &self.info
    }

    fn propagate(&self, checks: &[Vec<u32>], x: &mut [u8]) {
        for &(p, r) in &self.peel {
            x[p as usize] = 0;
            x[p as usize] = checks[r as usize].iter().fold(0, |acc, &c| acc ^ x[c as usize]);
        }
    }

    fn encode(&self, checks: &[Vec<u32>], message: &[u8]) -> Vec<u8> {
        assert_eq!(message.len(), self.info.len(), "message length must equal code dimension");
        let mut x = vec![0u8; self.n];
        for (&c, &b) in self.info.iter().zip(message) {
            x[c as usize] = b & 1;
        }
        self.propagate(checks, &mut x);
        if self.gap.is_empty() {
            return x;
        }
        let mut syndrome = BitVec::zeros(self.leftover.len());
        for (j, &r) in self.leftover.iter().enumerate() {
            if checks[r as usize].iter().fold(0, |acc, &c| acc ^ x[c as usize]) == 1 {
                syndrome.flip(j);
            }
        }
        let mut comb = BitVec::zeros(0);
        for (pivot, b, bc) in &self.basis {
            if syndrome.get(*pivot) {
                syndrome.xor_assign(b);
                comb.xor_assign_grow(bc);
            }
        }
        debug_assert!(syndrome.first_one().is_none(), "leftover syndrome outside the gap span");
        for (j, &c) in self.gap.iter().enumerate() {
            if comb.get(j) {
                x[c as usize] = 1;
            }
        }
        self.propagate(checks, &mut x);
        x
    }
}
