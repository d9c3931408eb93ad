//! BP-threshold search with density evolution as a noisy oracle,
//! chain-length sweeps, the large-`L` extrapolation and the CAF/SD
//! comparison table.

use serde::{Deserialize, Serialize};

use crate::channel::{sir_threshold, BiAwgnChannel, ChannelKind, DegradedChannel, Scheme};
use crate::codes::{Ensemble, Protograph};
use crate::de::{run_de, DeConfig};
use crate::error::{invalid, Error, Result};
use crate::rng::derive_seed;

/// Geometric scan `SCAN_START * SCAN_FACTOR^k` that brackets the threshold.
pub const SCAN_START: f64 = 0.3;
pub const SCAN_FACTOR: f64 = 1.1;
/// No undecodable probe at or below this is an error.
pub const SIGMA_MAX: f64 = 3.0;
/// No decodable probe at or above this is an error.
pub const SIGMA_MIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub de: DeConfig,
    /// Stop bisecting once the bracket is at most this wide.
    pub resolution: f64,
    #[serde(default)]
    pub channel: ChannelKind,
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        self.de.validate()?;
        if !(self.resolution >= 1e-4 && self.resolution < 1.0) {
            return Err(invalid("resolution", format!("must lie in [1e-4, 1), got {}", self.resolution)));
        }
        Ok(())
    }
}

/// One oracle call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub sigma: f64,
    pub decodable: bool,
    pub population: usize,
    pub sweeps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    /// Largest noise level found decodable.
    pub decodable: f64,
    /// Smallest noise level found undecodable.
    pub undecodable: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub ensemble: String,
    pub channel: ChannelKind,
    pub population: usize,
    pub max_sweeps: usize,
    pub stop_ber: f64,
    pub seed: u64,
    pub bracket: Bracket,
    /// Bracket midpoint.
    pub sigma_bp: f64,
    /// Bracket width.
    pub resolution: f64,
    /// Every probe in the order it was made.
    pub verdicts: Vec<Probe>,
    /// A confirmation probe with doubled population overturned a verdict.
    pub reprobed: bool,
}

impl ThresholdResult {
    /// No decodable probe lies above an undecodable one at the base
    /// population.
    pub fn verdicts_monotone(&self) -> bool {
        let base = self.verdicts.iter().filter(|p| p.population == self.population);
        let lowest_bad = base
            .clone()
            .filter(|p| !p.decodable)
            .map(|p| p.sigma)
            .fold(f64::INFINITY, f64::min);
        base.filter(|p| p.decodable).all(|p| p.sigma < lowest_bad)
    }
}

/// Seed for a probe: derived from the run seed, the noise level and the
/// population, so repeated searches reuse identical probes.
pub fn probe_seed(seed: u64, sigma: f64, population: usize) -> u64 {
    derive_seed(seed, &[sigma.to_bits(), population as u64])
}

fn probe(ensemble: &Ensemble, kind: ChannelKind, base: &DeConfig, sigma: f64, population: usize) -> Result<Probe> {
    let cfg = DeConfig {
        population,
        seed: probe_seed(base.seed, sigma, population),
        ..base.clone()
    };
    let run = match kind {
        ChannelKind::Degraded => run_de(ensemble, DegradedChannel::new(sigma)?, &cfg)?,
        ChannelKind::BiAwgn => run_de(ensemble, BiAwgnChannel::new(sigma)?, &cfg)?,
    };
    Ok(Probe {
        sigma,
        decodable: run.decodable,
        population,
        sweeps: run.sweeps,
    })
}

/// Locate the BP threshold: a geometric scan finds a bracket, bisection
/// narrows it to `resolution`, and the decodable endpoint is re-probed once
/// with doubled population. If that overturns the verdict, bisection resumes
/// below it (without a second confirmation).
pub fn find_threshold(ensemble: &Ensemble, cfg: &SearchConfig) -> Result<ThresholdResult> {
    cfg.validate()?;
    let n = cfg.de.population;
    let mut verdicts = Vec::new();
    let run = |sigma: f64, pop: usize, verdicts: &mut Vec<Probe>| -> Result<bool> {
        let p = probe(ensemble, cfg.channel, &cfg.de, sigma, pop)?;
        verdicts.push(p);
        Ok(p.decodable)
    };

    let (mut lo, mut hi) = scan(|s| run(s, n, &mut verdicts))?;
    bisect(&mut lo, &mut hi, cfg.resolution, |s| run(s, n, &mut verdicts))?;

    let mut reprobed = false;
    if !run(lo, 2 * n, &mut verdicts)? {
        reprobed = true;
        hi = lo;
        lo = verdicts
            .iter()
            .filter(|p| p.decodable && p.sigma < hi)
            .map(|p| p.sigma)
            .fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            return Err(Error::ThresholdSearch(format!("no decodable probe survives below sigma = {hi}")));
        }
        bisect(&mut lo, &mut hi, cfg.resolution, |s| run(s, n, &mut verdicts))?;
    }

    Ok(ThresholdResult {
        ensemble: ensemble.to_string(),
        channel: cfg.channel,
        population: n,
        max_sweeps: cfg.de.max_sweeps,
        stop_ber: cfg.de.stop_ber,
        seed: cfg.de.seed,
        bracket: Bracket {
            decodable: lo,
            undecodable: hi,
        },
        sigma_bp: 0.5 * (lo + hi),
        resolution: hi - lo,
        verdicts,
        reprobed,
    })
}

/// Returns `(decodable, undecodable)` neighbours on the scan grid.
fn scan<F: FnMut(f64) -> Result<bool>>(mut decodable: F) -> Result<(f64, f64)> {
    let mut sigma = SCAN_START;
    if decodable(sigma)? {
        loop {
            let next = sigma * SCAN_FACTOR;
            if next > SIGMA_MAX {
                return Err(Error::ThresholdSearch(format!(
                    "still decodable at sigma = {sigma:.4}; no undecodable level below {SIGMA_MAX}"
                )));
            }
            if !decodable(next)? {
                return Ok((sigma, next));
            }
            sigma = next;
        }
    } else {
        loop {
            let next = sigma / SCAN_FACTOR;
            if next < SIGMA_MIN {
                return Err(Error::ThresholdSearch(format!(
                    "undecodable at sigma = {sigma:.4}; no decodable level above {SIGMA_MIN}"
                )));
            }
            if decodable(next)? {
                return Ok((next, sigma));
            }
            sigma = next;
        }
    }
}

fn bisect<F: FnMut(f64) -> Result<bool>>(lo: &mut f64, hi: &mut f64, resolution: f64, mut decodable: F) -> Result<()> {
    while *hi - *lo > resolution {
        let mid = 0.5 * (*lo + *hi);
        if decodable(mid)? {
            *lo = mid;
        } else {
            *hi = mid;
        }
    }
    Ok(())
}

/// One chain length of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub length: usize,
    pub design_rate: f64,
    /// CAF information-rate noise level at the design rate, when that rate
    /// is positive.
    pub sir_sigma: Option<f64>,
    pub threshold: Option<ThresholdResult>,
    pub error: Option<String>,
}

/// Thresholds of the `(dl, dr, L)` coupled ensembles for each `L`. Failures
/// are recorded per point and the sweep continues.
pub fn sweep_l(dl: usize, dr: usize, lengths: &[usize], cfg: &SearchConfig) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    // structural errors (non-integral k or dhat) apply to every L alike
    Protograph::coupled(dl, dr, 1)?;
    let mut out = Vec::with_capacity(lengths.len());
    for &length in lengths {
        let point = match Protograph::coupled(dl, dr, length) {
            Err(e) => SweepPoint {
                length,
                design_rate: f64::NAN,
                sir_sigma: None,
                threshold: None,
                error: Some(e.to_string()),
            },
            Ok(proto) => {
                let rate = proto.design_rate();
                let sir_sigma = if rate > 0.0 { sir_threshold(Scheme::Caf, rate).ok() } else { None };
                let (threshold, error) = match find_threshold(&proto.into(), cfg) {
                    Ok(t) => (Some(t), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                SweepPoint {
                    length,
                    design_rate: rate,
                    sir_sigma,
                    threshold,
                    error,
                }
            }
        };
        out.push(point);
    }
    Ok(out)
}

/// `sigma(L) = sigma_inf + a exp(-b L^c)` fitted to `(L, sigma_bp)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationFit {
    pub points: Vec<(f64, f64)>,
    pub sigma_inf: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

impl ExtrapolationFit {
    pub fn eval(&self, length: f64) -> f64 {
        self.sigma_inf + self.a * (-self.b * length.powf(self.c)).exp()
    }
}

/// Starting values for `(b, c)`.
pub const FIT_STARTS_B: [f64; 3] = [0.1, 1.0, 10.0];
pub const FIT_STARTS_C: [f64; 3] = [0.5, 1.0, 2.0];
const FIT_MAX_ITERS: u64 = 2000;

/// For fixed `(b, c)` the model is linear in `(sigma_inf, a)`, so the
/// nonlinear search runs over `(ln b, ln c)` only.
struct Profile<'a> {
    points: &'a [(f64, f64)],
}

impl Profile<'_> {
    /// Optimal `(sigma_inf, a)` and the residual sum of squares.
    fn solve(&self, b: f64, c: f64) -> (f64, f64, f64) {
        let n = self.points.len() as f64;
        let e: Vec<f64> = self.points.iter().map(|&(l, _)| (-b * l.powf(c)).exp()).collect();
        let mean_y = self.points.iter().map(|p| p.1).sum::<f64>() / n;
        let mean_e = e.iter().sum::<f64>() / n;
        let (mut see, mut sey) = (0.0, 0.0);
        for (ei, &(_, y)) in e.iter().zip(self.points) {
            see += (ei - mean_e) * (ei - mean_e);
            sey += (ei - mean_e) * (y - mean_y);
        }
        // a flat basis carries no information about a
        let a = if see > 1e-300 { sey / see } else { 0.0 };
        let s = mean_y - a * mean_e;
        let rss = e
            .iter()
            .zip(self.points)
            .map(|(ei, &(_, y))| (y - s - a * ei).powi(2))
            .sum();
        (s, a, rss)
    }
}

/// Nelder-Mead on a 2-D function from the simplex `start`, stopping when
/// the spread of simplex values drops below `ftol` or after `max_iters`.
fn nelder_mead<F: Fn([f64; 2]) -> f64>(f: F, start: [[f64; 2]; 3], ftol: f64, max_iters: u64) -> ([f64; 2], f64) {
    let mut pts: Vec<([f64; 2], f64)> = start.iter().map(|&x| (x, f(x))).collect();
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for _ in 0..max_iters {
        pts.sort_by(|x, y| x.1.total_cmp(&y.1));
        if (pts[2].1 - pts[0].1).abs() <= ftol {
            break;
        }
        let centroid = lerp(pts[0].0, pts[1].0, 0.5);
        let worst = pts[2];
        let reflect = lerp(worst.0, centroid, 2.0);
        let fr = f(reflect);
        if fr < pts[0].1 {
            let expand = lerp(worst.0, centroid, 3.0);
            let fe = f(expand);
            pts[2] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < pts[1].1 {
            pts[2] = (reflect, fr);
        } else {
            let (toward, ft) = if fr < worst.1 { (reflect, fr) } else { (worst.0, worst.1) };
            let contract = lerp(centroid, toward, 0.5);
            let fc = f(contract);
            if fc < ft {
                pts[2] = (contract, fc);
            } else {
                // shrink towards the best vertex
                for i in 1..3 {
                    let x = lerp(pts[0].0, pts[i].0, 0.5);
                    pts[i] = (x, f(x));
                }
            }
        }
    }
    pts.sort_by(|x, y| x.1.total_cmp(&y.1));
    pts[0]
}

/// Least-squares fit of the extrapolation model, multi-started over
/// [`FIT_STARTS_B`] x [`FIT_STARTS_C`]. Fits whose RMS residual exceeds
/// `max_residual` are refused.
pub fn extrapolate(points: &[(f64, f64)], max_residual: f64) -> Result<ExtrapolationFit> {
    if points.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 points, got {}", points.len())));
    }
    if points.iter().any(|&(l, s)| !(l > 0.0 && l.is_finite() && s.is_finite())) {
        return Err(Error::Fit("points must have finite sigma and positive length".into()));
    }
    let profile = Profile { points };
    let mut best: Option<(f64, f64, f64)> = None;
    for b0 in FIT_STARTS_B {
        for c0 in FIT_STARTS_C {
            let (lb, lc) = (b0.ln(), c0.ln());
            let simplex = [[lb, lc], [lb + 0.5, lc], [lb, lc + 0.25]];
            let (p, cost) = nelder_mead(|x| profile.solve(x[0].exp(), x[1].exp()).2, simplex, 1e-30, FIT_MAX_ITERS);
            if cost.is_finite() && best.is_none_or(|(_, _, c)| cost < c) {
                best = Some((p[0], p[1], cost));
            }
        }
    }
    let (lb, lc, _) = best.ok_or_else(|| Error::Fit("no start converged".into()))?;
    let (b, c) = (lb.exp(), lc.exp());
    let (sigma_inf, a, rss) = profile.solve(b, c);
    let residual = (rss / points.len() as f64).sqrt();
    if !sigma_inf.is_finite() || sigma_inf <= 0.0 {
        return Err(Error::Fit(format!("fitted sigma_inf = {sigma_inf} is not positive")));
    }
    if residual > max_residual {
        return Err(Error::Fit(format!(
            "rms residual {residual:.3e} exceeds the allowed {max_residual:.3e}"
        )));
    }
    Ok(ExtrapolationFit {
        points: points.to_vec(),
        sigma_inf,
        a,
        b,
        c,
        residual,
    })
}

/// CAF and SD information rates within this many sigma units count as
/// parity.
pub const PARITY_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Advantage {
    Caf,
    NearParity,
    Sd,
}

/// Measured thresholds to place next to the information rates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RateEntry {
    pub rate: f64,
    pub uncoupled_bp: Option<f64>,
    pub coupled_bp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub rate: f64,
    pub caf_sir: f64,
    /// `None` when the sum rate exceeds what SD can support at any noise.
    pub sd_sir: Option<f64>,
    pub uncoupled_bp: Option<f64>,
    pub coupled_bp: Option<f64>,
    pub advantage: Advantage,
}

/// One row per rate: CAF and SD noise thresholds from the information
/// rates, with whichever BP thresholds were measured.
pub fn comparison_report(entries: &[RateEntry]) -> Result<Vec<ComparisonRow>> {
    entries
        .iter()
        .map(|e| {
            let caf = sir_threshold(Scheme::Caf, e.rate)?;
            let sd = match sir_threshold(Scheme::Sd, e.rate) {
                Ok(s) => Some(s),
                Err(Error::Unachievable { .. }) => None,
                Err(err) => return Err(err),
            };
            let advantage = match sd {
                None => Advantage::Caf,
                Some(s) if (caf - s).abs() <= PARITY_TOLERANCE => Advantage::NearParity,
                Some(s) if caf > s => Advantage::Caf,
                Some(_) => Advantage::Sd,
            };
            Ok(ComparisonRow {
                rate: e.rate,
                caf_sir: caf,
                sd_sir: sd,
                uncoupled_bp: e.uncoupled_bp,
                coupled_bp: e.coupled_bp,
                advantage,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(l: f64) -> f64 {
        0.785 + 0.2 * (-0.3 * l.powf(0.9)).exp()
    }

    #[test]
    fn scan_and_bisect_on_a_step() {
        let truth = 0.7421;
        let (mut lo, mut hi) = scan(|s| Ok(s < truth)).unwrap();
        assert!(lo < truth && truth <= hi);
        assert!((hi / lo - SCAN_FACTOR).abs() < 1e-12);
        bisect(&mut lo, &mut hi, 1e-3, |s| Ok(s < truth)).unwrap();
        assert!(hi - lo <= 1e-3 && lo < truth && truth <= hi);
        // threshold below the starting point
        let (lo, hi) = scan(|s| Ok(s < 0.1)).unwrap();
        assert!(lo < 0.1 && 0.1 <= hi);
    }

    #[test]
    fn scan_fails_loudly() {
        assert!(matches!(scan(|_| Ok(true)), Err(Error::ThresholdSearch(_))));
        assert!(matches!(scan(|_| Ok(false)), Err(Error::ThresholdSearch(_))));
    }

    #[test]
    fn fit_recovers_exact_model() {
        let pts: Vec<(f64, f64)> = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0].iter().map(|&l| (l, model(l))).collect();
        let fit = extrapolate(&pts, 1e-3).unwrap();
        assert!((fit.sigma_inf - 0.785).abs() < 1e-6, "{fit:?}");
        assert!(fit.residual < 1e-8);
        assert!((fit.eval(12.0) - model(12.0)).abs() < 1e-6);
    }

    #[test]
    fn fit_of_constant_points() {
        let pts: Vec<(f64, f64)> = (1..=5).map(|l| (l as f64 * 5.0, 0.79)).collect();
        let fit = extrapolate(&pts, 1e-3).unwrap();
        assert!((fit.sigma_inf - 0.79).abs() < 1e-9);
        assert!(fit.a.abs() < 1e-6);
    }

    #[test]
    fn fit_shift_moves_only_the_limit() {
        let pts: Vec<(f64, f64)> = [5.0, 10.0, 15.0, 20.0, 30.0].iter().map(|&l| (l, model(l))).collect();
        let shifted: Vec<(f64, f64)> = pts.iter().map(|&(l, s)| (l, s + 0.1)).collect();
        let a = extrapolate(&pts, 1e-3).unwrap();
        let b = extrapolate(&shifted, 1e-3).unwrap();
        assert!((b.sigma_inf - a.sigma_inf - 0.1).abs() < 1e-6);
        assert!((a.a - b.a).abs() < 1e-4 && (a.b - b.b).abs() < 1e-3 && (a.c - b.c).abs() < 1e-3);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let three = [(5.0, 0.8), (10.0, 0.79), (15.0, 0.785)];
        assert!(matches!(extrapolate(&three, 1.0), Err(Error::Fit(_))));
        // zig-zag data no monotone curve can follow
        let zig = [(5.0, 0.7), (10.0, 0.9), (15.0, 0.7), (20.0, 0.9), (25.0, 0.7)];
        assert!(matches!(extrapolate(&zig, 1e-3), Err(Error::Fit(_))));
    }

    #[test]
    fn comparison_flags() {
        let rows = comparison_report(&[
            RateEntry { rate: 0.5, ..Default::default() },
            RateEntry { rate: 2.0 / 3.0, ..Default::default() },
            RateEntry { rate: 1.0 / 3.0, ..Default::default() },
            RateEntry { rate: 0.8, ..Default::default() },
        ])
        .unwrap();
        assert_eq!(rows[0].advantage, Advantage::NearParity);
        assert_eq!(rows[1].advantage, Advantage::Caf);
        assert_eq!(rows[2].advantage, Advantage::Sd);
        assert_eq!(rows[3].sd_sir, None);
        assert_eq!(rows[3].advantage, Advantage::Caf);
    }

    #[test]
    fn search_config_validation() {
        let mut cfg = SearchConfig {
            de: DeConfig::default(),
            resolution: 1e-5,
            channel: ChannelKind::Degraded,
        };
        assert!(cfg.validate().is_err());
        cfg.resolution = 0.005;
        assert!(cfg.validate().is_ok());
    }
}
