//! Fast invariant checks behind `sc-caf selftest`.

use serde::Serialize;

use sc_caf::bpsim::bp_decode;
use sc_caf::channel::{sir_threshold, BinaryInputChannel, DegradedChannel, Scheme};
use sc_caf::codes::{CodeInstance, RegularEnsemble};
use sc_caf::de::{draw_parity_bits, run_de, DeConfig};
use sc_caf::quad;
use sc_caf::rng::stream;

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> Check {
    match f() {
        Ok(detail) => Check { name, passed: true, detail },
        Err(detail) => Check { name, passed: false, detail },
    }
}

pub fn run(seed: u64, workers: Option<usize>) -> Vec<Check> {
    vec![
        check("sir-table", sir_table),
        check("llr-consistency", llr_consistency),
        check("likelihood-normalization", normalization),
        check("parity-bit-uniformity", || parity_uniformity(seed)),
        check("de-worker-independence", || de_workers(seed, workers)),
        check("bp-convergence-invariant", || bp_invariant(seed)),
    ]
}

fn sir_table() -> Result<String, String> {
    let rows = [
        (Scheme::Caf, 0.5, 0.805),
        (Scheme::Caf, 2.0 / 3.0, 0.666),
        (Scheme::Sd, 0.5, 0.794),
        (Scheme::Sd, 2.0 / 3.0, 0.537),
    ];
    let mut worst: f64 = 0.0;
    for (scheme, rate, expect) in rows {
        let got = sir_threshold(scheme, rate).map_err(|e| e.to_string())?;
        worst = worst.max((got - expect).abs());
    }
    if worst <= 2e-3 {
        Ok(format!("max deviation {worst:.2e}"))
    } else {
        Err(format!("max deviation {worst:.2e} exceeds 2e-3"))
    }
}

fn llr_consistency() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for sigma in [0.5, 0.8, 1.2] {
        let ch = DegradedChannel::new(sigma).map_err(|e| e.to_string())?;
        for i in -60..=60 {
            let y = f64::from(i) * 0.1;
            let direct = (ch.likelihood(y, 0) / ch.likelihood(y, 1)).ln();
            let rel = (ch.llr(y) - direct).abs() / direct.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    if worst <= 1e-9 {
        Ok(format!("max relative error {worst:.2e}"))
    } else {
        Err(format!("max relative error {worst:.2e} exceeds 1e-9"))
    }
}

fn normalization() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for sigma in [0.3, 0.8, 1.5] {
        let ch = DegradedChannel::new(sigma).map_err(|e| e.to_string())?;
        let r = 2.0 + 12.0 * sigma;
        for z in [0u8, 1] {
            let mass = quad::integrate(|y| ch.likelihood(y, z), -r, r, 1e-11).map_err(|e| e.to_string())?;
            worst = worst.max((mass - 1.0).abs());
        }
    }
    if worst <= 1e-8 {
        Ok(format!("max deviation {worst:.2e}"))
    } else {
        Err(format!("max deviation {worst:.2e} exceeds 1e-8"))
    }
}

/// Chi-square over the 16 admissible patterns of 5 bits with fixed parity;
/// 37.70 is the 0.999 quantile with 15 degrees of freedom.
fn parity_uniformity(seed: u64) -> Result<String, String> {
    const DRAWS: usize = 100_000;
    let mut rng = stream(seed, &[0x5e1f]);
    let mut worst: f64 = 0.0;
    for z in [0u8, 1] {
        let mut counts = [0usize; 16];
        for _ in 0..DRAWS {
            // the low four bits are free; the fifth is implied by parity
            counts[(draw_parity_bits(z, 5, &mut rng) & 0xf) as usize] += 1;
        }
        let expect = DRAWS as f64 / 16.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        worst = worst.max(chi2);
    }
    if worst < 37.70 {
        Ok(format!("max chi-square {worst:.2}"))
    } else {
        Err(format!("chi-square {worst:.2} above 37.70"))
    }
}

fn de_workers(seed: u64, workers: Option<usize>) -> Result<String, String> {
    let ens = RegularEnsemble::new(3, 6).map_err(|e| e.to_string())?.into();
    let ch = DegradedChannel::new(0.72).map_err(|e| e.to_string())?;
    let base = DeConfig {
        population: 5000,
        max_sweeps: 8,
        seed,
        ..DeConfig::default()
    };
    let one = run_de(&ens, ch, &DeConfig { workers: Some(1), ..base.clone() }).map_err(|e| e.to_string())?;
    let many = run_de(&ens, ch, &DeConfig { workers: Some(workers.unwrap_or(3).max(2)), ..base }).map_err(|e| e.to_string())?;
    if one == many {
        Ok(format!("{} sweeps identical", one.sweeps))
    } else {
        Err("traces differ between worker counts".into())
    }
}

fn bp_invariant(seed: u64) -> Result<String, String> {
    let ens = RegularEnsemble::new(3, 6).map_err(|e| e.to_string())?;
    let code = CodeInstance::sample_regular(&ens, 240, seed).map_err(|e| e.to_string())?;
    let ch = DegradedChannel::new(0.85).map_err(|e| e.to_string())?;
    let mut rng = stream(seed, &[0xb9]);
    let mut converged = 0;
    for _ in 0..40 {
        let z = code.sample_codeword(&mut rng);
        let y: Vec<f64> = z.iter().map(|&b| ch.sample_output(b, &mut rng)).collect();
        let out = bp_decode(&code, &y, &ch, 40);
        if out.converged && !code.is_codeword(&out.estimate) {
            return Err("converged with unsatisfied checks".into());
        }
        converged += usize::from(out.converged);
    }
    Ok(format!("{converged}/40 frames converged, all to codewords"))
}
