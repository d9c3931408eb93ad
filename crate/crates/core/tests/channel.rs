use proptest::prelude::*;
use sc_caf::channel::{BiAwgnChannel, BinaryInputChannel, DegradedChannel};
use sc_caf::quad;
use sc_caf::rng::stream;

/// Binned chi-square of `draws` outputs against the exact bin masses.
fn chi_square<C: BinaryInputChannel>(ch: &C, z: u8, draws: usize, seed: u64) -> (f64, usize) {
    let s = ch.sigma();
    let (lo, hi) = (-2.0 - 4.0 * s, 2.0 + 4.0 * s);
    let bins = 60;
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins + 2];
    let mut rng = stream(seed, &[u64::from(z)]);
    for _ in 0..draws {
        let y = ch.sample_output(z, &mut rng);
        let idx = if y < lo {
            0
        } else if y >= hi {
            bins + 1
        } else {
            1 + ((y - lo) / width) as usize
        };
        counts[idx.min(bins + 1)] += 1;
    }
    let mut masses: Vec<f64> = (0..bins)
        .map(|b| {
            let a = lo + b as f64 * width;
            quad::integrate(|y| ch.likelihood(y, z), a, a + width, 1e-12).unwrap()
        })
        .collect();
    let inner: f64 = masses.iter().sum();
    // tail cells only count when they are well populated; split the rest evenly
    masses.insert(0, 0.5 * (1.0 - inner));
    masses.push(0.5 * (1.0 - inner));
    let mut chi2 = 0.0;
    let mut cells = 0;
    for (c, m) in counts.iter().zip(&masses) {
        let expect = m * draws as f64;
        if expect >= 5.0 {
            chi2 += (*c as f64 - expect).powi(2) / expect;
            cells += 1;
        }
    }
    (chi2, cells - 1)
}

/// Upper 0.999 quantile of chi-square, Wilson-Hilferty approximation.
fn chi2_critical(df: usize) -> f64 {
    let k = df as f64;
    let z = 3.090_232;
    k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3)
}

#[test]
fn sampled_outputs_match_likelihood_histogram() {
    for sigma in [0.5, 0.8] {
        let ch = DegradedChannel::new(sigma).unwrap();
        for z in [0u8, 1] {
            let (chi2, df) = chi_square(&ch, z, 1_000_000, 17);
            assert!(chi2 < chi2_critical(df), "sigma={sigma} z={z}: chi2={chi2:.1} df={df}");
        }
    }
}

#[test]
fn bi_awgn_samples_match_likelihood_histogram() {
    // tails beyond the binned range are negligible at this noise level
    let ch = BiAwgnChannel::new(0.3).unwrap();
    let (chi2, df) = chi_square(&ch, 0, 200_000, 5);
    assert!(chi2 < chi2_critical(df), "chi2={chi2:.1} df={df}");
}

#[test]
fn rates_ordered_and_decreasing_on_grid() {
    let mut prev: Option<(f64, f64)> = None;
    for i in 2..=15 {
        let sigma = f64::from(i) / 10.0;
        let ch = DegradedChannel::new(sigma).unwrap();
        let (caf, sd) = (ch.sir_caf().unwrap(), ch.mi_sd().unwrap());
        assert!(caf <= 1.0 + 1e-9 && sd <= 2.0 + 1e-9);
        assert!(caf <= sd + 1e-9, "sigma={sigma}: caf {caf} > sd {sd}");
        if let Some((pc, ps)) = prev {
            assert!(caf < pc && sd < ps, "not decreasing at sigma={sigma}");
        }
        prev = Some((caf, sd));
    }
}

proptest! {
    #[test]
    fn llr_matches_likelihood_ratio(sigma in 0.3f64..2.0, y in -6.0f64..6.0) {
        let ch = DegradedChannel::new(sigma).unwrap();
        let (l0, l1) = (ch.likelihood(y, 0), ch.likelihood(y, 1));
        prop_assume!(l0 > 1e-300 && l1 > 1e-300);
        let direct = (l0 / l1).ln();
        let rel = (ch.llr(y) - direct).abs() / direct.abs().max(1.0);
        prop_assert!(rel < 1e-9, "rel={rel}");
    }

    #[test]
    fn llr_is_even(sigma in 0.05f64..5.0, y in -1e3f64..1e3) {
        let ch = DegradedChannel::new(sigma).unwrap();
        prop_assert_eq!(ch.llr(y), ch.llr(-y));
        prop_assert!(ch.llr(y).is_finite());
    }

    #[test]
    fn log_likelihood_is_consistent(sigma in 0.2f64..3.0, y in -8.0f64..8.0, z in 0u8..2) {
        let ch = DegradedChannel::new(sigma).unwrap();
        let l = ch.likelihood(y, z);
        prop_assume!(l > 1e-250);
        prop_assert!((ch.ln_likelihood(y, z) - l.ln()).abs() < 1e-9);
    }
}
