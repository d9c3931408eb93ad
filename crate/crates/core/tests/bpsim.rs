use sc_caf::bpsim::{bp_decode, ml_decode, monte_carlo, McConfig};
use sc_caf::channel::{BinaryInputChannel, DegradedChannel};
use sc_caf::codes::{CodeInstance, RegularEnsemble};
use sc_caf::rng::stream;

fn code(n: usize, seed: u64) -> CodeInstance {
    CodeInstance::sample_regular(&RegularEnsemble::new(3, 6).unwrap(), n, seed).unwrap()
}

fn mc(frames: usize, seed: u64) -> McConfig {
    McConfig {
        frames,
        max_iter: 50,
        seed,
        workers: None,
        trace: false,
    }
}

#[test]
fn decoding_commutes_with_coordinate_permutation() {
    let c = code(300, 4);
    let n = c.n();
    // reverse the coordinates together with the parity checks
    let perm: Vec<u32> = (0..n as u32).rev().collect();
    let permuted_checks: Vec<Vec<u32>> = c
        .checks()
        .iter()
        .map(|row| row.iter().map(|&v| perm[v as usize]).collect())
        .collect();
    let pc = CodeInstance::from_checks(n, permuted_checks).unwrap();
    let ch = DegradedChannel::new(0.78).unwrap();
    let mut rng = stream(2, &[]);
    for _ in 0..10 {
        let z = c.sample_codeword(&mut rng);
        let y: Vec<f64> = z.iter().map(|&b| ch.sample_output(b, &mut rng)).collect();
        let mut py = vec![0.0; n];
        for (t, &v) in y.iter().enumerate() {
            py[perm[t] as usize] = v;
        }
        let a = bp_decode(&c, &y, &ch, 30);
        let b = bp_decode(&pc, &py, &ch, 30);
        assert_eq!(a.converged, b.converged);
        assert_eq!(a.iterations_used, b.iterations_used);
        for t in 0..n {
            assert_eq!(a.estimate[t], b.estimate[perm[t] as usize]);
            assert!((a.posterior_llrs[t] - b.posterior_llrs[perm[t] as usize]).abs() < 1e-9);
        }
    }
}

#[test]
fn never_converges_with_unsatisfied_checks() {
    let c = code(120, 8);
    for sigma in [0.7, 0.9, 1.2] {
        let ch = DegradedChannel::new(sigma).unwrap();
        let mut rng = stream(3, &[sigma.to_bits()]);
        for _ in 0..100 {
            let z = c.sample_codeword(&mut rng);
            let y: Vec<f64> = z.iter().map(|&b| ch.sample_output(b, &mut rng)).collect();
            let out = bp_decode(&c, &y, &ch, 25);
            if out.converged {
                assert_eq!(c.unsatisfied_checks(&out.estimate), 0);
            } else {
                assert!(c.unsatisfied_checks(&out.estimate) > 0);
                assert_eq!(out.iterations_used, 25);
            }
        }
    }
}

#[test]
fn ml_agrees_with_bp_and_is_never_worse() {
    let c = code(16, 12);
    assert!(c.dimension() <= 24);
    let ch = DegradedChannel::new(0.6).unwrap();
    let mut rng = stream(5, &[]);
    let frames = 1000;
    let (mut converged, mut agree, mut ml_err, mut bp_err) = (0, 0, 0, 0);
    for _ in 0..frames {
        let z = c.sample_codeword(&mut rng);
        let y: Vec<f64> = z.iter().map(|&b| ch.sample_output(b, &mut rng)).collect();
        let ml = ml_decode(&c, &y, &ch).unwrap();
        let bp = bp_decode(&c, &y, &ch, 50);
        assert!(c.is_codeword(&ml));
        if bp.converged {
            converged += 1;
            agree += usize::from(bp.estimate == ml);
        }
        ml_err += usize::from(ml != z);
        bp_err += usize::from(bp.estimate != z);
    }
    // agreement is measured on the frames where BP settled on a codeword
    assert!(agree as f64 / converged as f64 > 0.95, "agreement {agree}/{converged}");
    assert!(converged > frames / 2);
    assert!(ml_err <= bp_err, "ML {ml_err} vs BP {bp_err} block errors");
}

#[test]
fn waterfall_around_threshold() {
    let c = code(4096, 1);
    let good = monte_carlo(&c, &DegradedChannel::new(0.60).unwrap(), &mc(200, 1)).unwrap();
    assert!(good.ber < 1e-4, "{}", good.ber);
    assert!(good.fer_ci.lo < 1e-2);
    let bad = monte_carlo(&c, &DegradedChannel::new(0.90).unwrap(), &mc(200, 1)).unwrap();
    assert!(bad.ber > 1e-2, "{}", bad.ber);
}

#[test]
fn interval_width_scales_with_frames() {
    let c = code(256, 3);
    let ch = DegradedChannel::new(0.80).unwrap();
    let a = monte_carlo(&c, &ch, &mc(400, 7)).unwrap();
    let b = monte_carlo(&c, &ch, &mc(1600, 7)).unwrap();
    let ratio = a.fer_ci.width() / b.fer_ci.width();
    // four times the frames: about half the width
    assert!((ratio - 2.0).abs() < 0.4, "ratio {ratio}");
    assert_eq!(monte_carlo(&c, &ch, &mc(400, 7)).unwrap(), a);
}
