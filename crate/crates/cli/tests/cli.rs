use std::path::PathBuf;
use std::process::{Command, Output};

fn sc_caf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sc-caf")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sc-caf-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn sir_reports_threshold_with_config() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&sc_caf(&["sir", "--scheme", "caf", "--rate", "0.5"]))).unwrap();
    let sigma = v["result"][0]["sigma"].as_f64().unwrap();
    assert!((sigma - 0.805).abs() < 2e-3, "{sigma}");
    assert_eq!(v["config"]["subcommand"], "sir");
    assert!(v["version"].as_str().unwrap().starts_with("sc-caf "));
}

#[test]
fn sir_accepts_fractional_rates_and_csv() {
    let text = stdout(&sc_caf(&["--format", "csv", "sir", "--scheme", "sd", "--rate", "2/3"]));
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# version="));
    assert!(lines.next().unwrap().starts_with("# config={"));
    assert_eq!(lines.next().unwrap(), "scheme,rate,sigma");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let sigma: f64 = row[2].parse().unwrap();
    assert!((sigma - 0.537).abs() < 2e-3, "{sigma}");
}

#[test]
fn replayed_outputs_are_identical() {
    for format in ["json", "csv"] {
        let path = scratch(&format!("de.{format}"));
        let p = path.to_str().unwrap();
        stdout(&sc_caf(&["--format", format, "-o", p, "de-run", "--sigma", "0.6", "--N", "2000", "--T", "50"]));
        let out = sc_caf(&["replay", p, "--check"]);
        let msg = String::from_utf8_lossy(&out.stderr);
        assert!(out.status.success() && msg.contains("identical"), "{msg}");
        // a tampered file no longer reproduces
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replacen("iteration", "iter", 1)).unwrap();
        assert!(!sc_caf(&["replay", p, "--check"]).status.success());
    }
}

#[test]
fn bp_sim_is_seeded() {
    let args = ["--format", "csv", "bp-sim", "--n", "240", "--sigma", "0.7", "--frames", "20"];
    let a = stdout(&sc_caf(&args));
    assert_eq!(a, stdout(&sc_caf(&args)));
    assert!(a.contains("sigma,n,frames,ber,ber_lo,ber_hi,fer,fer_lo,fer_hi,avg_iters"));
}

#[test]
fn invalid_parameters_name_the_constraint() {
    let out = sc_caf(&["de-run", "--dl", "3", "--dr", "7", "--L", "5", "--sigma", "0.7"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("k = dr/dl"), "{err}");

    for args in [
        &["sir", "--scheme", "caf", "--rate", "1.5"][..],
        &["de-run", "--sigma", "-1"],
        &["de-run", "--sigma", "0.7", "--N", "0"],
        &["threshold", "--resolution", "2"],
        &["de-run", "--sigma", "0.7", "--bogus"],
    ] {
        let out = sc_caf(args);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn extrapolate_from_points() {
    // points on an exact curve are fitted back
    let pts: Vec<String> = [4.0f64, 6.0, 8.0, 10.0, 14.0, 20.0]
        .iter()
        .map(|&l| format!("{l}:{}", 0.78 + 0.3 * (-0.25 * l).exp()))
        .collect();
    let v: serde_json::Value = serde_json::from_str(&stdout(&sc_caf(&["extrapolate", "--points", &pts.join(",")]))).unwrap();
    let s = v["result"]["sigma_inf"].as_f64().unwrap();
    assert!((s - 0.78).abs() < 1e-4, "{s}");
}

#[test]
fn selftest_passes() {
    let out = stdout(&sc_caf(&["selftest"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let checks = v["result"].as_array().unwrap();
    assert!(checks.len() >= 6);
    assert!(checks.iter().all(|c| c["passed"] == true), "{out}");
}
