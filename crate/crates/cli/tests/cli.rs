use std::process::{Command, Output};

use serde_json::Value;

fn azpair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_azpair")).args(args).output().unwrap()
}

fn json(args: &[&str]) -> Value {
    let out = azpair(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn constants() {
    let v = json(&["constants"]);
    assert_eq!(v["schema"], 1);
    assert!((num(&v["result"]["chebyshev_integral"]) - 0.3231).abs() < 5e-5);
    assert!((num(&v["result"]["l2_chi3"]) - 0.781302).abs() < 1e-6);
}

#[test]
fn i_integral() {
    let v = json(&["I", "1", "1"]);
    assert!((num(&v["result"]) - 0.3231).abs() < 5e-5);
    let v = json(&["I", "2", "1"]);
    assert!(num(&v["result"]).abs() < 1e-8);
    let v = json(&["I", "3/2", "0"]);
    assert_eq!(num(&v["result"]), 0.0);
}

#[test]
fn newton() {
    let v = json(&["newton", "x^2 - 2", "2"]);
    let slopes = &v["result"]["polygon"]["slopes"];
    assert_eq!(slopes[0]["slope"], "-1/2");
    assert_eq!(slopes[0]["length"], 2);
    assert_eq!(slopes.as_array().unwrap().len(), 1);
}

#[test]
fn heights() {
    let v = json(&["height", "x^2", "3"]);
    assert!((num(&v["result"]["value"]) - 3f64.ln()).abs() < 1e-8);
    let v = json(&["height", "x^2 - 1", "0"]);
    assert_eq!(num(&v["result"]["value"]), 0.0);
    let v = json(&["height", "x^2 + 5", "0"]);
    let r = &v["result"];
    assert!((num(&r["value"]) - 0.850992).abs() <= 1e-6 + num(&r["error_radius"]));
}

#[test]
fn pairings() {
    let v = json(&["pairing", "x^2 - 2"]);
    assert!((num(&v["result"]["report"]["value"]) - 0.3231).abs() < 0.01);
    let v = json(&["pairing", "x^2"]);
    assert!(num(&v["result"]["report"]["value"]).abs() < 1e-8);
}

#[test]
fn cross_check() {
    let v = json(&["pairing", "x^2 + 5", "--cross-check"]);
    let report = &v["result"]["report"];
    let h = num(&report["h_phi_zero"]["value"]);
    assert!((num(&report["value"]) - h).abs() <= num(&report["error_radius"]));
    let est = v["result"]["cross_check"]["estimates"].as_array().unwrap();
    let last = num(&est.last().unwrap()[1]);
    assert!((last - h).abs() < 1e-3, "{last} vs {h}");
}

#[test]
fn reduction_lists_every_bad_prime() {
    let v = json(&["reduction", "x^2 + 1/6 x + 5/2"]);
    let primes: Vec<u64> = v["result"]["primes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["prime"].as_u64().unwrap())
        .collect();
    assert_eq!(primes, vec![2, 3, 5]);
    for r in v["result"]["primes"].as_array().unwrap() {
        assert!(r["method"].is_string());
    }
    let v = json(&["reduction", "x^2 + 1/2"]);
    assert_eq!(v["result"]["primes"][0]["method"], "LemmaDisjoint");
}

#[test]
fn config_is_embedded_and_output_is_deterministic() {
    let args = ["pairing", "x^2 + 1", "--samples", "500", "--seed", "7", "--depth", "20"];
    let a = azpair(&args);
    let b = azpair(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let threaded = Command::new(env!("CARGO_BIN_EXE_azpair"))
        .args(args)
        .env("AZPAIR_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(a.stdout, threaded.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    let c = &v["config"];
    assert_eq!(c["seed"], 7);
    assert_eq!(c["samples"], 500);
    assert_eq!(c["depth"], 20);
    assert_eq!(c["n_max"], 10);
    assert_eq!(num(&c["clip_eps"]), 1e-9);
    assert_eq!(num(&c["tol"]), 1e-8);
    assert_eq!(c["output_format"], "json");
}

#[test]
fn sample_csv() {
    let out = azpair(&["sample", "x^2 - 2", "--samples", "100", "--depth", "10", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("re,im"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (re, im) = l.split_once(',').unwrap();
            (re.parse().unwrap(), im.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 100);
    // the Julia set of x^2 - 2 is [-2, 2]
    assert!(rows.iter().all(|&(re, im)| re.abs() <= 2.0 + 1e-9 && im.abs() < 1e-6));
}

#[test]
fn text_format() {
    let out = azpair(&["I", "1", "1", "--format", "text"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "0.323065947219");
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| azpair(args).status.code();
    assert_eq!(code(&["pairing", "x^^2"]), Some(2));
    assert_eq!(code(&["newton", "x^2 - 2", "4"]), Some(2));
    assert_eq!(code(&["pairing", "x^2", "--samples", "0"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(code(&["I", "0", "1"]), Some(2));
    // degree too small and a non-monic map with a bad prime are computation failures
    assert_eq!(code(&["height", "x + 1", "3"]), Some(3));
    assert_eq!(code(&["pairing", "2x^2 + 1"]), Some(3));
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_azpair"))
        .args(["constants"])
        .env("AZPAIR_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(2));
}
