use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qss")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn synthesize_prints_the_split() {
    let o = qss(&["synthesize"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let m = v["matrix"].as_array().unwrap();
    assert_eq!(m.len(), 8);
    assert_eq!(m[3].as_array().unwrap().len(), 8);
    assert_eq!(m[0][0].as_array().unwrap().len(), 2);
    for r in v["residuals"].as_array().unwrap() {
        assert!(r.as_f64().unwrap() < 1e-8);
    }
    assert!(v["unitarity_defect"].as_f64().unwrap() < 1e-10);
}

#[test]
fn honest_plain_run_detects_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = qss(&["run", "--rounds", "50", "--trials", "40", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = read_json(&out);
    assert_eq!(v["detection_probability"], 0.0);
    assert_eq!(v["variant"], "plain");
    assert_eq!(v["attack"], "none");
    assert!(v["min_carrier_fidelity"].as_f64().unwrap() > 1.0 - 1e-10);
    assert!(stdout(&o).contains("detected 0/40"));
}

#[test]
fn reports_are_byte_identical_for_equal_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let p = dir.path().join(name);
        let o = qss(&[
            "run", "--theta", "0.7", "1.1", "--attack", "split", "--rounds", "40", "--trials", "30", "--seed", seed,
            "--out", p.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read(p).unwrap()
    };
    assert_eq!(run("a.json", "4"), run("b.json", "4"));
    assert_ne!(run("c.json", "4"), run("d.json", "5"));
}

#[test]
fn plain_split_bob_last_is_undetected_with_full_recovery() {
    let o = qss(&["run", "--attack", "split", "--order", "bob-last", "--trials", "100"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["detection_probability"], 0.0);
    assert_eq!(v["bob_recovery_rate"], 1.0);
    assert_eq!(v["announce_order"], "bob_last");
}

#[test]
fn theta_split_random_is_caught() {
    let o = qss(&["run", "--theta", "0.7", "1.1", "--attack", "split", "--policy", "random", "--trials", "1000"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["detection_probability"].as_f64().unwrap() >= 0.99, "{v}");
    assert_eq!(v["policy"], "random");
}

#[test]
fn transcripts_are_written_as_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.jsonl");
    let o = qss(&["run", "--rounds", "6", "--trials", "3", "--transcripts", t.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let lines: Vec<Value> =
        fs::read_to_string(&t).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 18);
    assert_eq!(lines[0]["trial"], 0);
    assert_eq!(lines[17]["trial"], 2);
    assert_eq!(lines[17]["round"], 6);
    for l in &lines {
        for k in ["round", "parity", "q", "bob", "charlie", "carrier_fidelity"] {
            assert!(l.get(k).is_some(), "{k} missing in {l}");
        }
    }
}

#[test]
fn config_file_mirrors_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"rounds": 20, "seed": 3, "theta": [0.7, 1.1], "attack": "split", "policy": "v", "trials": 25, "order": "alice-first"}"#,
    )
    .unwrap();
    let from_file = qss(&["run", "--config", cfg.to_str().unwrap()]);
    let from_flags = qss(&[
        "run", "--rounds", "20", "--seed", "3", "--theta", "0.7", "1.1", "--attack", "split", "--policy", "v", "--trials",
        "25", "--order", "alice-first",
    ]);
    assert_eq!(code(&from_file), 0, "{}", stderr(&from_file));
    assert_eq!(stdout(&from_file), stdout(&from_flags));
    // flags override the file
    let o = qss(&["run", "--config", cfg.to_str().unwrap(), "--trials", "5"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["trials"], 5);
    assert_eq!(v["rounds"], 20);
}

#[test]
fn invalid_configurations_exit_1_with_distinct_messages() {
    let cases: [(&[&str], &str); 7] = [
        (&["run", "--announce-frac", "0"], "announce fraction"),
        (&["run", "--theta", "0", "0.5"], "degenerate"),
        (&["run", "--theta", "1", "2", "3"], "sum"),
        (&["run", "--variant", "plain", "--theta", "1", "2"], "plain variant"),
        (&["run", "--trials", "0"], "trial count"),
        (&["run", "--rounds", "0"], "rounds"),
        (&["run", "--policy", "w"], "invalid value"),
    ];
    for (args, needle) in cases {
        let o = qss(args);
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn io_failures_exit_3() {
    let o = qss(&["synthesize", "--out", "/nonexistent-dir/split.json"]);
    assert_eq!(code(&o), 3);
    let o = qss(&["run", "--config", "/nonexistent-dir/cfg.json"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn help_exits_0() {
    let o = qss(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("verify"));
}

fn check_line<'a>(out: &'a str, name: &str) -> &'a str {
    out.lines().find(|l| l.split_whitespace().nth(1) == Some(name)).unwrap_or_else(|| panic!("{name} missing"))
}

#[test]
fn verify_reports_each_identity() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("v.json");
    let o = qss(&["verify", "--samples", "20", "--out", p.to_str().unwrap()]);
    let out = stdout(&o);
    for name in ["toggle_plain", "toggle_theta_forward", "split_maps", "split_no_signaling", "proposition_a", "hardened_validation"] {
        assert!(check_line(&out, name).starts_with("PASS"), "{out}");
    }
    // V does not send Φ− to a Ψ pattern at generic angles, so the suite fails
    assert!(check_line(&out, "proposition_b").starts_with("FAIL"), "{out}");
    assert_eq!(code(&o), 2);
    let v = read_json(&p);
    assert_eq!(v.as_array().unwrap().len(), 15);
}

#[test]
fn verify_flags_degenerate_angles() {
    let o = qss(&["verify", "--theta", "0", "0", "0", "--samples", "0"]);
    let out = stdout(&o);
    assert_eq!(code(&o), 2);
    let h = check_line(&out, "hardened_validation");
    assert!(h.starts_with("FAIL") && h.contains("degenerate"), "{h}");
    assert!(check_line(&out, "transpose_generic").starts_with("FAIL"));
    assert!(check_line(&out, "toggle_theta_forward").starts_with("PASS"));
}

#[test]
fn verify_negative_control_breaks_the_toggle() {
    let o = qss(&["verify", "--theta", "0.7", "1.1", "--theta-c", "0.3", "--samples", "0"]);
    let out = stdout(&o);
    assert_eq!(code(&o), 2);
    assert!(check_line(&out, "toggle_theta_forward").starts_with("FAIL"), "{out}");
    assert!(check_line(&out, "toggle_theta_inverse").starts_with("FAIL"), "{out}");
}

#[test]
fn sweep_degrades_toward_zero_angles() {
    let o = qss(&["sweep", "--attack", "split", "--trials", "300", "--grid", "0.01,1.0", "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).filter(|l| !l.is_empty()).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    let p = |r: &Vec<&str>| r[5].parse::<f64>().unwrap();
    assert!(p(&rows[0]) < 0.05 && p(&rows[1]) > 0.9, "{out}");
}

#[test]
fn sweep_point_matches_run() {
    let s = qss(&["sweep", "--attack", "split", "--trials", "50", "--seed", "8", "--point", "0.7", "1.1"]);
    let r = qss(&["run", "--theta", "0.7", "1.1", "--attack", "split", "--trials", "50", "--seed", "8"]);
    assert_eq!(code(&s), 0, "{}", stderr(&s));
    let rows: Value = serde_json::from_str(&stdout(&s)).unwrap();
    let run: Value = serde_json::from_str(&stdout(&r)).unwrap();
    assert_eq!(rows[0]["detection_probability"], run["detection_probability"]);
    assert_eq!(rows[0]["mismatch_rate"], run["mismatch_rate"]);
}
