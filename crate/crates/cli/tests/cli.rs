use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use skg_core::experiment::{build_scenario, evaluate_capacity, FieldCache};
use skg_core::export::{gain_map_csv, read_gain_map};
use skg_core::ExperimentConfig;

const SMALL: &[&str] = &["--grid", "20", "20", "--area-m", "200", "--reps", "2", "--transmissions", "2000"];

fn skg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skg"))
        .args(args)
        .env("SKG_THREADS", "2")
        .output()
        .expect("spawn skg")
}

fn ok(args: &[&str]) -> Output {
    let out = skg(args);
    assert!(
        out.status.success(),
        "skg {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn with_small<'a>(head: &[&'a str]) -> Vec<&'a str> {
    head.iter().copied().chain(SMALL.iter().copied()).collect()
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn capacity_sweep_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        ok(&with_small(&["capacity-sweep", "--sweep", "Q", "2,8", "--seed", "5", "--out", p.to_str().unwrap()]));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("# skg capacity-sweep grid=20x20"));
    assert!(text.contains("seed=5"));
    // 2 values x 2 reps, then 2 mean rows
    assert_eq!(data_rows(&text).len(), 6);
}

#[test]
fn run_protocol_is_byte_identical_and_summarized() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let p = dir.path().join(name);
        let k = dir.path().join(format!("keys_{name}"));
        ok(&with_small(&[
            "run-protocol",
            "--out",
            p.to_str().unwrap(),
            "--keys",
            k.to_str().unwrap(),
        ]));
        texts.push((fs::read_to_string(&p).unwrap(), fs::read_to_string(&k).unwrap()));
    }
    assert_eq!(texts[0], texts[1]);
    let rows = data_rows(&texts[0].0);
    assert_eq!(rows.len(), 4);
    assert!(rows[2].starts_with("mean,"));
    assert!(rows[3].starts_with("std,"));
}

#[test]
fn zero_repetitions_give_header_only() {
    let out = ok(&["run-protocol", "--grid", "10", "10", "--area-m", "100", "--reps", "0"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("# skg run-protocol"));
    assert!(lines[1].starts_with("seed,N,K,Q,"));
    let sweep = ok(&["capacity-sweep", "--grid", "10", "10", "--area-m", "100", "--reps", "0"]);
    assert_eq!(String::from_utf8(sweep.stdout).unwrap().lines().count(), 2);
}

#[test]
fn gen_maps_round_trip_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let d = dir.path().join(sub);
        let out = ok(&with_small(&["gen-maps", "--seed", "9", "--out", d.to_str().unwrap()]));
        (d, String::from_utf8(out.stdout).unwrap())
    };
    let (d1, stdout) = run("one");
    let (d2, _) = run("two");
    for f in ["bob_map.csv", "eve_map.csv", "partition.csv"] {
        assert_eq!(fs::read(d1.join(f)).unwrap(), fs::read(d2.join(f)).unwrap(), "{f}");
    }
    for f in ["bob_map.csv", "eve_map.csv"] {
        let text = fs::read_to_string(d1.join(f)).unwrap();
        let (manifest, map) = read_gain_map(&d1.join(f)).unwrap();
        assert_eq!(map.len(), 400);
        assert_eq!(gain_map_csv(&manifest, &map), text);
    }
    let value = |prefix: &str| -> f64 {
        let line = stdout.lines().find(|l| l.starts_with(prefix)).unwrap();
        line.split('=').nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap()
    };
    assert!((value("C_bar_key") - value("max |I_l|").log2()).abs() < 1e-6);
}

#[test]
fn single_point_matches_library_call() {
    let out = ok(&["capacity-sweep", "--grid", "20", "20", "--area-m", "200", "--reps", "1", "--seed", "4"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row = data_rows(&text)[0];
    let cap: f64 = row.split(',').nth(4).unwrap().parse().unwrap();

    let mut cfg = ExperimentConfig::default();
    cfg.set("grid", "20 20").unwrap();
    cfg.area_m = 200.0;
    cfg.reps = 1;
    cfg.seed = 4;
    let cache = FieldCache::new();
    let sc = build_scenario(&cfg, 0, &cache).unwrap();
    let direct = evaluate_capacity(&cfg, &sc).unwrap().capacity_bits;
    assert!((cap - direct).abs() <= 1e-11 * direct.abs().max(1.0));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\ngrid = 10 10\narea_m = 100\nlevels = 4\nseed = 3\nreps = 0\n").unwrap();
    let out = ok(&["capacity-sweep", "--config", cfg.to_str().unwrap(), "--levels", "8"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let manifest = text.lines().next().unwrap();
    assert!(manifest.contains("levels=8"));
    assert!(manifest.contains("seed=3"));
    assert!(manifest.contains("grid=10x10"));
}

#[test]
fn unknown_axis_is_a_usage_error() {
    let out = skg(&["capacity-sweep", "--sweep", "speed", "1,2"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for axis in ["Q", "M", "SNR_min", "rho_dB", "K", "sigma_sh_A", "d"] {
        assert!(err.contains(axis), "{err}");
    }
}

#[test]
fn bad_inputs_fail_with_context() {
    let out = skg(&["capacity-sweep", "--levels", "0"]);
    assert!(!out.status.success());

    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let target = blocker.join("maps");
    let out = skg(&["gen-maps", "--grid", "10", "10", "--area-m", "100", "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(blocker.to_str().unwrap()), "{err}");

    let missing = skg(&["run-protocol", "--config", "/nonexistent/skg.cfg"]);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/skg.cfg"));
    assert!(!Path::new("/nonexistent").exists());
}
