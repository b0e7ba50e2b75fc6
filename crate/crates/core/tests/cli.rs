use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use tempfile::TempDir;

struct Env {
    _dir: TempDir,
    out: std::path::PathBuf,
    cache: std::path::PathBuf,
}

impl Env {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let cache = dir.path().join("cache");
        Env { _dir: dir, out, cache }
    }

    fn run(&self, args: &[&str]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_qrm"));
        cmd.args(args);
        if args[0] != "verify" {
            cmd.arg("--out").arg(&self.out);
        }
        cmd.env("QRM_CACHE_DIR", &self.cache)
            .env("RUST_LOG", "warn")
            .output()
            .unwrap()
    }

    fn cache_files(&self) -> usize {
        fs::read_dir(&self.cache)
            .map(|d| {
                d.filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".qrm.csv"))
                    .count()
            })
            .unwrap_or(0)
    }
}

/// Column name to values for a sweep record file.
fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("#qrm-sweep v1 {"));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<Option<f64>> {
    let (header, rows) = table(path);
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].parse().ok()).collect()
}

fn summary(env: &Env, file: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(env.out.join(file)).unwrap()).unwrap()
}

fn gc2_alpha(r: f64) -> f64 {
    1.0 + 1.37 * r.powf(2.0 / 3.0) - 0.125 * r.powf(4.0 / 3.0)
}

#[test]
fn cache_hit_is_fast_and_identical() {
    let env = Env::new();
    let args = [
        "qfi-sweep", "--freq", "0.1", "--method", "both", "--gbar-min", "1.0", "--gbar-max", "1.6", "--gbar-steps", "31",
    ];
    let first = env.run(&args);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let file = env.out.join("qfi-sweep_both_r0.1.csv");
    let bytes = fs::read(&file).unwrap();

    let t = Instant::now();
    let second = env.run(&args);
    assert!(t.elapsed().as_secs_f64() < 1.0, "cached run took {:?}", t.elapsed());
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(fs::read(&file).unwrap(), bytes);
    assert_eq!(env.cache_files(), 1);

    let (header, rows) = table(&file);
    assert_eq!(&header[..4], ["status", "g", "gbar", "g_over_gc2"]);
    for c in ["ed_f_q", "ed_f_q_norm", "pp_f_q", "pp_f_q_norm", "pp_velocity"] {
        assert!(header.iter().any(|h| h == c), "missing {c}");
    }
    assert_eq!(rows.len(), 31);
    let norm = column(&file, "ed_f_q_norm");
    assert_eq!(norm.iter().flatten().cloned().fold(0.0, f64::max), 1.0);

    let s = summary(&env, "qfi-sweep_both_summary.json");
    let ed = s[0]["summary"]["ed_gbar_cf"].as_f64().unwrap();
    let pp = s[0]["summary"]["pp_gbar_cf"].as_f64().unwrap();
    assert!((ed / gc2_alpha(0.1) - 1.0).abs() < 0.01, "{ed}");
    assert!((pp / ed - 1.0).abs() < 0.03, "{pp} vs {ed}");
}

#[test]
fn tolerance_change_misses_the_cache() {
    let env = Env::new();
    let base = ["qfi-sweep", "--freq", "0.2", "--gbar-min", "1.2", "--gbar-max", "1.6", "--gbar-steps", "5"];
    assert_eq!(env.run(&base).status.code(), Some(0));
    let mut loose = base.to_vec();
    loose.extend(["--tol", "1e-9"]);
    assert_eq!(env.run(&loose).status.code(), Some(0));
    assert_eq!(env.cache_files(), 2);
    let mut nocache = base.to_vec();
    nocache.push("--no-cache");
    assert_eq!(env.run(&nocache).status.code(), Some(0));
    assert_eq!(env.cache_files(), 2);
}

#[test]
fn polaron_sweep_fills_low_frequency_region() {
    let env = Env::new();
    let out = env.run(&[
        "qfi-sweep", "--freq", "0.005", "--method", "pp", "--gbar-min", "1.2", "--gbar-max", "2.5", "--gbar-steps", "27",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let f = column(&env.out.join("qfi-sweep_pp_r0.005.csv"), "pp_f_q");
    assert!(f.iter().all(|v| v.is_some_and(|x| x.is_finite() && x > 0.0)), "{f:?}");

    let alias = env.run(&["pp-sweep", "--freq", "0.1", "--gbar-min", "1.0", "--gbar-max", "1.5", "--gbar-steps", "11"]);
    assert_eq!(alias.status.code(), Some(0), "{}", String::from_utf8_lossy(&alias.stderr));
}

#[test]
fn gc_table_scalings() {
    let env = Env::new();
    let out = env.run(&["gc", "--freq", "1e-6,0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let low: Vec<&str> = lines.next().unwrap().split(',').collect();
    for (h, v) in header.iter().zip(&low) {
        if h.ends_with("_over_gc0") && !v.is_empty() {
            let x: f64 = v.parse().unwrap();
            assert!((x - 1.0).abs() < 1e-3, "{h} = {x}");
        }
    }
    assert!(env.out.join("gc.csv").exists());
}

#[test]
fn gc_table_and_fit_from_cached_sweeps() {
    let env = Env::new();
    let fit = env.run(&["fit"]);
    assert_eq!(fit.status.code(), Some(2), "fit without cached sweeps must fail as a config error");

    let sweep = env.run(&[
        "qfi-sweep", "--freq", "0.02,0.05,0.1,0.2", "--gbar-min", "0.9", "--gbar-max", "1.9", "--gbar-steps", "51",
    ]);
    assert_eq!(sweep.status.code(), Some(0), "{}", String::from_utf8_lossy(&sweep.stderr));

    let gc = env.run(&["gc", "--freq", "0.02,0.05,0.1,0.2"]);
    let text = String::from_utf8(gc.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == "g_cf_ed_over_gc2").unwrap();
    for line in lines {
        let v: f64 = line.split(',').nth(i).unwrap().parse().unwrap();
        assert!((0.99..=1.01).contains(&v), "{line}");
    }

    let fit = env.run(&["fit", "--max-order", "3"]);
    assert_eq!(fit.status.code(), Some(0), "{}", String::from_utf8_lossy(&fit.stderr));
    let json = summary(&env, "fit.json");
    assert_eq!(json["data"].as_array().unwrap().len(), 4);
    let c1 = json["fits"][0]["coefficients"][0].as_f64().unwrap();
    assert!((c1 / 1.3715 - 1.0).abs() < 0.1, "{c1}");
}

#[test]
fn default_frequency_list() {
    let env = Env::new();
    let out = env.run(&["qfi-sweep", "--gbar-steps", "31"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&env, "qfi-sweep_ed_summary.json");
    let entries = s.as_array().unwrap();
    assert_eq!(entries.len(), 9);
    for e in entries {
        let r = e["omega_ratio"].as_f64().unwrap();
        let gb = e["summary"]["ed_gbar_cf"].as_f64().unwrap();
        assert!((gb / gc2_alpha(r) - 1.0).abs() < 0.01, "ω/Ω = {r}: {gb}");
        assert_eq!(e["failed_points"].as_u64(), Some(0));
    }
}

#[test]
fn map_writes_matrices_and_overlays() {
    let env = Env::new();
    let out = env.run(&["map", "--rows", "3", "--gbar-steps", "25"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["map_qfi.csv", "map_susceptibility.csv", "map_overlays.csv"] {
        let text = fs::read_to_string(env.out.join(f)).unwrap();
        assert_eq!(text.lines().count(), 4, "{f}");
    }
}

#[test]
fn verify_passes() {
    let env = Env::new();
    let out = env.run(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn bad_configuration_exits_with_two() {
    let env = Env::new();
    for args in [
        &["qfi-sweep", "--omega-ratio", "-0.1"][..],
        &["qfi-sweep", "--gbar-min", "2", "--gbar-max", "1"],
        &["qfi-sweep", "--tol", "0"],
        &["gc", "--gc2-variant", "nonsense"],
        &["map", "--gbar-steps", "1"],
        &["no-such-command"],
    ] {
        let out = env.run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}
