use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wlp_core::io::write_gf;
use wlp_core::{Grid, GridFunction};

fn wlp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wlp")).args(args).env_remove("WSL_JOBS").output().unwrap()
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn indicator(dir: &Path) -> PathBuf {
    let g = Grid::centered(1, 2.0, 64).unwrap();
    let f = GridFunction::from_fn(g, |x| if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 }).unwrap();
    let path = dir.join("chi.gf");
    write_gf(&f, fs::File::create(&path).unwrap()).unwrap();
    path
}

#[test]
fn help_lists_every_id() {
    let o = wlp(&["verify", "--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for id in wlp_core::verify::THEOREM_IDS {
        assert!(text.lines().any(|l| l.trim_start().starts_with(id)), "{id} missing");
    }
}

#[test]
fn unit_weight_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    let csv = dir.path().join("csv");
    let o = wlp(&[
        "verify",
        "--config",
        example("unit.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--csv-dir",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("0 fail"));
    assert!(csv.join("sandwich_F_p2.csv").exists());

    let r = wlp(&["report", "--input", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    let s: serde_json::Value = serde_json::from_str(&stdout(&r)).unwrap();
    assert_eq!(s["total"], 29);
    assert_eq!(s["failed"].as_array().unwrap().len(), 0);
}

#[test]
fn failing_check_exits_one() {
    let o = wlp(&["verify", "--config", example("bad_normalizer.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("FAIL ruwf:main"));
    assert!(stdout(&o).contains("\"verdict\":\"fail\""), "{}", stdout(&o));
}

#[test]
fn unknown_keys_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"checks":[{"id":"suf","params":{"dleta":0.5}}]}"#).unwrap();
    let o = wlp(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dleta"), "{}", stderr(&o));

    fs::write(&cfg, r#"{"checks":[{"id":"nope"}]}"#).unwrap();
    let o = wlp(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope"));
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("power.json");
    let run = |name: &str, jobs: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_wlp"))
            .args(["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .env("WSL_JOBS", jobs)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read(out).unwrap()
    };
    let a = run("a.jsonl", "1");
    assert_eq!(a, run("b.jsonl", "4"));
    assert_eq!(a, run("c.jsonl", "1"));
}

#[test]
fn seed_flag_overrides_config() {
    let cfg = example("unit.json");
    let p = wlp(&["verify", "--config", cfg.to_str().unwrap(), "--seed", "9", "--print-config"]);
    assert!(p.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&p)).unwrap();
    assert_eq!(v["ensemble"]["seed"], 9);
}

#[test]
fn norm_of_an_indicator() {
    let dir = tempfile::tempdir().unwrap();
    let f = indicator(dir.path());
    for p in ["0.5", "1", "2", "3"] {
        let o = wlp(&["norm", "--p", p, "--input", f.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let v: f64 = stdout(&o).trim().parse().unwrap();
        assert!((v - 1.0).abs() < 1e-12, "p = {p}: {v}");
    }
}

#[test]
fn op_writes_a_readable_output() {
    let dir = tempfile::tempdir().unwrap();
    let f = indicator(dir.path());
    let out = dir.path().join("s.gf");
    let o = wlp(&[
        "op",
        "--op",
        "S_u",
        "--u",
        "-0.25",
        "--input",
        f.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--p",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("ratio = "));
    let g = wlp_core::io::read_gf(std::io::BufReader::new(fs::File::open(out).unwrap())).unwrap();
    assert_eq!(g.samples().len(), 64);
}

#[test]
fn apconst_flags_power_two() {
    let o = wlp(&["apconst", "--weight", "power:2", "--p", "2", "--depth", "12"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("diverging = true"));

    let o = wlp(&["apconst", "--weight", "const:1", "--p", "2"]);
    assert!(stdout(&o).contains("diverging = false"));
    let v: f64 = stdout(&o).lines().next().unwrap().trim_start_matches("value = ").parse().unwrap();
    assert!((v - 1.0).abs() < 1e-12);
}

#[test]
fn bad_weight_exits_two() {
    let o = wlp(&["apconst", "--weight", "power:x", "--p", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("power:x"));
}
