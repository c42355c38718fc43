use std::fs;
use std::path::{Path, PathBuf};

use rough_scl::cli::{run, EXIT_CONFIG, EXIT_OK, EXIT_SUITE_FAILED};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cli(args: &[&str]) -> i32 {
    run(std::iter::once("rough-scl").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("default.json");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(cli(&["simulate", s(&cfg), "--out", s(out), "--grid.nx=80", "--driver.dyadic_level=4"]), EXIT_OK);
    }
    for f in ["snapshots.csv", "ledger.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let snap = fs::read_to_string(a.join("snapshots.csv")).unwrap();
    assert!(snap.starts_with("t,x1,u\n"));
    let ledger = fs::read_to_string(a.join("ledger.csv")).unwrap();
    assert!(ledger.starts_with("step,t,total_mass,clamp_residual\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn zero_initial_data_gives_zero_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("default.json");
    assert_eq!(cli(&["simulate", s(&cfg), "--out", s(dir.path()), "--initial.kind=zero", "--grid.nx=40"]), EXIT_OK);
    let mut r = csv::Reader::from_path(dir.path().join("snapshots.csv")).unwrap();
    for rec in r.records() {
        assert_eq!(rec.unwrap()[2].parse::<f64>().unwrap(), 0.0);
    }
    let mut r = csv::Reader::from_path(dir.path().join("ledger.csv")).unwrap();
    for rec in r.records() {
        assert_eq!(rec.unwrap()[2].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"flux": {"params": {}}}"#).unwrap();
    assert_eq!(cli(&["simulate", s(&bad)]), EXIT_CONFIG);
    fs::write(&bad, r#"{"flux": {"name": "burgers_xindep"}, "grid": {"nx": 100, "colour": 1}}"#).unwrap();
    assert_eq!(cli(&["simulate", s(&bad)]), EXIT_CONFIG);
    let cfg = configs().join("default.json");
    assert_eq!(cli(&["simulate", s(&cfg), "--time.cfl=2"]), EXIT_CONFIG);
    assert_eq!(cli(&["simulate", s(&cfg), "--oops"]), EXIT_CONFIG);
    assert_eq!(cli(&["simulate", s(&dir.path().join("missing.json"))]), EXIT_CONFIG);
    assert_eq!(cli(&["validate", "nope", s(&cfg)]), EXIT_CONFIG);
    assert_eq!(cli(&["frobnicate"]), EXIT_CONFIG);
}

#[test]
fn lift_reports_norm_and_area() {
    let dir = tempfile::tempdir().unwrap();
    let line = dir.path().join("line.csv");
    fs::write(&line, "t,z1,z2\n0,0,0\n0.5,1.5,2\n1,3,4\n").unwrap();
    assert_eq!(cli(&["lift", s(&line), "--alpha", "0.4"]), EXIT_OK);
    let l_path = dir.path().join("l.csv");
    fs::write(&l_path, "t,z1,z2\n0,0,0\n0.5,1,0\n1,1,1\n").unwrap();
    assert_eq!(cli(&["lift", s(&l_path)]), EXIT_OK);
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    assert_eq!(cli(&["lift", s(&empty)]), EXIT_CONFIG);
    let garbled = dir.path().join("garbled.csv");
    fs::write(&garbled, "t,z1\n0,zero\n").unwrap();
    assert_eq!(cli(&["lift", s(&garbled)]), EXIT_CONFIG);
    assert_eq!(cli(&["lift", s(&line), "--alpha", "0"]), EXIT_CONFIG);
}

#[test]
fn validate_writes_reports_and_plot_data_reexports_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("default.json");
    let out = dir.path().join("v");
    assert_eq!(cli(&["--threads", "2", "validate", "bounds", s(&cfg), "--out", s(&out)]), EXIT_OK);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("bounds.json")).unwrap()).unwrap();
    for key in ["suite", "pass", "metrics", "series", "config_hash", "seed"] {
        assert!(report.get(key).is_some(), "{key}");
    }
    assert_eq!(report["pass"], true);
    assert!(out.join("bounds_mhat.csv").exists());
    let pd = dir.path().join("pd");
    assert_eq!(cli(&["plot-data", s(&out.join("bounds.json")), "--out", s(&pd)]), EXIT_OK);
    assert_eq!(fs::read(pd.join("bounds_mhat.csv")).unwrap(), fs::read(out.join("bounds_mhat.csv")).unwrap());
    fs::write(dir.path().join("junk.json"), "{}").unwrap();
    assert_eq!(cli(&["plot-data", s(&dir.path().join("junk.json"))]), EXIT_CONFIG);
}

#[test]
fn corrupted_flux_fails_contraction_with_reports_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("corrupted_flux.json");
    let code = cli(&["validate", "contraction", s(&cfg), "--out", s(dir.path()), "--grid.nx=200", "--grid.nxi=80"]);
    assert_eq!(code, EXIT_SUITE_FAILED);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("contraction.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn validate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("default.json");
    for sub in ["a", "b"] {
        assert_eq!(cli(&["validate", "flowstability", s(&cfg), "--out", s(&dir.path().join(sub))]), EXIT_OK);
    }
    assert_eq!(
        fs::read(dir.path().join("a/flowstability.json")).unwrap(),
        fs::read(dir.path().join("b/flowstability.json")).unwrap()
    );
}
