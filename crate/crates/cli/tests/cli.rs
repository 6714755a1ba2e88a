use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn scns(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scns")).args(args).output().expect("binary runs")
}

fn small_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("cfg.txt");
    let text = format!(
        "# short walled run\n\
         grid.resolution = 12,12\n\
         init.u = taylor-green:0.3\n\
         noise.jump.small = 0.3,1\n\
         run.t_end = 0.02\n\
         run.dt = 2e-3\n\
         run.snapshots = 0.01\n\
         diagnostics.ms_ratio = true\n{extra}"
    );
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn verify_ops_succeeds() {
    let out = scns(&["verify", "--suite", "ops"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 5);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn missing_config_flag_exits_2() {
    let out = scns(&["run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}

#[test]
fn unreadable_config_exits_2() {
    let out = scns(&["run", "--config", "/nonexistent/cfg.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}

#[test]
fn zero_bacteria_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "init.n = constant:0\n");
    let out = scns(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("(A1)"));
}

#[test]
fn unknown_key_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "run.bogus = 1\n");
    let out = scns(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 9"));
}

#[test]
fn run_then_report_matches_golden_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out_dir = dir.path().join("run");
    let out = scns(&["run", "--config", &cfg, "--seed", "3", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["records.ndjson", "config.txt", "snap000_n.bin", "snap000_n.meta", "final_u.bin", "final_c.meta"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let records = fs::read_to_string(out_dir.join("records.ndjson")).unwrap();
    assert_eq!(records.lines().count(), 11);

    let rep = scns(&["report", "--in", out_dir.to_str().unwrap(), "--emit", "csv"]);
    assert_eq!(rep.status.code(), Some(0), "{}", String::from_utf8_lossy(&rep.stderr));
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for family in ["conservation", "energy", "dissipation", "martingale", "aux", "boundary"] {
        let csv = fs::read_to_string(out_dir.join("report").join(format!("{family}.csv"))).unwrap();
        let want = fs::read_to_string(golden.join(format!("{family}.csv"))).unwrap();
        assert_eq!(csv.lines().next(), want.lines().next(), "{family} header");
        assert_eq!(csv.lines().count(), 12, "{family} rows");
    }

    let rep = scns(&["report", "--in", out_dir.to_str().unwrap(), "--emit", "svg"]);
    assert_eq!(rep.status.code(), Some(0));
    let svg = fs::read_to_string(out_dir.join("report/energy.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let mut bytes = Vec::new();
    for k in 0..2 {
        let o = dir.path().join(format!("r{k}"));
        assert_eq!(scns(&["run", "--config", &cfg, "--seed", "9", "--out", o.to_str().unwrap()]).status.code(), Some(0));
        bytes.push((fs::read(o.join("records.ndjson")).unwrap(), fs::read(o.join("final_n.bin")).unwrap()));
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn ensemble_writes_pooled_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let o = dir.path().join("ens");
    let out = scns(&["ensemble", "--config", &cfg, "--paths", "100", "--seed", "4", "--out", o.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(o.join("martingale.json").exists());
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(o.join("ensemble.json")).unwrap()).unwrap();
    assert_eq!(json["paths"], 100);

    let rep = scns(&["report", "--in", o.to_str().unwrap(), "--emit", "csv"]);
    assert_eq!(rep.status.code(), Some(0));
    let csv = fs::read_to_string(o.join("report/martingale_ensemble.csv")).unwrap();
    let golden = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/martingale_ensemble.csv")).unwrap();
    assert_eq!(csv.lines().next(), golden.lines().next());
}
