use std::path::Path;
use std::process::{Command, Output};

fn mpjc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpjc")).args(args).current_dir(dir).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const BASE: &str = r#"{"model": {"m": 1}, "spin": {"kind": "thermal", "p_e": 0.5},
  "grid": {"t0": 0, "t1": 3.14159, "n_points": 21}, "observables": ["L", "C", "leakage"]}"#;

#[test]
fn evolve_writes_csv_with_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", BASE);
    let out = mpjc(&["evolve", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("# leakage_max: ")));
    assert!(csv.lines().any(|l| l == "t,L,C,leakage"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 22);

    let again = mpjc(&["evolve", "--config", &cfg, "--out", "res"], dir.path());
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(dir.path().join("res/trajectory.csv")).unwrap(), csv);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", &BASE.replace("\"m\": 1", "\"m\": 1, \"mu\": 2"));
    assert_eq!(mpjc(&["evolve", "--config", &bad], dir.path()).status.code(), Some(2));
    assert_eq!(mpjc(&["evolve"], dir.path()).status.code(), Some(2));

    let closed = write(dir.path(), "closed.json", BASE);
    assert_eq!(mpjc(&["lindblad", "--config", &closed], dir.path()).status.code(), Some(2));

    let leaky = BASE.replace("\"grid\"", "\"mode1\": \"coherent:2\", \"cutoffs\": [4, 4], \"grid\"");
    let leaky = write(dir.path(), "leaky.json", &leaky);
    assert_eq!(mpjc(&["evolve", "--config", &leaky], dir.path()).status.code(), Some(3));
    assert_eq!(mpjc(&["evolve", "--config", &leaky, "--allow-leakage"], dir.path()).status.code(), Some(0));
}

#[test]
fn lindblad_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let open = BASE.replace("\"grid\"", "\"bath\": {\"lambda_rb\": 0.05, \"lambda_rq\": 0.05}, \"grid\"");
    let open = write(dir.path(), "open.json", &open);
    let out = mpjc(&["lindblad", "--config", &open, "--points", "11"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("dopri5"));

    let sweep = BASE.replace("\"grid\"", "\"sweep\": [{\"param\": \"p_e\", \"start\": 0, \"stop\": 1, \"step\": 0.5}], \"grid\"");
    let sweep = write(dir.path(), "sweep.json", &sweep);
    let out = mpjc(&["sweep", "--config", &sweep], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("p_e,L_peak,L_peak_t")));
    let serial = mpjc(&["sweep", "--config", &sweep, "--threads", "1"], dir.path());
    assert_eq!(String::from_utf8(serial.stdout).unwrap(), csv);
}

#[test]
fn cutoff_figure_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpjc(&["cutoff", "--state", "coherent:1", "--eps", "1e-12"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("cutoff: "));

    let out = mpjc(&["figure", "x", "--list"], dir.path());
    assert!(String::from_utf8_lossy(&out.stdout).lines().any(|l| l == "2c"));
    assert_eq!(mpjc(&["figure", "99"], dir.path()).status.code(), Some(2));
    let out = mpjc(&["figure", "2a", "--points", "21", "--out", "figs"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("figs/fig2a.csv")).unwrap();
    assert!(csv.contains("# figure: 2a"));

    let out = mpjc(&["validate", "1", "--json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(mpjc(&["validate", "3"], dir.path()).status.code(), Some(5));
}
