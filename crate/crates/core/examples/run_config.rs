// Runs a JSON experiment config: `cargo run --example run_config -- cfg.json`.
// Without an argument a built-in thermal-mode run is used.
use mpjc::harness::{self, ExperimentConfig, RunOptions};

const DEFAULT: &str = r#"{
  "label": "thermal-input",
  "model": {"m": 1},
  "spin": {"kind": "thermal", "p_e": 0.5},
  "mode1": "thermal:0.5",
  "grid": {"t0": 0, "t1": 6.283185307179586, "n_points": 21},
  "observables": ["L", "C", "leakage"]
}"#;

fn main() -> mpjc::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::load(path.as_ref())?,
        None => ExperimentConfig::from_json(DEFAULT)?,
    };
    let table = if cfg.sweep.is_empty() {
        harness::run(&cfg, &RunOptions::default())?
    } else {
        harness::sweep(&cfg, &RunOptions::default())?
    };
    print!("{}", table.to_csv());
    Ok(())
}
