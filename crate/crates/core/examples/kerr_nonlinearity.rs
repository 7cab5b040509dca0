// First-peak entanglement against the Kerr strength for each photon order.
use mpjc::harness::{self, ExperimentConfig, RunOptions};

fn main() -> mpjc::Result<()> {
    let cfg = ExperimentConfig::from_json(
        r#"{"model": {"m": 1}, "spin": {"kind": "superposition", "phi": 0.7853981633974483},
            "grid": {"t0": 0, "t1": 6, "n_points": 241}, "observables": ["L"],
            "sweep": [{"param": "m", "values": [1, 2, 3]},
                      {"param": "chi", "start": 0, "stop": 2, "step": 0.5}]}"#,
    )?;
    print!("{}", harness::sweep(&cfg, &RunOptions::default())?.to_csv());
    Ok(())
}
