// Spin coherence under a dispersive coupling gz, next to the plain model.
use mpjc::harness::{self, ExperimentConfig, RunOptions};

fn main() -> mpjc::Result<()> {
    for gz in [0.0, 0.5, 2.0] {
        let cfg = ExperimentConfig::from_json(&format!(
            r#"{{"model": {{"m": 2, "gz1": {gz}, "gz2": {gz}}}, "spin": {{"kind": "superposition", "phi": 0.5}},
               "grid": {{"t0": 0, "t1": 6, "n_points": 7}}, "observables": ["C", "L"]}}"#
        ))?;
        let table = harness::run(&cfg, &RunOptions::default())?;
        let c: Vec<String> = table.column("C").unwrap().iter().map(|x| format!("{x:.4}")).collect();
        println!("gz={gz:<4} C(t) = {}", c.join(" "));
    }
    Ok(())
}
