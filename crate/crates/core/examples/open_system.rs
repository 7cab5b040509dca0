// Lindblad evolution: first-peak L under mode dissipation and dephasing at a
// thermal bath occupation, with the adaptive cutoffs reported by the run.
use mpjc::harness::{self, ExperimentConfig, RunOptions};
use mpjc::dynamics::first_peak;

fn main() -> mpjc::Result<()> {
    for (name, bath) in [
        ("closed", "null"),
        ("dissipation", r#"{"nbar_th": 0.5, "lambda_rb": 0.05}"#),
        ("dephasing", r#"{"lambda_db": 0.05}"#),
    ] {
        let cfg = ExperimentConfig::from_json(&format!(
            r#"{{"model": {{"m": 1}}, "spin": {{"kind": "thermal", "p_e": 0.8}}, "bath": {bath},
               "grid": {{"t0": 0, "t1": 2.4, "n_points": 49}}, "observables": ["L"], "eps": 1e-6}}"#
        ))?;
        let table = harness::run(&cfg, &RunOptions::default())?;
        let p = first_peak(&table.column("t").unwrap(), &table.column("L").unwrap())?;
        println!("{name:<12} L peak {:.5} at {:.3}   leakage {:.1e}", p.value, p.time, table.leakage_max());
    }
    Ok(())
}
