// NOON-state fidelity |N0> + |0N> with N = m for an excited spin: the
// first peak approaches one as the spin hands its excitation to the modes.
use mpjc::harness::{self, ExperimentConfig, RunOptions};
use mpjc::dynamics::first_peak;

fn main() -> mpjc::Result<()> {
    for m in 1..=3 {
        let cfg = ExperimentConfig::from_json(&format!(
            r#"{{"model": {{"m": {m}}}, "spin": {{"kind": "thermal", "p_e": 1.0}},
               "grid": {{"t0": 0, "t1": 3.2, "n_points": 161}}, "observables": ["F_NOON", "L"]}}"#
        ))?;
        let table = harness::run(&cfg, &RunOptions::default())?;
        let t = table.column("t").unwrap();
        let f = first_peak(&t, &table.column("F_NOON").unwrap())?;
        let l = first_peak(&t, &table.column("L").unwrap())?;
        println!("m={m}  F_NOON peak {:.6} at {:.4}   L peak {:.6}", f.value, f.time, l.value);
    }
    Ok(())
}
