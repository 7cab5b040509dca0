// Cutoffs chosen from the truncation leakage, then the first entanglement
// peak for several mode-1 preparations at the same mean energy. The
// squeezed vacuum outgrows the automatic cutoff cap at the default 1e-8.
use mpjc::dynamics::first_peak;
use mpjc::harness::{self, ExperimentConfig, RunOptions};
use mpjc::states::{auto_cutoff, ModePrep, MAX_AUTO_CUTOFF};

fn main() -> mpjc::Result<()> {
    for kind in ["fock", "coherent", "thermal", "sqv", "prcs"] {
        let prep = ModePrep::with_mean_energy(kind, 1.0)?;
        let n = auto_cutoff(&prep, 1e-6, MAX_AUTO_CUTOFF)?;
        let cfg = ExperimentConfig::from_json(&format!(
            r#"{{"model": {{"m": 1}}, "spin": {{"kind": "thermal", "p_e": 1.0}}, "mode1": "{kind}:nbar=1",
               "grid": {{"t0": 0, "t1": 4, "n_points": 161}}, "observables": ["L"], "eps": 1e-6}}"#
        ))?;
        let table = harness::run(&cfg, &RunOptions::default())?;
        let p = first_peak(&table.column("t").unwrap(), &table.column("L").unwrap())?;
        println!("{kind:<9} cutoff {n:>3}  L peak {:.5} at {:.3}", p.value, p.time);
    }
    Ok(())
}
