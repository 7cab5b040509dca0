// Exact log-negativity beside the Gaussian estimate built from the
// covariance matrix; a two-mode squeezed state is the sanity anchor.
use mpjc::harness::{self, ExperimentConfig, RunOptions};
use mpjc::measures::{gaussian_log_negativity, CovarianceData};

fn main() -> mpjc::Result<()> {
    let r = 0.5;
    let tms = gaussian_log_negativity(&CovarianceData::two_mode_squeezed(r))?;
    println!("two-mode squeezed r={r}: L_Gauss {tms:.6}, expected {:.6}\n", 2.0 * r / std::f64::consts::LN_2);

    let cfg = ExperimentConfig::from_json(
        r#"{"model": {"m": 1}, "spin": {"kind": "superposition", "phi": 0.4636476090008061},
            "grid": {"t0": 0, "t1": 3.14159, "n_points": 9}, "observables": ["L", "L_Gauss", "detC"]}"#,
    )?;
    print!("{}", harness::run(&cfg, &RunOptions::default())?.to_csv());
    Ok(())
}
