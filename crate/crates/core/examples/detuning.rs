// Detuned dynamics: closed-form amplitudes against the four-amplitude ODE,
// then the first-peak L as the spin is tuned away from m*omega.
use mpjc::analytic::coeffs_detuned;
use mpjc::dynamics::{coefficient_ode_evolve, TimeGrid};
use mpjc::harness::{self, ExperimentConfig, RunOptions};
use mpjc::model::ModelParams;

fn main() -> mpjc::Result<()> {
    let (m, delta, phi) = (2, 0.8, 0.6);
    let p = ModelParams::symmetric(m).with_detuning(delta);
    let grid = TimeGrid::new(0.0, 5.0, 6)?;
    for (t, co) in grid.points().into_iter().zip(coefficient_ode_evolve(&p, phi, &grid)?) {
        let exact = coeffs_detuned(phi, p.g1, p.g2, m, p.omega0(), delta, t)?;
        let dev = co.x.iter().zip(&exact.x).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        println!("t={t:.1}  |x_ode - x_closed| = {dev:.2e}");
    }

    let cfg = ExperimentConfig::from_json(
        r#"{"model": {"m": 1}, "spin": {"kind": "thermal", "p_e": 1.0},
            "grid": {"t0": 0, "t1": 6, "n_points": 241}, "observables": ["L"],
            "sweep": [{"param": "delta", "values": [0, 0.5, 1, 2, 4]}]}"#,
    )?;
    print!("\n{}", harness::sweep(&cfg, &RunOptions::default())?.to_csv());
    Ok(())
}
