// Exact propagation against the closed-form amplitudes for ground-state
// bosons, m = 2, over one Rabi period.
use std::f64::consts::FRAC_1_SQRT_2 as G;

use mpjc::analytic::{coeffs_resonant, logneg_sup, logneg_thermal_closed, rabi_frequency};
use mpjc::dynamics::{unitary_evolve, TimeGrid};
use mpjc::hilbert::partial_trace;
use mpjc::measures::log_negativity;
use mpjc::model::{mpjc_hamiltonian, ModelParams};
use mpjc::states::{compose_ensemble, ModePrep, SpinPrep};
use mpjc::SpaceDescriptor;

fn main() -> mpjc::Result<()> {
    let m = 2;
    let space = SpaceDescriptor::fock_space(3, 3)?;
    let h = mpjc_hamiltonian(&ModelParams::symmetric(m), &space)?;
    let period = 2.0 * std::f64::consts::PI / rabi_frequency(m, G, G)?;
    let grid = TimeGrid::new(0.0, period, 9)?;

    let p_e = 0.3;
    let sup = SpinPrep::superposition_pe(p_e);
    let SpinPrep::Superposition { phi } = sup else { unreachable!() };
    let run = |spin: &SpinPrep| -> mpjc::Result<Vec<f64>> {
        let rho0 = compose_ensemble(spin, &[ModePrep::VACUUM; 2], &space, f64::INFINITY)?.to_state();
        unitary_evolve(&h, &rho0, &grid)?
            .iter()
            .map(|s| log_negativity(&partial_trace(&s.to_density(), &[1, 2])?))
            .collect()
    };
    let l_sup = run(&sup)?;
    let l_th = run(&SpinPrep::Thermal { p_e })?;

    println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "t", "L_sup", "closed", "L_th", "closed");
    for (k, t) in grid.points().into_iter().enumerate() {
        let exact = logneg_sup(&coeffs_resonant(phi, G, G, m, m as f64, t)?);
        let th = logneg_thermal_closed(p_e, G, G, m, t)?;
        println!("{t:8.4} {:10.6} {exact:10.6} {:10.6} {th:10.6}", l_sup[k], l_th[k]);
    }
    Ok(())
}
