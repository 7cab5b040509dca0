use std::f64::consts::{FRAC_1_SQRT_2 as G, PI};

use mpjc::analytic::{coeffs_detuned, coeffs_kerr_symmetric, coeffs_resonant, logneg_sup, logneg_thermal_closed};
use mpjc::dynamics::{unitary_evolve, TimeGrid};
use mpjc::harness::{sweep_points, ExperimentConfig, SweepAxis};
use mpjc::hilbert::{partial_trace, partial_transpose, Operator, SpaceDescriptor};
use mpjc::measures::{coherence, log_negativity};
use mpjc::model::{mpjc_hamiltonian, ModelParams};
use mpjc::states::{compose_ensemble, ModePrep, SpinPrep};
use mpjc::C64;
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn density(space: SpaceDescriptor, re: &[f64], im: &[f64]) -> Operator {
    let n = space.total_dim();
    let a = Array2::from_shape_fn((n, n), |(i, j)| C64::new(re[i * n + j], im[i * n + j]));
    let r = a.dot(&a.t().mapv(|z| z.conj()));
    let tr: C64 = r.diag().sum();
    Operator::new(space, r / tr).unwrap()
}

fn evolved(m: u32, spin: SpinPrep, t: f64) -> Operator {
    let cut = m as usize + 1;
    let space = SpaceDescriptor::fock_space(cut, cut).unwrap();
    let h = mpjc_hamiltonian(&ModelParams::symmetric(m), &space).unwrap();
    let psi = compose_ensemble(&spin, &[ModePrep::VACUUM, ModePrep::VACUUM], &space, f64::INFINITY).unwrap().to_state();
    let s = unitary_evolve(&h, &psi, &TimeGrid::new(t, t, 1).unwrap()).unwrap().remove(0);
    partial_trace(&s.to_density(), &[1, 2]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coefficient_generators_are_unitary(
        phi in 0.0..PI, g1 in 0.05..1.5f64, g2 in 0.05..1.5f64, m in 1u32..4,
        delta in -4.0..4.0f64, t in 0.0..30.0f64,
    ) {
        let om = m as f64;
        for co in [
            coeffs_resonant(phi, g1, g2, m, om, t).unwrap(),
            coeffs_detuned(phi, g1, g2, m, om + delta, delta, t).unwrap(),
            coeffs_kerr_symmetric(phi, g1, g2, m, om, delta, t).unwrap(),
        ] {
            prop_assert!((co.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn numeric_logneg_matches_closed_forms(p_e in 0.0..=1.0f64, t in 0.0..8.0f64, m in 1u32..4) {
        let th = log_negativity(&evolved(m, SpinPrep::Thermal { p_e }, t)).unwrap();
        prop_assert!((th - logneg_thermal_closed(p_e, G, G, m, t).unwrap()).abs() < 1e-9);
        let spin = SpinPrep::superposition_pe(p_e);
        let SpinPrep::Superposition { phi } = spin else { unreachable!() };
        let sup = log_negativity(&evolved(m, spin, t)).unwrap();
        prop_assert!((sup - logneg_sup(&coeffs_resonant(phi, G, G, m, m as f64, t).unwrap())).abs() < 1e-9);
    }

    #[test]
    fn logneg_invariant_under_local_phases(
        re in prop::collection::vec(-1.0..1.0f64, 81), im in prop::collection::vec(-1.0..1.0f64, 81),
        th in prop::collection::vec(0.0..(2.0 * PI), 6),
    ) {
        let rho = density(SpaceDescriptor::two_mode_space(3, 3).unwrap(), &re, &im);
        let u = Array2::from_diag(&Array1::from_iter((0..9).map(|i| C64::from_polar(1.0, th[i / 3] + th[3 + i % 3]))));
        let rotated = Operator::new(rho.space().clone(), u.dot(rho.data()).dot(&u.t().mapv(|z| z.conj()))).unwrap();
        prop_assert!((log_negativity(&rho).unwrap() - log_negativity(&rotated).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn partial_transpose_keeps_the_other_marginal(
        re in prop::collection::vec(-1.0..1.0f64, 144), im in prop::collection::vec(-1.0..1.0f64, 144),
        party in 0usize..2,
    ) {
        let rho = density(SpaceDescriptor::two_mode_space(3, 4).unwrap(), &re, &im);
        let pt = partial_transpose(&rho, (3, 4), party).unwrap();
        let keep = [1 - party];
        let dev = partial_trace(&pt, &keep).unwrap().max_abs_diff(&partial_trace(&rho, &keep).unwrap()).unwrap();
        prop_assert!(dev < 1e-14);
        let back = partial_transpose(&pt, (3, 4), party).unwrap();
        prop_assert_eq!(back.max_abs_diff(&rho).unwrap(), 0.0);
    }

    #[test]
    fn thermal_spin_never_gains_coherence(p_e in 0.0..=1.0f64, t in 0.0..10.0f64, m in 1u32..4) {
        let cut = m as usize + 1;
        let space = SpaceDescriptor::fock_space(cut, cut).unwrap();
        let h = mpjc_hamiltonian(&ModelParams::symmetric(m), &space).unwrap();
        let rho = compose_ensemble(&SpinPrep::Thermal { p_e }, &[ModePrep::VACUUM; 2], &space, f64::INFINITY).unwrap().to_state();
        let s = unitary_evolve(&h, &rho, &TimeGrid::new(t, t, 1).unwrap()).unwrap().remove(0);
        let spin = partial_trace(&s.to_density(), &[0]).unwrap();
        prop_assert!(coherence(&spin).unwrap() < 1e-12);
    }

    #[test]
    fn sweep_size_is_the_product_of_axes(a in 1usize..6, b in 1usize..6) {
        let axes = [
            SweepAxis::list("p_e", (0..a).map(|k| k as f64 / a as f64).collect()),
            SweepAxis::list("chi", (0..b).map(|k| k as f64).collect()),
        ];
        let pts = sweep_points(&axes).unwrap();
        prop_assert_eq!(pts.len(), a * b);
        prop_assert_eq!(&pts[0], &vec![0.0, 0.0]);
        prop_assert_eq!(pts.last().unwrap(), &vec![(a - 1) as f64 / a as f64, (b - 1) as f64]);
    }

    #[test]
    fn config_survives_a_json_round_trip(m in 1u32..4, p_e in 0.0..=1.0f64, chi in -2.0..2.0f64, n in 2usize..50) {
        let mut c = ExperimentConfig::new(ModelParams::symmetric(m), SpinPrep::Thermal { p_e }, TimeGrid::new(0.0, 3.0, n).unwrap());
        c.model.chi1 = chi;
        c.mode1 = ModePrep::with_mean_energy("sqv", 0.5).unwrap();
        let back = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }
}
