//! Closed forms for ground-state bosons.
//!
//! With both modes in vacuum only `{|g00>, |e00>, |g m 0>, |g 0 m>}` take
//! part in the dynamics, so the state is fixed by four amplitudes
//! `x1..x4`. Everything here is evaluated in the lab frame, so the phases
//! can be compared directly with the numerical propagators.
//!
//! Bloch vectors use the Pauli matrices written in the `(g, e)` ordering:
//! `z = p_g - p_e` and `y = -2 Im rho_ge`.

use ndarray::{array, Array2};

use crate::error::Result;
use crate::model::factorial;
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Amplitudes on `{|g00>, |e00>, |g m 0>, |g 0 m>}` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub x: [C64; 4],
    pub t: f64,
    pub m: u32,
    /// `sqrt(m! (g1² + g2²)) t`.
    pub tau: f64,
    pub g_tilde: f64,
    /// `2 g1 g2 / (g1² + g2²)`.
    pub g12: f64,
    /// Half the generalised Rabi frequency, `sqrt(4 m! g̃² + Δ²)/2`.
    pub s: f64,
}

impl Coefficients {
    pub fn norm_sqr(&self) -> f64 {
        self.x.iter().map(|z| z.norm_sqr()).sum()
    }

    fn p(&self, k: usize) -> f64 {
        self.x[k].norm_sqr()
    }
}

pub fn g12(g1: f64, g2: f64) -> f64 {
    let s = g1 * g1 + g2 * g2;
    if s == 0.0 {
        0.0
    } else {
        2.0 * g1 * g2 / s
    }
}

/// `sqrt(m!) sqrt(g1² + g2²)`.
pub fn rabi_frequency(m: u32, g1: f64, g2: f64) -> Result<f64> {
    Ok((factorial(m)? as f64).sqrt() * g1.hypot(g2))
}

/// Time of the first entanglement maximum for ground-state bosons at
/// resonance, where `tau = pi/2`.
pub fn first_peak_time(m: u32, g1: f64, g2: f64) -> Result<f64> {
    Ok(std::f64::consts::FRAC_PI_2 / rabi_frequency(m, g1, g2)?)
}

pub fn coeffs_resonant(phi: f64, g1: f64, g2: f64, m: u32, omega0: f64, t: f64) -> Result<Coefficients> {
    let om = rabi_frequency(m, g1, g2)?;
    let gt = g1.hypot(g2);
    let (sp, cp) = phi.sin_cos();
    let down = C64::from_polar(1.0, -omega0 * t / 2.0);
    let (x3, x4) = if gt == 0.0 {
        (c(0.0), c(0.0))
    } else {
        let amp = -I * sp * (om * t).sin() * down;
        (amp * (g1 / gt), amp * (g2 / gt))
    };
    Ok(Coefficients {
        x: [C64::from_polar(cp, omega0 * t / 2.0), down * (sp * (om * t).cos()), x3, x4],
        t,
        m,
        tau: om * t,
        g_tilde: gt,
        g12: g12(g1, g2),
        s: om,
    })
}

/// Common detuning `Δ = ω0 - m ω` on both modes.
pub fn coeffs_detuned(phi: f64, g1: f64, g2: f64, m: u32, omega0: f64, delta: f64, t: f64) -> Result<Coefficients> {
    let mf = factorial(m)? as f64;
    let gt = g1.hypot(g2);
    let s = 0.5 * (4.0 * mf * gt * gt + delta * delta).sqrt();
    let (sp, cp) = phi.sin_cos();
    let ph = C64::from_polar(1.0, (delta - omega0) * t / 2.0);
    let (sst, cst) = (s * t).sin_cos();
    let (x2, x3, x4) = if s == 0.0 {
        (ph * sp, c(0.0), c(0.0))
    } else {
        let x2 = ph * sp * (c(cst) - I * (delta / (2.0 * s)) * sst);
        let pre = -I * ph * (mf.sqrt() * sp * sst / s);
        (x2, pre * g1, pre * g2)
    };
    Ok(Coefficients {
        x: [C64::from_polar(cp, omega0 * t / 2.0), x2, x3, x4],
        t,
        m,
        tau: mf.sqrt() * gt * t,
        g_tilde: gt,
        g12: g12(g1, g2),
        s,
    })
}

/// Symmetric Kerr `χ1 = χ2 = χ` at bare resonance `ω0 = m ω`: the Kerr
/// shift of `|g m 0>` acts as a detuning `Δ = -χ(m² - m)`.
pub fn coeffs_kerr_symmetric(phi: f64, g1: f64, g2: f64, m: u32, omega0: f64, chi: f64, t: f64) -> Result<Coefficients> {
    coeffs_detuned(phi, g1, g2, m, omega0, kerr_detuning(m, chi), t)
}

pub fn kerr_detuning(m: u32, chi: f64) -> f64 {
    let m = m as f64;
    -chi * (m * m - m)
}

/// Two-mode state after tracing the spin from the superposition-spin
/// evolution, basis `{|00>, |0m>, |m0>, |mm>}`.
pub fn reduced_boson_sup(co: &Coefficients) -> Array2<C64> {
    let [x1, x2, x3, x4] = co.x;
    let v = [x1, x4, x3, c(0.0)];
    let mut r = Array2::from_shape_fn((4, 4), |(i, j)| v[i] * v[j].conj());
    r[[0, 0]] += x2.norm_sqr();
    r
}

/// As [`reduced_boson_sup`] for the thermal spin, where the `|00>`
/// coherences vanish.
pub fn reduced_boson_th(co: &Coefficients) -> Array2<C64> {
    let mut r = reduced_boson_sup(co);
    for k in 1..4 {
        r[[0, k]] = c(0.0);
        r[[k, 0]] = c(0.0);
    }
    r
}

/// Spin state in the `(g, e)` basis.
pub fn reduced_spin_sup(co: &Coefficients) -> Array2<C64> {
    let [x1, x2, ..] = co.x;
    array![[c(co.p(0) + co.p(2) + co.p(3)), x1 * x2.conj()], [x2 * x1.conj(), c(co.p(1))]]
}

pub fn reduced_spin_th(co: &Coefficients) -> Array2<C64> {
    array![[c(co.p(0) + co.p(2) + co.p(3)), c(0.0)], [c(0.0), c(co.p(1))]]
}

/// Log-negativity for the thermal spin at resonance.
pub fn logneg_thermal_closed(p_e: f64, g1: f64, g2: f64, m: u32, t: f64) -> Result<f64> {
    let tau = rabi_frequency(m, g1, g2)? * t;
    let s2 = tau.sin().powi(2);
    let g = g12(g1, g2);
    let arg = p_e * s2 + (1.0 - 2.0 * p_e * s2 + (1.0 + g * g) * p_e * p_e * s2 * s2).sqrt();
    Ok(arg.log2().max(0.0))
}

/// Largest log-negativity reachable from a thermal spin (`g1 = g2`).
pub fn lmax_thermal(p_e: f64) -> f64 {
    (p_e + (1.0 - 2.0 * p_e + 2.0 * p_e * p_e).sqrt()).log2()
}

/// Largest log-negativity reachable from a superposition spin (`g1 = g2`).
pub fn lmax_sup(p_e: f64) -> f64 {
    (1.0 + p_e).log2()
}

/// `(λ+, λ-, |x3|², |x4|²)`: the spectrum of the partially transposed
/// thermal-spin boson state.
pub fn pt_spectrum_thermal(co: &Coefficients) -> (f64, f64, f64, f64) {
    let a = co.p(0) + co.p(1);
    let (p3, p4) = (co.p(2), co.p(3));
    let root = (a * a + 4.0 * p3 * p4).sqrt();
    (0.5 * (a + root), 0.5 * (a - root), p3, p4)
}

/// Characteristic polynomial of the partially transposed
/// superposition-spin state, highest power first.
pub fn quartic_coeffs_sup(co: &Coefficients) -> [f64; 5] {
    let (p2, p3, p4) = (co.p(1), co.p(2), co.p(3));
    [1.0, -1.0, p2 * (p3 + p4), p3 * p4 * (1.0 - 2.0 * p2), -(p3 * p3) * (p4 * p4)]
}

pub fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &k| acc * x + k)
}

/// Log-negativity of the superposition-spin boson state, from the 4x4
/// partial transpose.
pub fn logneg_sup(co: &Coefficients) -> f64 {
    // {|00>, |0m>, |m0>, |mm>} is the product basis {0, m} ⊗ {0, m}
    let pt = crate::hilbert::partial_transpose_raw(&reduced_boson_sup(co), (2, 2), 0);
    let neg: f64 = crate::linalg::eigvalsh(pt.view()).iter().filter(|&&l| l < -1e-12).sum();
    (1.0 - 2.0 * neg).log2()
}

/// Overlap with `(|m0> + |0m>)/sqrt(2)`.
pub fn noon_fidelity_closed(co: &Coefficients) -> f64 {
    let [_, _, x3, x4] = co.x;
    0.5 * (x4.norm_sqr() + (x3 * x4.conj()).re * 2.0 + x3.norm_sqr())
}

/// Spin Bloch vector for the superposition spin at resonance.
pub fn bloch_sup(phi: f64, g_tilde: f64, m: u32, omega0: f64, t: f64) -> Result<[f64; 3]> {
    let om = (factorial(m)? as f64).sqrt() * g_tilde;
    let (s2, cr) = ((2.0 * phi).sin(), (om * t).cos());
    Ok([
        s2 * cr * (omega0 * t).cos(),
        -s2 * cr * (omega0 * t).sin(),
        1.0 - 2.0 * phi.sin().powi(2) * cr * cr,
    ])
}

pub fn bloch_th(p_e: f64, g_tilde: f64, m: u32, t: f64) -> Result<[f64; 3]> {
    let om = (factorial(m)? as f64).sqrt() * g_tilde;
    Ok([0.0, 0.0, 1.0 - 2.0 * p_e * (om * t).cos().powi(2)])
}

/// Bloch vector of a 2x2 spin state under the same convention.
pub fn bloch_of(rho_s: &Array2<C64>) -> [f64; 3] {
    let ge = rho_s[[0, 1]];
    [2.0 * ge.re, -2.0 * ge.im, (rho_s[[0, 0]] - rho_s[[1, 1]]).re]
}

/// Cross-covariance block between the quadratures `(x1, p1)` and
/// `(x2, p2)` from the moments `<a1>, <a2>, <a1 a2>, <a1† a2>`.
pub fn cross_block(u: C64, w: C64, d: C64, cc: C64) -> [[f64; 2]; 2] {
    [
        [cc.re + d.re - 2.0 * u.re * w.re, cc.im + d.im - 2.0 * u.re * w.im],
        [d.im - cc.im - 2.0 * u.im * w.re, cc.re - d.re - 2.0 * u.im * w.im],
    ]
}

/// Cross-covariance block for the superposition spin. Only `m = 1`
/// gives nonzero first and mixed moments.
pub fn gaussian_cblock_sup(co: &Coefficients, m: u32) -> [[f64; 2]; 2] {
    if m != 1 {
        return [[0.0; 2]; 2];
    }
    let [x1, _, x3, x4] = co.x;
    cross_block(x1.conj() * x3, x1.conj() * x4, c(0.0), x3.conj() * x4)
}

/// Cross-covariance block for the thermal spin: the first moments vanish
/// and only `<a1† a2>` survives at `m = 1`.
pub fn gaussian_cblock_th(co: &Coefficients, m: u32) -> [[f64; 2]; 2] {
    if m != 1 {
        return [[0.0; 2]; 2];
    }
    let [_, _, x3, x4] = co.x;
    cross_block(c(0.0), c(0.0), c(0.0), x3.conj() * x4)
}

pub fn det2(b: &[[f64; 2]; 2]) -> f64 {
    b[0][0] * b[1][1] - b[0][1] * b[1][0]
}

/// Closed form printed for `det C` with the superposition spin at `m = 1`:
/// `(g1² g2² / (2 sqrt(2) g̃⁴)) sin²φ sin²2φ sin⁴(g̃ t) cos²(ω0 t + π/4)`.
///
/// This does not agree with the determinant of [`gaussian_cblock_sup`];
/// see [`detc_sup_m1_derived`].
pub fn detc_sup_m1(phi: f64, g1: f64, g2: f64, omega0: f64, t: f64) -> f64 {
    let gt2 = g1 * g1 + g2 * g2;
    let gt = gt2.sqrt();
    (g1 * g1 * g2 * g2 / (2.0 * 2f64.sqrt() * gt2 * gt2))
        * phi.sin().powi(2)
        * (2.0 * phi).sin().powi(2)
        * (gt * t).sin().powi(4)
        * (omega0 * t + std::f64::consts::FRAC_PI_4).cos().powi(2)
}

/// `det C = |x3|²|x4|² (1 - 2|x1|²) = -(g1² g2² / g̃⁴) sin⁴φ sin⁴(g̃ t) cos 2φ`
/// for the superposition spin at `m = 1`, independent of `ω0`.
pub fn detc_sup_m1_derived(phi: f64, g1: f64, g2: f64, t: f64) -> f64 {
    let gt2 = g1 * g1 + g2 * g2;
    -(g1 * g1 * g2 * g2 / (gt2 * gt2)) * phi.sin().powi(4) * (gt2.sqrt() * t).sin().powi(4) * (2.0 * phi).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    const G: f64 = FRAC_1_SQRT_2;

    #[test]
    fn initial_conditions() {
        let co = coeffs_resonant(0.3, G, G, 2, 2.0, 0.0).unwrap();
        assert_abs_diff_eq!(co.x[0].re, 0.3f64.cos());
        assert_abs_diff_eq!(co.x[1].re, 0.3f64.sin());
        assert_eq!(co.x[2].norm(), 0.0);
        let d = coeffs_detuned(0.3, G, 0.2, 2, 1.5, 0.7, 0.0).unwrap();
        assert_abs_diff_eq!(d.x[1].re, 0.3f64.sin());
        assert_eq!(noon_fidelity_closed(&co), 0.0);
    }

    #[test]
    fn noon_at_quarter_period() {
        for m in 1..=3 {
            let t = first_peak_time(m, G, G).unwrap();
            let co = coeffs_resonant(FRAC_PI_2, G, G, m, m as f64, t).unwrap();
            assert_abs_diff_eq!(co.p(2), 0.5, epsilon = 1e-14);
            assert_abs_diff_eq!(co.p(3), 0.5, epsilon = 1e-14);
            assert_abs_diff_eq!(noon_fidelity_closed(&co), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn detuned_reduces_and_is_bounded() {
        for &t in &[0.0, 0.4, 1.7, 5.3] {
            let a = coeffs_resonant(0.8, 0.3, 0.6, 2, 2.0, t).unwrap();
            let b = coeffs_detuned(0.8, 0.3, 0.6, 2, 2.0, 0.0, t).unwrap();
            for k in 0..4 {
                assert_abs_diff_eq!((a.x[k] - b.x[k]).norm(), 0.0, epsilon = 1e-12);
            }
        }
        let (m, g1, g2, delta) = (2, 0.3, 0.6, 1.4);
        let bound = 4.0 * 2.0 * (g1 * g1 + g2 * g2) / (4.0 * 2.0 * (g1 * g1 + g2 * g2) + delta * delta);
        for k in 0..200 {
            let co = coeffs_detuned(FRAC_PI_2, g1, g2, m, 1.0, delta, k as f64 * 0.05).unwrap();
            assert!(co.p(2) + co.p(3) <= bound + 1e-14);
            assert_abs_diff_eq!(co.norm_sqr(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn kerr_detuning_arithmetic() {
        assert_eq!(kerr_detuning(1, 3.0), 0.0);
        assert_eq!(kerr_detuning(2, 0.5), -1.0);
        let a = coeffs_kerr_symmetric(0.4, G, G, 1, 1.0, 2.5, 3.0).unwrap();
        let b = coeffs_resonant(0.4, G, G, 1, 1.0, 3.0).unwrap();
        assert_eq!(a.x, coeffs_detuned(0.4, G, G, 1, 1.0, 0.0, 3.0).unwrap().x);
        for k in 0..4 {
            assert_abs_diff_eq!((a.x[k] - b.x[k]).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn reduced_states() {
        let co = coeffs_resonant(0.9, G, 0.4, 1, 1.0, 0.77).unwrap();
        let sup = reduced_boson_sup(&co);
        let th = reduced_boson_th(&co);
        assert_abs_diff_eq!(sup.diag().sum().re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(th.diag().sum().re, 1.0, epsilon = 1e-14);
        assert_eq!(sup[[3, 3]].norm(), 0.0);
        assert_eq!(th[[0, 1]].norm(), 0.0);
        assert_eq!(th[[1, 2]], sup[[1, 2]]);
        let ss = reduced_spin_sup(&co);
        assert_eq!(ss[[0, 1]], co.x[0] * co.x[1].conj());
        assert_eq!(reduced_spin_th(&co)[[0, 1]].norm(), 0.0);
        assert_abs_diff_eq!(reduced_spin_th(&co).diag().sum().re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn thermal_logneg_values() {
        for k in 0..50 {
            assert_eq!(logneg_thermal_closed(0.0, G, G, 2, k as f64 * 0.1).unwrap(), 0.0);
        }
        for m in 1..=3 {
            let t = first_peak_time(m, G, G).unwrap();
            assert_abs_diff_eq!(logneg_thermal_closed(1.0, G, G, m, t).unwrap(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(
                logneg_thermal_closed(0.5, G, G, m, t).unwrap(),
                (0.5 + 0.5f64.sqrt()).log2(),
                epsilon = 1e-12
            );
        }
        assert_abs_diff_eq!((0.5 + 0.5f64.sqrt()).log2(), 0.27155, epsilon = 1e-5);
    }

    #[test]
    fn thermal_logneg_from_spectrum() {
        let (g1, g2, p_e) = (0.5, 0.8, 0.37f64);
        let phi = p_e.sqrt().asin();
        for k in 0..100 {
            let t = k as f64 * 0.037;
            let co = coeffs_resonant(phi, g1, g2, 2, 2.0, t).unwrap();
            let (lp, lm, ..) = pt_spectrum_thermal(&co);
            assert!(lm <= 0.0);
            assert_abs_diff_eq!(lp + lm + co.p(2) + co.p(3), 1.0, epsilon = 1e-14);
            let closed = logneg_thermal_closed(p_e, g1, g2, 2, t).unwrap();
            assert_abs_diff_eq!(closed, (1.0 + 2.0 * lm.abs()).log2(), epsilon = 1e-12);
        }
    }

    #[test]
    fn thermal_spectrum_matches_dense() {
        let co = coeffs_resonant(1.1, 0.4, 0.9, 1, 1.0, 0.6).unwrap();
        let pt = crate::hilbert::partial_transpose_raw(&reduced_boson_th(&co), (2, 2), 0);
        let dense = crate::linalg::eigvalsh(pt.view());
        let (lp, lm, p3, p4) = pt_spectrum_thermal(&co);
        let mut closed = vec![lp, lm, p3, p4];
        closed.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in closed.iter().zip(&dense) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn quartic_roots_are_pt_eigenvalues() {
        let co = coeffs_resonant(0.7, 0.4, 0.9, 1, 1.0, 0.6).unwrap();
        let q = quartic_coeffs_sup(&co);
        let pt = crate::hilbert::partial_transpose_raw(&reduced_boson_sup(&co), (2, 2), 0);
        let ev = crate::linalg::eigvalsh(pt.view());
        for &l in &ev {
            assert!(eval_poly(&q, l).abs() < 1e-10);
        }
        assert_eq!(ev.iter().filter(|&&l| l < 0.0).count(), 1);
        let q0 = quartic_coeffs_sup(&coeffs_resonant(0.7, 0.4, 0.9, 1, 1.0, 0.0).unwrap());
        assert_eq!(eval_poly(&q0, 1.0), 0.0);
        assert_eq!(eval_poly(&q0, 0.0), 0.0);
    }

    #[test]
    fn lmax_formulas() {
        assert_eq!(lmax_sup(1.0), 1.0);
        assert_abs_diff_eq!(lmax_thermal(1.0), 1.0, epsilon = 1e-15);
        assert_eq!(lmax_sup(0.0), 0.0);
        assert_eq!(lmax_thermal(0.0), 0.0);
        let (mut best, mut arg) = (0.0, 0.0);
        for k in 0..=100 {
            let p = k as f64 / 100.0;
            let gap = lmax_sup(p) - lmax_thermal(p);
            if gap > best {
                best = gap;
                arg = p;
            }
        }
        assert_abs_diff_eq!(arg, 0.43, epsilon = 0.01);
        assert_abs_diff_eq!(best, 0.32, epsilon = 0.01);
        // the superposition bound is reached at tau = pi/2
        let p_e: f64 = 0.35;
        let co = coeffs_resonant(p_e.sqrt().asin(), G, G, 1, 1.0, first_peak_time(1, G, G).unwrap()).unwrap();
        assert_abs_diff_eq!(logneg_sup(&co), lmax_sup(p_e), epsilon = 1e-12);
    }

    #[test]
    fn bloch_vectors() {
        let (phi, m, w0) = (0.6, 2, 2.0);
        let b0 = bloch_sup(phi, 1.0, m, w0, 0.0).unwrap();
        for (x, y) in b0.iter().zip([(2.0 * phi).sin(), 0.0, (2.0 * phi).cos()]) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-15);
        }
        for k in 0..40 {
            let t = k as f64 * 0.13;
            let co = coeffs_resonant(phi, G, G, m, w0, t).unwrap();
            let b = bloch_of(&reduced_spin_sup(&co));
            let a = bloch_sup(phi, 1.0, m, w0, t).unwrap();
            for i in 0..3 {
                assert_abs_diff_eq!(a[i], b[i], epsilon = 1e-12);
            }
            let bt = bloch_th(phi.sin().powi(2), 1.0, m, t).unwrap();
            let b = bloch_of(&reduced_spin_th(&co));
            assert_eq!(bt[0], 0.0);
            assert_eq!(bt[1], 0.0);
            assert_abs_diff_eq!(bt[2], b[2], epsilon = 1e-12);
        }
    }

    #[test]
    fn cross_blocks() {
        let co = coeffs_resonant(0.5, 0.4, 0.7, 2, 2.0, 0.9).unwrap();
        assert_eq!(gaussian_cblock_sup(&co, 2), [[0.0; 2]; 2]);
        for k in 0..30 {
            let co = coeffs_resonant(0.5, 0.4, 0.7, 1, 1.0, k as f64 * 0.2).unwrap();
            assert!(det2(&gaussian_cblock_th(&co, 1)) >= 0.0);
            let d = det2(&gaussian_cblock_sup(&co, 1));
            assert_abs_diff_eq!(d, detc_sup_m1_derived(0.5, 0.4, 0.7, co.t), epsilon = 1e-14);
        }
        // below p_e = 1/2 the determinant goes negative
        let t = first_peak_time(1, G, G).unwrap();
        assert!(detc_sup_m1_derived(0.5, G, G, t) < 0.0);
        assert!(detc_sup_m1(0.5, G, G, 1.0, t) >= 0.0);
    }

    #[test]
    fn factorial_guard() {
        assert!(coeffs_resonant(0.1, G, G, 21, 1.0, 0.0).is_err());
        assert!(coeffs_resonant(0.1, G, G, 20, 1.0, 0.0).is_ok());
    }
}
