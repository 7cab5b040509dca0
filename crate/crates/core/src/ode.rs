//! Dormand-Prince 5(4) integrator for complex vector ODEs.
//!
//! The integrator lands exactly on every requested output time (steps are
//! shortened to hit them) and hands each output state to an observer, so
//! callers never need to keep the whole trajectory in memory.

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest step before the integrator gives up.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-11, h_min: 1e-14, max_steps: 10_000_000 }
    }
}

impl Tolerances {
    pub fn tight() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

// Butcher tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b*, the embedded error weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `t_out[0]` with `y(t_out[0]) = y0`,
/// calling `observe(k, t_out[k], y)` at every output time (including the
/// first). `t_out` must be non-decreasing.
pub fn integrate<F, O>(mut f: F, y0: &[C64], t_out: &[f64], tol: &Tolerances, mut observe: O) -> Result<Stats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    let n = y0.len();
    let mut stats = Stats::default();
    let Some(&t_start) = t_out.first() else {
        return Ok(stats);
    };
    if t_out.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("output times must be non-decreasing"));
    }
    let mut y = y0.to_vec();
    observe(0, t_start, &y)?;
    if t_out.len() == 1 {
        return Ok(stats);
    }

    let zero = C64::new(0.0, 0.0);
    let mut k = vec![vec![zero; n]; 7];
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut t = t_start;
    f(t, &y, &mut k[0]);
    stats.evaluations += 1;

    let span = t_out[t_out.len() - 1] - t_start;
    let mut h = initial_step(&y, &k[0], tol, span);

    for (idx, &target) in t_out.iter().enumerate().skip(1) {
        while t < target {
            if stats.accepted + stats.rejected >= tol.max_steps {
                return Err(Error::Solver(format!("step limit {} reached at t = {t}", tol.max_steps)));
            }
            let remaining = target - t;
            let last = h >= remaining;
            let h_step = if last { remaining } else { h };

            macro_rules! stage {
                ($($ki:expr => $a:expr),+) => {{
                    for i in 0..n {
                        tmp[i] = y[i] $(+ k[$ki][i] * (h_step * $a))+;
                    }
                }};
            }
            stage!(0 => A21);
            f(t + C2 * h_step, &tmp, &mut k[1]);
            stage!(0 => A31, 1 => A32);
            f(t + C3 * h_step, &tmp, &mut k[2]);
            stage!(0 => A41, 1 => A42, 2 => A43);
            f(t + C4 * h_step, &tmp, &mut k[3]);
            stage!(0 => A51, 1 => A52, 2 => A53, 3 => A54);
            f(t + C5 * h_step, &tmp, &mut k[4]);
            stage!(0 => A61, 1 => A62, 2 => A63, 3 => A64, 4 => A65);
            f(t + h_step, &tmp, &mut k[5]);
            for i in 0..n {
                y_new[i] = y[i]
                    + (k[0][i] * B1 + k[2][i] * B3 + k[3][i] * B4 + k[4][i] * B5 + k[5][i] * B6) * h_step;
            }
            f(t + h_step, &y_new, &mut k[6]);
            stats.evaluations += 6;

            let mut err = 0.0;
            for i in 0..n {
                let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7)
                    * h_step;
                let sc = tol.atol + tol.rtol * y[i].norm().max(y_new[i].norm());
                err += (e.norm() / sc).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();

            if err <= 1.0 {
                stats.accepted += 1;
                t = if last { target } else { t + h_step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // keep the unclipped step when the last one was cut short
                h = if last { h.max(h_step * grow) } else { h_step * grow };
            } else {
                stats.rejected += 1;
                h = h_step * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                if h < tol.h_min {
                    return Err(Error::Solver(format!("step size underflow at t = {t} (h = {h:.3e})")));
                }
            }
        }
        observe(idx, target, &y)?;
    }
    Ok(stats)
}

fn initial_step(y: &[C64], dy: &[C64], tol: &Tolerances, span: f64) -> f64 {
    let n = y.len().max(1) as f64;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (a, b) in y.iter().zip(dy) {
        let sc = tol.atol + tol.rtol * a.norm();
        d0 += (a.norm() / sc).powi(2);
        d1 += (b.norm() / sc).powi(2);
    }
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span.abs().max(1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn harmonic_rotation() {
        // y' = -i w y
        let w = 2.3;
        let times: Vec<f64> = (0..=50).map(|k| k as f64 * 0.2).collect();
        let mut out = Vec::new();
        let stats = integrate(
            |_, y, dy| dy[0] = C64::new(0.0, -w) * y[0],
            &[C64::new(1.0, 0.0)],
            &times,
            &Tolerances::tight(),
            |_, t, y| {
                out.push((t, y[0]));
                Ok(())
            },
        )
        .unwrap();
        assert!(stats.accepted > 0);
        assert_eq!(out.len(), times.len());
        for (t, y) in out {
            assert_abs_diff_eq!((y - C64::from_polar(1.0, -w * t)).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn decaying_pair() {
        // two uncoupled rates
        let times = [0.0, 0.5, 1.0, 3.0];
        let mut last = vec![];
        integrate(
            |_, y, dy| {
                dy[0] = -y[0];
                dy[1] = y[1] * -0.1;
            },
            &[C64::new(1.0, 0.0), C64::new(0.0, 2.0)],
            &times,
            &Tolerances::default(),
            |_, _, y| {
                last = y.to_vec();
                Ok(())
            },
        )
        .unwrap();
        assert_abs_diff_eq!(last[0].re, (-3.0f64).exp(), epsilon = 1e-8);
        assert_abs_diff_eq!(last[1].im, 2.0 * (-0.3f64).exp(), epsilon = 1e-8);
    }

    #[test]
    fn single_time_and_order_check() {
        let mut seen = 0;
        integrate(|_, _, dy| dy[0] = C64::new(0.0, 0.0), &[C64::new(1.0, 0.0)], &[0.0], &Tolerances::default(), |_, _, _| {
            seen += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, 1);
        let r = integrate(|_, _, _| {}, &[C64::new(1.0, 0.0)], &[1.0, 0.0], &Tolerances::default(), |_, _, _| Ok(()));
        assert!(r.is_err());
    }
}
