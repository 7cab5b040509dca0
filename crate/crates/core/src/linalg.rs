//! Thin bridge between `ndarray` storage and `faer`'s Hermitian eigensolvers.

use std::sync::Once;

use faer::{complex_native::c64, Mat, Side};
use ndarray::{Array1, Array2, ArrayView2};

use crate::C64;

static SERIAL: Once = Once::new();

// Eigensolves run single-threaded so results do not depend on the number of
// sweep workers.
fn serial() {
    SERIAL.call_once(|| faer::set_global_parallelism(faer::Parallelism::None));
}

fn to_faer(a: ArrayView2<C64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| {
        let z = a[[i, j]];
        c64::new(z.re, z.im)
    })
}

/// Eigenvalues of a Hermitian matrix, ascending. Only the lower triangle is
/// read.
pub(crate) fn eigvalsh(a: ArrayView2<C64>) -> Vec<f64> {
    serial();
    let n = a.nrows();
    let mut vals = match n {
        0 => Vec::new(),
        1 => vec![a[[0, 0]].re],
        2 => eigvalsh2(a),
        _ => to_faer(a).selfadjoint_eigenvalues(Side::Lower),
    };
    vals.sort_by(|x, y| x.total_cmp(y));
    vals
}

fn eigvalsh2(a: ArrayView2<C64>) -> Vec<f64> {
    let p = a[[0, 0]].re;
    let q = a[[1, 1]].re;
    let off = a[[1, 0]].norm();
    let mid = 0.5 * (p + q);
    let rad = (0.25 * (p - q) * (p - q) + off * off).sqrt();
    vec![mid - rad, mid + rad]
}

/// Full Hermitian eigendecomposition `A = V diag(E) V^dag`, eigenvalues
/// ascending, eigenvectors in columns.
pub(crate) fn eigh(a: ArrayView2<C64>) -> (Array1<f64>, Array2<C64>) {
    serial();
    let n = a.nrows();
    if n == 1 {
        return (
            Array1::from_elem(1, a[[0, 0]].re),
            Array2::from_elem((1, 1), C64::new(1.0, 0.0)),
        );
    }
    let dec = to_faer(a).selfadjoint_eigendecomposition(Side::Lower);
    let s = dec.s().column_vector();
    let u = dec.u();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s.read(i).re.total_cmp(&s.read(j).re));
    let vals = Array1::from_iter(order.iter().map(|&k| s.read(k).re));
    let mut vecs = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            let z = u.read(row, k);
            vecs[[row, col]] = C64::new(z.re, z.im);
        }
    }
    (vals, vecs)
}

/// Determinant of a small real square matrix by partial-pivot elimination.
pub(crate) fn det_real<const N: usize>(m: [[f64; N]; N]) -> f64 {
    let mut a = m;
    let mut det = 1.0;
    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigh_reconstructs() {
        let a = array![
            [C64::new(2.0, 0.0), C64::new(0.5, -1.0), C64::new(0.0, 0.3)],
            [C64::new(0.5, 1.0), C64::new(-1.0, 0.0), C64::new(0.2, 0.0)],
            [C64::new(0.0, -0.3), C64::new(0.2, 0.0), C64::new(0.7, 0.0)],
        ];
        let (e, v) = eigh(a.view());
        let d = Array2::from_diag(&e.mapv(|x| C64::new(x, 0.0)));
        let back = v.dot(&d).dot(&v.t().mapv(|z| z.conj()));
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
        let vals = eigvalsh(a.view());
        for (x, y) in vals.iter().zip(e.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = array![
            [C64::new(0.25, 0.0), C64::new(0.1, 0.2)],
            [C64::new(0.1, -0.2), C64::new(0.75, 0.0)]
        ];
        let vals = eigvalsh(a.view());
        let f = to_faer(a.view()).selfadjoint_eigenvalues(Side::Lower);
        let mut f = f;
        f.sort_by(|x, y| x.total_cmp(y));
        assert!((vals[0] - f[0]).abs() < 1e-14 && (vals[1] - f[1]).abs() < 1e-14);
    }

    #[test]
    fn determinant_small() {
        assert!((det_real([[1.0, 2.0], [3.0, 4.0]]) + 2.0).abs() < 1e-14);
        let m = [
            [2.0, 0.0, 1.0, 0.0],
            [0.0, 3.0, 0.0, 1.0],
            [1.0, 0.0, 2.0, 0.0],
            [0.0, 1.0, 0.0, 3.0],
        ];
        // block structure: det = (4-1)*(9-1)
        assert!((det_real(m) - 24.0).abs() < 1e-12);
    }
}
