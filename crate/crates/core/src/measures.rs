//! Entanglement, coherence and Gaussian diagnostics on numerical states.
//!
//! Logarithms are base 2 throughout. Quadratures are `X = (a + a†)/sqrt(2)`
//! and `P = -i(a - a†)/sqrt(2)`, so the vacuum variance is 1/2.

use ndarray::{Array1, Array2};

use crate::analytic::cross_block;
use crate::error::{Error, Result};
use crate::hilbert::{group_by_root, partial_transpose_raw, Operator, SpaceDescriptor, GROUND};
use crate::linalg::{det_real, eigvalsh};
use crate::states::QuantumState;
use crate::C64;

/// Partial-transpose eigenvalues in `(-PT_CLIP, 0)` count as zero.
pub const PT_CLIP: f64 = 1e-12;

/// Tolerance on density-matrix Hermiticity.
pub const DENSITY_TOL: f64 = 1e-10;

/// Gaussian log-negativities below this are reported as exactly zero.
pub const GAUSSIAN_CLIP: f64 = 1e-12;

fn check_density(rho: &Array2<C64>) -> Result<()> {
    let n = rho.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((rho[[i, j]] - rho[[j, i]].conj()).norm());
        }
    }
    if worst > DENSITY_TOL {
        return Err(Error::NotHermitian { deviation: worst });
    }
    Ok(())
}

fn two_party_dims(rho: &Operator) -> Result<(usize, usize)> {
    match rho.space().dims() {
        [a, b] => Ok((*a, *b)),
        d => Err(Error::invalid(format!("expected a two-party space, got dims {d:?}"))),
    }
}

/// `log2(1 + 2 |sum of negative PT eigenvalues|)`.
pub fn log_negativity(rho: &Operator) -> Result<f64> {
    let dims = two_party_dims(rho)?;
    check_density(rho.data())?;
    Ok(log_negativity_raw(rho.data(), dims))
}

/// As [`log_negativity`], without the Hermiticity check.
pub(crate) fn log_negativity_raw(rho: &Array2<C64>, dims: (usize, usize)) -> f64 {
    BlockState::dense(rho.clone(), dims).log_negativity()
}

/// Two-mode state kept as dense diagonal blocks over disjoint sets of
/// basis indices `n1 * d2 + n2`. Everything outside the blocks is zero.
#[derive(Debug, Clone)]
pub(crate) struct BlockState {
    dims: (usize, usize),
    blocks: Vec<(Vec<usize>, Array2<C64>)>,
    /// `(block, position)` of every basis index, `usize::MAX` if absent.
    place: Vec<(usize, usize)>,
}

impl BlockState {
    pub(crate) fn new(dims: (usize, usize), blocks: Vec<(Vec<usize>, Array2<C64>)>) -> Self {
        let mut place = vec![(usize::MAX, 0); dims.0 * dims.1];
        for (b, (idx, _)) in blocks.iter().enumerate() {
            for (k, &i) in idx.iter().enumerate() {
                place[i] = (b, k);
            }
        }
        Self { dims, blocks, place }
    }

    pub(crate) fn dense(rho: Array2<C64>, dims: (usize, usize)) -> Self {
        Self::new(dims, vec![((0..rho.nrows()).collect(), rho)])
    }

    pub(crate) fn get(&self, i: usize, j: usize) -> C64 {
        let ((bi, ki), (bj, kj)) = (self.place[i], self.place[j]);
        if bi == usize::MAX || bi != bj {
            return C64::new(0.0, 0.0);
        }
        self.blocks[bi].1[[ki, kj]]
    }

    #[cfg(test)]
    pub(crate) fn to_dense(&self) -> Array2<C64> {
        let n = self.dims.0 * self.dims.1;
        let mut out = Array2::zeros((n, n));
        for (idx, m) in &self.blocks {
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    out[[i, j]] = m[[a, b]];
                }
            }
        }
        out
    }

    pub(crate) fn mean_photon_numbers(&self) -> [f64; 2] {
        let d2 = self.dims.1;
        let mut out = [0.0; 2];
        for (idx, m) in &self.blocks {
            for (k, &i) in idx.iter().enumerate() {
                let p = m[[k, k]].re;
                out[0] += (i / d2) as f64 * p;
                out[1] += (i % d2) as f64 * p;
            }
        }
        out
    }

    /// Log-negativity with the partial transpose split into the connected
    /// components of its exact nonzero pattern.
    pub(crate) fn log_negativity(&self) -> f64 {
        let (d1, d2) = self.dims;
        let n = d1 * d2;
        let zero = C64::new(0.0, 0.0);
        // rho[(a2,b),(a,b2)] lands on pt[(a,b),(a2,b2)]
        let mut entries = Vec::new();
        for (idx, m) in &self.blocks {
            for (x, &r) in idx.iter().enumerate() {
                for (y, &c) in idx.iter().enumerate() {
                    let v = m[[x, y]];
                    if v != zero {
                        entries.push(((c / d2) * d2 + r % d2, (r / d2) * d2 + c % d2, v));
                    }
                }
            }
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(i, j, _) in &entries {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut touched = vec![false; n];
        for &(i, _, _) in &entries {
            touched[i] = true;
        }
        let groups = group_by_root(n, |i| find(&mut parent, i));
        let mut comp = vec![(0usize, 0usize); n];
        let mut mats: Vec<Array2<C64>> = Vec::new();
        for g in groups.iter().filter(|g| g.iter().any(|&i| touched[i])) {
            for (k, &i) in g.iter().enumerate() {
                comp[i] = (mats.len(), k);
            }
            mats.push(Array2::zeros((g.len(), g.len())));
        }
        for &(i, j, v) in &entries {
            let ((b, x), (_, y)) = (comp[i], comp[j]);
            mats[b][[x, y]] = v;
        }
        let neg: f64 = mats
            .iter()
            .map(|m| {
                if m.nrows() == 1 {
                    let l = m[[0, 0]].re;
                    return if l < -PT_CLIP { l } else { 0.0 };
                }
                eigvalsh(m.view()).into_iter().filter(|&l| l < -PT_CLIP).sum::<f64>()
            })
            .sum();
        (1.0 - 2.0 * neg).log2()
    }

    pub(crate) fn noon_fidelity(&self, n: usize) -> Result<f64> {
        noon_fidelity_with(|i, j| self.get(i, j), self.dims, n)
    }

    pub(crate) fn covariance(&self) -> CovarianceData {
        covariance_with(|i, j| self.get(i, j), self.dims)
    }
}

/// `log2 ||rho^{T_A}||_1` from the full spectrum, with no clipping.
pub fn log_negativity_trace_norm(rho: &Operator) -> Result<f64> {
    let dims = two_party_dims(rho)?;
    check_density(rho.data())?;
    let pt = partial_transpose_raw(rho.data(), dims, 0);
    Ok(eigvalsh(pt.view()).iter().map(|l| l.abs()).sum::<f64>().log2())
}

fn entropy_of(p: impl IntoIterator<Item = f64>) -> f64 {
    p.into_iter().filter(|&x| x > 0.0).map(|x| -x * x.log2()).sum()
}

/// `-Tr(rho log2 rho)`; eigenvalues at or below zero contribute nothing.
pub fn von_neumann_entropy(rho: &Operator) -> Result<f64> {
    check_density(rho.data())?;
    Ok(entropy_raw(rho.data()))
}

pub(crate) fn entropy_raw(rho: &Array2<C64>) -> f64 {
    entropy_of(eigvalsh(rho.view())).max(0.0)
}

/// Relative entropy of coherence `S(diag rho) - S(rho)` in the computational
/// basis.
pub fn coherence(rho: &Operator) -> Result<f64> {
    check_density(rho.data())?;
    Ok(coherence_raw(rho.data()))
}

pub(crate) fn coherence_raw(rho: &Array2<C64>) -> f64 {
    if rho.indexed_iter().all(|((i, j), z)| i == j || *z == C64::new(0.0, 0.0)) {
        return 0.0;
    }
    (entropy_of(rho.diag().iter().map(|z| z.re)) - entropy_raw(rho)).max(0.0)
}

/// `<ψ_f| rho |ψ_f>` with `|ψ_f> = (|N0> + |0N>)/sqrt(2)`.
pub fn noon_fidelity(rho_b: &Operator, n: usize) -> Result<f64> {
    let dims = two_party_dims(rho_b)?;
    noon_fidelity_raw(rho_b.data(), dims, n)
}

pub(crate) fn noon_fidelity_raw(rho: &Array2<C64>, dims: (usize, usize), n: usize) -> Result<f64> {
    noon_fidelity_with(|i, j| rho[[i, j]], dims, n)
}

fn noon_fidelity_with(rho: impl Fn(usize, usize) -> C64, (d1, d2): (usize, usize), n: usize) -> Result<f64> {
    if n >= d1 || n >= d2 {
        return Err(Error::invalid(format!("NOON order {n} needs cutoffs above {n}, got ({d1}, {d2})")));
    }
    if n == 0 {
        return Ok(2.0 * rho(0, 0).re);
    }
    let a = n * d2; // |N0>
    let b = n; // |0N>
    Ok(0.5 * (rho(a, a).re + rho(b, b).re + 2.0 * rho(a, b).re))
}

/// Projects the spin onto `|g>`: returns the unnormalised bosonic state
/// and the success probability.
pub fn spin_ground_projection(state: &QuantumState) -> Result<(QuantumState, f64)> {
    spin_projection(state, GROUND)
}

/// Projects the spin onto `level` (0 for `g`, 1 for `e`).
pub fn spin_projection(state: &QuantumState, level: usize) -> Result<(QuantumState, f64)> {
    let space = state.space();
    if space.dims()[0] != 2 || space.n_subsystems() < 2 || level > 1 {
        return Err(Error::invalid("spin projection needs a spin in slot 0 and level 0 or 1"));
    }
    let rest = space.subspace(&(1..space.n_subsystems()).collect::<Vec<_>>())?;
    let nb = rest.total_dim();
    let off = level * nb;
    Ok(match state {
        QuantumState::Ket { amps, .. } => {
            let v = amps.slice(ndarray::s![off..off + nb]).to_owned();
            let p = v.iter().map(|z| z.norm_sqr()).sum();
            (QuantumState::ket(rest, v)?, p)
        }
        QuantumState::Density(op) => {
            let d = op.data().slice(ndarray::s![off..off + nb, off..off + nb]).to_owned();
            let p = d.diag().iter().map(|z| z.re).sum();
            (QuantumState::Density(Operator::new(rest, d)?), p)
        }
    })
}

/// Mean vector and covariance matrix of `(x_a, p_a, x_b, p_b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceData {
    pub mean: [f64; 4],
    pub v: [[f64; 4]; 4],
}

impl CovarianceData {
    fn block(&self, r: usize, c: usize) -> [[f64; 2]; 2] {
        [[self.v[r][c], self.v[r][c + 1]], [self.v[r + 1][c], self.v[r + 1][c + 1]]]
    }

    pub fn a(&self) -> [[f64; 2]; 2] {
        self.block(0, 0)
    }

    pub fn b(&self) -> [[f64; 2]; 2] {
        self.block(2, 2)
    }

    pub fn c(&self) -> [[f64; 2]; 2] {
        self.block(0, 2)
    }

    /// Two-mode squeezed vacuum with squeezing `r`.
    pub fn two_mode_squeezed(r: f64) -> Self {
        let (ch, sh) = ((2.0 * r).cosh() / 2.0, (2.0 * r).sinh() / 2.0);
        Self {
            mean: [0.0; 4],
            v: [[ch, 0.0, sh, 0.0], [0.0, ch, 0.0, -sh], [sh, 0.0, ch, 0.0], [0.0, -sh, 0.0, ch]],
        }
    }

    /// Smallest eigenvalue of `V + (i/2) Ω`; negative means unphysical.
    pub fn uncertainty_margin(&self) -> f64 {
        let omega = [[0.0, 1.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0, 0.0, -1.0, 0.0]];
        let m = Array2::from_shape_fn((4, 4), |(i, j)| C64::new(self.v[i][j], 0.5 * omega[i][j]));
        eigvalsh(m.view())[0]
    }
}

fn det2(b: [[f64; 2]; 2]) -> f64 {
    b[0][0] * b[1][1] - b[0][1] * b[1][0]
}

/// Normal-ordered moments of a two-mode state: `<a1>, <a2>, <a1²>,
/// <a2²>, <a1†a1>, <a2†a2>, <a1 a2>, <a1† a2>`.
fn moments_with(rho: impl Fn(usize, usize) -> C64, (d1, d2): (usize, usize)) -> [C64; 8] {
    let idx = |n1: usize, n2: usize| n1 * d2 + n2;
    let mut m = [C64::new(0.0, 0.0); 8];
    for n1 in 0..d1 {
        for n2 in 0..d2 {
            let i = idx(n1, n2);
            let (f1, f2) = (n1 as f64, n2 as f64);
            m[4] += rho(i, i) * f1;
            m[5] += rho(i, i) * f2;
            if n1 >= 1 {
                m[0] += rho(i, idx(n1 - 1, n2)) * f1.sqrt();
            }
            if n2 >= 1 {
                m[1] += rho(i, idx(n1, n2 - 1)) * f2.sqrt();
            }
            if n1 >= 2 {
                m[2] += rho(i, idx(n1 - 2, n2)) * (f1 * (f1 - 1.0)).sqrt();
            }
            if n2 >= 2 {
                m[3] += rho(i, idx(n1, n2 - 2)) * (f2 * (f2 - 1.0)).sqrt();
            }
            if n1 >= 1 && n2 >= 1 {
                m[6] += rho(i, idx(n1 - 1, n2 - 1)) * (f1 * f2).sqrt();
            }
            if n2 >= 1 && n1 + 1 < d1 {
                m[7] += rho(i, idx(n1 + 1, n2 - 1)) * ((f1 + 1.0) * f2).sqrt();
            }
        }
    }
    m
}

fn local_block(a: C64, a2: C64, n: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let (x, p) = (2f64.sqrt() * a.re, 2f64.sqrt() * a.im);
    let vxx = a2.re + n + 0.5 - x * x;
    let vpp = -a2.re + n + 0.5 - p * p;
    let vxp = a2.im - x * p;
    ([x, p], [[vxx, vxp], [vxp, vpp]])
}

/// Mean and covariance of a two-mode state. Fails when either mode has
/// population `>= eps` in its top Fock level, where truncated moments are
/// unreliable.
pub fn covariance(rho: &Operator, eps: f64) -> Result<CovarianceData> {
    let dims = two_party_dims(rho)?;
    check_density(rho.data())?;
    let top = top_level_population(rho.data(), dims);
    if top >= eps {
        return Err(Error::CutoffTooSmall { leakage: top, eps });
    }
    Ok(covariance_raw(rho.data(), dims))
}

pub(crate) fn top_level_population(rho: &Array2<C64>, (d1, d2): (usize, usize)) -> f64 {
    (0..d1 * d2)
        .filter(|i| i / d2 == d1 - 1 || i % d2 == d2 - 1)
        .map(|i| rho[[i, i]].re)
        .sum()
}

pub(crate) fn covariance_raw(rho: &Array2<C64>, dims: (usize, usize)) -> CovarianceData {
    covariance_with(|i, j| rho[[i, j]], dims)
}

fn covariance_with(rho: impl Fn(usize, usize) -> C64, dims: (usize, usize)) -> CovarianceData {
    let [u, w, a2, b2, na, nb, d, cc] = moments_with(rho, dims);
    let (ma, va) = local_block(u, a2, na.re);
    let (mb, vb) = local_block(w, b2, nb.re);
    let c = cross_block(u, w, d, cc);
    let mut v = [[0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            v[i][j] = va[i][j];
            v[i + 2][j + 2] = vb[i][j];
            v[i][j + 2] = c[i][j];
            v[j + 2][i] = c[i][j];
        }
    }
    CovarianceData { mean: [ma[0], ma[1], mb[0], mb[1]], v }
}

/// Log-negativity of the Gaussian state with covariance `V`:
/// `max{0, -log2(2 f)/2}` with
/// `f = detA + detB - 2detC - sqrt((detA + detB - 2detC)² - 4 detV)`,
/// i.e. `f` is twice the squared smaller symplectic eigenvalue of the
/// partial transpose.
pub fn gaussian_log_negativity(cd: &CovarianceData) -> Result<f64> {
    let s = det2(cd.a()) + det2(cd.b()) - 2.0 * det2(cd.c());
    let dv = det_real(cd.v);
    let disc = s * s - 4.0 * dv;
    if disc < -1e-10 {
        return Err(Error::Unphysical(format!("negative discriminant {disc:.3e}")));
    }
    let f = s - disc.max(0.0).sqrt();
    if f <= 0.0 {
        return Err(Error::Unphysical(format!("non-positive symplectic invariant f = {f:.3e}")));
    }
    let l = -0.5 * (2.0 * f).log2();
    Ok(if l < GAUSSIAN_CLIP { 0.0 } else { l })
}

/// `det C` of the cross-covariance block.
pub fn simon_det_c(cd: &CovarianceData) -> f64 {
    det2(cd.c())
}

/// Population of the spin levels `(p_g, p_e)` and mean photon number of
/// each mode.
pub fn spin_populations(rho_s: &Array2<C64>) -> [f64; 2] {
    [rho_s[[0, 0]].re, rho_s[[1, 1]].re]
}

pub fn mean_photon_numbers(rho_b: &Array2<C64>, (d1, d2): (usize, usize)) -> [f64; 2] {
    let mut out = [0.0; 2];
    for i in 0..d1 * d2 {
        let p = rho_b[[i, i]].re;
        out[0] += (i / d2) as f64 * p;
        out[1] += (i % d2) as f64 * p;
    }
    out
}

/// Pure two-mode state `|ψ><ψ|` on a fresh `[d1, d2]` space.
pub fn two_mode_projector(v: &Array1<C64>, d1: usize, d2: usize) -> Result<Operator> {
    Operator::outer(&SpaceDescriptor::two_mode_space(d1, d2)?, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{coeffs_resonant, logneg_thermal_closed, reduced_boson_th, first_peak_time};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2 as G;

    fn ket2(d1: usize, d2: usize, entries: &[(usize, usize, C64)]) -> Array1<C64> {
        let mut v = Array1::zeros(d1 * d2);
        for &(a, b, z) in entries {
            v[a * d2 + b] = z;
        }
        v
    }

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn product_and_bell() {
        let prod = two_mode_projector(&ket2(3, 3, &[(0, 1, c(1.0))]), 3, 3).unwrap();
        assert_eq!(log_negativity(&prod).unwrap(), 0.0);
        for m in 1..=3 {
            let d = m + 1;
            let bell = two_mode_projector(&ket2(d, d, &[(0, m, c(G)), (m, 0, c(G))]), d, d).unwrap();
            assert_abs_diff_eq!(log_negativity(&bell).unwrap(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(noon_fidelity(&bell, m).unwrap(), 1.0, epsilon = 1e-12);
        }
        let vac = two_mode_projector(&ket2(3, 3, &[(0, 0, c(1.0))]), 3, 3).unwrap();
        assert_eq!(noon_fidelity(&vac, 2).unwrap(), 0.0);
    }

    #[test]
    fn thermal_closed_form_state() {
        let t = first_peak_time(1, G, G).unwrap();
        let co = coeffs_resonant(0.5f64.sqrt().asin(), G, G, 1, 1.0, t).unwrap();
        // m = 1 basis {0, 1} ⊗ {0, 1} is the full 2x2 truncation
        let rho = Operator::new(SpaceDescriptor::two_mode_space(2, 2).unwrap(), reduced_boson_th(&co)).unwrap();
        let l = log_negativity(&rho).unwrap();
        assert_abs_diff_eq!(l, logneg_thermal_closed(0.5, G, G, 1, t).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(l, 0.27155, epsilon = 1e-5);
        assert_abs_diff_eq!(l, log_negativity_trace_norm(&rho).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn entropies() {
        let sp = SpaceDescriptor::new(vec![2], vec!["spin".into()]).unwrap();
        let mixed = Operator::new(sp.clone(), Array2::from_diag(&Array1::from(vec![c(0.25), c(0.75)]))).unwrap();
        assert_abs_diff_eq!(von_neumann_entropy(&mixed).unwrap(), 0.811278, epsilon = 1e-6);
        assert_eq!(coherence(&mixed).unwrap(), 0.0);
        let half = Operator::identity(&sp).scale(c(0.5));
        assert_abs_diff_eq!(von_neumann_entropy(&half).unwrap(), 1.0, epsilon = 1e-15);
        let plus = Operator::outer(&sp, &Array1::from(vec![c(G), c(G)])).unwrap();
        assert_abs_diff_eq!(von_neumann_entropy(&plus).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(coherence(&plus).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn covariance_references() {
        let vac = two_mode_projector(&ket2(4, 4, &[(0, 0, c(1.0))]), 4, 4).unwrap();
        let cd = covariance(&vac, 1e-8).unwrap();
        assert_eq!(cd.mean, [0.0; 4]);
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(cd.v[i][j], if i == j { 0.5 } else { 0.0 });
            }
        }
        assert_eq!(gaussian_log_negativity(&cd).unwrap(), 0.0);

        // thermal(nbar) ⊗ vacuum
        let nbar: f64 = 0.7;
        let n = 70;
        let q = nbar / (1.0 + nbar);
        let mut d = Array2::zeros((n * 2, n * 2));
        for k in 0..n {
            d[[k * 2, k * 2]] = c(q.powi(k as i32) / (1.0 + nbar));
        }
        let th = Operator::new(SpaceDescriptor::two_mode_space(n, 2).unwrap(), d).unwrap();
        let cd = covariance(&th, 1e-8).unwrap();
        assert_abs_diff_eq!(cd.v[0][0], nbar + 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(cd.v[1][1], nbar + 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(cd.v[2][2], 0.5, epsilon = 1e-12);

        // coherent(alpha real) ⊗ vacuum
        let alpha = 0.9;
        let cs = crate::states::coherent_amplitudes(c(alpha), 30);
        let v = Array1::from_iter(cs.iter().flat_map(|&z| [z, c(0.0)]));
        let rho = two_mode_projector(&v, 30, 2).unwrap();
        let cd = covariance(&rho, 1e-8).unwrap();
        assert_abs_diff_eq!(cd.mean[0], 2f64.sqrt() * alpha, epsilon = 1e-10);
        assert_abs_diff_eq!(cd.v[0][0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(cd.v[1][1], 0.5, epsilon = 1e-10);
        assert!(cd.uncertainty_margin() > -1e-8);

        let cut = two_mode_projector(&ket2(3, 3, &[(2, 0, c(1.0))]), 3, 3).unwrap();
        assert!(matches!(covariance(&cut, 1e-8), Err(Error::CutoffTooSmall { .. })));
    }

    #[test]
    fn two_mode_squeezed_oracle() {
        for &r in &[0.1, 0.5, 1.0, 1.7] {
            let cd = CovarianceData::two_mode_squeezed(r);
            let l = gaussian_log_negativity(&cd).unwrap();
            assert_abs_diff_eq!(l, (2.0 * r).exp().log2(), epsilon = 1e-8);
            assert!(simon_det_c(&cd) < 0.0);
        }
    }

    #[test]
    fn local_phase_invariance() {
        let d = 3;
        let v = ket2(d, d, &[(0, 2, C64::new(0.3, 0.1)), (1, 1, c(0.5)), (2, 0, C64::new(-0.2, 0.6)), (0, 0, c(0.4))]);
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let v = v.mapv(|z| z / norm);
        let base = log_negativity(&two_mode_projector(&v, d, d).unwrap()).unwrap();
        let rotated = Array1::from_iter((0..d * d).map(|i| v[i] * C64::from_polar(1.0, 0.7 * (i / d) as f64 - 1.3 * (i % d) as f64)));
        let l = log_negativity(&two_mode_projector(&rotated, d, d).unwrap()).unwrap();
        assert_abs_diff_eq!(base, l, epsilon = 1e-10);
        assert!(base > 0.1);
    }

    #[test]
    fn block_state_matches_dense() {
        // two pure blocks mixed: a Bell-like pair in the 2-photon sector
        // and a product state in the 1-photon sector
        let (d1, d2) = (3, 3);
        let s = 0.5f64.sqrt();
        let b1 = vec![2, 4, 6]; // |02>, |11>, |20>
        let v1 = [C64::new(0.6, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.8)];
        let b2 = vec![1, 3]; // |01>, |10>
        let v2 = [C64::new(s, 0.0), C64::new(0.0, -s)];
        let outer = |v: &[C64], w: f64| Array2::from_shape_fn((v.len(), v.len()), |(i, j)| v[i] * v[j].conj() * w);
        let bs = BlockState::new((d1, d2), vec![(b1, outer(&v1, 0.3)), (b2, outer(&v2, 0.7))]);
        let dense = bs.to_dense();
        let op = Operator::new(SpaceDescriptor::two_mode_space(d1, d2).unwrap(), dense.clone()).unwrap();
        assert_abs_diff_eq!(bs.log_negativity(), log_negativity_trace_norm(&op).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(bs.log_negativity(), log_negativity(&op).unwrap(), epsilon = 1e-12);
        assert_eq!(bs.get(2, 6), dense[[2, 6]]);
        assert_eq!(bs.get(1, 6), C64::new(0.0, 0.0));
        let n = bs.mean_photon_numbers();
        let m = mean_photon_numbers(&dense, (d1, d2));
        assert_abs_diff_eq!(n[0], m[0], epsilon = 1e-15);
        assert_abs_diff_eq!(n[1], m[1], epsilon = 1e-15);
        let (c1, c2) = (bs.covariance(), covariance_raw(&dense, (d1, d2)));
        assert_eq!(c1, c2);
    }

    #[test]
    fn ground_projection() {
        let space = SpaceDescriptor::fock_space(2, 2).unwrap();
        let phi: f64 = 0.4;
        let mut amps = Array1::zeros(8);
        amps[0] = c(phi.cos());
        amps[4] = c(phi.sin());
        let st = QuantumState::ket(space, amps).unwrap();
        let (g, pg) = spin_ground_projection(&st).unwrap();
        let (_, pe) = spin_projection(&st, 1).unwrap();
        assert_abs_diff_eq!(pg, phi.cos().powi(2));
        assert_abs_diff_eq!(pg + pe, 1.0, epsilon = 1e-15);
        assert_eq!(g.space().dims(), &[2, 2]);
        let (gd, pd) = spin_ground_projection(&QuantumState::Density(st.to_density())).unwrap();
        assert_abs_diff_eq!(pd, pg, epsilon = 1e-15);
        assert_eq!(gd.space().dims(), &[2, 2]);
    }
}
