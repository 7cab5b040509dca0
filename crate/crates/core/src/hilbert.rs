//! Truncated Fock spaces and operator algebra.
//!
//! Every composite basis index follows the row-major layout
//! `i = s*(N1*N2) + n1*N2 + n2`, with the spin first (`g = 0`, `e = 1`).
//! Builders assemble operators sparsely by enumerating nonzero local
//! elements; [`Operator`] is the dense form used at the public boundary.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

pub const GROUND: usize = 0;
pub const EXCITED: usize = 1;

/// Hermiticity tolerance for built Hamiltonians.
pub const HERMITIAN_TOL: f64 = 1e-12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceDescriptor {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl SpaceDescriptor {
    /// Arbitrary ordered product space. Every dimension must be positive.
    pub fn new(dims: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid("space needs at least one subsystem"));
        }
        if dims.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: dims.len(), got: labels.len() });
        }
        if let Some(k) = dims.iter().position(|&d| d == 0) {
            return Err(Error::invalid(format!("subsystem {} ({}) has dimension 0", k, labels[k])));
        }
        Ok(Self { dims, labels })
    }

    /// Spin plus two modes, dims `[2, n1_cut, n2_cut]`.
    pub fn fock_space(n1_cut: usize, n2_cut: usize) -> Result<Self> {
        if n1_cut == 0 || n2_cut == 0 {
            return Err(Error::invalid("Fock cutoffs must be at least 1"));
        }
        Self::new(vec![2, n1_cut, n2_cut], vec!["spin".into(), "mode1".into(), "mode2".into()])
    }

    /// Spin plus one mode, dims `[2, cutoff]`.
    pub fn single_mode_space(cutoff: usize) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::invalid("Fock cutoff must be at least 1"));
        }
        Self::new(vec![2, cutoff], vec!["spin".into(), "mode".into()])
    }

    /// Two bosonic modes without the spin, as left by tracing it out.
    pub fn two_mode_space(n1_cut: usize, n2_cut: usize) -> Result<Self> {
        Self::new(vec![n1_cut, n2_cut], vec!["mode1".into(), "mode2".into()])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn n_subsystems(&self) -> usize {
        self.dims.len()
    }

    /// Stride of each slot in the composite index.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.dims[k + 1];
        }
        s
    }

    /// Composite index of a multi-index, one level per slot.
    pub fn index(&self, levels: &[usize]) -> usize {
        debug_assert_eq!(levels.len(), self.dims.len());
        levels.iter().zip(&self.dims).fold(0, |acc, (&l, &d)| {
            debug_assert!(l < d);
            acc * d + l
        })
    }

    /// Inverse of [`SpaceDescriptor::index`].
    pub fn levels(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            out[k] = index % self.dims[k];
            index /= self.dims[k];
        }
        out
    }

    /// Space of the listed slots, in the listed order.
    pub fn subspace(&self, keep: &[usize]) -> Result<Self> {
        for &k in keep {
            if k >= self.dims.len() {
                return Err(Error::invalid(format!("subsystem {k} out of range")));
            }
        }
        Self::new(
            keep.iter().map(|&k| self.dims[k]).collect(),
            keep.iter().map(|&k| self.labels[k].clone()).collect(),
        )
    }

    /// Cutoffs of the bosonic slots (everything after the spin).
    pub fn mode_cutoffs(&self) -> &[usize] {
        &self.dims[1..]
    }

    fn check_slot(&self, slot: usize) -> Result<()> {
        if slot < self.dims.len() {
            Ok(())
        } else {
            Err(Error::invalid(format!("slot {slot} out of range for {} subsystems", self.dims.len())))
        }
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode == 0 || mode >= self.dims.len() {
            return Err(Error::invalid(format!(
                "mode {mode} out of range (modes are 1..={})",
                self.dims.len() - 1
            )));
        }
        Ok(())
    }
}

/// Dense complex square matrix on a [`SpaceDescriptor`].
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: SpaceDescriptor,
    data: Array2<C64>,
}

impl Operator {
    pub fn new(space: SpaceDescriptor, data: Array2<C64>) -> Result<Self> {
        let n = space.total_dim();
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: data.nrows().max(data.ncols()) });
        }
        Ok(Self { space, data })
    }

    pub fn zeros(space: &SpaceDescriptor) -> Self {
        let n = space.total_dim();
        Self { space: space.clone(), data: Array2::zeros((n, n)) }
    }

    pub fn identity(space: &SpaceDescriptor) -> Self {
        let n = space.total_dim();
        Self { space: space.clone(), data: Array2::eye(n) }
    }

    /// Rank-one projector `|v><v|`.
    pub fn outer(space: &SpaceDescriptor, v: &Array1<C64>) -> Result<Self> {
        let n = space.total_dim();
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
        let data = Array2::from_shape_fn((n, n), |(i, j)| v[i] * v[j].conj());
        Ok(Self { space: space.clone(), data })
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn data(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<C64> {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space.clone(), data: self.data.t().mapv(|z| z.conj()) }
    }

    /// Max elementwise `|A - A^dag|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.data[[i, j]] - self.data[[j, i]].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    pub fn trace(&self) -> C64 {
        self.data.diag().sum()
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if self.space.dims != other.space.dims {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self { space: self.space.clone(), data: self.data.dot(&other.data) })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self { space: self.space.clone(), data: &self.data + &other.data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self { space: self.space.clone(), data: &self.data - &other.data })
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { space: self.space.clone(), data: self.data.mapv(|z| z * c) }
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        let ab = self.data.dot(&other.data);
        let ba = other.data.dot(&self.data);
        Ok(Self { space: self.space.clone(), data: ab - ba })
    }

    /// `Tr(A rho)`.
    pub fn expect(&self, rho: &Self) -> Result<C64> {
        self.same_space(rho)?;
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += self.data[[i, j]] * rho.data[[j, i]];
            }
        }
        Ok(acc)
    }

    pub fn apply(&self, v: &Array1<C64>) -> Result<Array1<C64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(self.data.dot(v))
    }

    /// Ascending eigenvalues; fails if the matrix is not Hermitian to `tol`.
    pub fn eigvalsh(&self, tol: f64) -> Result<Vec<f64>> {
        let dev = self.hermiticity_deviation();
        if dev > tol {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(crate::linalg::eigvalsh(self.data.view()))
    }

    /// `(A + A^dag)/2`.
    pub fn hermitian_part(&self) -> Self {
        let d = (&self.data + &self.data.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
        Self { space: self.space.clone(), data: d }
    }

    /// Largest elementwise modulus of `A - B`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.same_space(other)?;
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

/// Compressed-row operator used for assembly and for the right-hand sides
/// of the propagators.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    space: SpaceDescriptor,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl SparseOperator {
    /// Sums duplicates; drops entries that are exactly zero.
    pub fn from_triplets(space: &SpaceDescriptor, mut trip: Vec<(usize, usize, C64)>) -> Result<Self> {
        let n = space.total_dim();
        if let Some(&(r, c, _)) = trip.iter().find(|(r, c, _)| *r >= n || *c >= n) {
            return Err(Error::DimensionMismatch { expected: n, got: r.max(c) + 1 });
        }
        trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<C64> = Vec::with_capacity(trip.len());
        let mut rows = Vec::with_capacity(trip.len());
        for (r, c, v) in trip {
            if let (Some(&lr), Some(&lc)) = (rows.last(), indices.last()) {
                if lr == r && lc == c {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            indices.push(c);
            values.push(v);
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_idx = Vec::with_capacity(rows.len());
        let mut keep_val = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(indices).zip(values) {
            if v != ZERO {
                keep_rows.push(r);
                keep_idx.push(c);
                keep_val.push(v);
            }
        }
        for &r in &keep_rows {
            indptr[r + 1] += 1;
        }
        for k in 0..n {
            indptr[k + 1] += indptr[k];
        }
        Ok(Self { space: space.clone(), indptr, indices: keep_idx, values: keep_val })
    }

    pub fn zeros(space: &SpaceDescriptor) -> Self {
        Self {
            space: space.clone(),
            indptr: vec![0; space.total_dim() + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(space: &SpaceDescriptor) -> Self {
        let n = space.total_dim();
        Self {
            space: space.clone(),
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![ONE; n],
        }
    }

    /// `coeff * (local_1 ⊗ ... )` with each factor placed at its slot and
    /// identities elsewhere. Slots must be distinct.
    pub fn local_product(
        space: &SpaceDescriptor,
        factors: &[(usize, &Array2<C64>)],
        coeff: C64,
    ) -> Result<Self> {
        let nslots = space.n_subsystems();
        let mut locals: Vec<Option<&Array2<C64>>> = vec![None; nslots];
        for &(slot, m) in factors {
            space.check_slot(slot)?;
            let d = space.dims[slot];
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: m.nrows().max(m.ncols()) });
            }
            if locals[slot].is_some() {
                return Err(Error::invalid(format!("slot {slot} given twice")));
            }
            locals[slot] = Some(m);
        }
        // Nonzero (row, col, value) list per slot; identity for absent slots.
        let per_slot: Vec<Vec<(usize, usize, C64)>> = locals
            .iter()
            .zip(&space.dims)
            .map(|(m, &d)| match m {
                Some(m) => m
                    .indexed_iter()
                    .filter(|(_, v)| **v != ZERO)
                    .map(|((i, j), v)| (i, j, *v))
                    .collect(),
                None => (0..d).map(|i| (i, i, ONE)).collect(),
            })
            .collect();
        let mut trip = vec![(0usize, 0usize, coeff)];
        for (slot_elems, &d) in per_slot.iter().zip(&space.dims) {
            let mut next = Vec::with_capacity(trip.len() * slot_elems.len());
            for &(r, c, v) in &trip {
                for &(i, j, w) in slot_elems {
                    next.push((r * d + i, c * d + j, v * w));
                }
            }
            trip = next;
        }
        Self::from_triplets(space, trip)
    }

    /// `I ⊗ ... ⊗ local ⊗ ... ⊗ I`.
    pub fn embed(local: &Array2<C64>, slot: usize, space: &SpaceDescriptor) -> Result<Self> {
        Self::local_product(space, &[(slot, local)], ONE)
    }

    pub fn annihilation(space: &SpaceDescriptor, mode: usize) -> Result<Self> {
        space.check_mode(mode)?;
        Self::embed(&annihilation_local(space.dims[mode]), mode, space)
    }

    pub fn creation(space: &SpaceDescriptor, mode: usize) -> Result<Self> {
        space.check_mode(mode)?;
        Self::embed(&creation_local(space.dims[mode]), mode, space)
    }

    pub fn number(space: &SpaceDescriptor, mode: usize) -> Result<Self> {
        space.check_mode(mode)?;
        Self::embed(&number_local(space.dims[mode]), mode, space)
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzeros of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        (0..self.dim()).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r).find(|&(j, _)| j == c).map_or(ZERO, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Operator {
        let n = self.dim();
        let mut d = Array2::zeros((n, n));
        for r in 0..n {
            for (c, v) in self.row(r) {
                d[[r, c]] = v;
            }
        }
        Operator { space: self.space.clone(), data: d }
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        if c == ZERO {
            return Self::zeros(&self.space);
        }
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.space.dims != other.space.dims {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let mut trip = self.triplets();
        trip.extend(other.triplets());
        Self::from_triplets(&self.space, trip)
    }

    pub fn adjoint(&self) -> Self {
        let trip = self.triplets().into_iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(&self.space, trip).expect("transpose stays in range")
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.space.dims != other.space.dims {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let mut trip = Vec::new();
        for r in 0..self.dim() {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    trip.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(&self.space, trip)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for (r, c, v) in self.triplets() {
            worst = worst.max((v - self.get(c, r).conj()).norm());
        }
        worst
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    /// `y = A x`.
    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// `out += coeff * A rho` for a dense square `rho`.
    pub fn left_mul_acc(&self, rho: &Array2<C64>, coeff: C64, out: &mut Array2<C64>) {
        let n = self.dim();
        for r in 0..n {
            for (k, v) in self.row(r) {
                let w = v * coeff;
                let src = rho.row(k);
                let mut dst = out.row_mut(r);
                dst.zip_mut_with(&src, |d, s| *d += w * s);
            }
        }
    }

    /// `out += coeff * rho A^dag` for a dense square `rho`.
    pub fn right_mul_adjoint_acc(&self, rho: &Array2<C64>, coeff: C64, out: &mut Array2<C64>) {
        // (rho A^dag)[i, r] = sum_k rho[i, k] conj(A[r, k])
        let n = self.dim();
        for r in 0..n {
            for (k, v) in self.row(r) {
                let w = v.conj() * coeff;
                let src = rho.column(k);
                let mut dst = out.column_mut(r);
                dst.zip_mut_with(&src, |d, s| *d += w * s);
            }
        }
    }

    /// Connected components of the (symmetrised) nonzero pattern. Each
    /// component is an invariant subspace of a Hermitian operator.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.dim();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for r in 0..n {
            for (c, _) in self.row(r) {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        group_by_root(n, |i| find(&mut parent, i))
    }
}

pub(crate) fn group_by_root(n: usize, mut root: impl FnMut(usize) -> usize) -> Vec<Vec<usize>> {
    let mut slot = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = root(i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// `a|n> = sqrt(n)|n-1>` on `n < dim`.
pub fn annihilation_local(dim: usize) -> Array2<C64> {
    let mut a = Array2::zeros((dim, dim));
    for n in 1..dim {
        a[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn creation_local(dim: usize) -> Array2<C64> {
    annihilation_local(dim).reversed_axes()
}

pub fn number_local(dim: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_iter((0..dim).map(|n| C64::new(n as f64, 0.0))))
}

/// `a^k` truncated: `a^k|n> = sqrt(n!/(n-k)!)|n-k>`.
pub fn annihilation_power_local(dim: usize, k: usize) -> Array2<C64> {
    let mut a = Array2::zeros((dim, dim));
    for n in k..dim {
        let amp: f64 = ((n - k + 1)..=n).map(|j| j as f64).product::<f64>().sqrt();
        a[[n - k, n]] = C64::new(amp, 0.0);
    }
    a
}

/// `diag(-1, +1)` in the `(g, e)` ordering.
pub fn sigma_z_local() -> Array2<C64> {
    let mut s = Array2::zeros((2, 2));
    s[[GROUND, GROUND]] = -ONE;
    s[[EXCITED, EXCITED]] = ONE;
    s
}

/// `|e><g|`.
pub fn sigma_plus_local() -> Array2<C64> {
    let mut s = Array2::zeros((2, 2));
    s[[EXCITED, GROUND]] = ONE;
    s
}

/// `|g><e|`.
pub fn sigma_minus_local() -> Array2<C64> {
    sigma_plus_local().reversed_axes()
}

pub fn annihilation(space: &SpaceDescriptor, mode: usize) -> Result<Operator> {
    Ok(SparseOperator::annihilation(space, mode)?.to_dense())
}

pub fn creation(space: &SpaceDescriptor, mode: usize) -> Result<Operator> {
    Ok(SparseOperator::creation(space, mode)?.to_dense())
}

pub fn number(space: &SpaceDescriptor, mode: usize) -> Result<Operator> {
    Ok(SparseOperator::number(space, mode)?.to_dense())
}

/// `(σz, σ+, σ-)` on slot 0.
pub fn spin_ops(space: &SpaceDescriptor) -> Result<(Operator, Operator, Operator)> {
    if space.dims[0] != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: space.dims[0] });
    }
    Ok((
        tensor_embed(&sigma_z_local(), 0, space)?,
        tensor_embed(&sigma_plus_local(), 0, space)?,
        tensor_embed(&sigma_minus_local(), 0, space)?,
    ))
}

pub fn tensor_embed(local: &Array2<C64>, slot: usize, space: &SpaceDescriptor) -> Result<Operator> {
    Ok(SparseOperator::embed(local, slot, space)?.to_dense())
}

/// Reduced operator on the `keep` slots (kept in ascending slot order).
pub fn partial_trace(rho: &Operator, keep: &[usize]) -> Result<Operator> {
    if keep.is_empty() {
        return Err(Error::invalid("partial trace needs a non-empty keep set"));
    }
    let space = rho.space();
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    let traced: Vec<usize> = (0..space.n_subsystems()).filter(|k| !keep.contains(k)).collect();
    let out_space = space.subspace(&keep)?;
    let kept_off = slot_offsets(space, &keep);
    let traced_off = slot_offsets(space, &traced);
    let nk = kept_off.len();
    let d = rho.data();
    let out = Array2::from_shape_fn((nk, nk), |(a, b)| {
        traced_off.iter().map(|&t| d[[kept_off[a] + t, kept_off[b] + t]]).sum::<C64>()
    });
    Operator::new(out_space, out)
}

/// Composite-index offsets of every joint level of `slots` (other slots at
/// level 0), enumerated in row-major order of `slots`.
pub(crate) fn slot_offsets(space: &SpaceDescriptor, slots: &[usize]) -> Vec<usize> {
    let strides = space.strides();
    let mut offs = vec![0usize];
    for &s in slots {
        let mut next = Vec::with_capacity(offs.len() * space.dims[s]);
        for &o in &offs {
            for l in 0..space.dims[s] {
                next.push(o + l * strides[s]);
            }
        }
        offs = next;
    }
    offs
}

/// Partial transpose of a two-party operator with dimensions `dims`, on
/// party 0 or 1.
pub fn partial_transpose(rho: &Operator, dims: (usize, usize), party: usize) -> Result<Operator> {
    let (da, db) = dims;
    if da * db != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: da * db });
    }
    if party > 1 {
        return Err(Error::invalid(format!("party {party} out of range (0 or 1)")));
    }
    Ok(Operator { space: rho.space.clone(), data: partial_transpose_raw(rho.data(), dims, party) })
}

pub(crate) fn partial_transpose_raw(d: &Array2<C64>, (da, db): (usize, usize), party: usize) -> Array2<C64> {
    let n = da * db;
    Array2::from_shape_fn((n, n), |(i, j)| {
        let (a, b) = (i / db, i % db);
        let (a2, b2) = (j / db, j % db);
        if party == 0 {
            d[[a2 * db + b, a * db + b2]]
        } else {
            d[[a * db + b2, a2 * db + b]]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn fock_space_dims() {
        let s = SpaceDescriptor::fock_space(2, 2).unwrap();
        assert_eq!(s.dims(), &[2, 2, 2]);
        assert_eq!(s.total_dim(), 8);
        assert_eq!(SpaceDescriptor::fock_space(20, 20).unwrap().total_dim(), 800);
        assert!(SpaceDescriptor::fock_space(0, 3).is_err());
        let s = SpaceDescriptor::fock_space(3, 4).unwrap();
        assert_eq!(s.index(&[1, 2, 3]), 12 + 2 * 4 + 3);
        assert_eq!(s.levels(23), vec![1, 2, 3]);
    }

    #[test]
    fn ladder_elements() {
        let s = SpaceDescriptor::fock_space(5, 5).unwrap();
        let a = annihilation(&s, 1).unwrap();
        let i = |n1| s.index(&[0, n1, 0]);
        assert_abs_diff_eq!(a.data()[[i(0), i(1)]].re, 1.0);
        assert_abs_diff_eq!(a.data()[[i(2), i(3)]].re, 3f64.sqrt());
        assert!(annihilation(&s, 0).is_err());
        assert!(annihilation(&s, 3).is_err());
    }

    #[test]
    fn commutator_only_breaks_at_top_level() {
        let n = 6;
        let a = annihilation_local(n);
        let ad = creation_local(n);
        let comm = a.dot(&ad) - ad.dot(&a);
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j && i < n - 1 { 1.0 } else if i == j { -((n - 1) as f64) } else { 0.0 };
                assert_abs_diff_eq!(comm[[i, j]].re, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn spin_algebra() {
        let s = SpaceDescriptor::fock_space(2, 2).unwrap();
        let (sz, sp, sm) = spin_ops(&s).unwrap();
        let diag: Vec<f64> = sz.data().diag().iter().map(|z| z.re).collect();
        assert_eq!(diag, vec![-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0]);
        let g = s.index(&[0, 0, 0]);
        let e = s.index(&[1, 0, 0]);
        assert_eq!(sp.data()[[e, g]], c(1.0));
        assert_eq!(sp.data().column(e).iter().map(|z| z.norm()).sum::<f64>(), 0.0);
        let id = sp.matmul(&sm).unwrap().sub(&sm.matmul(&sp).unwrap()).unwrap();
        assert_eq!(id.max_abs_diff(&sz).unwrap(), 0.0);
    }

    #[test]
    fn embedding_commuting_slots() {
        let s = SpaceDescriptor::fock_space(3, 4).unwrap();
        let a1 = tensor_embed(&annihilation_local(3), 1, &s).unwrap();
        let a2 = tensor_embed(&annihilation_local(4), 2, &s).unwrap();
        let both =
            SparseOperator::local_product(&s, &[(1, &annihilation_local(3)), (2, &annihilation_local(4))], ONE)
                .unwrap()
                .to_dense();
        assert_eq!(a1.matmul(&a2).unwrap().max_abs_diff(&both).unwrap(), 0.0);
        let id = tensor_embed(&Array2::eye(4), 2, &s).unwrap();
        assert_eq!(id, Operator::identity(&s));
        assert!(tensor_embed(&Array2::eye(3), 2, &s).is_err());
    }

    #[test]
    fn partial_trace_product_and_mixed() {
        let s = SpaceDescriptor::fock_space(2, 3).unwrap();
        let mut v = Array1::zeros(s.total_dim());
        v[s.index(&[1, 0, 0])] = ONE;
        let rho = Operator::outer(&s, &v).unwrap();
        let rb = partial_trace(&rho, &[1, 2]).unwrap();
        assert_eq!(rb.dim(), 6);
        assert_eq!(rb.data()[[0, 0]], ONE);
        assert_abs_diff_eq!(rb.trace().re, 1.0);

        let mixed = Operator::identity(&s).scale(c(1.0 / 12.0));
        let r = partial_trace(&mixed, &[0]).unwrap();
        assert_abs_diff_eq!(r.data()[[0, 0]].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.data()[[1, 1]].re, 0.5, epsilon = 1e-15);
        assert!(partial_trace(&mixed, &[]).is_err());
    }

    #[test]
    fn partial_transpose_involution_and_product() {
        let s = SpaceDescriptor::two_mode_space(2, 3).unwrap();
        let n = 6;
        let rho = Operator::new(
            s.clone(),
            Array2::from_shape_fn((n, n), |(i, j)| C64::new((i * 7 + j) as f64, (i as f64) - (j as f64))),
        )
        .unwrap();
        for party in 0..2 {
            let pt = partial_transpose(&rho, (2, 3), party).unwrap();
            let back = partial_transpose(&pt, (2, 3), party).unwrap();
            assert_eq!(back, rho);
        }
        assert!(partial_transpose(&rho, (3, 3), 0).is_err());
        // product state: PT_A(A ⊗ B) = A^T ⊗ B
        let a = ndarray::array![[c(0.3), C64::new(0.1, 0.2)], [C64::new(0.1, -0.2), c(0.7)]];
        let b = Array2::from_shape_fn((3, 3), |(i, j)| C64::new((i + j) as f64, (i as f64) - (j as f64)));
        let kron = |x: &Array2<C64>, y: &Array2<C64>| {
            Array2::from_shape_fn((6, 6), |(i, j)| x[[i / 3, j / 3]] * y[[i % 3, j % 3]])
        };
        let prod = Operator::new(s, kron(&a, &b)).unwrap();
        let pt = partial_transpose(&prod, (2, 3), 0).unwrap();
        let expect = kron(&a.t().to_owned(), &b);
        assert_eq!(pt.data(), &expect);
    }

    #[test]
    fn sparse_matches_dense() {
        let s = SpaceDescriptor::fock_space(3, 3).unwrap();
        let a = SparseOperator::annihilation(&s, 2).unwrap();
        let ad = a.adjoint();
        let n = a.matmul(&ad).unwrap();
        let dense = a.to_dense().matmul(&ad.to_dense()).unwrap();
        assert_eq!(n.to_dense().max_abs_diff(&dense).unwrap(), 0.0);
        let sum = a.add(&ad).unwrap();
        assert_eq!(sum.hermiticity_deviation(), 0.0);
        let x: Vec<C64> = (0..18).map(|k| C64::new(k as f64, 1.0)).collect();
        let y = sum.apply(&x);
        let yd = sum.to_dense().apply(&Array1::from(x)).unwrap();
        for (p, q) in y.iter().zip(yd.iter()) {
            assert_abs_diff_eq!((p - q).norm(), 0.0);
        }
    }

    #[test]
    fn power_of_annihilator() {
        let n = 6;
        let a = annihilation_local(n);
        let a3 = a.dot(&a).dot(&a);
        let p = annihilation_power_local(n, 3);
        for (x, y) in a3.iter().zip(p.iter()) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn components_split_blocks() {
        let s = SpaceDescriptor::fock_space(2, 2).unwrap();
        let trip = vec![(0, 5, ONE), (5, 0, ONE), (3, 3, ONE)];
        let op = SparseOperator::from_triplets(&s, trip).unwrap();
        let comps = op.components();
        assert!(comps.contains(&vec![0, 5]));
        assert_eq!(comps.len(), 7);
    }
}
