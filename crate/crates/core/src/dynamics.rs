//! Time evolution: exact unitary propagation, the four-amplitude ODE and
//! the Lindblad master equation.
//!
//! Unitary runs diagonalise the Hamiltonian once, block by block over the
//! connected components of its sparsity pattern (the conserved excitation
//! sectors), and then evaluate `e^{-iHt}` exactly at each output time.
//! Mixed initial states are carried as weighted kets.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::analytic::{g12, Coefficients};
use crate::error::{Error, Result};
use crate::hilbert::{Operator, SpaceDescriptor, SparseOperator};
use crate::linalg::eigh;
use crate::measures::{coherence_raw, gaussian_log_negativity, simon_det_c, BlockState};
use crate::model::{factorial, ModelParams};
use crate::ode::{integrate, Tolerances};
use crate::states::{Ensemble, QuantumState};
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Hermiticity tolerance accepted by the propagators.
pub const PROPAGATOR_HERMITIAN_TOL: f64 = 1e-10;

/// Trace drift that aborts a Lindblad run.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;

/// Uniform grid `t0, ..., t1` with `n_points` samples. A single point, or
/// `t0 == t1`, is allowed and yields the initial state only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub n_points: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n_points: usize) -> Result<Self> {
        let g = Self { t0, t1, n_points };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t1.is_finite()) {
            return Err(Error::invalid("grid bounds must be finite"));
        }
        if self.n_points == 0 {
            return Err(Error::invalid("grid needs at least one point"));
        }
        if self.t1 < self.t0 || (self.n_points >= 2 && self.t1 == self.t0) {
            return Err(Error::invalid(format!(
                "grid needs t1 > t0 for {} points (got {} .. {})",
                self.n_points, self.t0, self.t1
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        if self.n_points == 1 {
            return vec![self.t0];
        }
        let h = (self.t1 - self.t0) / (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|k| if k + 1 == self.n_points { self.t1 } else { self.t0 + k as f64 * h })
            .collect()
    }
}

struct Block {
    idx: Vec<usize>,
    energies: Array1<f64>,
    vecs: Array2<C64>,
}

/// Exact propagator `e^{-iHt}` from a block eigendecomposition.
pub struct Propagator {
    space: SpaceDescriptor,
    blocks: Vec<Block>,
    block_of: Vec<usize>,
}

/// A ket expanded in the eigenbases of the blocks it touches.
struct PreparedKet {
    weight: f64,
    parts: Vec<(usize, Array1<C64>)>,
    /// Nonzero entries of the input, returned untouched at `t = 0`.
    initial: Vec<(usize, C64)>,
}

impl Propagator {
    pub fn new(h: &SparseOperator) -> Result<Self> {
        let dev = h.hermiticity_deviation();
        if dev > PROPAGATOR_HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let comps = h.components();
        let mut block_of = vec![0; h.dim()];
        let mut blocks = Vec::with_capacity(comps.len());
        for (b, idx) in comps.into_iter().enumerate() {
            let n = idx.len();
            let mut sub = Array2::zeros((n, n));
            let pos: std::collections::HashMap<usize, usize> = idx.iter().enumerate().map(|(k, &i)| (i, k)).collect();
            for (k, &i) in idx.iter().enumerate() {
                block_of[i] = b;
                for (j, v) in h.row(i) {
                    sub[[k, pos[&j]]] = v;
                }
            }
            let (energies, vecs) = eigh(sub.view());
            blocks.push(Block { idx, energies, vecs });
        }
        Ok(Self { space: h.space().clone(), blocks, block_of })
    }

    pub fn from_operator(h: &Operator) -> Result<Self> {
        let trip = h
            .data()
            .indexed_iter()
            .filter(|(_, v)| **v != ZERO)
            .map(|((i, j), v)| (i, j, *v))
            .collect();
        Self::new(&SparseOperator::from_triplets(h.space(), trip)?)
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    /// Number of invariant blocks and the largest block size.
    pub fn block_stats(&self) -> (usize, usize) {
        (self.blocks.len(), self.blocks.iter().map(|b| b.idx.len()).max().unwrap_or(0))
    }

    fn prepare(&self, weight: f64, psi: &Array1<C64>) -> PreparedKet {
        let mut touched: Vec<usize> = psi.iter().enumerate().filter(|(_, z)| **z != ZERO).map(|(i, _)| self.block_of[i]).collect();
        touched.sort_unstable();
        touched.dedup();
        let parts = touched
            .into_iter()
            .map(|b| {
                let blk = &self.blocks[b];
                let local = Array1::from_iter(blk.idx.iter().map(|&i| psi[i]));
                let coeffs = blk.vecs.t().mapv(|z| z.conj()).dot(&local);
                (b, coeffs)
            })
            .collect();
        let initial = psi.iter().enumerate().filter(|(_, z)| **z != ZERO).map(|(i, z)| (i, *z)).collect();
        PreparedKet { weight, parts, initial }
    }

    /// Basis indices the ket can ever occupy.
    fn support(&self, k: &PreparedKet) -> Vec<usize> {
        let mut out: Vec<usize> = k.parts.iter().flat_map(|(b, _)| self.blocks[*b].idx.iter().copied()).collect();
        out.sort_unstable();
        out
    }

    fn evolve_prepared(&self, k: &PreparedKet, t: f64, out: &mut Array1<C64>) {
        out.fill(ZERO);
        if t == 0.0 {
            for &(i, z) in &k.initial {
                out[i] = z;
            }
            return;
        }
        for (b, coeffs) in &k.parts {
            let blk = &self.blocks[*b];
            let rotated =
                Array1::from_iter(coeffs.iter().zip(blk.energies.iter()).map(|(c, &e)| c * C64::from_polar(1.0, -e * t)));
            let local = blk.vecs.dot(&rotated);
            for (&i, v) in blk.idx.iter().zip(local.iter()) {
                out[i] = *v;
            }
        }
    }

    /// `e^{-iHt} psi`.
    pub fn evolve_ket(&self, psi: &Array1<C64>, t: f64) -> Result<Array1<C64>> {
        if psi.len() != self.space.total_dim() {
            return Err(Error::DimensionMismatch { expected: self.space.total_dim(), got: psi.len() });
        }
        let k = self.prepare(1.0, psi);
        let mut out = Array1::zeros(psi.len());
        self.evolve_prepared(&k, t, &mut out);
        Ok(out)
    }
}

/// Where each ensemble member lives in the bosonic space once the spin is
/// traced out. Fixed for a unitary run because every member stays inside
/// the blocks it started in.
struct KetLayout {
    dims: (usize, usize),
    comps: Vec<Vec<usize>>,
    /// Per member: `(spin offset, component, [(full index, slot in component)])`.
    parts: Vec<Vec<(usize, usize, Vec<(usize, usize)>)>>,
}

impl KetLayout {
    fn new(space: &SpaceDescriptor, supports: &[Vec<usize>]) -> Self {
        let nb = space.total_dim() / 2;
        let cut = space.mode_cutoffs();
        let dims = (cut[0], cut.get(1).copied().unwrap_or(1));
        let mut parent: Vec<usize> = (0..nb).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut used = vec![false; nb];
        for sup in supports {
            for s in 0..2 {
                let local: Vec<usize> = sup.iter().filter(|&&i| i / nb == s).map(|&i| i % nb).collect();
                for &i in &local {
                    used[i] = true;
                }
                for w in local.windows(2) {
                    let (x, y) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                    if x != y {
                        parent[x.max(y)] = x.min(y);
                    }
                }
            }
        }
        let groups = crate::hilbert::group_by_root(nb, |i| find(&mut parent, i));
        let mut place = vec![(usize::MAX, 0); nb];
        let mut comps = Vec::new();
        for g in groups.into_iter().filter(|g| g.iter().any(|&i| used[i])) {
            for (k, &i) in g.iter().enumerate() {
                place[i] = (comps.len(), k);
            }
            comps.push(g);
        }
        let parts = supports
            .iter()
            .map(|sup| {
                (0..2)
                    .filter_map(|s| {
                        let local: Vec<(usize, usize)> =
                            sup.iter().filter(|&&i| i / nb == s).map(|&i| (i, place[i % nb].1)).collect();
                        let first = local.first()?;
                        Some((s * nb, place[first.0 % nb].0, local))
                    })
                    .collect()
            })
            .collect();
        Self { dims, comps, parts }
    }

    fn reduce(&self, members: &[(f64, Array1<C64>)]) -> BlockState {
        let mut mats: Vec<Array2<C64>> = self.comps.iter().map(|c| Array2::zeros((c.len(), c.len()))).collect();
        let mut vals = Vec::new();
        for ((w, v), parts) in members.iter().zip(&self.parts) {
            for (_, comp, local) in parts {
                vals.clear();
                vals.extend(local.iter().map(|&(i, k)| (k, v[i])));
                let m = &mut mats[*comp];
                for &(x, a) in &vals {
                    let a = a * *w;
                    for &(y, b) in &vals {
                        m[[x, y]] += a * b.conj();
                    }
                }
            }
        }
        BlockState::new(self.dims, self.comps.iter().cloned().zip(mats).collect())
    }
}

/// State handed to the observable recorder at one output time.
enum Snapshot<'a> {
    Kets { space: &'a SpaceDescriptor, members: &'a [(f64, Array1<C64>)], layout: &'a KetLayout },
    Density { space: &'a SpaceDescriptor, rho: &'a Array2<C64> },
}

impl Snapshot<'_> {
    fn space(&self) -> &SpaceDescriptor {
        match self {
            Snapshot::Kets { space, .. } | Snapshot::Density { space, .. } => space,
        }
    }

    fn bath_dim(&self) -> usize {
        self.space().total_dim() / 2
    }

    fn reduced_spin(&self) -> Array2<C64> {
        let nb = self.bath_dim();
        let mut r = Array2::zeros((2, 2));
        match self {
            Snapshot::Kets { members, .. } => {
                for (w, v) in members.iter() {
                    for s in 0..2 {
                        for s2 in 0..2 {
                            let acc: C64 = (0..nb).map(|i| v[s * nb + i] * v[s2 * nb + i].conj()).sum();
                            r[[s, s2]] += acc * *w;
                        }
                    }
                }
            }
            Snapshot::Density { rho, .. } => {
                for s in 0..2 {
                    for s2 in 0..2 {
                        r[[s, s2]] = (0..nb).map(|i| rho[[s * nb + i, s2 * nb + i]]).sum();
                    }
                }
            }
        }
        r
    }

    /// Bosonic state with the spin traced out.
    fn reduced_modes(&self) -> BlockState {
        match self {
            Snapshot::Kets { members, layout, .. } => layout.reduce(members),
            Snapshot::Density { space, rho } => {
                let nb = self.bath_dim();
                let mut r = Array2::zeros((nb, nb));
                for s in 0..2 {
                    let off = s * nb;
                    r += &rho.slice(ndarray::s![off..off + nb, off..off + nb]);
                }
                let cut = space.mode_cutoffs();
                BlockState::dense(r, (cut[0], cut.get(1).copied().unwrap_or(1)))
            }
        }
    }

    /// Total boundary population and its share per mode.
    fn boundary_population(&self, flags: &[u8], n_modes: usize) -> (f64, Vec<f64>) {
        let mut per = vec![0.0; n_modes];
        let mut total = 0.0;
        let mut add = |i: usize, p: f64| {
            let f = flags[i];
            if f != 0 {
                total += p;
                for (k, slot) in per.iter_mut().enumerate() {
                    if f & (1 << k) != 0 {
                        *slot += p;
                    }
                }
            }
        };
        match self {
            Snapshot::Kets { members, .. } => {
                for (w, v) in members.iter() {
                    for (i, z) in v.iter().enumerate() {
                        add(i, w * z.norm_sqr());
                    }
                }
            }
            Snapshot::Density { rho, .. } => {
                for i in 0..rho.nrows() {
                    add(i, rho[[i, i]].re);
                }
            }
        }
        (total, per)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Observable {
    #[serde(rename = "L")]
    LogNegativity,
    #[serde(rename = "C")]
    Coherence,
    #[serde(rename = "F_NOON")]
    NoonFidelity,
    #[serde(rename = "detC")]
    DetC,
    #[serde(rename = "L_Gauss")]
    GaussianLogNegativity,
    #[serde(rename = "populations")]
    Populations,
    #[serde(rename = "bloch")]
    Bloch,
    #[serde(rename = "leakage")]
    Leakage,
}

impl Observable {
    pub const ALL: [Observable; 8] = [
        Observable::LogNegativity,
        Observable::Coherence,
        Observable::NoonFidelity,
        Observable::DetC,
        Observable::GaussianLogNegativity,
        Observable::Populations,
        Observable::Bloch,
        Observable::Leakage,
    ];

    /// Column names contributed to a trajectory.
    pub fn columns(&self, n_modes: usize) -> Vec<&'static str> {
        match self {
            Observable::LogNegativity => vec!["L"],
            Observable::Coherence => vec!["C"],
            Observable::NoonFidelity => vec!["F_NOON"],
            Observable::DetC => vec!["detC"],
            Observable::GaussianLogNegativity => vec!["L_Gauss"],
            Observable::Populations if n_modes == 1 => vec!["p_e", "n1"],
            Observable::Populations => vec!["p_e", "n1", "n2"],
            Observable::Bloch => vec!["bloch_x", "bloch_y", "bloch_z"],
            Observable::Leakage => vec!["leakage"],
        }
    }

    fn needs_two_modes(&self) -> bool {
        matches!(
            self,
            Observable::LogNegativity | Observable::NoonFidelity | Observable::DetC | Observable::GaussianLogNegativity
        )
    }
}

/// What to record at each output time.
#[derive(Debug, Clone)]
pub struct Probe {
    pub observables: Vec<Observable>,
    /// Target `N` of the NOON fidelity.
    pub noon_order: usize,
    /// Boundary flags per basis state (bit `k` for mode `k+1`); population
    /// on flagged states counts as leakage.
    pub flags: Vec<u8>,
    /// Leakage already present in the truncated initial state.
    pub initial_leakage: f64,
}

impl Probe {
    pub fn new(observables: &[Observable], noon_order: usize, flags: Vec<u8>) -> Self {
        let mut observables = observables.to_vec();
        observables.sort();
        observables.dedup();
        Self { observables, noon_order, flags, initial_leakage: 0.0 }
    }

    pub fn with_initial_leakage(mut self, leak: f64) -> Self {
        self.initial_leakage = leak;
        self
    }

    fn check(&self, space: &SpaceDescriptor) -> Result<()> {
        if space.dims()[0] != 2 || space.n_subsystems() < 2 || space.n_subsystems() > 3 {
            return Err(Error::invalid("trajectories need a spin in slot 0 and one or two modes"));
        }
        if self.flags.len() != space.total_dim() {
            return Err(Error::DimensionMismatch { expected: space.total_dim(), got: self.flags.len() });
        }
        if space.n_subsystems() != 3 {
            if let Some(o) = self.observables.iter().find(|o| o.needs_two_modes()) {
                return Err(Error::invalid(format!("observable {o:?} needs two bosonic modes")));
            }
        }
        Ok(())
    }

    fn columns(&self, n_modes: usize) -> Vec<String> {
        self.observables.iter().flat_map(|o| o.columns(n_modes)).map(String::from).collect()
    }

    /// One row of observables plus the boundary populations.
    fn record(&self, snap: &Snapshot) -> Result<(Vec<f64>, f64, Vec<f64>)> {
        let n_modes = snap.space().n_subsystems() - 1;
        let (leak, per_mode) = snap.boundary_population(&self.flags, n_modes);
        let need_spin = self
            .observables
            .iter()
            .any(|o| matches!(o, Observable::Coherence | Observable::Populations | Observable::Bloch));
        let need_modes = self.observables.iter().any(|o| o.needs_two_modes() || *o == Observable::Populations);
        let rho_s = if need_spin { Some(snap.reduced_spin()) } else { None };
        let rho_b = if need_modes { Some(snap.reduced_modes()) } else { None };
        let mut cov = None;
        let mut row = Vec::new();
        for o in &self.observables {
            match o {
                Observable::LogNegativity => row.push(rho_b.as_ref().unwrap().log_negativity()),
                Observable::Coherence => row.push(coherence_raw(rho_s.as_ref().unwrap())),
                Observable::NoonFidelity => row.push(rho_b.as_ref().unwrap().noon_fidelity(self.noon_order)?),
                Observable::DetC | Observable::GaussianLogNegativity => {
                    let cd = *cov.get_or_insert_with(|| rho_b.as_ref().unwrap().covariance());
                    row.push(if *o == Observable::DetC { simon_det_c(&cd) } else { gaussian_log_negativity(&cd)? });
                }
                Observable::Populations => {
                    row.push(rho_s.as_ref().unwrap()[[1, 1]].re);
                    let n = rho_b.as_ref().unwrap().mean_photon_numbers();
                    row.extend_from_slice(&n[..n_modes]);
                }
                Observable::Bloch => row.extend(crate::analytic::bloch_of(rho_s.as_ref().unwrap())),
                Observable::Leakage => row.push(self.initial_leakage.max(leak)),
            }
        }
        Ok((row, leak, per_mode))
    }
}

/// Recorded observables on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub columns: Vec<String>,
    /// `values[k][c]` is column `c` at `times[k]`.
    pub values: Vec<Vec<f64>>,
    /// Largest of the initial truncation leakage and the boundary
    /// population over the run.
    pub leakage_max: f64,
    /// Largest boundary population of each mode over the run.
    pub mode_leakage: Vec<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub solver: String,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub blocks: Option<usize>,
    pub largest_block: Option<usize>,
    pub trace_drift_max: Option<f64>,
}

impl Trajectory {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.columns.iter().position(|x| x == name)?;
        Some(self.values.iter().map(|r| r[c]).collect())
    }

    pub fn is_valid(&self, eps: f64) -> bool {
        self.leakage_max < eps
    }

    fn push(&mut self, (row, leak, per_mode): (Vec<f64>, f64, Vec<f64>)) {
        self.leakage_max = self.leakage_max.max(leak);
        for (a, b) in self.mode_leakage.iter_mut().zip(per_mode) {
            *a = a.max(b);
        }
        self.values.push(row);
    }
}

fn collect(probe: &Probe, space: &SpaceDescriptor, times: &[f64], provenance: Provenance) -> Trajectory {
    let n_modes = space.n_subsystems() - 1;
    Trajectory {
        times: times.to_vec(),
        columns: probe.columns(n_modes),
        values: Vec::with_capacity(times.len()),
        leakage_max: probe.initial_leakage,
        mode_leakage: vec![0.0; n_modes],
        provenance,
    }
}

/// Unitary run from a weighted-ket ensemble.
pub fn run_unitary(prop: &Propagator, init: &Ensemble, times: &[f64], probe: &Probe) -> Result<Trajectory> {
    let space = prop.space();
    if init.space.dims() != space.dims() {
        return Err(Error::DimensionMismatch { expected: space.total_dim(), got: init.space.total_dim() });
    }
    probe.check(space)?;
    let (nb, big) = prop.block_stats();
    let prov = Provenance {
        solver: "block-eigendecomposition".into(),
        rtol: None,
        atol: None,
        blocks: Some(nb),
        largest_block: Some(big),
        trace_drift_max: None,
    };
    let mut traj = collect(probe, space, times, prov);
    let prepared: Vec<PreparedKet> = init.members.iter().map(|(w, v)| prop.prepare(*w, v)).collect();
    let supports: Vec<Vec<usize>> = prepared.iter().map(|k| prop.support(k)).collect();
    let layout = KetLayout::new(space, &supports);
    let mut members: Vec<(f64, Array1<C64>)> =
        prepared.iter().map(|k| (k.weight, Array1::zeros(space.total_dim()))).collect();
    for &t in times {
        for (k, slot) in prepared.iter().zip(members.iter_mut()) {
            prop.evolve_prepared(k, t, &mut slot.1);
        }
        traj.push(probe.record(&Snapshot::Kets { space, members: &members, layout: &layout })?);
    }
    Ok(traj)
}

/// Unitary evolution of an arbitrary state; returns the state at every
/// grid point.
pub fn unitary_evolve(h: &Operator, state0: &QuantumState, grid: &TimeGrid) -> Result<Vec<QuantumState>> {
    grid.validate()?;
    if h.space().dims() != state0.space().dims() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: state0.space().total_dim() });
    }
    let prop = Propagator::from_operator(h)?;
    let ens = state0.to_ensemble()?;
    let prepared: Vec<PreparedKet> = ens.members.iter().map(|(w, v)| prop.prepare(*w, v)).collect();
    grid.points()
        .into_iter()
        .map(|t| {
            let members: Vec<(f64, Array1<C64>)> = prepared
                .iter()
                .map(|k| {
                    let mut v = Array1::zeros(h.dim());
                    prop.evolve_prepared(k, t, &mut v);
                    (k.weight, v)
                })
                .collect();
            match state0 {
                QuantumState::Ket { .. } => {
                    Ok(QuantumState::Ket { space: h.space().clone(), amps: members.into_iter().next().unwrap().1 })
                }
                QuantumState::Density(_) => Ok(Ensemble { space: h.space().clone(), members }.to_state()),
            }
        })
        .collect()
}

/// Right-hand side of the master equation, `rho` stored row-major.
struct Lindbladian {
    /// `H - (i/2) sum L†L`.
    h_eff: SparseOperator,
    jumps: Vec<SparseOperator>,
    n: usize,
}

impl Lindbladian {
    fn new(h: &SparseOperator, jumps: &[SparseOperator]) -> Result<Self> {
        let mut h_eff = h.clone();
        for l in jumps {
            if l.space().dims() != h.space().dims() {
                return Err(Error::DimensionMismatch { expected: h.dim(), got: l.dim() });
            }
            h_eff = h_eff.add(&l.adjoint().matmul(l)?.scale(C64::new(0.0, -0.5)))?;
        }
        Ok(Self { h_eff, jumps: jumps.to_vec(), n: h.dim() })
    }

    fn apply(&self, rho: &[C64], out: &mut [C64], scratch: &mut Array2<C64>) {
        let n = self.n;
        let rho = ndarray::ArrayView2::from_shape((n, n), rho).unwrap().to_owned();
        let mut acc = Array2::zeros((n, n));
        self.h_eff.left_mul_acc(&rho, C64::new(0.0, -1.0), &mut acc);
        self.h_eff.right_mul_adjoint_acc(&rho, C64::new(0.0, 1.0), &mut acc);
        for l in &self.jumps {
            scratch.fill(ZERO);
            l.left_mul_acc(&rho, C64::new(1.0, 0.0), scratch);
            l.right_mul_adjoint_acc(scratch, C64::new(1.0, 0.0), &mut acc);
        }
        out.copy_from_slice(acc.as_slice().unwrap());
    }
}

/// Lindblad run from an ensemble, integrated with Dormand-Prince 5(4).
pub fn run_lindblad(
    h: &SparseOperator,
    jumps: &[SparseOperator],
    init: &Ensemble,
    times: &[f64],
    probe: &Probe,
    tol: &Tolerances,
) -> Result<Trajectory> {
    let space = h.space();
    probe.check(space)?;
    let n = h.dim();
    let dev = h.hermiticity_deviation();
    if dev > PROPAGATOR_HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let rho0 = match init.to_state() {
        QuantumState::Ket { amps, .. } => Operator::outer(space, &amps)?.into_data(),
        QuantumState::Density(op) => op.into_data(),
    };
    let trace0 = rho0.diag().iter().map(|z| z.re).sum::<f64>();
    let lv = Lindbladian::new(h, jumps)?;
    let prov = Provenance {
        solver: "dopri5".into(),
        rtol: Some(tol.rtol),
        atol: Some(tol.atol),
        blocks: None,
        largest_block: None,
        trace_drift_max: Some(0.0),
    };
    let mut traj = collect(probe, space, times, prov);
    let mut scratch = Array2::zeros((n, n));
    let mut drift_max = 0.0f64;
    let y0: Vec<C64> = rho0.iter().copied().collect();
    integrate(
        |_, y, dy| lv.apply(y, dy, &mut scratch),
        &y0,
        times,
        tol,
        |_, t, y| {
            let raw = ndarray::ArrayView2::from_shape((n, n), y).unwrap();
            let rho = (&raw + &raw.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
            let tr = rho.diag().iter().map(|z| z.re).sum::<f64>();
            let drift = (tr - trace0).abs();
            if drift > TRACE_DRIFT_LIMIT {
                return Err(Error::Solver(format!("trace drift {drift:.3e} at t = {t} exceeds {TRACE_DRIFT_LIMIT:e}")));
            }
            drift_max = drift_max.max(drift);
            traj.push(probe.record(&Snapshot::Density { space, rho: &rho })?);
            Ok(())
        },
    )?;
    traj.provenance.trace_drift_max = Some(drift_max);
    Ok(traj)
}

/// Lindblad evolution returning the (symmetrised) density matrix at every
/// grid point.
pub fn lindblad_evolve(h: &Operator, jumps: &[Operator], rho0: &QuantumState, grid: &TimeGrid) -> Result<Vec<Operator>> {
    grid.validate()?;
    let to_sparse = |op: &Operator| {
        let trip =
            op.data().indexed_iter().filter(|(_, v)| **v != ZERO).map(|((i, j), v)| (i, j, *v)).collect();
        SparseOperator::from_triplets(op.space(), trip)
    };
    let hs = to_sparse(h)?;
    let js: Vec<SparseOperator> = jumps.iter().map(to_sparse).collect::<Result<_>>()?;
    let lv = Lindbladian::new(&hs, &js)?;
    let n = h.dim();
    let rho = rho0.to_density();
    if rho.space().dims() != h.space().dims() {
        return Err(Error::DimensionMismatch { expected: n, got: rho.dim() });
    }
    let trace0 = rho.trace().re;
    let mut scratch = Array2::zeros((n, n));
    let mut out = Vec::new();
    let y0: Vec<C64> = rho.data().iter().copied().collect();
    integrate(|_, y, dy| lv.apply(y, dy, &mut scratch), &y0, &grid.points(), &Tolerances::default(), |_, t, y| {
        let raw = ndarray::ArrayView2::from_shape((n, n), y).unwrap();
        let sym = (&raw + &raw.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
        let drift = (sym.diag().iter().map(|z| z.re).sum::<f64>() - trace0).abs();
        if drift > TRACE_DRIFT_LIMIT {
            return Err(Error::Solver(format!("trace drift {drift:.3e} at t = {t}")));
        }
        out.push(Operator::new(h.space().clone(), sym)?);
        Ok(())
    })?;
    Ok(out)
}

/// Integrates the amplitudes on `{|g00>, |e00>, |g m 0>, |g 0 m>}` under
/// independent detunings and Kerr strengths, from `(cos φ, sin φ, 0, 0)`.
pub fn coefficient_ode_evolve(p: &ModelParams, phi: f64, grid: &TimeGrid) -> Result<Vec<Coefficients>> {
    p.validate()?;
    grid.validate()?;
    let mf = factorial(p.m)? as f64;
    let m = p.m as f64;
    let w0 = p.omega0();
    let e = [
        -w0 / 2.0,
        w0 / 2.0,
        -w0 / 2.0 + m * p.omega1 + p.chi1 * (m * m - m),
        -w0 / 2.0 + m * p.omega2 + p.chi2 * (m * m - m),
    ];
    let (k1, k2) = (p.g1 * mf.sqrt(), p.g2 * mf.sqrt());
    let mi = C64::new(0.0, -1.0);
    let rhs = |_: f64, x: &[C64], dx: &mut [C64]| {
        dx[0] = mi * e[0] * x[0];
        dx[1] = mi * (e[1] * x[1] + k1 * x[2] + k2 * x[3]);
        dx[2] = mi * (e[2] * x[2] + k1 * x[1]);
        dx[3] = mi * (e[3] * x[3] + k2 * x[1]);
    };
    let gt = p.g_tilde();
    let (d1, _) = p.detunings();
    let s = 0.5 * (4.0 * mf * gt * gt + d1 * d1).sqrt();
    let y0 = [C64::new(phi.cos(), 0.0), C64::new(phi.sin(), 0.0), ZERO, ZERO];
    let mut out = Vec::with_capacity(grid.n_points);
    integrate(rhs, &y0, &grid.points(), &Tolerances::tight(), |_, t, x| {
        let c = Coefficients { x: [x[0], x[1], x[2], x[3]], t, m: p.m, tau: mf.sqrt() * gt * t, g_tilde: gt, g12: g12(p.g1, p.g2), s };
        if (c.norm_sqr() - 1.0).abs() > 1e-10 {
            return Err(Error::Solver(format!("unitarity drift {:.3e} at t = {t}", c.norm_sqr() - 1.0)));
        }
        out.push(c);
        Ok(())
    })?;
    Ok(out)
}

/// First local maximum of a sampled curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakEstimate {
    pub value: f64,
    pub time: f64,
    /// False when the curve has no interior maximum; `value` is then the
    /// last sample.
    pub found: bool,
}

/// First interior sample with `v[i-1] < v[i] >= v[i+1]`, refined by the
/// parabola through the three points.
pub fn first_peak(times: &[f64], values: &[f64]) -> Result<PeakEstimate> {
    if times.len() != values.len() || values.is_empty() {
        return Err(Error::invalid("peak search needs matching, non-empty series"));
    }
    for i in 1..values.len().saturating_sub(1) {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if a < b && b >= c {
            let denom = a - 2.0 * b + c;
            if denom == 0.0 {
                return Ok(PeakEstimate { value: b, time: times[i], found: true });
            }
            let delta = 0.5 * (a - c) / denom;
            let h = 0.5 * (times[i + 1] - times[i - 1]);
            return Ok(PeakEstimate { value: b - 0.25 * (a - c) * delta, time: times[i] + delta * h, found: true });
        }
    }
    let last = values.len() - 1;
    Ok(PeakEstimate { value: values[last], time: times[last], found: false })
}

/// First-oscillation amplitude of the trajectory's `L` column.
pub fn lmax_estimate(traj: &Trajectory) -> Result<PeakEstimate> {
    let l = traj.column("L").ok_or_else(|| Error::invalid("trajectory has no L column"))?;
    first_peak(&traj.times, &l)
}
