//! Hamiltonians and Lindblad jump operators.
//!
//! All builders assemble a [`SparseOperator`] first; the dense [`Operator`]
//! versions are conveniences on top. Everything is in the lab frame.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation_local, annihilation_power_local, creation_local, number_local, sigma_minus_local,
    sigma_plus_local, sigma_z_local, Operator, SpaceDescriptor, SparseOperator, EXCITED,
};
use crate::C64;

/// Largest photon order accepted; `m!` stays exact in `u64` up to 20.
pub const MAX_ORDER: u32 = 20;

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Photon order of the exchange `a^m σ+ + h.c.`.
    pub m: u32,
    #[serde(default = "default_coupling")]
    pub g1: f64,
    #[serde(default = "default_coupling")]
    pub g2: f64,
    #[serde(default = "one")]
    pub omega1: f64,
    #[serde(default = "one")]
    pub omega2: f64,
    /// Spin splitting. Omitted means resonant, `m * omega1`.
    #[serde(default)]
    pub omega0: Option<f64>,
    #[serde(default)]
    pub chi1: f64,
    #[serde(default)]
    pub chi2: f64,
    #[serde(default)]
    pub gz1: f64,
    #[serde(default)]
    pub gz2: f64,
}

fn default_coupling() -> f64 {
    std::f64::consts::FRAC_1_SQRT_2
}

fn one() -> f64 {
    1.0
}

impl ModelParams {
    /// Resonant model with unit mode frequencies and the given couplings.
    pub fn resonant(m: u32, g1: f64, g2: f64) -> Self {
        Self { m, g1, g2, omega1: 1.0, omega2: 1.0, omega0: None, chi1: 0.0, chi2: 0.0, gz1: 0.0, gz2: 0.0 }
    }

    /// `g1 = g2 = 1/sqrt(2)`, so the collective coupling is 1.
    pub fn symmetric(m: u32) -> Self {
        Self::resonant(m, default_coupling(), default_coupling())
    }

    pub fn omega0(&self) -> f64 {
        self.omega0.unwrap_or(self.m as f64 * self.omega1)
    }

    /// `(Δ1, Δ2)` with `Δi = ω0 - m ωi`.
    pub fn detunings(&self) -> (f64, f64) {
        let m = self.m as f64;
        (self.omega0() - m * self.omega1, self.omega0() - m * self.omega2)
    }

    /// Common detuning; only defined when `ω1 = ω2`.
    pub fn detuning(&self) -> Result<f64> {
        if self.omega1 != self.omega2 {
            return Err(Error::invalid("a single detuning needs omega1 == omega2"));
        }
        Ok(self.detunings().0)
    }

    /// Sets `ω0` so that the common detuning equals `delta`.
    pub fn with_detuning(mut self, delta: f64) -> Self {
        self.omega0 = Some(self.m as f64 * self.omega1 + delta);
        self
    }

    /// `sqrt(g1² + g2²)`.
    pub fn g_tilde(&self) -> f64 {
        self.g1.hypot(self.g2)
    }

    /// Single-excitation Rabi frequency `sqrt(m!) g̃`.
    pub fn rabi_frequency(&self) -> f64 {
        (factorial(self.m).expect("validated order") as f64).sqrt() * self.g_tilde()
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > MAX_ORDER {
            return Err(Error::invalid(format!("photon order m = {} outside 1..={MAX_ORDER}", self.m)));
        }
        let vals = [
            self.g1, self.g2, self.omega1, self.omega2, self.omega0(), self.chi1, self.chi2, self.gz1, self.gz2,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("model parameters must be finite"));
        }
        Ok(())
    }
}

/// Exact `m!`, failing above [`MAX_ORDER`].
pub fn factorial(m: u32) -> Result<u64> {
    if m > MAX_ORDER {
        return Err(Error::invalid(format!("m = {m} exceeds the supported order {MAX_ORDER}")));
    }
    Ok((1..=m as u64).product())
}

/// Form of the spin dephasing jump operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DephasingForm {
    /// `sqrt(λ_dq) σ+σ-`.
    #[default]
    Projector,
    /// `sqrt(λ_dq / 2) σz`.
    PauliZ,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathParams {
    #[serde(default)]
    pub nbar_th: f64,
    /// Mode relaxation, shared by both modes.
    #[serde(default)]
    pub lambda_rb: f64,
    /// Mode dephasing.
    #[serde(default)]
    pub lambda_db: f64,
    /// Spin relaxation.
    #[serde(default)]
    pub lambda_rq: f64,
    /// Spin dephasing.
    #[serde(default)]
    pub lambda_dq: f64,
    #[serde(default)]
    pub dephasing: DephasingForm,
}

impl BathParams {
    pub fn uniform(rate: f64, nbar_th: f64) -> Self {
        Self {
            nbar_th,
            lambda_rb: rate,
            lambda_db: rate,
            lambda_rq: rate,
            lambda_dq: rate,
            dephasing: DephasingForm::Projector,
        }
    }

    pub fn dissipation_only(rate: f64, nbar_th: f64) -> Self {
        Self { lambda_db: 0.0, lambda_dq: 0.0, ..Self::uniform(rate, nbar_th) }
    }

    pub fn dephasing_only(rate: f64) -> Self {
        Self { lambda_rb: 0.0, lambda_rq: 0.0, ..Self::uniform(rate, 0.0) }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("nbar_th", self.nbar_th),
            ("lambda_rb", self.lambda_rb),
            ("lambda_db", self.lambda_db),
            ("lambda_rq", self.lambda_rq),
            ("lambda_dq", self.lambda_dq),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// True if some operator raises a mode occupation.
    pub fn heats(&self) -> bool {
        self.lambda_rb > 0.0 && self.nbar_th > 0.0
    }
}

/// Per-mode coefficients of the generic builder.
struct ModeTerms {
    omega: f64,
    g: f64,
    chi: f64,
    gz: f64,
}

fn check_space(space: &SpaceDescriptor, n_modes: usize, m: u32) -> Result<()> {
    if space.n_subsystems() != n_modes + 1 || space.dims()[0] != 2 {
        return Err(Error::invalid(format!(
            "expected a spin plus {n_modes} mode(s), got dims {:?}",
            space.dims()
        )));
    }
    for &n in space.mode_cutoffs() {
        if n < m as usize + 1 {
            return Err(Error::invalid(format!(
                "cutoff {n} is below m + 1 = {}; the exchange term would vanish",
                m + 1
            )));
        }
    }
    Ok(())
}

fn build(space: &SpaceDescriptor, omega0: f64, m: u32, modes: &[ModeTerms]) -> Result<SparseOperator> {
    check_space(space, modes.len(), m)?;
    let sz = sigma_z_local();
    let sp = sigma_plus_local();
    let sm = sigma_minus_local();
    let mut h = SparseOperator::local_product(space, &[(0, &sz)], re(omega0 / 2.0))?;
    for (k, t) in modes.iter().enumerate() {
        let slot = k + 1;
        let n = space.dims()[slot];
        let am = annihilation_power_local(n, m as usize);
        let am_dag = am.t().to_owned();
        let num = number_local(n);
        h = h.add(&SparseOperator::local_product(space, &[(slot, &num)], re(t.omega))?)?;
        h = h.add(&SparseOperator::local_product(space, &[(0, &sp), (slot, &am)], re(t.g))?)?;
        h = h.add(&SparseOperator::local_product(space, &[(0, &sm), (slot, &am_dag)], re(t.g))?)?;
        if t.chi != 0.0 {
            // a†² a² = n(n-1)
            let kerr = Array2::from_diag(&ndarray::Array1::from_iter((0..n).map(|j| re((j * j.saturating_sub(1)) as f64))));
            h = h.add(&SparseOperator::local_product(space, &[(slot, &kerr)], re(t.chi))?)?;
        }
        if t.gz != 0.0 {
            let x = (annihilation_local(n) + creation_local(n)).mapv(|z| z * std::f64::consts::FRAC_1_SQRT_2);
            h = h.add(&SparseOperator::local_product(space, &[(0, &sz), (slot, &x)], re(t.gz))?)?;
        }
    }
    Ok(h)
}

/// Which extensions to include on top of the bare exchange Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Plain,
    Kerr,
    Dispersive,
    /// Kerr and dispersive terms together.
    Full,
}

/// Sparse two-mode Hamiltonian of the chosen variant.
pub fn hamiltonian_sparse(p: &ModelParams, variant: Variant, space: &SpaceDescriptor) -> Result<SparseOperator> {
    p.validate()?;
    let (kerr, disp) = match variant {
        Variant::Plain => (false, false),
        Variant::Kerr => (true, false),
        Variant::Dispersive => (false, true),
        Variant::Full => (true, true),
    };
    let terms = [
        ModeTerms {
            omega: p.omega1,
            g: p.g1,
            chi: if kerr { p.chi1 } else { 0.0 },
            gz: if disp { p.gz1 } else { 0.0 },
        },
        ModeTerms {
            omega: p.omega2,
            g: p.g2,
            chi: if kerr { p.chi2 } else { 0.0 },
            gz: if disp { p.gz2 } else { 0.0 },
        },
    ];
    build(space, p.omega0(), p.m, &terms)
}

pub fn mpjc_hamiltonian(p: &ModelParams, space: &SpaceDescriptor) -> Result<Operator> {
    Ok(hamiltonian_sparse(p, Variant::Plain, space)?.to_dense())
}

pub fn kerr_hamiltonian(p: &ModelParams, space: &SpaceDescriptor) -> Result<Operator> {
    Ok(hamiltonian_sparse(p, Variant::Kerr, space)?.to_dense())
}

pub fn dispersive_hamiltonian(p: &ModelParams, space: &SpaceDescriptor) -> Result<Operator> {
    Ok(hamiltonian_sparse(p, Variant::Dispersive, space)?.to_dense())
}

/// Spin plus one mode: `(ω0/2)σz + ω a†a + g(a^m σ+ + h.c.) + g_z σz X`.
pub fn single_mode_hamiltonian_sparse(
    omega0: f64,
    omega: f64,
    g: f64,
    gz: f64,
    m: u32,
    cutoff: usize,
) -> Result<SparseOperator> {
    factorial(m)?;
    if m == 0 {
        return Err(Error::invalid("photon order m must be at least 1"));
    }
    let space = SpaceDescriptor::single_mode_space(cutoff)?;
    build(&space, omega0, m, &[ModeTerms { omega, g, chi: 0.0, gz }])
}

pub fn single_mode_hamiltonian(omega0: f64, omega: f64, g: f64, gz: f64, m: u32, cutoff: usize) -> Result<Operator> {
    Ok(single_mode_hamiltonian_sparse(omega0, omega, g, gz, m, cutoff)?.to_dense())
}

/// Jump operators for every mode slot and the spin; zero-rate operators
/// are left out.
pub fn lindblad_ops_sparse(b: &BathParams, space: &SpaceDescriptor) -> Result<Vec<SparseOperator>> {
    b.validate()?;
    if space.dims()[0] != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: space.dims()[0] });
    }
    let mut ops = Vec::new();
    let mut push = |rate: f64, factors: &[(usize, &Array2<C64>)]| -> Result<()> {
        if rate > 0.0 {
            ops.push(SparseOperator::local_product(space, factors, re(rate.sqrt()))?);
        }
        Ok(())
    };
    for slot in 1..space.n_subsystems() {
        let n = space.dims()[slot];
        push(b.lambda_rb * (1.0 + b.nbar_th), &[(slot, &annihilation_local(n))])?;
        push(b.lambda_rb * b.nbar_th, &[(slot, &creation_local(n))])?;
        push(b.lambda_db, &[(slot, &number_local(n))])?;
    }
    push(b.lambda_rq * (1.0 + b.nbar_th), &[(0, &sigma_minus_local())])?;
    push(b.lambda_rq * b.nbar_th, &[(0, &sigma_plus_local())])?;
    match b.dephasing {
        DephasingForm::Projector => {
            let pe = sigma_plus_local().dot(&sigma_minus_local());
            push(b.lambda_dq, &[(0, &pe)])?;
        }
        DephasingForm::PauliZ => push(b.lambda_dq / 2.0, &[(0, &sigma_z_local())])?,
    }
    Ok(ops)
}

pub fn lindblad_ops(b: &BathParams, space: &SpaceDescriptor) -> Result<Vec<Operator>> {
    Ok(lindblad_ops_sparse(b, space)?.iter().map(SparseOperator::to_dense).collect())
}

/// Basis states that the untruncated generator couples to levels beyond
/// the cutoff. Population found here is the dynamical truncation leakage.
///
/// `couplings[k]` is the exchange strength of mode `k+1`; `dispersive[k]`
/// its `σz X` strength.
pub fn boundary_mask(
    space: &SpaceDescriptor,
    m: u32,
    couplings: &[f64],
    dispersive: &[f64],
    bath: Option<&BathParams>,
) -> Vec<bool> {
    boundary_flags(space, m, couplings, dispersive, bath).into_iter().map(|f| f != 0).collect()
}

/// Per-state bit set of [`boundary_mask`]: bit `k` marks the boundary of
/// mode `k+1`.
pub fn boundary_flags(
    space: &SpaceDescriptor,
    m: u32,
    couplings: &[f64],
    dispersive: &[f64],
    bath: Option<&BathParams>,
) -> Vec<u8> {
    let heats = bath.is_some_and(BathParams::heats);
    let m = m as usize;
    (0..space.total_dim())
        .map(|i| {
            let lv = space.levels(i);
            lv[1..].iter().enumerate().fold(0u8, |acc, (k, &n)| {
                let cut = space.dims()[k + 1];
                let g = couplings.get(k).copied().unwrap_or(0.0);
                let gz = dispersive.get(k).copied().unwrap_or(0.0);
                let exchange = g != 0.0 && lv[0] == EXCITED && n + m >= cut;
                let top = (gz != 0.0 || heats) && n + 1 == cut;
                if exchange || top {
                    acc | (1 << k)
                } else {
                    acc
                }
            })
        })
        .collect()
}

/// [`boundary_mask`] for the two-mode model of the given variant.
pub fn model_boundary_mask(
    p: &ModelParams,
    variant: Variant,
    bath: Option<&BathParams>,
    space: &SpaceDescriptor,
) -> Vec<bool> {
    model_boundary_flags(p, variant, bath, space).into_iter().map(|f| f != 0).collect()
}

pub fn model_boundary_flags(
    p: &ModelParams,
    variant: Variant,
    bath: Option<&BathParams>,
    space: &SpaceDescriptor,
) -> Vec<u8> {
    let disp = matches!(variant, Variant::Dispersive | Variant::Full);
    let gz = if disp { [p.gz1, p.gz2] } else { [0.0, 0.0] };
    boundary_flags(space, p.m, &[p.g1, p.g2], &gz, bath)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(m: u32) -> ModelParams {
        ModelParams { omega0: Some(1.3), omega1: 0.9, omega2: 1.1, ..ModelParams::resonant(m, 0.4, 0.7) }
    }

    #[test]
    fn free_hamiltonian_is_diagonal() {
        let space = SpaceDescriptor::fock_space(3, 3).unwrap();
        let h = mpjc_hamiltonian(&ModelParams { g1: 0.0, g2: 0.0, ..params(1) }, &space).unwrap();
        for i in 0..h.dim() {
            for j in 0..h.dim() {
                if i != j {
                    assert_eq!(h.data()[[i, j]], C64::new(0.0, 0.0));
                }
            }
        }
        let lv = space.index(&[1, 2, 1]);
        assert_abs_diff_eq!(h.data()[[lv, lv]].re, 0.65 + 2.0 * 0.9 + 1.1, epsilon = 1e-15);
    }

    #[test]
    fn exchange_matrix_element() {
        for m in 1..=3u32 {
            let space = SpaceDescriptor::fock_space(m as usize + 1, m as usize + 1).unwrap();
            let p = params(m);
            let h = mpjc_hamiltonian(&p, &space).unwrap();
            let gm0 = space.index(&[0, m as usize, 0]);
            let e00 = space.index(&[1, 0, 0]);
            let expect = p.g1 * (factorial(m).unwrap() as f64).sqrt();
            assert_abs_diff_eq!(h.data()[[gm0, e00]].re, expect, epsilon = 1e-12);
            assert!(h.hermiticity_deviation() < 1e-12);
        }
        assert!(mpjc_hamiltonian(&params(2), &SpaceDescriptor::fock_space(2, 3).unwrap()).is_err());
    }

    #[test]
    fn conserved_excitation_number() {
        let m = 2;
        let space = SpaceDescriptor::fock_space(5, 5).unwrap();
        let h = mpjc_hamiltonian(&params(m), &space).unwrap();
        let k = Operator::new(
            space.clone(),
            Array2::from_diag(&ndarray::Array1::from_iter((0..space.total_dim()).map(|i| {
                let l = space.levels(i);
                re(l[0] as f64 + (l[1] + l[2]) as f64 / m as f64)
            }))),
        )
        .unwrap();
        let c = h.commutator(&k).unwrap();
        assert!(c.data().iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn kerr_and_dispersive_terms() {
        let space = SpaceDescriptor::fock_space(4, 4).unwrap();
        let base = params(1);
        let plain = mpjc_hamiltonian(&base, &space).unwrap();
        assert_eq!(kerr_hamiltonian(&base, &space).unwrap(), plain);
        assert_eq!(dispersive_hamiltonian(&base, &space).unwrap(), plain);

        let p = ModelParams { chi1: 0.3, ..base.clone() };
        let diff = kerr_hamiltonian(&p, &space).unwrap().sub(&plain).unwrap();
        for n in 0..4 {
            let i = space.index(&[1, n, 2]);
            assert_abs_diff_eq!(diff.data()[[i, i]].re, 0.3 * (n * n.saturating_sub(1)) as f64, epsilon = 1e-14);
        }

        let p = ModelParams { gz1: 0.8, gz2: 0.2, ..base };
        let h = dispersive_hamiltonian(&p, &space).unwrap();
        let g10 = space.index(&[0, 1, 0]);
        let g00 = space.index(&[0, 0, 0]);
        assert_abs_diff_eq!(h.data()[[g10, g00]].re, -0.8 / 2f64.sqrt(), epsilon = 1e-15);
        assert!(h.hermiticity_deviation() < 1e-12);
    }

    #[test]
    fn single_mode_matches_two_mode_sector() {
        let n = 4;
        let m = 1;
        let p = ModelParams { g2: 0.0, gz1: 0.6, gz2: 0.0, ..params(m) };
        let space = SpaceDescriptor::fock_space(n, n).unwrap();
        let h2 = dispersive_hamiltonian(&p, &space).unwrap();
        let h1 = single_mode_hamiltonian(p.omega0(), p.omega1, p.g1, p.gz1, m, n).unwrap();
        for s in 0..2 {
            for a in 0..n {
                for s2 in 0..2 {
                    for b in 0..n {
                        let i2 = space.index(&[s, a, 0]);
                        let j2 = space.index(&[s2, b, 0]);
                        assert_abs_diff_eq!((h2.data()[[i2, j2]] - h1.data()[[s * n + a, s2 * n + b]]).norm(), 0.0, epsilon = 1e-15);
                    }
                }
            }
        }
        assert!(h1.hermiticity_deviation() < 1e-12);
    }

    #[test]
    fn jump_operator_counts() {
        let space = SpaceDescriptor::fock_space(3, 3).unwrap();
        assert!(lindblad_ops(&BathParams::uniform(0.0, 0.0), &space).unwrap().is_empty());
        assert_eq!(lindblad_ops(&BathParams::uniform(0.05, 0.0), &space).unwrap().len(), 6);
        assert_eq!(lindblad_ops(&BathParams::uniform(0.05, 0.2), &space).unwrap().len(), 9);
        let mut bad = BathParams::uniform(0.05, 0.0);
        bad.lambda_db = -1.0;
        assert!(lindblad_ops(&bad, &space).is_err());
    }

    #[test]
    fn boundary_is_empty_for_minimal_ground_sector() {
        let m = 2;
        let space = SpaceDescriptor::fock_space(3, 3).unwrap();
        let mask = model_boundary_mask(&ModelParams::symmetric(m), Variant::Plain, None, &space);
        for i in [space.index(&[0, 0, 0]), space.index(&[1, 0, 0]), space.index(&[0, 2, 0]), space.index(&[0, 0, 2])] {
            assert!(!mask[i]);
        }
        assert!(mask[space.index(&[1, 1, 0])]);
    }
}
