//! Initial spin and bosonic states.
//!
//! Truncated bosonic states are never renormalised. Each constructor
//! computes the population it drops above the cutoff (the leakage) from
//! the exact distribution and refuses to build the state when that
//! leakage reaches the tolerance `eps`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{Operator, SpaceDescriptor};
use crate::C64;

/// Default truncation tolerance.
pub const DEFAULT_EPS: f64 = 1e-8;

/// Largest cutoff the automatic selection will consider.
pub const MAX_AUTO_CUTOFF: usize = 60;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpinPrep {
    /// `cos φ |g> + sin φ |e>`.
    Superposition { phi: f64 },
    /// `diag(1 - p_e, p_e)`.
    Thermal { p_e: f64 },
}

impl SpinPrep {
    /// Superposition with excited population `p_e`, i.e. `φ = asin(sqrt(p_e))`.
    pub fn superposition_pe(p_e: f64) -> Self {
        SpinPrep::Superposition { phi: p_e.clamp(0.0, 1.0).sqrt().asin() }
    }

    pub fn p_e(&self) -> f64 {
        match *self {
            SpinPrep::Superposition { phi } => phi.sin().powi(2),
            SpinPrep::Thermal { p_e } => p_e,
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, SpinPrep::Superposition { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpinPrep::Superposition { phi } if !phi.is_finite() => Err(Error::invalid("phi must be finite")),
            SpinPrep::Thermal { p_e } if !(0.0..=1.0).contains(&p_e) => {
                Err(Error::invalid(format!("p_e = {p_e} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn factor(&self) -> Result<Factor> {
        self.validate()?;
        Ok(match *self {
            SpinPrep::Superposition { phi } => {
                Factor::Pure(Array1::from(vec![C64::new(phi.cos(), 0.0), C64::new(phi.sin(), 0.0)]))
            }
            SpinPrep::Thermal { p_e } => Factor::Diagonal(Array1::from(vec![1.0 - p_e, p_e])),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModePrep {
    Fock { n: usize },
    /// `alpha` is written `[re, im]` in configs.
    Coherent { alpha: C64 },
    SqueezedVacuum {
        r: f64,
        #[serde(default)]
        theta: f64,
    },
    Thermal { nbar: f64 },
    /// Phase-randomised coherent state of amplitude `|alpha|`.
    Prcs { alpha: f64 },
    /// Phase-randomised squeezed vacuum.
    Prss { r: f64 },
}

impl ModePrep {
    pub const VACUUM: ModePrep = ModePrep::Fock { n: 0 };

    /// State of the given family with mean photon number `nbar`
    /// (`|alpha|^2 = sinh^2 r = nbar`). Fock needs an integer `nbar`.
    pub fn with_mean_energy(kind: &str, nbar: f64) -> Result<Self> {
        if !(nbar >= 0.0 && nbar.is_finite()) {
            return Err(Error::invalid(format!("mean energy {nbar} must be finite and >= 0")));
        }
        let r = nbar.sqrt().asinh();
        Ok(match kind {
            "fock" => {
                if nbar.fract() != 0.0 {
                    return Err(Error::invalid(format!("Fock state needs integer n, got {nbar}")));
                }
                ModePrep::Fock { n: nbar as usize }
            }
            "coherent" | "cs" => ModePrep::Coherent { alpha: C64::new(nbar.sqrt(), 0.0) },
            "squeezed_vacuum" | "sqv" => ModePrep::SqueezedVacuum { r, theta: 0.0 },
            "thermal" => ModePrep::Thermal { nbar },
            "prcs" => ModePrep::Prcs { alpha: nbar.sqrt() },
            "prss" => ModePrep::Prss { r },
            other => return Err(Error::invalid(format!("unknown mode state kind '{other}'"))),
        })
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, ModePrep::Fock { .. } | ModePrep::Coherent { .. } | ModePrep::SqueezedVacuum { .. })
    }

    /// Exact mean photon number of the untruncated state.
    pub fn mean_photon_number(&self) -> f64 {
        match *self {
            ModePrep::Fock { n } => n as f64,
            ModePrep::Coherent { alpha } => alpha.norm_sqr(),
            ModePrep::SqueezedVacuum { r, .. } | ModePrep::Prss { r } => r.sinh().powi(2),
            ModePrep::Thermal { nbar } => nbar,
            ModePrep::Prcs { alpha } => alpha * alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::invalid(what.to_string()));
        match *self {
            ModePrep::Fock { .. } => Ok(()),
            ModePrep::Coherent { alpha } if !(alpha.re.is_finite() && alpha.im.is_finite()) => {
                bad("coherent amplitude must be finite")
            }
            ModePrep::SqueezedVacuum { r, theta } if !(r >= 0.0 && r.is_finite() && theta.is_finite()) => {
                bad("squeezing r must be finite and >= 0")
            }
            ModePrep::Prss { r } if !(r >= 0.0 && r.is_finite()) => bad("squeezing r must be finite and >= 0"),
            ModePrep::Thermal { nbar } if !(nbar >= 0.0 && nbar.is_finite()) => {
                bad("thermal nbar must be finite and >= 0")
            }
            ModePrep::Prcs { alpha } if !(alpha >= 0.0 && alpha.is_finite()) => {
                bad("PRCS amplitude must be finite and >= 0")
            }
            _ => Ok(()),
        }
    }

    /// Population above the cutoff, summed from the exact distribution.
    pub fn leakage(&self, cutoff: usize) -> f64 {
        match *self {
            ModePrep::Fock { n } => {
                if n < cutoff {
                    0.0
                } else {
                    1.0
                }
            }
            ModePrep::Coherent { alpha } => poisson_tail(alpha.norm_sqr(), cutoff),
            ModePrep::Prcs { alpha } => poisson_tail(alpha * alpha, cutoff),
            ModePrep::SqueezedVacuum { r, .. } | ModePrep::Prss { r } => squeezed_tail(r, cutoff),
            ModePrep::Thermal { nbar } => {
                if nbar == 0.0 {
                    0.0
                } else {
                    (nbar / (1.0 + nbar)).powi(cutoff as i32)
                }
            }
        }
    }

    /// Truncated state; fails if the leakage is not below `eps`.
    pub fn state(&self, cutoff: usize, eps: f64) -> Result<QuantumState> {
        let space = SpaceDescriptor::new(vec![cutoff], vec!["mode".into()])?;
        Ok(match self.factor(cutoff, eps)? {
            Factor::Pure(v) => QuantumState::Ket { space, amps: v },
            Factor::Diagonal(p) => {
                let d = Array2::from_diag(&p.mapv(|x| C64::new(x, 0.0)));
                QuantumState::Density(Operator::new(space, d)?)
            }
        })
    }

    pub(crate) fn factor(&self, cutoff: usize, eps: f64) -> Result<Factor> {
        self.validate()?;
        if cutoff == 0 {
            return Err(Error::invalid("cutoff must be at least 1"));
        }
        let leak = self.leakage(cutoff);
        if leak >= eps {
            return Err(Error::CutoffTooSmall { leakage: leak, eps });
        }
        Ok(match *self {
            ModePrep::Fock { n } => {
                let mut v = Array1::zeros(cutoff);
                v[n] = C64::new(1.0, 0.0);
                Factor::Pure(v)
            }
            ModePrep::Coherent { alpha } => Factor::Pure(coherent_amplitudes(alpha, cutoff)),
            ModePrep::SqueezedVacuum { r, theta } => Factor::Pure(squeezed_amplitudes(r, theta, cutoff)),
            ModePrep::Thermal { nbar } => {
                let q = nbar / (1.0 + nbar);
                Factor::Diagonal(Array1::from_iter((0..cutoff).map(|n| q.powi(n as i32) / (1.0 + nbar))))
            }
            ModePrep::Prcs { alpha } => {
                Factor::Diagonal(coherent_amplitudes(C64::new(alpha, 0.0), cutoff).mapv(|z| z.norm_sqr()))
            }
            ModePrep::Prss { r } => Factor::Diagonal(squeezed_amplitudes(r, 0.0, cutoff).mapv(|z| z.norm_sqr())),
        })
    }
}

impl fmt::Display for ModePrep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ModePrep::Fock { n } => write!(f, "fock:{n}"),
            ModePrep::Coherent { alpha } if alpha.im == 0.0 => write!(f, "coherent:{}", alpha.re),
            ModePrep::Coherent { alpha } => write!(f, "coherent:{},{}", alpha.re, alpha.im),
            ModePrep::SqueezedVacuum { r, theta } if theta == 0.0 => write!(f, "sqv:{r}"),
            ModePrep::SqueezedVacuum { r, theta } => write!(f, "sqv:{r},{theta}"),
            ModePrep::Thermal { nbar } => write!(f, "thermal:{nbar}"),
            ModePrep::Prcs { alpha } => write!(f, "prcs:{alpha}"),
            ModePrep::Prss { r } => write!(f, "prss:{r}"),
        }
    }
}

/// Parses `kind:value[,value]`, e.g. `coherent:1.0`, `sqv:0.88,0.5`,
/// `thermal:2`, `fock:3`, `prcs:1`, `prss:0.5`. A `nbar=` prefix on the
/// value selects by mean energy instead: `sqv:nbar=1`.
impl FromStr for ModePrep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("state spec '{s}' must look like kind:value")))?;
        let kind = kind.trim().to_ascii_lowercase();
        if let Some(nb) = rest.trim().strip_prefix("nbar=") {
            let nbar: f64 = nb.parse().map_err(|_| Error::invalid(format!("bad number '{nb}'")))?;
            return ModePrep::with_mean_energy(&kind, nbar);
        }
        let nums: Vec<f64> = rest
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad number '{x}' in '{s}'"))))
            .collect::<Result<_>>()?;
        let arg = |k: usize| nums.get(k).copied();
        let first = arg(0).ok_or_else(|| Error::invalid(format!("missing value in '{s}'")))?;
        let prep = match kind.as_str() {
            "fock" => {
                if first < 0.0 || first.fract() != 0.0 {
                    return Err(Error::invalid(format!("Fock level must be a non-negative integer in '{s}'")));
                }
                ModePrep::Fock { n: first as usize }
            }
            "coherent" | "cs" => ModePrep::Coherent { alpha: C64::new(first, arg(1).unwrap_or(0.0)) },
            "squeezed_vacuum" | "sqv" => ModePrep::SqueezedVacuum { r: first, theta: arg(1).unwrap_or(0.0) },
            "thermal" => ModePrep::Thermal { nbar: first },
            "prcs" => ModePrep::Prcs { alpha: first },
            "prss" => ModePrep::Prss { r: first },
            other => return Err(Error::invalid(format!("unknown mode state kind '{other}'"))),
        };
        prep.validate()?;
        Ok(prep)
    }
}

/// Smallest cutoff whose leakage is below `eps`, searched up to `cap`.
pub fn auto_cutoff(prep: &ModePrep, eps: f64, cap: usize) -> Result<usize> {
    prep.validate()?;
    for n in 1..=cap {
        if prep.leakage(n) < eps {
            return Ok(n);
        }
    }
    Err(Error::CutoffTooSmall { leakage: prep.leakage(cap), eps })
}

fn poisson_tail(x: f64, cutoff: usize) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    // p_cutoff by recurrence, then sum forward until the terms are negligible
    let mut p = (-x).exp();
    for n in 1..=cutoff {
        p *= x / n as f64;
    }
    let mut tail = 0.0;
    let mut n = cutoff;
    loop {
        tail += p;
        n += 1;
        p *= x / n as f64;
        if (n as f64 > x && p <= tail * 1e-18) || p == 0.0 {
            break;
        }
    }
    tail
}

fn squeezed_tail(r: f64, cutoff: usize) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let t2 = r.tanh().powi(2);
    // p_k is the weight on |2k>
    let first = cutoff.div_ceil(2);
    let mut p = 1.0 / r.cosh();
    for k in 1..=first {
        p *= t2 * (2 * k - 1) as f64 / (2 * k) as f64;
    }
    let mut tail = 0.0;
    let mut k = first;
    while p > tail * 1e-18 && p > 0.0 {
        tail += p;
        k += 1;
        p *= t2 * (2 * k - 1) as f64 / (2 * k) as f64;
    }
    tail
}

/// `e^{-|α|²/2} αⁿ/√(n!)`.
pub fn coherent_amplitudes(alpha: C64, cutoff: usize) -> Array1<C64> {
    let mut v = Array1::zeros(cutoff);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..cutoff {
        if n > 0 {
            c *= alpha / (n as f64).sqrt();
        }
        v[n] = c;
    }
    v
}

/// Amplitude `(-e^{-iθ} tanh r)^k sqrt((2k)!)/(2^k k!) / sqrt(cosh r)` on `|2k>`.
pub fn squeezed_amplitudes(r: f64, theta: f64, cutoff: usize) -> Array1<C64> {
    let mut v = Array1::zeros(cutoff);
    let ratio = -C64::from_polar(r.tanh(), -theta);
    let mut c = C64::new(1.0 / r.cosh().sqrt(), 0.0);
    let mut k = 0;
    while 2 * k < cutoff {
        if k > 0 {
            c *= ratio * ((2 * k - 1) as f64 / (2 * k) as f64).sqrt();
        }
        v[2 * k] = c;
        k += 1;
    }
    v
}

/// One tensor factor of a product initial state.
#[derive(Debug, Clone)]
pub(crate) enum Factor {
    Pure(Array1<C64>),
    /// Populations of a state diagonal in the local basis.
    Diagonal(Array1<f64>),
}

impl Factor {
    /// Weighted kets whose mixture is this factor.
    fn members(&self) -> Vec<(f64, Array1<C64>)> {
        match self {
            Factor::Pure(v) => vec![(1.0, v.clone())],
            Factor::Diagonal(p) => p
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(|(k, &w)| {
                    let mut v = Array1::zeros(p.len());
                    v[k] = C64::new(1.0, 0.0);
                    (w, v)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Ket { space: SpaceDescriptor, amps: Array1<C64> },
    Density(Operator),
}

impl QuantumState {
    pub fn ket(space: SpaceDescriptor, amps: Array1<C64>) -> Result<Self> {
        if amps.len() != space.total_dim() {
            return Err(Error::DimensionMismatch { expected: space.total_dim(), got: amps.len() });
        }
        Ok(QuantumState::Ket { space, amps })
    }

    pub fn space(&self) -> &SpaceDescriptor {
        match self {
            QuantumState::Ket { space, .. } => space,
            QuantumState::Density(op) => op.space(),
        }
    }

    pub fn is_pure_ket(&self) -> bool {
        matches!(self, QuantumState::Ket { .. })
    }

    pub fn to_density(&self) -> Operator {
        match self {
            QuantumState::Ket { space, amps } => Operator::outer(space, amps).expect("ket matches its space"),
            QuantumState::Density(op) => op.clone(),
        }
    }

    /// Norm squared of a ket or trace of a density matrix.
    pub fn trace(&self) -> f64 {
        match self {
            QuantumState::Ket { amps, .. } => amps.iter().map(|z| z.norm_sqr()).sum(),
            QuantumState::Density(op) => op.trace().re,
        }
    }

    pub fn purity(&self) -> f64 {
        match self {
            QuantumState::Ket { .. } => self.trace().powi(2),
            QuantumState::Density(op) => op.data().iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    /// Diagonal in the composite basis.
    pub fn populations(&self) -> Array1<f64> {
        match self {
            QuantumState::Ket { amps, .. } => amps.mapv(|z| z.norm_sqr()),
            QuantumState::Density(op) => op.data().diag().mapv(|z| z.re),
        }
    }

    /// `Tr(A rho)` or `<ψ|A|ψ>`.
    pub fn expect(&self, a: &Operator) -> Result<C64> {
        match self {
            QuantumState::Ket { amps, .. } => {
                let av = a.apply(amps)?;
                Ok(amps.iter().zip(av.iter()).map(|(x, y)| x.conj() * y).sum())
            }
            QuantumState::Density(op) => a.expect(op),
        }
    }

    /// Zero the off-diagonal elements.
    pub fn dephased(&self) -> QuantumState {
        let pops = self.populations().mapv(|p| C64::new(p, 0.0));
        QuantumState::Density(Operator::new(self.space().clone(), Array2::from_diag(&pops)).unwrap())
    }

    /// Weighted-ket decomposition: the ket itself, or the eigenvectors of
    /// a density matrix with positive weight.
    pub fn to_ensemble(&self) -> Result<Ensemble> {
        match self {
            QuantumState::Ket { space, amps } => Ok(Ensemble { space: space.clone(), members: vec![(1.0, amps.clone())] }),
            QuantumState::Density(op) => {
                let dev = op.hermiticity_deviation();
                if dev > 1e-10 {
                    return Err(Error::NotHermitian { deviation: dev });
                }
                let (vals, vecs) = crate::linalg::eigh(op.data().view());
                let members = vals
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 1e-15)
                    .map(|(k, &w)| (w, vecs.column(k).to_owned()))
                    .collect();
                Ok(Ensemble { space: op.space().clone(), members })
            }
        }
    }
}

/// `rho = sum_k w_k |v_k><v_k|`. Mixed product states are stored this way
/// so propagation only ever acts on kets.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub space: SpaceDescriptor,
    pub members: Vec<(f64, Array1<C64>)>,
}

impl Ensemble {
    pub fn total_weight(&self) -> f64 {
        self.members.iter().map(|(w, v)| w * v.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum()
    }

    pub fn to_state(&self) -> QuantumState {
        if let [(w, v)] = self.members.as_slice() {
            if *w == 1.0 {
                return QuantumState::Ket { space: self.space.clone(), amps: v.clone() };
            }
        }
        let n = self.space.total_dim();
        let mut d = Array2::zeros((n, n));
        for (w, v) in &self.members {
            let nz: Vec<usize> = (0..n).filter(|&i| v[i] != ZERO).collect();
            for &i in &nz {
                let vi = v[i] * *w;
                for &j in &nz {
                    d[[i, j]] += vi * v[j].conj();
                }
            }
        }
        QuantumState::Density(Operator::new(self.space.clone(), d).unwrap())
    }
}

/// Spin state on its own two-dimensional space.
pub fn spin_state(prep: &SpinPrep) -> Result<QuantumState> {
    let space = SpaceDescriptor::new(vec![2], vec!["spin".into()])?;
    Ok(match prep.factor()? {
        Factor::Pure(v) => QuantumState::Ket { space, amps: v },
        Factor::Diagonal(p) => {
            QuantumState::Density(Operator::new(space, Array2::from_diag(&p.mapv(|x| C64::new(x, 0.0))))?)
        }
    })
}

pub fn coherent_state(alpha: C64, cutoff: usize, eps: f64) -> Result<QuantumState> {
    ModePrep::Coherent { alpha }.state(cutoff, eps)
}

pub fn squeezed_vacuum(r: f64, theta: f64, cutoff: usize, eps: f64) -> Result<QuantumState> {
    ModePrep::SqueezedVacuum { r, theta }.state(cutoff, eps)
}

pub fn thermal_mode(nbar: f64, cutoff: usize, eps: f64) -> Result<QuantumState> {
    ModePrep::Thermal { nbar }.state(cutoff, eps)
}

pub fn prcs(alpha_abs: f64, cutoff: usize, eps: f64) -> Result<QuantumState> {
    ModePrep::Prcs { alpha: alpha_abs }.state(cutoff, eps)
}

pub fn prss(r: f64, cutoff: usize, eps: f64) -> Result<QuantumState> {
    ModePrep::Prss { r }.state(cutoff, eps)
}

fn kron(a: &Array1<C64>, b: &Array1<C64>) -> Array1<C64> {
    Array1::from_iter(a.iter().flat_map(|x| b.iter().map(move |y| x * y)))
}

/// Initial product state as a weighted-ket ensemble on `space`. Modes
/// slots follow the space; a single-mode space takes only `modes[0]`.
pub fn compose_ensemble(spin: &SpinPrep, modes: &[ModePrep], space: &SpaceDescriptor, eps: f64) -> Result<Ensemble> {
    let cutoffs = space.mode_cutoffs();
    if space.dims()[0] != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: space.dims()[0] });
    }
    if modes.len() != cutoffs.len() {
        return Err(Error::DimensionMismatch { expected: cutoffs.len(), got: modes.len() });
    }
    let mut members = spin.factor()?.members();
    for (prep, &n) in modes.iter().zip(cutoffs) {
        let local = prep.factor(n, eps)?.members();
        members = members
            .iter()
            .flat_map(|(w, v)| local.iter().map(move |(u, x)| (w * u, kron(v, x))))
            .collect();
    }
    Ok(Ensemble { space: space.clone(), members })
}

/// Tensor product of the three preparations: a ket when every factor is
/// pure, otherwise a density matrix.
pub fn compose_initial(
    spin: &SpinPrep,
    mode1: &ModePrep,
    mode2: &ModePrep,
    space: &SpaceDescriptor,
    eps: f64,
) -> Result<QuantumState> {
    Ok(compose_ensemble(spin, &[*mode1, *mode2], space, eps)?.to_state())
}

/// Truncation leakage of a composed product state: one minus its trace.
pub fn product_leakage(modes: &[ModePrep], cutoffs: &[usize]) -> f64 {
    1.0 - modes.iter().zip(cutoffs).map(|(p, &n)| 1.0 - p.leakage(n)).product::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn mean_n(state: &QuantumState) -> f64 {
        state.populations().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    #[test]
    fn spin_preps() {
        let s = spin_state(&SpinPrep::Thermal { p_e: 1.0 }).unwrap();
        assert_eq!(s.populations().to_vec(), vec![0.0, 1.0]);
        let s = spin_state(&SpinPrep::Superposition { phi: PI / 4.0 }).unwrap();
        assert_abs_diff_eq!(s.populations()[1], 0.5, epsilon = 1e-15);
        let phi = 0.7;
        let dephased = spin_state(&SpinPrep::Superposition { phi }).unwrap().dephased();
        let th = spin_state(&SpinPrep::Thermal { p_e: phi.sin().powi(2) }).unwrap();
        assert!(dephased.to_density().max_abs_diff(&th.to_density()).unwrap() < 1e-15);
        assert!(spin_state(&SpinPrep::Thermal { p_e: 1.5 }).is_err());
    }

    #[test]
    fn coherent_moments_and_tail() {
        let vac = coherent_state(C64::new(0.0, 0.0), 5, DEFAULT_EPS).unwrap();
        assert_eq!(vac.populations()[0], 1.0);
        let cs = coherent_state(C64::new(1.3, 0.4), 40, DEFAULT_EPS).unwrap();
        assert_abs_diff_eq!(mean_n(&cs), 1.3f64.powi(2) + 0.16, epsilon = 1e-8);
        assert!(ModePrep::Coherent { alpha: C64::new(1.0, 0.0) }.leakage(20) < 1e-12);
        match coherent_state(C64::new(2.0, 0.0), 5, DEFAULT_EPS) {
            Err(Error::CutoffTooSmall { leakage, .. }) => assert!(leakage > 0.1),
            other => panic!("expected cutoff error, got {other:?}"),
        }
    }

    #[test]
    fn squeezed_structure() {
        let r = 0.6;
        let sv = squeezed_vacuum(r, 0.3, 50, DEFAULT_EPS).unwrap();
        let p = sv.populations();
        for n in (1..50).step_by(2) {
            assert_eq!(p[n], 0.0);
        }
        assert_abs_diff_eq!(mean_n(&sv), r.sinh().powi(2), epsilon = 1e-8);
        assert_eq!(squeezed_vacuum(0.0, 0.0, 3, DEFAULT_EPS).unwrap().populations()[0], 1.0);
    }

    #[test]
    fn thermal_geometric() {
        let th = thermal_mode(0.8, 60, DEFAULT_EPS).unwrap();
        let p = th.populations();
        for n in 1..60 {
            assert!(p[n] < p[n - 1]);
        }
        assert_abs_diff_eq!(mean_n(&th), 0.8, epsilon = 1e-8);
        assert!(thermal_mode(-0.1, 10, DEFAULT_EPS).is_err());
    }

    #[test]
    fn trace_is_one_minus_leakage() {
        for prep in [
            ModePrep::Coherent { alpha: C64::new(1.2, 0.0) },
            ModePrep::Thermal { nbar: 0.5 },
            ModePrep::Prss { r: 0.5 },
        ] {
            let n = 18;
            let st = prep.state(n, 1e-2).unwrap();
            assert_abs_diff_eq!(st.trace(), 1.0 - prep.leakage(n), epsilon = 1e-14);
        }
    }

    #[test]
    fn phase_randomised_match_averages() {
        let n = 30;
        let a = 1.1;
        let pr = prcs(a, n, DEFAULT_EPS).unwrap().to_density();
        let mut avg = Array2::<C64>::zeros((n, n));
        for k in 0..256 {
            let th = 2.0 * PI * k as f64 / 256.0;
            let v = coherent_amplitudes(C64::from_polar(a, th), n);
            for i in 0..n {
                for j in 0..n {
                    avg[[i, j]] += v[i] * v[j].conj() / 256.0;
                }
            }
        }
        let dev = pr.data().iter().zip(avg.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(dev < 1e-10, "{dev}");

        let r = 0.5;
        let ps = prss(r, n, DEFAULT_EPS).unwrap().to_density();
        let mut avg = Array2::<C64>::zeros((n, n));
        for k in 0..256 {
            let th = 2.0 * PI * k as f64 / 256.0;
            let v = squeezed_amplitudes(r, th, n);
            for i in 0..n {
                for j in 0..n {
                    avg[[i, j]] += v[i] * v[j].conj() / 256.0;
                }
            }
        }
        let dev = ps.data().iter().zip(avg.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(dev < 1e-10, "{dev}");
    }

    #[test]
    fn compose_ground_state_bosons() {
        let space = SpaceDescriptor::fock_space(2, 2).unwrap();
        let phi = 0.4;
        let st = compose_initial(&SpinPrep::Superposition { phi }, &ModePrep::VACUUM, &ModePrep::VACUUM, &space, DEFAULT_EPS)
            .unwrap();
        match &st {
            QuantumState::Ket { amps, .. } => {
                assert_abs_diff_eq!(amps[0].re, phi.cos());
                assert_abs_diff_eq!(amps[4].re, phi.sin());
            }
            _ => panic!("expected a ket"),
        }
        let st = compose_initial(&SpinPrep::Thermal { p_e: 0.3 }, &ModePrep::VACUUM, &ModePrep::VACUUM, &space, DEFAULT_EPS)
            .unwrap();
        assert!(!st.is_pure_ket());
        assert_abs_diff_eq!(st.populations()[4], 0.3);
        assert_abs_diff_eq!(st.purity(), 0.7f64.powi(2) + 0.09, epsilon = 1e-15);
    }

    #[test]
    fn parse_specs() {
        assert_eq!("fock:3".parse::<ModePrep>().unwrap(), ModePrep::Fock { n: 3 });
        assert_eq!("sqv:0.5,0.1".parse::<ModePrep>().unwrap(), ModePrep::SqueezedVacuum { r: 0.5, theta: 0.1 });
        let p: ModePrep = "sqv:nbar=1".parse().unwrap();
        assert_abs_diff_eq!(p.mean_photon_number(), 1.0, epsilon = 1e-12);
        assert!("bogus:1".parse::<ModePrep>().is_err());
        assert!("fock:1.5".parse::<ModePrep>().is_err());
        for s in ["coherent:1.5", "thermal:2", "prss:0.3", "prcs:1"] {
            let p: ModePrep = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
    }

    #[test]
    fn auto_cutoff_minimal() {
        let prep = ModePrep::Thermal { nbar: 2.0 };
        let n = auto_cutoff(&prep, 1e-8, 60).unwrap();
        assert!(prep.leakage(n) < 1e-8 && prep.leakage(n - 1) >= 1e-8);
        assert_eq!(auto_cutoff(&ModePrep::Fock { n: 4 }, 1e-8, 60).unwrap(), 5);
        assert!(matches!(
            auto_cutoff(&ModePrep::SqueezedVacuum { r: 2.0, theta: 0.0 }, 1e-8, 60),
            Err(Error::CutoffTooSmall { .. })
        ));
    }
}
