//! Experiment runner: configs, single runs with adaptive cutoffs, sweeps,
//! figure datasets, CSV output and the validation report.
//!
//! Every computation is deterministic. Sweep points run on a worker pool
//! but are collected in sweep order, and each point is single-threaded, so
//! the emitted bytes do not depend on the worker count.

pub mod figures;
pub mod validate;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::{first_peak, run_lindblad, run_unitary, Observable, Probe, Propagator, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::hilbert::SpaceDescriptor;
use crate::model::{
    boundary_flags, hamiltonian_sparse, lindblad_ops_sparse, model_boundary_flags, single_mode_hamiltonian_sparse,
    BathParams, ModelParams, Variant,
};
use crate::ode::Tolerances;
use crate::states::{auto_cutoff, compose_ensemble, product_leakage, ModePrep, SpinPrep, DEFAULT_EPS, MAX_AUTO_CUTOFF};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Which Hamiltonian a config runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Plain,
    Kerr,
    Dispersive,
    /// Kerr and dispersive terms together.
    Full,
    /// Spin and mode 1 only, with `g1`, `omega1` and `gz1`.
    SingleMode,
}

/// How grid values map to time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    /// Grid values are `g̃ t` (`g t` for the single-mode model).
    #[default]
    Coupling,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoCutoff {
    Auto,
}

/// `"auto"` or an explicit list of per-mode cutoffs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cutoffs {
    Auto(AutoCutoff),
    Fixed(Vec<usize>),
}

impl Default for Cutoffs {
    fn default() -> Self {
        Cutoffs::Auto(AutoCutoff::Auto)
    }
}

/// How a sweep point's trajectory collapses to table entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduce {
    /// First local maximum, parabolically refined, and its time.
    #[default]
    FirstPeak,
    Max,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl SweepAxis {
    pub fn list(param: &str, values: Vec<f64>) -> Self {
        Self { param: param.into(), values: Some(values), start: None, stop: None, step: None }
    }

    pub fn range(param: &str, start: f64, stop: f64, step: f64) -> Self {
        Self { param: param.into(), values: None, start: Some(start), stop: Some(stop), step: Some(step) }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        match (&self.values, self.start, self.stop, self.step) {
            (Some(v), None, None, None) if !v.is_empty() => Ok(v.clone()),
            (None, Some(a), Some(b), Some(h)) if h > 0.0 && b >= a => {
                // integer stepping keeps 0.01-grids free of drift
                let n = ((b - a) / h + 1e-9).floor() as usize;
                Ok((0..=n).map(|k| a + k as f64 * h).collect())
            }
            _ => Err(Error::Config(format!(
                "sweep axis '{}' needs either a non-empty `values` list or `start` <= `stop` with `step` > 0",
                self.param
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    pub rtol: f64,
    pub atol: f64,
}

fn vacuum() -> ModePrep {
    ModePrep::VACUUM
}

fn default_observables() -> Vec<Observable> {
    vec![Observable::LogNegativity, Observable::Leakage]
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Curve label; columns become `obs[label]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub model: ModelParams,
    /// Inferred from the nonzero `chi`/`gz` entries when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ModelKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bath: Option<BathParams>,
    pub spin: SpinPrep,
    /// An object or the `"kind:value"` shorthand.
    #[serde(default = "vacuum", deserialize_with = "mode_prep")]
    pub mode1: ModePrep,
    #[serde(default = "vacuum", deserialize_with = "mode_prep")]
    pub mode2: ModePrep,
    pub grid: TimeGrid,
    #[serde(default)]
    pub time_unit: TimeUnit,
    #[serde(default = "default_observables")]
    pub observables: Vec<Observable>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepAxis>,
    #[serde(default)]
    pub reduce: Reduce,
    #[serde(default)]
    pub cutoffs: Cutoffs,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Ground-state bosons, `L` and leakage, default couplings.
    pub fn new(model: ModelParams, spin: SpinPrep, grid: TimeGrid) -> Self {
        Self {
            label: None,
            model,
            kind: None,
            bath: None,
            spin,
            mode1: ModePrep::VACUUM,
            mode2: ModePrep::VACUUM,
            grid,
            time_unit: TimeUnit::Coupling,
            observables: default_observables(),
            sweep: Vec::new(),
            reduce: Reduce::FirstPeak,
            cutoffs: Cutoffs::default(),
            eps: DEFAULT_EPS,
            tolerances: None,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind.unwrap_or({
            let kerr = self.model.chi1 != 0.0 || self.model.chi2 != 0.0;
            let disp = self.model.gz1 != 0.0 || self.model.gz2 != 0.0;
            match (kerr, disp) {
                (false, false) => ModelKind::Plain,
                (true, false) => ModelKind::Kerr,
                (false, true) => ModelKind::Dispersive,
                (true, true) => ModelKind::Full,
            }
        })
    }

    fn n_modes(&self) -> usize {
        if self.kind() == ModelKind::SingleMode {
            1
        } else {
            2
        }
    }

    /// True when some dissipative rate is nonzero.
    pub fn is_open(&self) -> bool {
        self.bath
            .as_ref()
            .is_some_and(|b| b.lambda_rb > 0.0 || b.lambda_db > 0.0 || b.lambda_rq > 0.0 || b.lambda_dq > 0.0)
    }

    fn coupling_scale(&self) -> f64 {
        if self.kind() == ModelKind::SingleMode {
            self.model.g1.abs()
        } else {
            self.model.g_tilde()
        }
    }

    /// Physical times of the grid.
    pub fn times(&self) -> Result<Vec<f64>> {
        let pts = self.grid.points();
        match self.time_unit {
            TimeUnit::Absolute => Ok(pts),
            TimeUnit::Coupling => {
                let s = self.coupling_scale();
                if s == 0.0 {
                    return Err(Error::Config("coupling time units need a nonzero coupling".into()));
                }
                Ok(pts.into_iter().map(|t| t / s).collect())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::InvalidArgument(m) => Error::Config(m),
            other => other,
        };
        self.model.validate().map_err(wrap)?;
        self.spin.validate().map_err(wrap)?;
        self.mode1.validate().map_err(wrap)?;
        self.mode2.validate().map_err(wrap)?;
        self.grid.validate().map_err(wrap)?;
        if let Some(b) = &self.bath {
            b.validate().map_err(wrap)?;
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Config(format!("eps = {} must lie in (0, 1)", self.eps)));
        }
        if self.observables.is_empty() {
            return Err(Error::Config("no observables requested".into()));
        }
        if let Cutoffs::Fixed(c) = &self.cutoffs {
            if c.len() != self.n_modes() {
                return Err(Error::Config(format!("expected {} cutoffs, got {}", self.n_modes(), c.len())));
            }
        }
        if self.kind() == ModelKind::SingleMode && self.mode2 != ModePrep::VACUUM {
            return Err(Error::Config("the single-mode model has no mode2".into()));
        }
        for axis in &self.sweep {
            axis.values()?;
            let mut probe = self.clone();
            set_param(&mut probe, &axis.param, &Value::from(axis.values()?[0]))?;
        }
        Ok(())
    }
}

fn mode_kind(prep: &ModePrep) -> &'static str {
    match prep {
        ModePrep::Fock { .. } => "fock",
        ModePrep::Coherent { .. } => "coherent",
        ModePrep::SqueezedVacuum { .. } => "squeezed_vacuum",
        ModePrep::Thermal { .. } => "thermal",
        ModePrep::Prcs { .. } => "prcs",
        ModePrep::Prss { .. } => "prss",
    }
}

/// Names accepted by sweeps and figure curves.
pub const PARAMS: &[&str] = &[
    "m", "g", "g1", "g2", "omega0", "omega1", "omega2", "delta", "chi", "chi1", "chi2", "gz", "gz1", "gz2", "p_e", "phi",
    "spin", "mode1", "mode2", "nbar1", "nbar2", "kind", "bath", "nbar_th", "lambda", "lambda_r", "lambda_d",
    "lambda_rb", "lambda_db", "lambda_rq", "lambda_dq", "t1", "eps",
];

fn mode_prep<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<ModePrep, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Form {
        Text(String),
        Full(ModePrep),
    }
    match Form::deserialize(d)? {
        Form::Text(s) => s.parse().map_err(serde::de::Error::custom),
        Form::Full(p) => Ok(p),
    }
}

fn bath(cfg: &mut ExperimentConfig) -> &mut BathParams {
    cfg.bath.get_or_insert_with(|| BathParams::uniform(0.0, 0.0))
}

/// Sets one named parameter. Numbers for numeric parameters; `spin`,
/// `mode1`, `mode2` and `kind` take strings, `bath` an object or null.
pub fn set_param(cfg: &mut ExperimentConfig, name: &str, v: &Value) -> Result<()> {
    let num = || v.as_f64().ok_or_else(|| Error::Config(format!("parameter '{name}' needs a number, got {v}")));
    let text = || v.as_str().ok_or_else(|| Error::Config(format!("parameter '{name}' needs a string, got {v}")));
    let p = &mut cfg.model;
    match name {
        "m" => {
            let x = num()?;
            if x < 1.0 || x.fract() != 0.0 {
                return Err(Error::Config(format!("m = {x} must be a positive integer")));
            }
            p.m = x as u32;
        }
        "g" => {
            let x = num()?;
            p.g1 = x;
            p.g2 = x;
        }
        "g1" => p.g1 = num()?,
        "g2" => p.g2 = num()?,
        "omega0" => p.omega0 = Some(num()?),
        "omega1" => p.omega1 = num()?,
        "omega2" => p.omega2 = num()?,
        "delta" => p.omega0 = Some(p.m as f64 * p.omega1 + num()?),
        "chi" => {
            let x = num()?;
            p.chi1 = x;
            p.chi2 = x;
        }
        "chi1" => p.chi1 = num()?,
        "chi2" => p.chi2 = num()?,
        "gz" => {
            let x = num()?;
            p.gz1 = x;
            p.gz2 = x;
        }
        "gz1" => p.gz1 = num()?,
        "gz2" => p.gz2 = num()?,
        "p_e" => {
            let x = num()?;
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Config(format!("p_e = {x} outside [0, 1]")));
            }
            cfg.spin = match cfg.spin {
                SpinPrep::Superposition { .. } => SpinPrep::superposition_pe(x),
                SpinPrep::Thermal { .. } => SpinPrep::Thermal { p_e: x },
            };
        }
        "phi" => cfg.spin = SpinPrep::Superposition { phi: num()? },
        "spin" => {
            let pe = cfg.spin.p_e();
            cfg.spin = match text()? {
                "superposition" => SpinPrep::superposition_pe(pe),
                "thermal" => SpinPrep::Thermal { p_e: pe },
                other => return Err(Error::Config(format!("unknown spin kind '{other}'"))),
            };
        }
        "mode1" => cfg.mode1 = text()?.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
        "mode2" => cfg.mode2 = text()?.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
        "nbar1" => cfg.mode1 = ModePrep::with_mean_energy(mode_kind(&cfg.mode1), num()?)?,
        "nbar2" => cfg.mode2 = ModePrep::with_mean_energy(mode_kind(&cfg.mode2), num()?)?,
        "kind" => {
            cfg.kind = Some(serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("kind: {e}")))?)
        }
        "bath" => cfg.bath = serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("bath: {e}")))?,
        "nbar_th" => bath(cfg).nbar_th = num()?,
        "lambda" => {
            let x = num()?;
            let b = bath(cfg);
            (b.lambda_rb, b.lambda_db, b.lambda_rq, b.lambda_dq) = (x, x, x, x);
        }
        "lambda_r" => {
            let x = num()?;
            let b = bath(cfg);
            (b.lambda_rb, b.lambda_rq) = (x, x);
        }
        "lambda_d" => {
            let x = num()?;
            let b = bath(cfg);
            (b.lambda_db, b.lambda_dq) = (x, x);
        }
        "lambda_rb" => bath(cfg).lambda_rb = num()?,
        "lambda_db" => bath(cfg).lambda_db = num()?,
        "lambda_rq" => bath(cfg).lambda_rq = num()?,
        "lambda_dq" => bath(cfg).lambda_dq = num()?,
        "t1" => cfg.grid.t1 = num()?,
        "eps" => cfg.eps = num()?,
        other => {
            return Err(Error::Config(format!("unknown parameter '{other}' (known: {})", PARAMS.join(", "))));
        }
    }
    Ok(())
}

/// Per-run switches from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub allow_leakage: bool,
    /// Worker threads for sweeps and figures; `None` uses all cores.
    pub threads: Option<usize>,
    /// Overrides every grid's point count.
    pub points: Option<usize>,
    /// Overrides every config's leakage tolerance.
    pub eps: Option<f64>,
}

impl RunOptions {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(n) = self.points {
            cfg.grid.n_points = n;
        }
        if let Some(e) = self.eps {
            cfg.eps = e;
        }
    }
}

/// A single simulated trajectory and how it was obtained.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub trajectory: Trajectory,
    pub cutoffs: Vec<usize>,
    pub initial_leakage: f64,
    /// Number of cutoff sets tried.
    pub attempts: usize,
}

fn initial_cutoffs(cfg: &ExperimentConfig, modes: &[ModePrep]) -> Vec<usize> {
    let m = cfg.model.m as usize;
    let share = cfg.eps / (4.0 * modes.len() as f64);
    modes
        .iter()
        .map(|prep| {
            let base = auto_cutoff(prep, share, MAX_AUTO_CUTOFF).unwrap_or(MAX_AUTO_CUTOFF);
            (base.max(m + 1) + m).min(MAX_AUTO_CUTOFF.max(m + 1))
        })
        .collect()
}

fn simulate(cfg: &ExperimentConfig, modes: &[ModePrep], cutoffs: &[usize], times: &[f64]) -> Result<Trajectory> {
    let kind = cfg.kind();
    let p = &cfg.model;
    let bath = cfg.bath.as_ref().filter(|_| cfg.is_open());
    let (space, h, flags) = if kind == ModelKind::SingleMode {
        let space = SpaceDescriptor::single_mode_space(cutoffs[0])?;
        let h = single_mode_hamiltonian_sparse(p.omega0(), p.omega1, p.g1, p.gz1, p.m, cutoffs[0])?;
        let flags = boundary_flags(&space, p.m, &[p.g1], &[p.gz1], bath);
        (space, h, flags)
    } else {
        let variant = match kind {
            ModelKind::Plain => Variant::Plain,
            ModelKind::Kerr => Variant::Kerr,
            ModelKind::Dispersive => Variant::Dispersive,
            ModelKind::Full | ModelKind::SingleMode => Variant::Full,
        };
        let space = SpaceDescriptor::fock_space(cutoffs[0], cutoffs[1])?;
        let h = hamiltonian_sparse(p, variant, &space)?;
        let flags = model_boundary_flags(p, variant, bath, &space);
        (space, h, flags)
    };
    let ens = compose_ensemble(&cfg.spin, modes, &space, f64::INFINITY)?;
    let probe = Probe::new(&cfg.observables, p.m as usize, flags).with_initial_leakage(product_leakage(modes, cutoffs));
    match bath {
        Some(b) => {
            let jumps = lindblad_ops_sparse(b, &space)?;
            let tol = cfg.tolerances.map_or_else(Tolerances::default, |t| Tolerances {
                rtol: t.rtol,
                atol: t.atol,
                ..Tolerances::default()
            });
            run_lindblad(&h, &jumps, &ens, times, &probe, &tol)
        }
        None => run_unitary(&Propagator::new(&h)?, &ens, times, &probe),
    }
}

/// Runs one trajectory. With automatic cutoffs, the modes whose boundary
/// population reaches the tolerance are enlarged and the run repeated,
/// up to the cap of the cutoff helper.
pub fn run_point(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let modes: Vec<ModePrep> = if cfg.n_modes() == 1 { vec![cfg.mode1] } else { vec![cfg.mode1, cfg.mode2] };
    let times = cfg.times()?;
    let m = cfg.model.m as usize;
    let cap = MAX_AUTO_CUTOFF.max(m + 1);
    let (mut cutoffs, adaptive) = match &cfg.cutoffs {
        Cutoffs::Fixed(c) => (c.clone(), false),
        Cutoffs::Auto(_) => (initial_cutoffs(cfg, &modes), true),
    };
    let mut attempts = 0;
    loop {
        attempts += 1;
        let traj = simulate(cfg, &modes, &cutoffs, &times)?;
        let done = !adaptive || traj.leakage_max < cfg.eps;
        let mut grew = false;
        if !done {
            let share = cfg.eps / (2.0 * modes.len() as f64);
            for (k, n) in cutoffs.iter_mut().enumerate() {
                if traj.mode_leakage[k] >= share && *n < cap {
                    *n = (*n + m.max(*n / 3).max(2)).min(cap);
                    grew = true;
                }
            }
        }
        if done || !grew {
            return Ok(RunResult {
                initial_leakage: product_leakage(&modes, &cutoffs),
                trajectory: traj,
                cutoffs,
                attempts,
            });
        }
    }
}

/// Comma-joined, JSON-free rendering used in labels and metadata.
fn fmt_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "none".into(),
        other => other.to_string(),
    }
}

/// A CSV-ready table with `#` metadata lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub meta: Vec<(String, String)>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.columns.iter().position(|x| x == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            for line in v.lines() {
                let _ = writeln!(out, "# {k}: {line}");
            }
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Adds the columns of `other` that are not already present; the two
    /// tables must share their leading `key` columns row by row.
    fn merge(&mut self, other: Table, key: usize) -> Result<()> {
        if self.rows.len() != other.rows.len()
            || self.rows.iter().zip(&other.rows).any(|(a, b)| a[..key] != b[..key])
        {
            return Err(Error::invalid("cannot merge tables with different axes"));
        }
        for (c, name) in other.columns.iter().enumerate().skip(key) {
            if self.columns.contains(name) {
                return Err(Error::invalid(format!("duplicate column '{name}'")));
            }
            self.columns.push(name.clone());
            for (r, row) in self.rows.iter_mut().enumerate() {
                row.push(other.rows[r][c]);
            }
        }
        Ok(())
    }

    pub fn leakage_max(&self) -> f64 {
        self.meta
            .iter()
            .filter(|(k, _)| k == "leakage_max")
            .filter_map(|(_, v)| v.parse::<f64>().ok())
            .fold(0.0, f64::max)
    }
}

fn labelled(name: &str, label: Option<&str>) -> String {
    match label {
        Some(l) => format!("{name}[{l}]"),
        None => name.to_string(),
    }
}

fn provenance_meta(cfg: &ExperimentConfig, r: &RunResult) -> Vec<(String, String)> {
    let tag = cfg.label.as_deref().map(|l| format!("[{l}]")).unwrap_or_default();
    let mut meta = vec![
        (format!("cutoffs{tag}"), format!("{:?}", r.cutoffs)),
        (format!("solver{tag}"), serde_json::to_string(&r.trajectory.provenance).unwrap_or_default()),
        ("leakage_max".to_string(), format!("{:.6e}", r.trajectory.leakage_max)),
    ];
    if cfg.label.is_some() {
        meta.push((format!("leakage_max{tag}"), format!("{:.6e}", r.trajectory.leakage_max)));
    }
    meta
}

fn config_meta(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    let mut clean = cfg.clone();
    clean.output = None;
    vec![
        ("artifact".into(), format!("mpjc {VERSION}")),
        ("config".into(), serde_json::to_string(&clean).unwrap_or_default()),
        ("eps".into(), format!("{:e}", cfg.eps)),
        ("time_axis".into(), time_axis_note(cfg)),
    ]
}

fn time_axis_note(cfg: &ExperimentConfig) -> String {
    match (cfg.time_unit, cfg.kind()) {
        (TimeUnit::Absolute, _) => "t".into(),
        (TimeUnit::Coupling, ModelKind::SingleMode) => "g*t".into(),
        (TimeUnit::Coupling, _) => "g_tilde*t".into(),
    }
}

/// One trajectory as a table: `t` then `obs[label]` columns.
pub fn trajectory_table(cfg: &ExperimentConfig, r: &RunResult) -> Table {
    let mut columns = vec!["t".to_string()];
    columns.extend(r.trajectory.columns.iter().map(|c| labelled(c, cfg.label.as_deref())));
    let rows = cfg
        .grid
        .points()
        .into_iter()
        .zip(&r.trajectory.values)
        .map(|(t, v)| std::iter::once(t).chain(v.iter().copied()).collect())
        .collect();
    let mut meta = config_meta(cfg);
    meta.extend(provenance_meta(cfg, r));
    Table { columns, rows, meta }
}

fn check_gate(what: &str, leakage: f64, eps: f64, opts: &RunOptions) -> Result<()> {
    if leakage >= eps && !opts.allow_leakage {
        return Err(Error::LeakageGate { what: what.to_string(), leakage, eps });
    }
    Ok(())
}

/// Single trajectory, gated on leakage.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Table> {
    let mut cfg = cfg.clone();
    opts.apply(&mut cfg);
    if !cfg.sweep.is_empty() {
        return sweep(&cfg, opts);
    }
    let r = run_point(&cfg)?;
    check_gate(cfg.label.as_deref().unwrap_or("trajectory"), r.trajectory.leakage_max, cfg.eps, opts)?;
    Ok(trajectory_table(&cfg, &r))
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs `f` on every job in order-preserving parallel fashion.
fn par_map<J: Sync, T: Send>(threads: Option<usize>, jobs: &[J], f: impl Fn(&J) -> Result<T> + Sync) -> Result<Vec<T>> {
    pool(threads)?.install(|| jobs.par_iter().map(&f).collect())
}

/// Cartesian product of the sweep axes, first axis slowest.
pub fn sweep_points(axes: &[SweepAxis]) -> Result<Vec<Vec<f64>>> {
    let mut pts = vec![Vec::new()];
    for axis in axes {
        let vals = axis.values()?;
        pts = pts.into_iter().flat_map(|p| vals.iter().map(move |&v| [p.clone(), vec![v]].concat())).collect();
    }
    Ok(pts)
}

fn reduce_row(traj: &Trajectory, reduce: Reduce) -> Result<Vec<f64>> {
    let mut row = Vec::new();
    for (c, name) in traj.columns.iter().enumerate() {
        let series: Vec<f64> = traj.values.iter().map(|r| r[c]).collect();
        if name == "leakage" {
            continue;
        }
        match reduce {
            Reduce::FirstPeak => {
                let p = first_peak(&traj.times, &series)?;
                row.push(p.value);
                row.push(p.time);
            }
            Reduce::Max => row.push(series.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            Reduce::Final => row.push(*series.last().unwrap_or(&f64::NAN)),
        }
    }
    row.push(traj.leakage_max);
    Ok(row)
}

fn reduce_columns(cfg: &ExperimentConfig, traj_cols: &[String]) -> Vec<String> {
    let label = cfg.label.as_deref();
    let mut cols = Vec::new();
    for name in traj_cols.iter().filter(|c| *c != "leakage") {
        match cfg.reduce {
            Reduce::FirstPeak => {
                cols.push(labelled(&format!("{name}_peak"), label));
                cols.push(labelled(&format!("{name}_peak_t"), label));
            }
            Reduce::Max => cols.push(labelled(&format!("{name}_max"), label)),
            Reduce::Final => cols.push(labelled(&format!("{name}_final"), label)),
        }
    }
    cols.push(labelled("leakage_max", label));
    cols
}

struct SweepJob {
    cfg: ExperimentConfig,
    point: Vec<f64>,
}

fn sweep_jobs(cfg: &ExperimentConfig) -> Result<Vec<SweepJob>> {
    sweep_points(&cfg.sweep)?
        .into_iter()
        .map(|point| {
            let mut c = cfg.clone();
            c.sweep.clear();
            for (axis, &v) in cfg.sweep.iter().zip(&point) {
                set_param(&mut c, &axis.param, &Value::from(v))?;
            }
            Ok(SweepJob { cfg: c, point })
        })
        .collect()
}

fn sweep_table(cfg: &ExperimentConfig, jobs: &[SweepJob], results: Vec<RunResult>, opts: &RunOptions) -> Result<Table> {
    let mut columns: Vec<String> = cfg.sweep.iter().map(|a| a.param.clone()).collect();
    let traj_cols = results.first().map(|r| r.trajectory.columns.clone()).unwrap_or_default();
    columns.extend(reduce_columns(cfg, &traj_cols));
    let mut rows = Vec::with_capacity(jobs.len());
    let mut leak = 0.0f64;
    let mut max_cut = vec![0usize; results.first().map_or(0, |r| r.cutoffs.len())];
    for (job, r) in jobs.iter().zip(&results) {
        leak = leak.max(r.trajectory.leakage_max);
        for (a, b) in max_cut.iter_mut().zip(&r.cutoffs) {
            *a = (*a).max(*b);
        }
        rows.push([job.point.clone(), reduce_row(&r.trajectory, cfg.reduce)?].concat());
    }
    check_gate(cfg.label.as_deref().unwrap_or("sweep"), leak, cfg.eps, opts)?;
    let tag = cfg.label.as_deref().map(|l| format!("[{l}]")).unwrap_or_default();
    let mut meta = config_meta(cfg);
    if let Some(r) = results.first() {
        meta.push((format!("solver{tag}"), serde_json::to_string(&r.trajectory.provenance).unwrap_or_default()));
    }
    meta.push((format!("cutoffs_max{tag}"), format!("{max_cut:?}")));
    meta.push(("leakage_max".into(), format!("{leak:.6e}")));
    if cfg.label.is_some() {
        meta.push((format!("leakage_max{tag}"), format!("{leak:.6e}")));
    }
    Ok(Table { columns, rows, meta })
}

/// Multi-axis sweep: one row per point with the reduced observables.
pub fn sweep(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Table> {
    let mut cfg = cfg.clone();
    opts.apply(&mut cfg);
    cfg.validate()?;
    if cfg.sweep.is_empty() {
        return Err(Error::Config("sweep needs at least one axis".into()));
    }
    let jobs = sweep_jobs(&cfg)?;
    let results = par_map(opts.threads, &jobs, |j| run_point(&j.cfg))?;
    sweep_table(&cfg, &jobs, results, opts)
}

/// Leakage helper report for the `cutoff` subcommand.
pub fn cutoff_report(prep: &ModePrep, eps: f64) -> Result<String> {
    let n = auto_cutoff(prep, eps, MAX_AUTO_CUTOFF)?;
    Ok(format!(
        "state: {prep}\nmean photon number: {:.6}\neps: {eps:e}\ncutoff: {n}\nleakage at cutoff: {:.3e}\nleakage at cutoff-1: {:.3e}",
        prep.mean_photon_number(),
        prep.leakage(n),
        if n > 1 { prep.leakage(n - 1) } else { 1.0 },
    ))
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Json(_) | Error::Io(_) | Error::DimensionMismatch { .. } => 2,
        Error::LeakageGate { .. } | Error::CutoffTooSmall { .. } => 3,
        Error::Solver(_) | Error::NotHermitian { .. } | Error::Unphysical(_) => 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::logneg_thermal_closed;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2 as G, PI};

    fn base() -> ExperimentConfig {
        ExperimentConfig::new(ModelParams::symmetric(1), SpinPrep::Thermal { p_e: 0.5 }, TimeGrid::new(0.0, PI, 61).unwrap())
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let ok = r#"{"model": {"m": 2}, "spin": {"kind": "thermal", "p_e": 0.5},
                     "grid": {"t0": 0, "t1": 1, "n_points": 3}}"#;
        let cfg = ExperimentConfig::from_json(ok).unwrap();
        assert_eq!(cfg.model.g1, G);
        assert_eq!(cfg.kind(), ModelKind::Plain);
        let bad = ok.replace("\"m\": 2", "\"m\": 2, \"gg\": 1");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Config(_))));
        let bad = ok.replace("\"grid\"", "\"extra\": 1, \"grid\"");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Config(_))));
        let bad_axis = ok.replace("\"grid\"", "\"sweep\": [{\"param\": \"nope\", \"values\": [1]}], \"grid\"");
        assert!(matches!(ExperimentConfig::from_json(&bad_axis), Err(Error::Config(_))));
    }

    #[test]
    fn params_apply() {
        let mut c = base();
        set_param(&mut c, "delta", &Value::from(0.5)).unwrap();
        assert_eq!(c.model.detuning().unwrap(), 0.5);
        set_param(&mut c, "spin", &Value::from("superposition")).unwrap();
        assert_abs_diff_eq!(c.spin.p_e(), 0.5, epsilon = 1e-15);
        set_param(&mut c, "mode1", &Value::from("sqv:nbar=1")).unwrap();
        set_param(&mut c, "nbar1", &Value::from(2.0)).unwrap();
        assert_abs_diff_eq!(c.mode1.mean_photon_number(), 2.0, epsilon = 1e-12);
        set_param(&mut c, "lambda", &Value::from(0.05)).unwrap();
        assert!(c.is_open());
        assert!(set_param(&mut c, "m", &Value::from(1.5)).is_err());
    }

    #[test]
    fn zero_time_grid_gives_initial_measures() {
        let mut c = base();
        c.grid = TimeGrid::new(0.0, 0.0, 1).unwrap();
        c.observables = vec![Observable::LogNegativity, Observable::Populations, Observable::Coherence];
        let t = run(&c, &RunOptions::default()).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.columns, ["t", "L", "C", "p_e", "n1", "n2"]);
        assert_eq!(t.rows[0], vec![0.0, 0.0, 0.0, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn run_matches_closed_form_and_is_reproducible() {
        let c = base();
        let t = run(&c, &RunOptions::default()).unwrap();
        for (row, tt) in t.rows.iter().zip(c.grid.points()) {
            assert_abs_diff_eq!(row[1], logneg_thermal_closed(0.5, G, G, 1, tt).unwrap(), epsilon = 1e-10);
        }
        assert_eq!(t.to_csv(), run(&c, &RunOptions::default()).unwrap().to_csv());
        assert!(t.to_csv().lines().any(|l| l.starts_with("# leakage_max: ")));
    }

    #[test]
    fn sweep_is_thread_count_independent() {
        let mut c = base();
        c.sweep = vec![SweepAxis::range("p_e", 0.0, 1.0, 0.25), SweepAxis::list("m", vec![1.0, 2.0])];
        c.label = Some("x".into());
        let one = sweep(&c, &RunOptions { threads: Some(1), ..Default::default() }).unwrap();
        let three = sweep(&c, &RunOptions { threads: Some(3), ..Default::default() }).unwrap();
        assert_eq!(one.to_csv(), three.to_csv());
        assert_eq!(one.rows.len(), 10);
        assert_eq!(one.columns, ["p_e", "m", "L_peak[x]", "L_peak_t[x]", "leakage_max[x]"]);
    }

    #[test]
    fn adaptive_cutoffs_contain_the_dynamics() {
        let mut c = base();
        c.mode1 = ModePrep::Coherent { alpha: crate::C64::new(1.0, 0.0) };
        c.grid = TimeGrid::new(0.0, 3.0, 31).unwrap();
        let r = run_point(&c).unwrap();
        assert!(r.trajectory.leakage_max < c.eps);
        c.cutoffs = Cutoffs::Fixed(vec![4, 4]);
        let r = run_point(&c).unwrap();
        assert!(r.trajectory.leakage_max > c.eps);
        assert!(matches!(run(&c, &RunOptions::default()), Err(Error::LeakageGate { .. })));
        assert!(run(&c, &RunOptions { allow_leakage: true, ..Default::default() }).is_ok());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::LeakageGate { what: "x".into(), leakage: 1.0, eps: 0.1 }), 3);
        assert_eq!(exit_code(&Error::Solver("x".into())), 4);
    }
}
