//! Figure datasets. The parameter sets live in `figures.json` next to this
//! file so caption corrections are data edits.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::Value;

use super::{
    check_gate, fmt_value, labelled, par_map, provenance_meta, run_point, set_param, sweep_jobs, sweep_table,
    trajectory_table, ExperimentConfig, RunOptions, RunResult, Table,
};
use crate::error::{Error, Result};

const MANIFEST: &str = include_str!("figures.json");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub figures: BTreeMap<String, Figure>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Figure {
    pub caption: String,
    #[serde(default)]
    pub assumptions: Vec<String>,
    pub panels: Vec<Panel>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Panel {
    pub name: String,
    pub config: ExperimentConfig,
    /// Explicit curves, each a labelled set of parameter overrides.
    #[serde(default)]
    pub curves: Vec<Curve>,
    /// Product axes crossed with `curves`, first axis slowest.
    #[serde(default)]
    pub vary: Vec<Vary>,
    #[serde(default)]
    pub derived: Vec<Difference>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Curve {
    pub label: String,
    #[serde(default)]
    pub set: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vary {
    pub param: String,
    pub values: Vec<Value>,
}

/// `name = minuend - subtrahend`, column by column.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Difference {
    pub name: String,
    pub minuend: String,
    pub subtrahend: String,
}

pub fn manifest() -> Result<Manifest> {
    serde_json::from_str(MANIFEST).map_err(|e| Error::Config(format!("figure manifest: {e}")))
}

/// Known figure ids in manifest order.
pub fn ids() -> Result<Vec<String>> {
    Ok(manifest()?.figures.into_keys().collect())
}

/// Ids matching a request: an exact id, or every sub-panel id of a bare
/// figure number (`7` gives `7a` and `7b`).
pub fn resolve(id: &str) -> Result<Vec<String>> {
    let all = ids()?;
    if all.iter().any(|k| k == id) {
        return Ok(vec![id.to_string()]);
    }
    let sub: Vec<String> = all
        .iter()
        .filter(|k| k.starts_with(id) && k[id.len()..].chars().all(|c| c.is_ascii_lowercase()))
        .cloned()
        .collect();
    if sub.is_empty() || id.is_empty() {
        return Err(Error::Config(format!("unknown figure id '{id}' (known: {})", all.join(", "))));
    }
    Ok(sub)
}

impl Panel {
    /// Fully specified curve configs with their labels.
    pub fn curve_configs(&self) -> Result<Vec<ExperimentConfig>> {
        let explicit = if self.curves.is_empty() {
            vec![Curve { label: String::new(), set: BTreeMap::new() }]
        } else {
            self.curves.clone()
        };
        let mut combos: Vec<Vec<(String, Value)>> = vec![Vec::new()];
        for v in &self.vary {
            combos = combos
                .into_iter()
                .flat_map(|c| v.values.iter().map(move |x| [c.clone(), vec![(v.param.clone(), x.clone())]].concat()))
                .collect();
        }
        let mut out = Vec::new();
        for curve in &explicit {
            for combo in &combos {
                let mut cfg = self.config.clone();
                for (k, v) in &curve.set {
                    set_param(&mut cfg, k, v)?;
                }
                for (k, v) in combo {
                    set_param(&mut cfg, k, v)?;
                }
                let mut parts: Vec<String> = Vec::new();
                if !curve.label.is_empty() {
                    parts.push(curve.label.clone());
                }
                parts.extend(combo.iter().map(|(k, v)| format!("{k}={}", fmt_value(v))));
                cfg.label = if parts.is_empty() { None } else { Some(parts.join(",")) };
                cfg.validate()?;
                out.push(cfg);
            }
        }
        Ok(out)
    }
}

enum Job {
    Trajectory(usize),
    Point(usize, usize),
}

/// Runs every curve of a panel and assembles one table.
pub fn run_panel(fig_id: &str, fig: &Figure, panel: &Panel, opts: &RunOptions) -> Result<Table> {
    let mut curves = panel.curve_configs()?;
    for c in &mut curves {
        opts.apply(c);
    }
    let is_sweep = !panel.config.sweep.is_empty();
    let per_curve: Vec<Vec<super::SweepJob>> =
        if is_sweep { curves.iter().map(sweep_jobs).collect::<Result<_>>()? } else { Vec::new() };
    let jobs: Vec<Job> = if is_sweep {
        per_curve.iter().enumerate().flat_map(|(c, js)| (0..js.len()).map(move |k| Job::Point(c, k))).collect()
    } else {
        (0..curves.len()).map(Job::Trajectory).collect()
    };
    let results: Vec<RunResult> = par_map(opts.threads, &jobs, |job| match job {
        Job::Trajectory(c) => run_point(&curves[*c]),
        Job::Point(c, k) => run_point(&per_curve[*c][*k].cfg),
    })?;

    let mut table: Option<Table> = None;
    let mut meta = vec![
        ("figure".to_string(), fig_id.to_string()),
        ("panel".to_string(), panel.name.clone()),
        ("caption".to_string(), fig.caption.clone()),
    ];
    meta.extend(fig.assumptions.iter().map(|a| ("assumption".to_string(), a.clone())));
    let mut results = results.into_iter();
    let mut leak = 0.0f64;
    for (c, cfg) in curves.iter().enumerate() {
        let t = if is_sweep {
            let rs: Vec<RunResult> = results.by_ref().take(per_curve[c].len()).collect();
            sweep_table(cfg, &per_curve[c], rs, opts)?
        } else {
            let r = results.next().ok_or_else(|| Error::invalid("missing panel result"))?;
            check_gate(cfg.label.as_deref().unwrap_or(&panel.name), r.trajectory.leakage_max, cfg.eps, opts)?;
            let mut t = trajectory_table(cfg, &r);
            t.meta = provenance_meta(cfg, &r);
            t
        };
        leak = leak.max(t.leakage_max());
        let key = if is_sweep { cfg.sweep.len() } else { 1 };
        let own_meta: Vec<(String, String)> = t.meta.iter().filter(|(k, _)| k != "leakage_max").cloned().collect();
        match &mut table {
            None => {
                let mut first = t;
                first.meta = own_meta;
                table = Some(first);
            }
            Some(acc) => {
                acc.meta.extend(own_meta);
                acc.merge(t, key)?;
            }
        }
    }
    let mut table = table.ok_or_else(|| Error::invalid("panel has no curves"))?;
    for d in &panel.derived {
        let a = table.column(&d.minuend).ok_or_else(|| Error::Config(format!("no column '{}'", d.minuend)))?;
        let b = table.column(&d.subtrahend).ok_or_else(|| Error::Config(format!("no column '{}'", d.subtrahend)))?;
        table.columns.push(d.name.clone());
        for (row, (x, y)) in table.rows.iter_mut().zip(a.iter().zip(&b)) {
            row.push(x - y);
        }
    }
    let base = panel.config.clone();
    meta.push(("artifact".into(), format!("mpjc {}", super::VERSION)));
    meta.push(("base_config".into(), serde_json::to_string(&base).unwrap_or_default()));
    meta.push(("time_axis".into(), super::time_axis_note(&base)));
    meta.push(("eps".into(), format!("{:e}", opts.eps.unwrap_or(base.eps))));
    meta.push(("leakage_max".into(), format!("{leak:.6e}")));
    meta.append(&mut table.meta);
    table.meta = meta;
    Ok(table)
}

/// Every panel of one figure id, as `(panel name, table)`.
pub fn figure(id: &str, opts: &RunOptions) -> Result<Vec<(String, Table)>> {
    let man = manifest()?;
    let fig = man.figures.get(id).ok_or_else(|| Error::Config(format!("unknown figure id '{id}'")))?;
    fig.panels.iter().map(|p| Ok((p.name.clone(), run_panel(id, fig, p, opts)?))).collect()
}

/// Column name of a curve's observable, as written in panel tables.
pub fn curve_column(observable: &str, label: &str) -> String {
    labelled(observable, Some(label))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_parses_and_expands() {
        let man = manifest().unwrap();
        let want = ["2a", "2b", "2c", "3", "4", "5", "6a", "6b", "7a", "7b", "8", "B1", "B2", "F1"];
        for id in want {
            let fig = man.figures.get(id).unwrap_or_else(|| panic!("missing {id}"));
            for p in &fig.panels {
                let curves = p.curve_configs().unwrap();
                assert!(!curves.is_empty(), "{id}/{}", p.name);
                let mut labels: Vec<_> = curves.iter().map(|c| c.label.clone()).collect();
                labels.dedup();
                assert_eq!(labels.len(), curves.len(), "{id}/{} labels not unique", p.name);
            }
        }
        assert_eq!(man.figures.len(), want.len());
        assert_eq!(resolve("7").unwrap(), vec!["7a", "7b"]);
        assert!(resolve("9").is_err());
    }

    #[test]
    fn fig2a_small() {
        let man = manifest().unwrap();
        let fig = &man.figures["2a"];
        let t = run_panel("2a", fig, &fig.panels[0], &RunOptions { points: Some(41), ..Default::default() }).unwrap();
        assert_eq!(t.rows.len(), 41);
        assert!(t.columns.contains(&curve_column("L", "spin=thermal,p_e=0.5")));
        assert!(t.to_csv().contains("# caption: "));
    }
}
