use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mpjc::harness::{self, figures, validate, ExperimentConfig, RunOptions, Table};
use mpjc::states::ModePrep;
use mpjc::{Error, Result};

/// Two-mode multiphoton Jaynes-Cummings simulations.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; CSV goes to stdout when omitted (except `figure`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the number of time points.
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Override the leakage tolerance.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Write datasets even when leakage reaches the tolerance.
    #[arg(long, global = true)]
    allow_leakage: bool,
    /// Worker threads for sweeps, figures and validation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Single closed-system trajectory.
    Evolve,
    /// Single open-system trajectory; the config must set bath rates.
    Lindblad,
    /// Multi-axis parameter sweep.
    Sweep,
    /// Dataset for a figure id (`2a`, `7` for every panel of 7, ...).
    Figure {
        id: String,
        /// List the known ids and exit.
        #[arg(long)]
        list: bool,
    },
    /// Oracle suite; exits 5 when any check fails.
    Validate {
        /// Restrict to groups by number or name prefix (e.g. `1`, `hilbert`).
        groups: Vec<String>,
        /// Print the JSON report instead of the summary.
        #[arg(long)]
        json: bool,
    },
    /// Smallest cutoff keeping a mode state's truncation leakage below eps.
    Cutoff {
        /// `kind:value`, e.g. `coherent:1.5`, `thermal:2`, `sqv:nbar=1`, `fock:3`.
        #[arg(long)]
        state: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}

fn options(cli: &Cli) -> RunOptions {
    RunOptions { allow_leakage: cli.allow_leakage, threads: cli.threads, points: cli.points, eps: cli.eps }
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_deref().ok_or_else(|| Error::Config("this command needs --config <path>".into()))?;
    ExperimentConfig::load(path)
}

fn emit(table: &Table, out: Option<&Path>, name: &str) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(name);
            table.write(&path)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{}", table.to_csv()),
    }
    Ok(())
}

fn file_name(cfg: &ExperimentConfig, default: &str) -> String {
    cfg.output
        .as_ref()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .or_else(|| cfg.label.as_ref().map(|l| format!("{l}.csv")))
        .unwrap_or_else(|| default.to_string())
}

fn dispatch(cli: &Cli) -> Result<u8> {
    let opts = options(cli);
    match &cli.cmd {
        Cmd::Evolve | Cmd::Lindblad | Cmd::Sweep => {
            let cfg = load(cli)?;
            let table = match cli.cmd {
                Cmd::Lindblad if !cfg.is_open() => {
                    return Err(Error::Config("lindblad needs a bath with a nonzero rate".into()))
                }
                Cmd::Sweep => harness::sweep(&cfg, &opts)?,
                _ => harness::run(&cfg, &opts)?,
            };
            let default = if matches!(cli.cmd, Cmd::Sweep) { "sweep.csv" } else { "trajectory.csv" };
            emit(&table, cli.out.as_deref(), &file_name(&cfg, default))?;
        }
        Cmd::Figure { id, list } => {
            if *list {
                println!("{}", figures::ids()?.join("\n"));
                return Ok(0);
            }
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("figures"));
            for fid in figures::resolve(id)? {
                for (panel, table) in figures::figure(&fid, &opts)? {
                    emit(&table, Some(&dir), &format!("fig{panel}.csv"))?;
                }
            }
        }
        Cmd::Validate { groups, json } => {
            let report = validate::run(groups, cli.threads)?;
            if *json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.summary());
            }
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("validation.json"), report.to_json())?;
            }
            return Ok(if report.passed { 0 } else { 5 });
        }
        Cmd::Cutoff { state } => {
            let prep: ModePrep = state.parse()?;
            println!("{}", harness::cutoff_report(&prep, cli.eps.unwrap_or(mpjc::states::DEFAULT_EPS))?);
        }
    }
    Ok(0)
}
