//! Command-line front end: gain synthesis, switching predictions, consensus
//! simulation, Q/R sweeps, and report re-derivation from exported CSVs.
//!
//! Exit codes: 0 success, 2 validation error, 3 numeric failure, 4 I/O
//! error. Failures print one machine-readable JSON object to stderr.

mod csv_io;
mod error;
mod report;
mod scenario_file;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use rendezvous_core::control;
use rendezvous_core::matops::{eigenvalues, kron, Matrix};
use rendezvous_core::sim::{self, LawVariant};
use rendezvous_core::Scenario64;
use serde_json::{json, Value};

use error::CliError;
use scenario_file::Overrides;

#[derive(Parser)]
#[command(
    name = "rendezvous",
    version,
    about = "Saturated optimal rendezvous: gain synthesis, switching analysis, \
             and multi-robot consensus simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the Riccati solution (P, K) and closed-loop eigenvalues as JSON.
    Gain {
        scenario: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run one scenario; write a trajectory CSV and a report JSON.
    Simulate {
        scenario: PathBuf,
        /// Output directory for the CSV and the report.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Print switch-time predictions for channels that start saturated.
    Switching {
        scenario: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Simulate a grid of scalar (q, r) weight multipliers.
    Sweep {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated q multipliers (each scales the identity state
        /// weight).
        #[arg(long, value_delimiter = ',', default_value = "1,3,20")]
        q: Vec<f64>,
        /// Comma-separated r multipliers (each scales the identity effort
        /// weight).
        #[arg(long, value_delimiter = ',', default_value = "1,5")]
        r: Vec<f64>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Re-derive a report from a previously exported trajectory CSV.
    Report {
        scenario: PathBuf,
        /// Trajectory CSV produced by `simulate`.
        #[arg(long)]
        csv: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

#[derive(Args)]
struct OverrideArgs {
    /// Override the scenario's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the control law variant.
    #[arg(long, value_enum)]
    law: Option<LawArg>,
    /// Override the simulation horizon, seconds.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Override the integrator step, seconds.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LawArg {
    #[value(name = "per_robot")]
    PerRobot,
    #[value(name = "laplacian_weighted")]
    LaplacianWeighted,
}

impl From<&OverrideArgs> for Overrides {
    fn from(args: &OverrideArgs) -> Self {
        Overrides {
            seed: args.seed,
            law: args.law.map(|l| match l {
                LawArg::PerRobot => LawVariant::PerRobot,
                LawArg::LaplacianWeighted => LawVariant::LaplacianWeighted,
            }),
            t_end: args.t_end,
            dt: args.dt,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let payload = serde_json::to_string(&err.to_json())
                .unwrap_or_else(|_| format!("{{\"error\":{{\"kind\":\"{}\"}}}}", err.kind()));
            eprintln!("{payload}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Gain {
            scenario,
            overrides,
        } => cmd_gain(scenario, &overrides.into()),
        Command::Simulate {
            scenario,
            out,
            overrides,
        } => cmd_simulate(scenario, out, &overrides.into()),
        Command::Switching {
            scenario,
            overrides,
        } => cmd_switching(scenario, &overrides.into()),
        Command::Sweep {
            scenario,
            out,
            q,
            r,
            overrides,
        } => cmd_sweep(scenario, out, q, r, &overrides.into()),
        Command::Report {
            scenario,
            csv,
            overrides,
        } => cmd_report(scenario, csv, &overrides.into()),
    }
}

fn load_scenario(path: &Path, ov: &Overrides) -> Result<(Scenario64, Value), CliError> {
    let mut scenario = scenario_file::load(path)?;
    scenario_file::apply_overrides(&mut scenario, ov)?;
    let echo = scenario_file::echo_scenario(&scenario, ov);
    Ok((scenario, echo))
}

fn sorted_eigs(mut eigs: Vec<(f64, f64)>) -> Vec<Value> {
    eigs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    eigs.into_iter()
        .map(|(re, im)| json!({"re": re, "im": im}))
        .collect()
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = report::to_json_string(value)?;
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Prints one JSON document to stdout. A closed pipe (downstream consumer
/// done reading) ends the process quietly instead of panicking.
fn print_json(value: &impl serde::Serialize) -> Result<(), CliError> {
    use std::io::Write;
    let text = report::to_json_string(value)?;
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        return Err(CliError::Io {
            message: format!("stdout: {e}"),
        });
    }
    Ok(())
}

fn cmd_gain(path: &Path, ov: &Overrides) -> Result<(), CliError> {
    let (scenario, _) = load_scenario(path, ov)?;
    let law = control::synthesize(&scenario.model, &scenario.q, &scenario.r, &scenario.bounds)?;

    let a = scenario.model.a();
    let b = scenario.model.b();
    let regulator = a - &(b * &law.k);
    // Stacked consensus loop (I (x) a) - (L (x) b k): its spectrum combines
    // the regulator with the Laplacian's.
    let n = scenario.n();
    let stacked = &kron(&Matrix::identity(n), a) - &kron(scenario.topology.laplacian(), &(b * &law.k));

    let out = json!({
        "p": scenario_file::rows_of(&law.p),
        "k": scenario_file::rows_of(&law.k),
        "care_residual": law.care.residual_norm,
        "care_iterations": law.care.iterations,
        "regulator_eigenvalues": sorted_eigs(eigenvalues(&regulator)?),
        "consensus_eigenvalues": sorted_eigs(eigenvalues(&stacked)?),
        "smallest_positive_laplacian_eigenvalue":
            scenario.topology.smallest_positive_eigenvalue().ok(),
    });
    print_json(&out)
}

fn cmd_simulate(path: &Path, out_dir: &Path, ov: &Overrides) -> Result<(), CliError> {
    let (scenario, echo) = load_scenario(path, ov)?;
    let log = sim::simulate(&scenario)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("run")
        .to_string();
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let report_path = out_dir.join(format!("{stem}.report.json"));
    csv_io::export_csv(&log, &csv_path)?;
    let rep = report::from_log(&scenario, echo, &log);
    write_json(&report_path, &rep)?;

    let summary = json!({
        "csv": csv_path,
        "report": report_path,
        "consensus_time": log.consensus_time,
        "j_total": log.j_total(),
        "warnings": log.warnings,
    });
    print_json(&summary)
}

fn cmd_switching(path: &Path, ov: &Overrides) -> Result<(), CliError> {
    let (scenario, _) = load_scenario(path, ov)?;
    let law = control::synthesize(&scenario.model, &scenario.q, &scenario.r, &scenario.bounds)?;
    let (predictions, warnings) = sim::predict_switches(&scenario, &law)?;
    let out = json!({
        "predictions": predictions,
        "warnings": warnings,
    });
    print_json(&out)
}

/// Multiplier formatting for file names: integers stay bare (q3, r1), the
/// rest keep their shortest decimal form.
fn fmt_mult(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn cmd_sweep(
    path: &Path,
    out_dir: &Path,
    q_mults: &[f64],
    r_mults: &[f64],
    ov: &Overrides,
) -> Result<(), CliError> {
    let (base, _) = load_scenario(path, ov)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let m = base.m();
    let r_dim = base.r_dim();

    let cells: Vec<(f64, f64)> = q_mults
        .iter()
        .flat_map(|&q| r_mults.iter().map(move |&r| (q, r)))
        .collect();

    // Cells run in parallel; each owns its report file exclusively.
    let summaries = cells
        .par_iter()
        .map(|&(qm, rm)| -> Result<Value, CliError> {
            let mut cell = base.clone();
            cell.q = Matrix::identity(m).scale(qm);
            cell.r = Matrix::identity(r_dim).scale(rm);
            let echo = scenario_file::echo_scenario(&cell, ov);
            let log = sim::simulate(&cell)?;
            let rep = report::from_log(&cell, echo, &log);
            let name = format!("report_q{}_r{}.json", fmt_mult(qm), fmt_mult(rm));
            write_json(&out_dir.join(&name), &rep)?;
            Ok(json!({
                "q": qm,
                "r": rm,
                "report": name,
                "consensus_time": log.consensus_time,
                "j_total": log.j_total(),
                "effort_share": log.effort_share(),
            }))
        })
        .collect::<Result<Vec<Value>, CliError>>()?;

    let index = json!({
        "artifact_version": report::ARTIFACT_VERSION,
        "generated_at_unix_seconds": report::unix_now(),
        "scenario": path.to_string_lossy(),
        "cells": summaries,
    });
    let index_path = out_dir.join("index.json");
    write_json(&index_path, &index)?;

    let summary = json!({"index": index_path, "cells": cells.len()});
    print_json(&summary)
}

fn cmd_report(path: &Path, csv: &Path, ov: &Overrides) -> Result<(), CliError> {
    let (scenario, echo) = load_scenario(path, ov)?;
    if scenario.m() != scenario.r_dim() {
        return Err(CliError::validation(format!(
            "trajectory CSVs pair position and control axes row by row; \
             state dimension {} does not match input dimension {}",
            scenario.m(),
            scenario.r_dim()
        )));
    }
    let traj = csv_io::read_csv(csv, scenario.n(), scenario.m())?;
    let rep = report::from_samples(&scenario, echo, &traj)?;
    print_json(&rep)
}
