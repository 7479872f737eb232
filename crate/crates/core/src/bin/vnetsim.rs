use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vnetsim::modes::Mode;
use vnetsim::runner::{
    bundled, render_run, resolve_scenario, run_scenario, write_traces, ReportFormat, RunError,
    RunOptions, Scenario, ScenarioError, TRACE_DIR_ENV,
};

#[derive(Parser)]
#[command(name = "vnetsim", version, about = "Deterministic virtual network attack simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or bundled scenario name) and print its report.
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSONL event trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// text, csv or json.
        #[arg(long, default_value = "text")]
        report: ReportFormat,
    },
    /// Reproduce the vulnerability matrix over routed, NAT and bridged modes.
    Matrix {
        /// Add the secured (proposed) column.
        #[arg(long)]
        include_proposed: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "text")]
        report: ReportFormat,
    },
    /// Check a scenario file without running it.
    Validate { file: String },
}

fn fail_schema(e: &ScenarioError) -> ExitCode {
    eprintln!("{e}");
    ExitCode::from(1)
}

fn fail_run(e: &RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn execute(
    scenario: &Scenario,
    seed: Option<u64>,
    trace: Option<&Path>,
    report: ReportFormat,
    out: Option<&Path>,
) -> ExitCode {
    let run = match run_scenario(scenario, RunOptions { seed }) {
        Ok(r) => r,
        Err(e) => return fail_run(&e),
    };
    let dir = std::env::var_os(TRACE_DIR_ENV).map(PathBuf::from);
    if let Err(e) = write_traces(&run, trace, dir.as_deref()) {
        eprintln!("error: writing traces: {e}");
        return ExitCode::from(1);
    }
    let bytes = render_run(&run, report);
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &bytes) {
                eprintln!("error: writing {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            scenario,
            seed,
            trace,
            report,
        } => match resolve_scenario(&scenario) {
            Ok(s) => execute(&s, seed, trace.as_deref(), report, None),
            Err(e) => fail_schema(&e),
        },
        Command::Matrix {
            include_proposed,
            out,
            report,
        } => {
            let mut s = match bundled("table2_matrix") {
                Ok(s) => s,
                Err(e) => return fail_schema(&e),
            };
            if include_proposed {
                if let Some(m) = s.matrix.as_mut() {
                    m.modes.push(Mode::Secured);
                }
            }
            execute(&s, None, None, report, out.as_deref())
        }
        Command::Validate { file } => match resolve_scenario(&file) {
            Ok(s) => {
                println!("ok: {} ({} endpoints, {} attacks)", s.name, s.endpoints.len(), s.attacks.len());
                ExitCode::SUCCESS
            }
            Err(e) => fail_schema(&e),
        },
    }
}
