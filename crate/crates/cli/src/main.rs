use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kappa_nbody::ChartPoint;
use kappa_nbody_cli::{commands, CliError, CliResult};

#[derive(Parser)]
#[command(name = "kappa-nbody", version, about = "N-body dynamics on constant-curvature spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write its trajectory and run summary.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the kappa-sweep experiments of a scenario's experiment block.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant suite and print a JSON report.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Assert metric-inverse consistency inside the oracle.
        #[arg(long)]
        checked: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the metric and Christoffel symbols at a chart point.
    Derive {
        #[arg(long)]
        dim: usize,
        #[arg(long, allow_hyphen_values = true)]
        kappa: f64,
        #[arg(long)]
        s: f64,
        #[arg(long, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { scenario, out } => {
            let s = commands::simulate(&scenario, &out)?;
            println!(
                "{} samples to t = {}; energy drift {:e}, angular momentum drift {:e}",
                s.samples, s.t_final, s.energy.max_drift, s.angular_momentum.max_drift
            );
        }
        Command::Sweep { scenario, out } => {
            let s = commands::sweep(&scenario, &out)?;
            for r in &s.reports {
                for side in r.sides() {
                    let slope = side.fit.map(|f| format!("{:.4}", f.slope)).unwrap_or_else(|| "n/a".into());
                    println!(
                        "{} {}: slope {slope}, monotone {}",
                        r.experiment,
                        if side.sign > 0 { "kappa>0" } else { "kappa<0" },
                        side.monotone
                    );
                }
            }
        }
        Command::Verify { seed, checked, out } => {
            let report = commands::verify(seed, checked, out.as_deref())?;
            print!("{}", commands::verify_json(&report));
            if !report.passed() {
                let failed: Vec<&str> =
                    report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                return Err(CliError::Threshold(format!("failed checks: {}", failed.join(", "))));
            }
        }
        Command::Derive { dim, kappa, s, phi, theta } => {
            let p = ChartPoint { s, phi, theta };
            print!("{}", commands::derive_json(&commands::derive(dim, kappa, p)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
