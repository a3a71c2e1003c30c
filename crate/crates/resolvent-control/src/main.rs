//! Batch command-line front end: validate | solve | control | sweep.
//!
//! Exit codes: 0 success, 2 config error (including structural violations),
//! 3 numeric divergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use resolvent_control::error::Error;
use resolvent_control::pipeline::{
    self, describe_decay, RunOptions, SweepOutcome, ValidateOutcome,
};
use resolvent_control::registry::TargetForm;

#[derive(Parser)]
#[command(
    name = "resolvent-control",
    version,
    about = "Simulate impulsive neutral integrodifferential systems and synthesize steering controls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit a scenario config: structural checks, sampled hypothesis
    /// constants, solvability verdict.
    Validate(CommonArgs),
    /// Solve the system with the config's open-loop control and export the
    /// trajectory CSV.
    Solve(CommonArgs),
    /// Synthesize a steering control for one regularization parameter.
    Control(CommonArgs),
    /// Sweep the regularization parameter and tabulate the decay test.
    Sweep(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for manifest and CSV artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the grid step from the config.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Override the Picard tolerance from the config.
    #[arg(long)]
    tol: Option<f64>,
    /// Epsilon values: a comma list for sweep, a single value for control.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Steering target: "free", "mode:K:AMP" or "vec:a,b,...".
    #[arg(long)]
    target: Option<String>,
    /// Resolvent cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
}

fn parse_target(text: &str) -> Result<TargetForm, Error> {
    if text == "free" {
        return Ok(TargetForm::FreeResponse);
    }
    if let Some(rest) = text.strip_prefix("mode:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 2 {
            return Err(Error::Config(format!(
                "bad target '{text}', expected mode:K:AMP"
            )));
        }
        let mode = parts[0]
            .parse::<usize>()
            .map_err(|e| Error::Config(format!("bad target mode '{}': {e}", parts[0])))?;
        let amplitude = parts[1]
            .parse::<f64>()
            .map_err(|e| Error::Config(format!("bad target amplitude '{}': {e}", parts[1])))?;
        return Ok(TargetForm::Mode { mode, amplitude });
    }
    if let Some(rest) = text.strip_prefix("vec:") {
        let values = rest
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| Error::Config(format!("bad target vector '{text}': {e}")))?;
        return Ok(TargetForm::Vector { values });
    }
    Err(Error::Config(format!(
        "bad target '{text}': expected free, mode:K:AMP or vec:a,b,..."
    )))
}

fn options(args: &CommonArgs) -> Result<RunOptions, Error> {
    Ok(RunOptions {
        config_path: args.config.clone(),
        out_dir: args.out.clone(),
        grid_step: args.grid_step,
        tol: args.tol,
        eps: args.eps.clone(),
        target: args.target.as_deref().map(parse_target).transpose()?,
        cache_dir: args.cache.clone(),
    })
}

fn print_validate(outcome: &ValidateOutcome) {
    if outcome.violations.is_empty() {
        println!("spec admissible; control matrix rank {}", outcome.b_rank);
    } else {
        println!("{} violation(s):", outcome.violations.len());
        for v in &outcome.violations {
            println!("  {v}");
        }
    }
    if let (Some(report), Some(verdict)) = (&outcome.report, &outcome.verdict) {
        println!(
            "constants: M1 = {:.6}, M2 = {:.6}, LR = {:.4}, MR = {:.4}",
            report.m1_est, report.m2_est, report.lr_est, report.mr_est
        );
        println!(
            "           sigma = {:.6}, r1 = {:.6}, r2 = {:.6}, L2 = {:.6}, lambda = {:.6}",
            report.sigma_est, report.r1_est, report.r2_est, report.l2_est, report.lambda_est
        );
        println!(
            "           kernel h1 = {:.6}, h2 = {:.6}, L_zeta = {:.6}",
            report.h1_est, report.h2_est, report.lzeta_est
        );
        println!(
            "           probes: {} states, {} times, {} node pairs",
            report.state_probe_count, report.time_sample_count, report.node_pair_count
        );
        println!(
            "solvability condition: lhs = {:.6} -> {}",
            verdict.lhs, verdict.condition
        );
    }
}

fn print_sweep(outcome: &SweepOutcome) {
    println!("epsilon        terminal_error   control_energy   outer");
    for row in &outcome.rows {
        println!(
            "{:<14.6e} {:<16.6e} {:<16.6e} {}",
            row.epsilon, row.terminal_error, row.control_energy, row.outer_iterations
        );
    }
    println!("{}", describe_decay(&outcome.decay));
    println!(
        "wrote {} and {}",
        outcome.sweep_csv.display(),
        outcome.decay_csv.display()
    );
}

fn run() -> Result<u8, Error> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Validate(args) => {
            let outcome = pipeline::cmd_validate(&options(args)?)?;
            print_validate(&outcome);
            Ok(if outcome.violations.is_empty() { 0 } else { 2 })
        }
        Command::Solve(args) => {
            let outcome = pipeline::cmd_solve(&options(args)?)?;
            println!(
                "solved in {} Picard iteration(s); terminal state norm {:.6e}",
                outcome.picard.iterations,
                outcome.terminal.norm()
            );
            println!("wrote {}", outcome.trajectory_csv.display());
            Ok(0)
        }
        Command::Control(args) => {
            let outcome = pipeline::cmd_control(&options(args)?)?;
            println!(
                "epsilon {:.3e}: terminal_error = {:.6e}, defect = {:.6e}, outer = {}, {}",
                outcome.epsilon,
                outcome.terminal_error,
                outcome.defect_norm,
                outcome.outer_iterations,
                if outcome.steerable {
                    "steerable"
                } else {
                    "not steerable"
                }
            );
            println!(
                "steering identity residual {:.3e}; wrote {}, {}, {}",
                outcome.identity_defect,
                outcome.control_csv.display(),
                outcome.trajectory_csv.display(),
                outcome.summary_csv.display()
            );
            Ok(0)
        }
        Command::Sweep(args) => {
            let outcome = pipeline::cmd_sweep(&options(args)?)?;
            print_sweep(&outcome);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
