use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use topt_cli::commands::{self, output_dir, thread_budget};
use topt_cli::RunConfig;
use topt_core::TransportMethod;

#[derive(Parser)]
#[command(name = "topt", version, about = "Filtered Wasserstein gradient-flow mass optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimization flow.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every (delta, eta) pair of the config's sweep section.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure how the filtering error scales with eta.
    VerifyOrder {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// W2 distance between two density files on the same mesh.
    W2 {
        a: PathBuf,
        b: PathBuf,
        /// Aggregate each measure onto a K x K grid first.
        #[arg(long, value_name = "K")]
        coarsen: Option<usize>,
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Entropic,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let dir = output_dir(&cfg, &config, out.as_deref());
            let outcome = commands::execute_run(&cfg, &dir)?;
            let last = outcome.history.records.last();
            println!(
                "{}: {} steps in {:.1}s, J = {}, max |log(m/m0)| = {:e}",
                dir.display(),
                last.map_or(0, |r| r.step),
                outcome.seconds,
                last.map_or(f64::NAN, |r| r.objective),
                outcome.history.max_abs_log_mass_error()
            );
            if let Some(msg) = outcome.failure {
                eprintln!("error: flow stopped early: {msg}");
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Sweep { config, jobs, out } => {
            let cfg = RunConfig::load(&config)?;
            let dir = output_dir(&cfg, &config, out.as_deref());
            eprintln!("sweep with {} worker(s)", thread_budget(jobs));
            let rows = commands::execute_sweep(&cfg, &dir, jobs)?;
            let failed = rows.iter().filter(|r| !r.succeeded()).count();
            println!(
                "{}: {} pairs, {failed} failed; summary in summary.csv",
                dir.display(),
                rows.len()
            );
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::VerifyOrder { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let dir = output_dir(&cfg, &config, out.as_deref());
            let report = commands::execute_verify_order(&cfg, &dir)?;
            for (eta, e) in report.etas.iter().zip(&report.errors) {
                println!("eta = {eta:e}  E = {e:e}");
            }
            println!(
                "slope = {:.4}  monotone = {}  (written to {})",
                report.slope,
                report.monotone(),
                dir.display()
            );
        }
        Command::W2 {
            a,
            b,
            coarsen,
            method,
        } => {
            let method = method.map(|m| match m {
                Method::Exact => TransportMethod::Exact,
                Method::Entropic => TransportMethod::Entropic,
            });
            let r = commands::execute_w2(&a, &b, coarsen, method)?;
            println!("{}", r.distance);
            eprintln!(
                "method: {:?}, support sizes {} and {}",
                r.method, r.support.0, r.support.1
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}
