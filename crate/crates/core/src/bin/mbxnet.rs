use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mbxnet::harness::{self, HarnessError};
use mbxnet::sim::SweepParam;

#[derive(Parser)]
#[command(name = "mbxnet", version, about = "Entropy-gated edge offloading simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed; recorded in the manifest.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "MBXNET_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured mode once.
    Run(Common),
    /// Run baseline_all, random_filter and cognitive with a shared seed.
    Compare(Common),
    /// Run every mode over a grid of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `threshold` or `byte_budget`.
        #[arg(long)]
        param: String,
        /// Strictly ascending values, comma separated.
        #[arg(long)]
        grid: String,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn execute(cli: Cli) -> Result<String, HarnessError> {
    match cli.command {
        Command::Run(c) => {
            let cfg = harness::load_config(&c.config)?;
            let rep = harness::cmd_run(&cfg, c.seed, &c.out)?;
            let s = &rep.summary;
            Ok(format!(
                "{}: final_accuracy={} total_bits={} total_energy={} -> {}",
                s.mode.as_str(),
                s.final_accuracy,
                s.total_bits,
                s.total_energy,
                c.out.display()
            ))
        }
        Command::Compare(c) => {
            let cfg = harness::load_config(&c.config)?;
            let reports = harness::cmd_compare(&cfg, c.seed, &c.out)?;
            let mut lines: Vec<String> = reports
                .iter()
                .map(|r| {
                    let s = &r.summary;
                    let conv = s.convergence_round.map_or("-".to_string(), |r| r.to_string());
                    format!(
                        "{:<14} acc={:.4} bits={} energy={:.6} converged={}",
                        s.mode.as_str(),
                        s.final_accuracy,
                        s.total_bits,
                        s.total_energy,
                        conv
                    )
                })
                .collect();
            lines.push(format!("-> {}", c.out.display()));
            Ok(lines.join("\n"))
        }
        Command::Sweep {
            common: c,
            param,
            grid,
            jobs,
        } => {
            let cfg = harness::load_config(&c.config)?;
            let param: SweepParam = param.parse()?;
            let grid = harness::parse_grid(&grid)?;
            let points = harness::cmd_sweep(&cfg, c.seed, param, &grid, jobs, &c.out)?;
            Ok(format!("{} grid points x 3 modes -> {}", points.len(), c.out.display()))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = match e.exit_code() {
                2 => "config",
                _ => "runtime",
            };
            eprintln!("error[{kind}]: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
