use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gmc_cli::{output, validate, CliError, RunConfig, WORKERS_ENV};

#[derive(Parser)]
#[command(name = "gmclab", version, about = "Run, validate and replay chaos experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment config into its output directory.
    Run {
        config: PathBuf,
        /// Worker threads for replica loops.
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
    },
    /// Check a config and resolve its parameters without sampling.
    Validate { config: PathBuf },
    /// Re-run the config recorded in a manifest and compare CSV bytes.
    Replay {
        manifest: PathBuf,
        /// Output directory (default: `replay/` next to the manifest).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the master seed; the run is then reported as non-replay.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
    },
}

fn status(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    status(e.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, workers } => {
            let summary = match RunConfig::load(&config).and_then(|c| output::run(&c, workers)) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            for v in &summary.verdicts {
                println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.check, v.detail);
            }
            println!("run {} written to {}", summary.manifest.run_id, summary.dir.display());
            status(summary.exit_code())
        }
        Command::Validate { config } => match RunConfig::load(&config).and_then(|c| validate(&c)) {
            Ok(plan) => {
                println!("{}", serde_json::to_string_pretty(&plan.resolved).unwrap_or_default());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Replay {
            manifest,
            output: out,
            seed,
            workers,
        } => {
            match output::replay(&manifest, out, seed, workers) {
                Ok(rep) => {
                    match rep.mode {
                        output::ReplayMode::NonReplay => {
                            println!("non-replay mode: the seed differs from the manifest, outputs are not expected to match")
                        }
                        output::ReplayMode::Replay if rep.identical() => {
                            println!("replay identical: all CSV outputs match")
                        }
                        output::ReplayMode::Replay => println!("replay differs in: {}", rep.mismatched.join(", ")),
                    }
                    if rep.mode == output::ReplayMode::NonReplay && !rep.identical() {
                        println!("differing CSV outputs: {}", rep.mismatched.join(", "));
                    }
                    println!("written to {}", rep.summary.dir.display());
                    status(rep.exit_code())
                }
                Err(e) => fail(e),
            }
        }
    }
}
