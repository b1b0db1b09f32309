use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use moment_cli::{list_scenarios, run, validate, RunOptions, THREADS_ENV};

#[derive(Parser)]
#[command(name = "moments", version, about = "Run moment-problem verification scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario config and write its report.
    Run {
        config: PathBuf,
        /// Output directory (defaults to the config's output_path, then ".").
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, env = THREADS_ENV)]
        threads: Option<usize>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config against the schema without running it.
    Validate { config: PathBuf },
    /// List scenario kinds and their parameters.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out, threads, seed } => match run(&config, &RunOptions { out, seed, threads }) {
            Ok(summary) => {
                for f in &summary.failures {
                    eprintln!("FAIL {f}");
                }
                println!("{} {} -> {}", summary.kind, if summary.passed { "pass" } else { "fail" }, summary.report_path.display());
                summary.exit_code()
            }
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
        },
        Command::Validate { config } => match validate(&config) {
            Ok(problems) if problems.is_empty() => {
                println!("ok");
                0
            }
            Ok(problems) => {
                for p in problems {
                    eprintln!("{p}");
                }
                2
            }
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
        },
        Command::List => {
            for line in list_scenarios() {
                println!("{line}");
            }
            0
        }
    };
    ExitCode::from(code as u8)
}
