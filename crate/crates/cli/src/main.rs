use std::process::ExitCode;

use clap::Parser;
use pollinet_cli::cli::{run, Cli};
use pollinet_cli::CliError;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("pollinet: cannot start {jobs} workers: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli.command) {
        Ok(report) => {
            report.lines.iter().for_each(|l| println!("{l}"));
            if report.partial {
                eprintln!("pollinet: results are partial (event budget exceeded)");
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ CliError::Config(_)) => {
            eprintln!("pollinet: invalid configuration: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("pollinet: {e}");
            ExitCode::from(1)
        }
    }
}
