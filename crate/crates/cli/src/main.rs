//! `mourre-lab <config-path> [--out DIR] [--quiet]`
//!
//! Exit status: 0 when every check passes, 2 when the experiment fails a
//! check, 1 on a usage, config or I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mourre_core::experiments::{configure_threads, load_config, run_experiment, write_report};

#[derive(Parser, Debug)]
#[command(name = "mourre-lab", version, about = "Run one configured experiment and write its report")]
struct Args {
    /// Flat `key = value` config file.
    config: PathBuf,
    /// Output directory; overrides `out` in the config. Defaults to `out/<experiment>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let config = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let dir = args
        .out
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(config.experiment.name()));
    let report = run_experiment(&config);
    if let Err(e) = write_report(&report, &dir) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    if !args.quiet || !report.passed {
        print!("{}", report.summary());
        println!("report written to {}", dir.display());
    }
    if report.error.is_some() {
        // Module errors are recorded in the report; they still count as errors.
        ExitCode::from(1)
    } else if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
