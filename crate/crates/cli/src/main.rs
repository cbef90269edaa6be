use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use dezin_solve::{run, CliError, Invocation, Mode};

/// Solver for the mixed fractional/parabolic problem with a Dezin condition.
#[derive(Debug, Parser)]
#[command(name = "dezin-solve", version)]
struct Args {
    #[arg(value_enum)]
    mode: Mode,
    /// JSON run configuration (optional for selftest).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of modes; overrides `problem.modes`.
    #[arg(long = "modes", value_name = "K")]
    modes: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("DEZIN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("DEZIN_THREADS = {raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start {n} worker threads: {e}")))
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let inv = Invocation {
        mode: args.mode,
        config: args.config,
        out: args.out,
        modes: args.modes,
    };
    match configure_threads().and_then(|_| run(&inv)) {
        Ok(outcome) => {
            if !args.quiet {
                println!("{} -> {}", outcome.summary, outcome.out_dir.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("dezin-solve: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
