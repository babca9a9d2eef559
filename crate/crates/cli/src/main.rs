/// `println!` that ignores a closed stdout, e.g. when piped into `head`.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

mod cli;
mod commands;
mod config;
mod emit;
mod error;

use clap::Parser;
use error::{CliError, EXIT_VALIDATION};
use std::process::ExitCode;

/// Builds the global thread pool, capped by `LIE_ANNEAL_THREADS` when set.
fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("LIE_ANNEAL_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::validation(
            "threads",
            format!("LIE_ANNEAL_THREADS must be a positive integer, got `{v}`"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::validation("threads", e))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match cli::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION } else { 0 });
        }
    };
    match configure_threads().and_then(|_| commands::run(cli)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
