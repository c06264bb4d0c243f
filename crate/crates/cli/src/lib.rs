//! Command-line front end: long-CSV ingestion, flat TOML configuration and
//! JSON/text reports around `hetpanel-core`.
//!
//! Exit codes: 0 success, 1 output failure, 2 usage, 3 input data,
//! 4 configuration, 5 numerical degeneracy. `HETPANEL_THREADS` caps the
//! worker threads.

pub mod analyze;
pub mod args;
pub mod error;
pub mod io;
pub mod json;
pub mod kstest;
pub mod simulate;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::Parser;

use crate::args::{Cli, Command, WithConfig};
use crate::error::{exit, CliError};

pub const THREADS_ENV: &str = "HETPANEL_THREADS";

fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Analyze(a) => {
            let a = a.resolve()?;
            let report = analyze::cmd_analyze(&a)?;
            if let Some(out) = &a.out {
                write_file(out, json::to_string(&report)?.as_bytes())?;
            }
            stdout.write_all(analyze::render_analysis(&report).as_bytes())?;
        }
        Command::Kstest(a) => {
            let a = a.resolve()?;
            let report = kstest::cmd_kstest(&a)?;
            if let Some(out) = &a.out {
                write_file(out, json::to_string(&report)?.as_bytes())?;
            }
            stdout.write_all(kstest::render_ks(&report).as_bytes())?;
        }
        Command::Simulate(a) => {
            let a = a.resolve()?;
            let prefix = a.out.clone().ok_or_else(|| CliError::Config("set --out or `out` (output prefix)".into()))?;
            let report = simulate::cmd_simulate(&a)?;
            let (csv_path, json_path) = simulate::output_paths(&prefix);
            let mut csv = Vec::new();
            simulate::write_study_csv(&report.rows, &mut csv)?;
            write_file(&csv_path, &csv)?;
            write_file(&json_path, json::to_string(&report)?.as_bytes())?;
            stdout.write_all(simulate::render_study(&report).as_bytes())?;
        }
        Command::SimulatePanel(a) => {
            let a = a.resolve()?;
            let panel = simulate::cmd_simulate_panel(&a)?;
            let columns = io::ColumnMap::default();
            match &a.out {
                Some(path) => {
                    let mut buf = Vec::new();
                    io::write_long(&panel, &mut buf, &columns)?;
                    write_file(path, &buf)?;
                }
                None => io::write_long(&panel, &mut *stdout, &columns)?,
            }
        }
    }
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout())
}

/// [`run`] with the text report sent to `out` instead of stdout.
pub fn run_with<I, T>(args: I, out: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
        }
    };
    let command = cli.command;
    let go = move || dispatch(command, out);
    let result = thread_cap().and_then(|cap| match cap {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(go),
        None => go(),
    });
    match result {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            eprintln!("hetpanel: {e}");
            e.exit_code()
        }
    }
}
