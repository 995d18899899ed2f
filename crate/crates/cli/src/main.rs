mod args;
mod commands;
mod input;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use args::{Cli, Command};
use input::{CliError, CliResult, EXIT_USAGE};
use manifest::{Manifest, RunRecord};

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

/// Make every path in the invocation absolute so a manifest replays from any
/// working directory.
fn absolutise(cmd: &mut Command) {
    match cmd {
        Command::Segment(a) => {
            a.input.input = absolute(&a.input.input);
            a.out = absolute(&a.out);
        }
        Command::Exact(a) => {
            a.input.input = absolute(&a.input.input);
            a.out = absolute(&a.out);
        }
        Command::Maptree(a) => {
            a.input.input = absolute(&a.input.input);
            a.out = absolute(&a.out);
        }
        Command::Generate(a) => {
            a.spec = absolute(&a.spec);
            a.out = absolute(&a.out);
        }
        Command::Stationary(a) => {
            a.input = a.input.as_deref().map(absolute);
            a.model = a.model.as_deref().map(absolute);
            a.out = absolute(&a.out);
        }
        Command::Replay(_) => {}
    }
}

fn execute(mut cmd: Command) -> CliResult<()> {
    absolutise(&mut cmd);
    let start = Instant::now();
    let mut record = RunRecord::default();
    match &cmd {
        Command::Segment(a) => commands::segment(a, &mut record)?,
        Command::Exact(a) => commands::exact(a, &mut record)?,
        Command::Maptree(a) => commands::maptree(a, &mut record)?,
        Command::Generate(a) => commands::generate(a, &mut record)?,
        Command::Stationary(a) => commands::stationary(a, &mut record)?,
        Command::Replay(r) => {
            let manifest = Manifest::read(&r.manifest)?;
            manifest.check_inputs()?;
            let mut inner = manifest.invocation;
            if let Some(out) = &r.out {
                inner.set_out_dir(out.clone());
            }
            if matches!(inner, Command::Replay(_)) {
                return Err(CliError::usage("manifest records a replay"));
            }
            return execute(inner);
        }
    }
    let out = cmd
        .out_dir()
        .expect("non-replay commands have an output directory")
        .clone();
    Manifest::new(cmd, record, start.elapsed().as_secs_f64()).write(&out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let name = cli.command.name();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bctseg {name}: {e}");
            ExitCode::from(e.code)
        }
    }
}
