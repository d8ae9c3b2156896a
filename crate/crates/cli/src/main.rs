//! `exiffi`: train, explain, evaluate and benchmark isolation forests.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

mod args;
mod commands;
mod error;
mod manifest;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{Cli, Command};
use crate::error::{CliError, CliResult};
use crate::manifest::{sha256_file, Run, RunManifest};

const DEFAULT_OUT_DIR: &str = "exiffi-out";

fn absolute(p: &mut PathBuf) -> CliResult<()> {
    *p = std::path::absolute(&*p).map_err(|e| CliError::io(p, e))?;
    Ok(())
}

/// Makes every path in the command absolute so the manifest can be replayed
/// from any working directory.
fn resolve_paths(cmd: &mut Command) -> CliResult<()> {
    match cmd {
        Command::Synth(_) | Command::Replay(_) => {}
        Command::Profile(a) => absolute(&mut a.input.input)?,
        Command::Fit(a) => {
            absolute(&mut a.input.input)?;
            if let Some(t) = a.split.test.as_mut() {
                absolute(t)?;
            }
        }
        Command::Explain(a) => {
            absolute(&mut a.input.input)?;
            absolute(&mut a.model)?;
        }
        Command::Fs(a) => {
            absolute(&mut a.input.input)?;
            if let Some(t) = a.split.test.as_mut() {
                absolute(t)?;
            }
            if let Some(r) = a.ranking.as_mut() {
                absolute(r)?;
            }
        }
        Command::Ablate(a) => {
            absolute(&mut a.input.input)?;
            if let Some(t) = a.split.test.as_mut() {
                absolute(t)?;
            }
        }
        Command::Bench(a) => {
            if let Some(i) = a.input.as_mut() {
                absolute(i)?;
            }
            if let Some(m) = a.model.as_mut() {
                absolute(m)?;
            }
        }
    }
    Ok(())
}

fn execute(cmd: &Command, out_dir: PathBuf, threads: usize, replay_of: Option<PathBuf>) -> CliResult<()> {
    let mut run = Run::new(out_dir)?;
    match cmd {
        Command::Synth(a) => commands::synth(&mut run, a)?,
        Command::Profile(a) => commands::profile(&mut run, a)?,
        Command::Fit(a) => commands::fit(&mut run, a)?,
        Command::Explain(a) => commands::explain(&mut run, a)?,
        Command::Fs(a) => commands::fs(&mut run, a)?,
        Command::Ablate(a) => commands::ablate(&mut run, a)?,
        Command::Bench(a) => commands::bench(&mut run, a)?,
        Command::Replay(_) => return Err(CliError::Usage("a manifest cannot replay another replay".into())),
    }
    let dir = run.dir().to_path_buf();
    run.finish(cmd.clone(), threads, replay_of)?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn replay(manifest_path: &Path, out_dir: Option<PathBuf>, threads: usize) -> CliResult<()> {
    let m = RunManifest::read(manifest_path)?;
    for input in &m.inputs {
        let now = sha256_file(&input.path)?;
        if now != input.sha256 {
            return Err(CliError::Data(format!(
                "{}: contents changed since the recorded run (sha256 {} != {})",
                input.path.display(),
                now,
                input.sha256
            )));
        }
    }
    let out_dir = match out_dir {
        Some(d) => d,
        None => manifest_path.parent().unwrap_or(Path::new(".")).join("replay"),
    };
    let source = std::path::absolute(manifest_path).map_err(|e| CliError::io(manifest_path, e))?;
    execute(&m.config, out_dir, threads, Some(source))
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    }
    let threads = rayon::current_num_threads();
    let mut cmd = cli.command;
    match &cmd {
        Command::Replay(a) => replay(&a.manifest, cli.out_dir, threads),
        _ => {
            resolve_paths(&mut cmd)?;
            let out_dir = cli.out_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
            execute(&cmd, out_dir, threads, None)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match catch_unwind(AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(3)
        }
    }
}
