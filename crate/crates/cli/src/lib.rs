//! Command-line front end: `qbc run` for experiment reports and `qbc audit`
//! for single-session transcripts.

pub mod config;
pub mod experiments;
pub mod report;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use clap::Parser;

pub use config::{Cli, Command, ExperimentId, Format, RunArgs, RunConfig};
pub use experiments::run_experiment;
pub use report::{Report, CSV_HEADER, VERSION};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_CHECK_FAILED: u8 = 2;

/// Runs every configured experiment in order.
pub fn run_all(cfg: &RunConfig) -> Result<Vec<Report>> {
    cfg.experiments
        .iter()
        .map(|&id| {
            let single = RunConfig { experiments: vec![id], ..cfg.clone() };
            run_experiment(id, &single).with_context(|| format!("experiment {id}"))
        })
        .collect()
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn run(args: &RunArgs) -> Result<u8> {
    let cfg = RunConfig::resolve(args, true)?;
    let reports = run_all(&cfg)?;
    let mut out = open_output(cfg.out.as_deref())?;
    report::write_reports(&reports, cfg.format, &mut out)?;
    out.flush()?;
    Ok(if reports.iter().all(|r| r.pass) { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn audit(args: &config::SessionArgs) -> Result<u8> {
    let cfg = RunConfig::resolve(&RunArgs { session: args.clone(), ..RunArgs::default() }, false)?;
    let transcript = qbc_core::protocol::run_protocol(&cfg.protocol_config())?;
    let mut out = open_output(cfg.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &transcript)?;
    writeln!(out)?;
    out.flush()?;
    Ok(EXIT_OK)
}

/// Entry point behind the binary; returns the process exit status.
pub fn main_with<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return EXIT_OK;
        }
        Err(e) => {
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("usage error");
            eprintln!("{}", line.trim());
            return EXIT_ERROR;
        }
    };
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Audit(args) => audit(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
