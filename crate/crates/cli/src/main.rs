//! `plasmashell`: command-line access to the plasma-shell library. Results go to CSV or
//! JSON.

mod commands;
mod config;
mod report;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Flags, RunConfig};

#[derive(Parser)]
#[command(
    name = "plasmashell",
    version,
    about = "Thermodynamics of a spherical plasma shell"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Features of the first TM resonances at one temperature.
    Table1,
    /// Entropy at one temperature, before and after the heat-kernel subtraction.
    Entropy,
    /// Entropy over a temperature grid, with a summary of its negative region.
    Scan,
    /// Summed phase-shift derivatives of both polarizations over a frequency grid.
    Phase,
    /// Location and shape of the TM resonances.
    Resonances,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerics(plasmashell::Error),
    Io(std::io::Error),
}

impl From<plasmashell::Error> for Failure {
    fn from(e: plasmashell::Error) -> Self {
        match e {
            plasmashell::Error::Domain(msg) => Failure::Usage(msg),
            e => Failure::Numerics(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = RunConfig::resolve(cli.flags)?;
    let report = match cli.command {
        Command::Table1 => commands::table1(&config)?,
        Command::Entropy => commands::entropy(&config)?,
        Command::Scan => commands::scan(&config)?,
        Command::Phase => commands::phase(&config)?,
        Command::Resonances => commands::resonances(&config)?,
    };
    match &config.out {
        Some(path) => {
            let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
            report.write(&config, &mut file)?;
            file.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            report.write(&config, &mut lock)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerics(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
