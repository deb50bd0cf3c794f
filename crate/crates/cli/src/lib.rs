//! Command-line front end: reads a JSON configuration, runs one of the
//! `density`, `verify`, `cumulants` or `mollify` commands and reports
//! through CSV files, `key=value` lines and the exit status
//! (0 success, 2 configuration or validation failure, 3 numerical failure).

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{0}")]
    Engine(#[from] freesd::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Engine(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "freesd", version, about = "Densities of freely selfdecomposable laws from their Levy density")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the density on the boundary curve and write `x,v,xi,f` CSV.
    Density {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "density.csv")]
        out: PathBuf,
    },
    /// Run the consistency checks and print one `check=` line each.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print free cumulants and the moments they determine.
    Cumulants {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 4)]
        order: usize,
        /// Also write `n,kappa,moment` CSV to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Densities of the mollified approximations, one CSV per level, plus a
    /// convergence report.
    Mollify {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated mollification levels.
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<u32>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}
