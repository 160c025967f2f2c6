//! Command-line front end: configuration, subcommands and deterministic output.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use output::Format;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] semicosmo::Error),
    #[error("solution diverged at z = {z:e} (epsilon = {epsilon:e})")]
    Divergence { epsilon: f64, z: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(semicosmo::Error::Domain(_)) => 1,
            CliError::Numerical(semicosmo::Error::Component { source, .. })
                if matches!(**source, semicosmo::Error::Domain(_)) =>
            {
                1
            }
            CliError::Numerical(_) => 2,
            CliError::Divergence { .. } => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "semicosmo",
    version,
    about = "Semiclassical FLRW cosmology with states of low energy"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    /// Comma-separated ε values; overrides `friedmann.epsilon`.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub epsilon: Option<Vec<f64>>,
    /// Relative tolerance for the k-quadrature and the Friedmann ODE.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand, PartialEq, Eq)]
pub enum Command {
    /// ΛCDM background and curvature tensors on the redshift grid.
    Background,
    /// Mode functions on the redshift grid for each configured k.
    Modes,
    /// State-of-low-energy Bogoliubov data per k.
    Sle,
    /// Energy-density breakdown on the redshift grid.
    Rho,
    /// Extended Friedmann solutions H(z) for each ε.
    Friedmann,
    /// Effective radiation fraction and observational verdicts for each ε.
    Scan,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Background => "background",
            Command::Modes => "modes",
            Command::Sle => "sle",
            Command::Rho => "rho",
            Command::Friedmann => "friedmann",
            Command::Scan => "scan",
        }
    }
}

/// Effective configuration after command-line overrides.
pub fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(eps) = &cli.epsilon {
        if eps.is_empty() {
            return Err(CliError::Config(
                "--epsilon needs at least one value".into(),
            ));
        }
        cfg.friedmann.epsilon = eps.clone();
    }
    if let Some(t) = cli.tolerance {
        cfg.tolerances.quad_rel_tol = t;
        cfg.tolerances.ode_rtol = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the command and writes its table. A divergence is reported after the
/// output has been written.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = effective_config(cli)?;
    let out = commands::execute(cli.command, &cfg)?;
    let header = commands::header(cli.command, &cfg, &out.notes);
    let mut buf = Vec::new();
    output::write_table(&mut buf, &out.table, &header, cli.format)?;
    match &cli.out {
        Some(p) => std::fs::write(p, &buf)?,
        None => {
            use std::io::Write;
            std::io::stdout().lock().write_all(&buf)?;
        }
    }
    match out.divergence {
        Some((epsilon, z)) => Err(CliError::Divergence { epsilon, z }),
        None => Ok(()),
    }
}
