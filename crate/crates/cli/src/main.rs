//! `crnsynth`: stratification, local synthesis and series tables for
//! control-affine systems and reaction networks.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{GridSpec, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or model input. Exit code 2.
    Config(String),
    /// Numerical failure. Exit code 3.
    Numerical(String),
    /// Output could not be written. Exit code 2.
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(s) => write!(f, "config error: {s}"),
            CliError::Numerical(s) => write!(f, "numerical failure: {s}"),
            CliError::Io(s) => write!(f, "output error: {s}"),
        }
    }
}

impl From<crnsynth::Error> for CliError {
    fn from(e: crnsynth::Error) -> Self {
        use crnsynth::Error as E;
        match e {
            E::Domain(_) | E::InvalidNetwork(_) | E::InvalidInput(_) | E::Unsupported(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "crnsynth", version, about = "Local time-optimal synthesis near a target manifold")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Deficiency, connectivity, conservation laws and an optional simulation.
    Network,
    /// Singular, exceptional and marker loci on the target.
    Strata,
    /// Catalog labels and loci at anchor points.
    Synthesis,
    /// Lie-series coefficient tables and switching surfaces.
    Series,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Network => "network",
            Command::Strata => "strata",
            Command::Synthesis => "synthesis",
            Command::Series => "series",
        }
    }
}

#[derive(Args, Debug)]
struct Common {
    /// Builtin model (tutorial, seminf, mckeithan, unfolding) or network file.
    #[arg(long, global = true)]
    model: Option<String>,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Series truncation order.
    #[arg(long, global = true)]
    order: Option<u16>,
    /// Target grid node counts.
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<[usize; 2]>,
    /// Backward integration horizon.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Validate synthesis anchors with the brute-force oracle.
    #[arg(long, global = true)]
    oracle: bool,
    /// Seed for probe points.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Locus tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

fn parse_grid(s: &str) -> Result<[usize; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected nx,ny".into());
    }
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t}: {e}"));
    Ok([p(parts[0])?, p(parts[1])?])
}

fn resolve(cli: &Cli) -> Result<(RunConfig, PathBuf), CliError> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &c.model {
        cfg.model = m.clone();
    }
    if let Some(o) = c.order {
        cfg.order = o;
    }
    if let Some(h) = c.horizon {
        cfg.horizon = h;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = c.tol {
        cfg.tolerances.locus = t;
    }
    if let Some(n) = c.grid {
        let g = cfg.grid.clone().unwrap_or_else(|| commands::default_grid(&cfg.model));
        cfg.grid = Some(GridSpec { n, ..g });
    }
    let out = c
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    cfg.validate()?;
    Ok((cfg, out))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let (cfg, out) = resolve(cli)?;
    let model = cfg.model()?;
    let mut em = output::Emitter::new(&out, cli.command.name(), &cfg)?;
    match cli.command {
        Command::Network => commands::network::run(&cfg, &model, &mut em),
        Command::Strata => commands::strata::run(&cfg, &model, &mut em),
        Command::Synthesis => commands::synthesis::run(&cfg, &model, cli.common.oracle, &mut em),
        Command::Series => commands::series::run(&cfg, &model, &mut em),
    }?;
    for p in em.written() {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("crnsynth: {e}");
            ExitCode::from(e.code())
        }
    }
}
