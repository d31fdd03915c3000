//! Library half of the `planar-flow` command-line tool: configuration
//! parsing, SVG rendering, output bookkeeping and the commands themselves.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

pub use commands::Command;
use config::RunConfig;
use output::{Emit, Manifest, Output};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] planar_flow::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for bad input, 3 for a numerical failure, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(e) if e.is_numerical() => 3,
            CliError::Model(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

pub const OUT_ENV: &str = "PLANAR_FLOW_OUT";

pub struct Invocation {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub sets: Vec<String>,
    pub out: Option<PathBuf>,
    pub workers: usize,
}

pub fn load_config(path: Option<&Path>, sets: &[String]) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("reading {}: {e}", p.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    for s in sets {
        cfg.set(s)?;
    }
    Ok(cfg)
}

/// Runs one command and writes its files and `manifest.json`. Returns the
/// output directory.
pub fn run(inv: &Invocation) -> Result<PathBuf, CliError> {
    let start = Instant::now();
    let cfg = load_config(inv.config.as_deref(), &inv.sets)?;
    let dir = match (&inv.out, cfg.raw("output", "dir")) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out")),
    };
    let emit = Emit {
        csv: cfg.bool_or("output", "csv", true)?,
        json: cfg.bool_or("output", "json", true)?,
        svg: cfg.bool_or("output", "svg", true)?,
    };
    let mut out = Output::create(&dir, emit)?;
    let outcome = commands::dispatch(inv.command, &cfg, &mut out)?;
    cfg.check_unused()?;
    let name = inv.command.name();
    let manifest = Manifest {
        tool: "planar-flow",
        version: env!("CARGO_PKG_VERSION"),
        command: name.to_string(),
        config_hash: cfg.hash(name),
        config: cfg.entries().clone(),
        workers: inv.workers,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files: out.files().to_vec(),
        warnings: outcome.warnings,
        summary: outcome.summary,
    };
    manifest.write(out.dir())?;
    Ok(dir)
}
