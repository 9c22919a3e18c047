//! Command-line front end: strict configs with explicit units, CSV raster
//! ingestion, deterministic provenance-stamped outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod raster;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::Value;

pub use config::{parse_config, parse_config_str, serialize_config, MethodChoice, RunConfig, Settings};
pub use error::{CliError, CliResult};
pub use raster::{ingest_raster, Raster, RasterOptions};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book {}

#[derive(Debug, Parser)]
#[command(name = "mimcavity", version, about = "Band structure, gap maps and fits for a membrane-in-the-middle cavity")]
pub struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Matrix-element method (overrides `method`).
    #[arg(long, global = true, value_parser = ["numeric", "analytic", "unlinearized", "both"])]
    pub method: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Seed for Monte-Carlo trials.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Coupled band sweep plus uncoupled and full diagrams.
    Bands,
    /// The four labelled gaps over membrane position and tilt.
    Gapmap,
    /// Avoided crossings with curvature and effective reflectivity.
    Crossing,
    /// Hyperbola or band-phase fit of ingested data.
    Fit,
    /// Tilt-stage calibration.
    Calibrate,
    /// Closed-form against quadrature matrix elements.
    Oracle,
}

/// Parses the config, applies flag overrides and runs the command on a pool
/// of `threads` workers (0 = rayon default).
pub fn run(cli: &Cli) -> CliResult<Value> {
    let (mut config, config_dir) = match &cli.config {
        Some(p) => (
            parse_config(p)?,
            p.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    if let Some(m) = &cli.method {
        config.method = Some(MethodChoice::parse(m).ok_or_else(|| CliError::config("method", format!("unknown method `{m}`")))?);
    }
    let out_dir = match (&cli.out, config.output.as_ref().and_then(|o| o.directory.as_ref())) {
        (Some(p), _) => p.clone(),
        (None, Some(d)) => config_dir.join(d),
        (None, None) => PathBuf::from("out"),
    };
    let ctx = commands::Context::new(config, config_dir, out_dir, cli.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::config("threads", e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Bands => commands::bands(&ctx),
        Command::Gapmap => commands::gapmap(&ctx),
        Command::Crossing => commands::crossing(&ctx),
        Command::Fit => commands::fit(&ctx),
        Command::Calibrate => commands::calibrate(&ctx),
        Command::Oracle => commands::oracle(&ctx),
    })
}
