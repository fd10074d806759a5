//! `resip` command surface. Every subcommand reads and writes under the data root
//! with stable file names; outputs start with a provenance header.

mod analytics;
mod classify;
mod net;
mod pdns;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::flatfile::{write_with_header, Provenance};

#[derive(Debug, Parser)]
#[command(
    name = "resip",
    version,
    about = "Residential proxy detection and measurement toolkit",
    arg_required_else_help = true
)]
pub struct Cli {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured data root (and RESIP_DATA_ROOT).
    #[arg(long, global = true)]
    data_root: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search query generation and result ingestion.
    #[command(subcommand)]
    Harvest(net::HarvestCmd),
    /// Website crawling and snapshot bundles.
    #[command(subcommand)]
    Crawl(net::CrawlCmd),
    /// RPS website classifier.
    #[command(subcommand)]
    Classify(classify::ClassifyCmd),
    /// Backconnect infiltration probes.
    #[command(subcommand)]
    Infiltrate(net::InfiltrateCmd),
    /// Direct RESIP collection and verification.
    #[command(subcommand)]
    Collect(net::CollectCmd),
    /// Passive DNS analytics.
    #[command(subcommand)]
    Pdns(pdns::PdnsCmd),
    /// Distributions, overlaps and threat-intel joins.
    #[command(subcommand)]
    Analytics(analytics::AnalyticsCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Partial,
}

impl Status {
    fn from_problems(n: usize) -> Status {
        if n == 0 {
            Status::Ok
        } else {
            Status::Partial
        }
    }
}

pub(crate) struct Ctx {
    pub cfg: RunConfig,
    pub config_hash: String,
}

impl Ctx {
    pub fn prov(&self, stage: &str) -> Provenance {
        Provenance::new(stage).with_config_hash(self.config_hash.clone())
    }

    pub fn out(&self, stage: &str, name: &str) -> PathBuf {
        self.cfg.stage_dir(stage).join(name)
    }

    pub fn write(&self, path: &Path, prov: &Provenance, body: &str) -> Result<()> {
        write_with_header(path, prov, body)?;
        log::info!("wrote {}", path.display());
        println!("wrote\t{}", path.display());
        Ok(())
    }

    pub fn seed(&self, stage: &str, flag: Option<u64>) -> u64 {
        flag.unwrap_or_else(|| self.cfg.seed(stage))
    }
}

pub(crate) fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(Error::Io)
}

/// Parses `argv` and runs the subcommand. Exit status: 0 success, 1 partial or
/// failed run, 2 usage error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match dispatch(cli) {
        Ok(Status::Ok) => 0,
        Ok(Status::Partial) => {
            eprintln!("completed with errors; see log output");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<Status> {
    let loaded = RunConfig::load(cli.config.as_deref())?;
    let mut cfg = loaded.config;
    if let Some(root) = cli.data_root {
        cfg.data_root = root;
    }
    let ctx = Ctx {
        cfg,
        config_hash: loaded.hash,
    };
    match cli.command {
        Command::Harvest(c) => net::harvest(&ctx, c),
        Command::Crawl(c) => net::crawl(&ctx, c),
        Command::Classify(c) => classify::run(&ctx, c),
        Command::Infiltrate(c) => net::infiltrate(&ctx, c),
        Command::Collect(c) => net::collect(&ctx, c),
        Command::Pdns(c) => pdns::run(&ctx, c),
        Command::Analytics(c) => analytics::run(&ctx, c),
    }
}

/// `name=value` argument.
pub(crate) fn split_pair(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))
}

pub(crate) fn require(path: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.ok_or_else(|| Error::Config(format!("no {what} given on the command line or in the config")))
}
