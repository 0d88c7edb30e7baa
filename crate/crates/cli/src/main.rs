mod args;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Global;
use config::ConfigFile;

/// Bad flags, config entries or parameter values; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn thread_pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("PSM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| UsageError(format!("PSM_THREADS must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let global = Global {
        seed: cfg.pick_str(cli.seed, "seed")?.unwrap_or(0),
        out: cfg.pick_str(cli.out, "out")?.unwrap_or_else(|| PathBuf::from(".")),
        quiet: cfg.flag(cli.quiet, "quiet")?,
    };
    let pool = thread_pool()?;
    pool.install(|| match cli.command {
        Command::Generate(a) => commands::generate(a, &global, &cfg),
        Command::Shapes(a) => commands::shapes(a, &global),
        Command::Fit(a) => commands::fit(a, &global, &cfg, false),
        Command::CompareGeodesic(a) => commands::fit(a, &global, &cfg, true),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
