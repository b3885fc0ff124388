use std::path::PathBuf;
use std::process::ExitCode;

use ballotlens::pipeline::{
    cmd_features, cmd_fetch, cmd_fit, cmd_report, ConfigOverrides, PipelineConfig, PipelineError,
};
use ballotlens::synth::{generate, SynthConfig};
use clap::{Parser, Subcommand};

/// Wikipedia pageviews, TV mentions and fundraising as predictors of US congressional
/// election outcomes.
#[derive(Debug, Parser)]
#[command(name = "ballotlens", version)]
struct Cli {
    /// Pipeline config file (TOML).
    #[arg(long, global = true, default_value = "ballotlens.toml")]
    config: PathBuf,

    /// Forbid network access; cache misses become errors.
    #[arg(long, global = true)]
    offline: bool,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Response cache directory.
    #[arg(long, global = true, env = "BALLOTLENS_CACHE")]
    cache: Option<PathBuf>,

    /// Comma-separated registry model names.
    #[arg(long, global = true, value_delimiter = ',')]
    models: Option<Vec<String>>,

    /// Week selection, e.g. 0-51 or 3,7,51.
    #[arg(long, global = true)]
    weeks: Option<String>,

    /// Use cumulative (true) or per-week (false) series for the weekly traces.
    #[arg(long, global = true, value_parser = clap::builder::BoolishValueParser::new())]
    cumulative: Option<bool>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Populate the response cache with pageview and TV-mention series.
    Fetch,
    /// Build weekly and election-day feature tables.
    Features,
    /// Fit the selected registry models.
    Fit,
    /// Write figure data, the probability grid, tallies and the combined report.
    Report,
    /// fetch, features, fit and report in order.
    All,
    /// Write a seeded synthetic corpus with its own config and cache.
    Synth {
        /// Directory to write into.
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = SynthConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = SynthConfig::default().house_races)]
        house_races: usize,
        #[arg(long, default_value_t = SynthConfig::default().senate_races)]
        senate_races: usize,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    cfg.apply(&ConfigOverrides {
        offline: cli.offline,
        out: cli.out.clone(),
        cache: cli.cache.clone(),
        models: cli.models.clone(),
        weeks: cli.weeks.clone(),
        cumulative: cli.cumulative,
    });
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    if let Command::Synth { dir, seed, house_races, senate_races } = &cli.command {
        let cfg = SynthConfig { seed: *seed, house_races: *house_races, senate_races: *senate_races, ..SynthConfig::default() };
        let s = generate(dir, &cfg)?;
        println!("synth: {} races, {} candidates, config {}", s.races, s.candidates, s.config.display());
        return Ok(());
    }
    let cfg = load_config(cli)?;
    let fetch = |cfg: &PipelineConfig| -> Result<(), PipelineError> {
        let s = cmd_fetch(cfg)?;
        println!(
            "fetch: candidates {}, cached: {}, fetched: {}, missing pages {}",
            s.candidates,
            s.cached,
            s.fetched,
            s.missing_pages.len()
        );
        Ok(())
    };
    let features = |cfg: &PipelineConfig| -> Result<(), PipelineError> {
        let s = cmd_features(cfg)?;
        println!("features: {} candidates, {} weeks, {} zero-total flags", s.candidates, s.weeks.len(), s.zero_total_flags);
        Ok(())
    };
    let fit = |cfg: &PipelineConfig| -> Result<(), PipelineError> {
        let index = cmd_fit(cfg)?;
        println!("fit: {} models written", index.len());
        Ok(())
    };
    let report = |cfg: &PipelineConfig| -> Result<(), PipelineError> {
        let s = cmd_report(cfg)?;
        println!("report: {} files in {}", s.files.len(), cfg.out.display());
        Ok(())
    };
    match cli.command {
        Command::Fetch => fetch(&cfg),
        Command::Features => features(&cfg),
        Command::Fit => fit(&cfg),
        Command::Report => report(&cfg),
        Command::All => {
            fetch(&cfg)?;
            features(&cfg)?;
            fit(&cfg)?;
            report(&cfg)
        }
        Command::Synth { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
