mod commands;
mod config;
mod plot;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use firstnature::geo::Point;
use firstnature::synth::SynthParams;
use firstnature::{Error, Result};

use crate::commands::Ctx;
use crate::config::{RawConfig, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "firstnature", version, about = "Market access, event studies and activity panels")]
struct Cli {
    /// Configuration file (`[section]` / `key = value`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// `section.key=value`, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cost-distance field from every port (or one port / one point).
    Costdist {
        #[arg(long)]
        port: Option<String>,
        /// Source point `x,y` instead of ports.
        #[arg(long, value_parser = parse_point)]
        source: Option<Point>,
    },
    /// Market access under the open and closed port sets.
    Ma,
    /// Census event study for the configured outcome and treatment.
    Eventstudy,
    /// Difference-in-differences on register traffic.
    Ppml,
    /// Archaeological activity panel and bootstrap event study.
    Arch,
    /// Propensity-score matching on soil composition.
    Match,
    /// Every stage the configured inputs allow.
    Pipeline {
        /// Also sweep theta x alpha x control subgroup.
        #[arg(long)]
        multiverse: bool,
    },
    /// Write a synthetic world with known effects plus a config for it.
    Synth {
        #[arg(long)]
        tile_km: Option<f64>,
        #[arg(long)]
        base_population: Option<f64>,
        #[arg(long)]
        population_noise: Option<f64>,
        #[arg(long)]
        arch_decline: Option<f64>,
    },
}

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let x = x.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let y = y.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok(Point::new(x, y))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        e if e.is_numerical() => 4,
        _ => 3,
    }
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) => "config",
        Error::Io { .. } => "io",
        Error::Csv(_) => "csv",
        Error::Json(_) => "json",
        Error::Raster(_) => "raster",
        Error::InvalidInput(_) => "invalid_input",
        Error::OutOfExtent { .. } => "out_of_extent",
        Error::OutOfBounds { .. } => "out_of_bounds",
        Error::Singular(_) => "singular",
        Error::Separation(_) => "separation",
        Error::NotConverged { .. } => "not_converged",
        Error::Numerical(_) => "numerical",
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut raw = match &cli.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::empty(&std::env::current_dir().map_err(|e| Error::io(".", e))?),
    };
    for o in &cli.overrides {
        raw.set(o)?;
    }
    if let Some(seed) = cli.seed {
        raw.set(&format!("run.seed={seed}"))?;
    }
    RunConfig::from_raw(raw)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    if let Command::Synth {
        tile_km,
        base_population,
        population_noise,
        arch_decline,
    } = &cli.command
    {
        let mut params = SynthParams::with_seed(cli.seed.unwrap_or(42));
        if let Some(v) = tile_km {
            params.tile_km = *v;
        }
        if let Some(v) = base_population {
            params.base_population = *v;
        }
        if let Some(v) = population_noise {
            params.population_noise = *v;
        }
        if let Some(v) = arch_decline {
            params.arch_decline = *v;
        }
        params.validate()?;
        let header = format!("synthetic seed={}", params.seed);
        return commands::cmd_synth(&cli.out_dir, &params, &header);
    }

    let cfg = load_config(&cli)?;
    log::info!("{}", cfg.header());
    let ctx = Ctx::new(cfg, cli.out_dir.clone())?;
    match &cli.command {
        Command::Costdist { port, source } => commands::cmd_costdist(&ctx, port.as_deref(), *source),
        Command::Ma => commands::cmd_ma(&ctx).map(drop),
        Command::Eventstudy => commands::cmd_eventstudy(&ctx).map(drop),
        Command::Ppml => commands::cmd_ppml(&ctx).map(drop),
        Command::Arch => commands::cmd_arch(&ctx, None).map(drop),
        Command::Match => commands::cmd_match(&ctx).map(drop),
        Command::Pipeline { multiverse } => commands::cmd_pipeline(&ctx, *multiverse),
        Command::Synth { .. } => unreachable!(),
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: kind={} message={msg:?}", kind(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
