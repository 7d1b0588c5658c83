//! `corrleak` — batch interface to the key-rate engine.
//!
//! Subcommands: `rate` (single point), `sweep` (attenuation x correlation
//! grid to CSV), `optimize` (parameter search at one channel point) and
//! `budget` (epsilon ledger). Exit codes: 0 success including zero-key
//! results, 2 configuration or validation errors, 3 I/O errors.

mod config;
mod report;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::{ConfigError, RunConfig};
use corrleak::framework::{chain_penalty_bits, epsilon_hat};
use corrleak::montecarlo::simulate_channel;
use corrleak::optimizer::optimize_point;
use corrleak::security::ProtocolPoint;
use corrleak::source::{vacuum_bounds_from_intensity, SourceCharacterization};

#[derive(Parser)]
#[command(
    name = "corrleak",
    about = "Finite-key rates for two-state SNS QKD with correlated, leaky sources",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output path (CSV for rate/sweep/optimize); overrides the `out` key.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Override one config key, repeatable: --set channel.att_db=20.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Worker threads (default: all cores; CORRLEAK_THREADS as fallback).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Seed for the Monte Carlo oracle tooling; with `rate`, runs a seeded
    /// photon-level cross-check of the channel model.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Write the effective configuration (after defaults and overrides).
    #[arg(long, global = true, value_name = "PATH")]
    dump_config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the key length at the configured protocol point.
    Rate,
    /// Optimize parameters per (attenuation, xi) grid point and write CSV.
    Sweep,
    /// Optimize the protocol parameters at the configured channel point.
    Optimize,
    /// Print the epsilon ledger for the configured xi and allocation.
    Budget,
}

enum CliError {
    Config(String),
    Io(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<corrleak::Error> for CliError {
    fn from(e: corrleak::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

#[cfg(feature = "parallel")]
fn init_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("CORRLEAK_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn init_threads(_flag: Option<usize>) {}

fn run(cli: &Cli) -> Result<(), CliError> {
    let file_text = match &cli.config {
        Some(path) => Some(
            std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?,
        ),
        None => None,
    };
    let cfg = RunConfig::load(file_text.as_deref(), &cli.set)?;
    if let Some(path) = &cli.dump_config {
        std::fs::write(path, cfg.to_text())
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from));

    match cli.command {
        Command::Rate => cmd_rate(&cfg, out.as_deref(), cli.seed),
        Command::Sweep => cmd_sweep(&cfg, out.as_deref()),
        Command::Optimize => cmd_optimize(&cfg, out.as_deref()),
        Command::Budget => cmd_budget(&cfg),
    }
}

/// The configured source pair: explicit vacuum bounds when given, else the
/// intensity-cap route.
fn configured_source(cfg: &RunConfig) -> Result<SourceCharacterization, CliError> {
    let (v0, v1) = match (cfg.v0, cfg.v1) {
        (Some(v0), Some(v1)) => (v0, v1),
        _ => vacuum_bounds_from_intensity(cfg.mu_max, cfg.extinction)
            .map_err(|e| CliError::Config(e.to_string()))?,
    };
    SourceCharacterization::new(cfg.xi, v0, v1, cfg.p_send)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn cmd_rate(cfg: &RunConfig, out: Option<&std::path::Path>, seed: Option<u64>) -> Result<(), CliError> {
    let channel = cfg.channel()?;
    let budget = cfg.budget()?;
    let src = configured_source(cfg)?;
    let counts = corrleak::channel::expected_statistics(
        cfg.n_total,
        cfg.p_pe,
        &src,
        cfg.mu_max,
        &src,
        cfg.mu_max,
        &channel,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let result = corrleak::security::key_length(
        &counts,
        &src,
        &src,
        &budget,
        &budget.chain_budget(cfg.xi),
        cfg.ec_efficiency,
        cfg.p_send,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;

    print!("{}", report::rate_text(cfg, &result));

    let point = ProtocolPoint {
        p_send: cfg.p_send,
        mu_max: cfg.mu_max,
        p_pe: cfg.p_pe,
    };
    let row = report::csv_row(channel.att_a_db(), cfg.xi, cfg.n_total, &point, &result);
    write_csv(out, std::iter::once(row))?;

    if let Some(seed) = seed {
        let tally = simulate_channel(
            &src,
            cfg.mu_max,
            &src,
            cfg.mu_max,
            &channel,
            cfg.p_pe,
            cfg.mc_samples,
            seed,
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        print!("{}", report::monte_carlo_text(&tally, &counts, cfg.mc_samples));
    }
    Ok(())
}

fn cmd_optimize(cfg: &RunConfig, out: Option<&std::path::Path>) -> Result<(), CliError> {
    let channel = cfg.channel()?;
    let budget = cfg.budget()?;
    let best = optimize_point(
        &channel,
        cfg.n_total,
        cfg.xi,
        &budget,
        cfg.ec_efficiency,
        &cfg.search_space(),
    )?;
    print!("{}", report::optimize_text(cfg, &best));
    let row = report::csv_row(
        channel.att_a_db(),
        cfg.xi,
        cfg.n_total,
        &best.point,
        &best.result,
    );
    write_csv(out, std::iter::once(row))?;
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, out: Option<&std::path::Path>) -> Result<(), CliError> {
    let budget = cfg.budget()?;
    let space = cfg.search_space();
    let attenuations = cfg.sweep_attenuations();
    let mut cells = Vec::new();
    for &xi in &cfg.sweep_xi_list {
        for &att in &attenuations {
            cells.push((xi, att));
        }
    }

    let evaluate = |&(xi, att): &(u32, f64)| -> Result<String, CliError> {
        let channel = cfg.channel_at(att)?;
        let best = optimize_point(&channel, cfg.n_total, xi, &budget, cfg.ec_efficiency, &space)?;
        Ok(report::csv_row(att, xi, cfg.n_total, &best.point, &best.result))
    };

    // Rows evaluate independently and join in (xi, attenuation) order.
    #[cfg(feature = "parallel")]
    let rows: Result<Vec<String>, CliError> = {
        use rayon::prelude::*;
        cells.par_iter().map(evaluate).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Result<Vec<String>, CliError> = cells.iter().map(evaluate).collect();

    let default_path = PathBuf::from("sweep.csv");
    let path = out.unwrap_or(&default_path);
    write_csv(Some(path), rows?.into_iter())?;
    Ok(())
}

fn cmd_budget(cfg: &RunConfig) -> Result<(), CliError> {
    let budget = cfg.budget()?;
    let chain = budget.chain_budget(cfg.xi);
    let eps1 = epsilon_hat(&chain).map_err(|e| CliError::Config(e.to_string()))?;
    print!(
        "{}",
        report::budget_text(cfg.xi, &budget, eps1, chain_penalty_bits(&chain))
    );
    Ok(())
}

/// Writes header plus rows to the path, or to stdout when no path is set.
fn write_csv(
    path: Option<&std::path::Path>,
    rows: impl Iterator<Item = String>,
) -> Result<(), CliError> {
    let mut text = String::from(report::CSV_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
