//! `bubblekit` — experiment runner for the mean-field bubbling toolkit.
//!
//! Exit codes: 0 success; 2 configuration violation; 3 numerical failure
//! (partial artifacts plus `failure.json`); 4 resolution refusal.

mod config;
mod output;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use output::OutputContext;

#[derive(Parser)]
#[command(name = "bubblekit", version, about = "Mean field equation bubbling toolkit")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default: ./out, or output.dir from the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (falls back to BUBBLEKIT_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Random seed for probes and stochastic checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Stage filter for `run` (comma-separated).
    #[arg(long, global = true, value_delimiter = ',')]
    stage: Option<Vec<String>>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the Green table and run its self checks.
    GreenTable,
    /// Newton search for the critical configuration of f_m.
    CriticalPoints,
    /// Configuration quantities: f_m, ℓ(q), D(q).
    Quantities,
    /// Continue the bubbling branch over the λ schedule.
    Branch,
    /// Compare a stored branch against the expansion predictions.
    VerifyExpansion,
    /// Identity checks, kernel residuals, spectra, uniqueness probes.
    Diagnostics,
    /// Exact radial family table for the unit disk.
    DiskExact,
    /// Full pipeline: quantities → branch → verify-expansion → diagnostics.
    Run,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli
        .threads
        .or_else(|| std::env::var("BUBBLEKIT_THREADS").ok().and_then(|s| s.parse().ok()));
    if let Some(t) = threads {
        if t > 0 {
            // A failed build means a pool already exists; keep going.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
    }

    let config_path = match &cli.config {
        Some(p) => p.clone(),
        None => {
            eprintln!("error: --config is required");
            return ExitCode::from(2);
        }
    };
    let config_text = match std::fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_path.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match ExperimentConfig::parse(&config_text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: invalid configuration: {e}");
            return ExitCode::from(2);
        }
    };

    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let out = match OutputContext::new(&out_dir, &config_text) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: cannot create output directory: {e}");
            return ExitCode::from(3);
        }
    };

    let result = match cli.command {
        Command::GreenTable => stages::stage_green_table(&cfg, &out, cli.seed),
        Command::CriticalPoints => stages::stage_critical_points(&cfg, &out),
        Command::Quantities => stages::stage_quantities(&cfg, &out),
        Command::Branch => stages::stage_branch(&cfg, &out),
        Command::VerifyExpansion => stages::stage_verify_expansion(&cfg, &out),
        Command::Diagnostics => stages::stage_diagnostics(&cfg, &out, cli.seed),
        Command::DiskExact => stages::stage_disk_exact(&cfg, &out),
        Command::Run => stages::stage_run(&cfg, &out, cli.seed, cli.stage.as_deref()),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            let manifest = serde_json::json!({
                "config_hash": out.hash,
                "tool_version": output::TOOL_VERSION,
                "exit_code": failure.exit_code(),
                "message": failure.message(),
            });
            let _ = std::fs::write(
                out.path("failure.json"),
                serde_json::to_string_pretty(&manifest).unwrap() + "\n",
            );
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
