use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use homoclinic_cli::commands::{self, Context};
use homoclinic_cli::RunConfig;

/// Homoclinic orbits of u'' + a(t) grad W(u) = 0 with
/// W(u) = -|u|^2 |u - q|^-alpha and a(t) = a_base + a_amp cos(2 pi t / T).
///
/// Configuration is one JSON document; every field is optional. Defaults:
///   potential: form "power", dimension 2, q (2, 0), alpha 2, a_base 2.5,
///              a_amp 1, period 1
///   grid:      T = period, m 40 nodes per period, M 8 periods each side
///   solver:    grad_tol 1e-6, max_iters 20000, armijo_c1 1e-4, backtrack 0.5,
///              max_backtracks 60, eps_k 0.1, renormalize_every 25,
///              bump_width 2, k0 1.5, center 0, orientation 1, transverse 1,
///              precondition true, clamp_window 50, zero_threshold 1e-4,
///              tail_tol_u 1e-3, tail_tol_du 1e-2, max_restarts 3
///   search:    targets 3, eps_distinct 0.1, k0s [1.5, 1.2, 2], centers
///              [0, 0.5, 0.25, 0.75], widths [2, 1.5], orientations [1, -1],
///              multibump true, support_threshold 0.05, delta_bump 0.05,
///              delta_gap 0.01
///   refine:    fine_m 2m, max_action_drift 0.05, ratio_band [3.5, 4.5]
///   diagnose:  sobolev_windows 20
///   seed 0, output unset
///
/// Exit status: 0 success, 1 configuration or i/o error, 2 hypothesis
/// violation, 3 no (conforming) solution.
#[derive(Debug, Parser)]
#[command(name = "homoclinic", version, verbatim_doc_comment)]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config; falls back to
    /// $HOMOCLINIC_OUT, then ./homoclinic-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for `search`; 1 is deterministic.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the hypothesis checks and print a pass/fail table.
    Check,
    /// Compute one homoclinic candidate (solution.csv, report.json).
    Solve,
    /// Search for geometrically distinct candidates (library.json,
    /// entry_*.csv, distances.csv, search_report.json).
    Search {
        /// Overrides search.targets.
        #[arg(long)]
        targets: Option<usize>,
    },
    /// Solve at m and fine_m and compare residuals and actions
    /// (refine_report.json).
    Refine,
    /// Decompose a trajectory into bumps and run all diagnostics
    /// (diagnose_report.json).
    Diagnose {
        /// Trajectory CSV on the configured grid.
        trajectory: PathBuf,
        /// Library manifest; defaults to <out>/library.json when present.
        #[arg(long)]
        library: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    // Usage errors share the configuration status; clap's own default of 2
    // would collide with the hypothesis status.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path),
        None => RunConfig::parse("{}"),
    }
    .unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    });
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Command::Search { targets: Some(t) } = &cli.command {
        config.search.targets = *t;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.output.clone())
        .or_else(|| std::env::var_os("HOMOCLINIC_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("homoclinic-out"));
    let ctx = Context {
        config,
        out,
        jobs: cli.jobs,
    };
    let code = match &cli.command {
        Command::Check => commands::check(&ctx),
        Command::Solve => commands::solve(&ctx),
        Command::Search { .. } => commands::search(&ctx),
        Command::Refine => commands::refine(&ctx),
        Command::Diagnose {
            trajectory,
            library,
        } => commands::diagnose(&ctx, trajectory, library.as_deref()),
    };
    ExitCode::from(code as u8)
}
