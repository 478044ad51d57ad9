//! `cookie-walk-lab`: experiment runner for cookie random walks.
//!
//! Exit codes: 0 when every check passes, 1 on an invariant failure, 2 on a
//! configuration or usage error.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::{CommonArgs, Defaults, Format};

#[derive(Parser)]
#[command(name = "cookie-walk-lab", version, about = "Simulate and verify long-range cookie random walks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Drift, classification and the ballisticity condition
    Criteria(CommonArgs),
    /// Simulate replicas and summarize each trajectory
    Simulate(CommonArgs),
    /// Renewal and naive speed estimates
    Speed(CommonArgs),
    /// Build the block coupling and verify its invariants
    Couple(CommonArgs),
    /// Exit-time, martingale and monotone-coupling checks
    VerifyLemmas {
        #[command(flatten)]
        common: CommonArgs,
        /// Declared bound on renewal gap second moments
        #[arg(long, default_value_t = 2.0)]
        gap_bound: f64,
    },
    /// Grid over epsilon and/or (c, ell)
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Epsilon grid `lo:hi:step`
        #[arg(long)]
        eps: Option<String>,
        /// Range of c, `lo:hi`
        #[arg(long)]
        c_range: Option<String>,
        /// Range of ell, `lo:hi`
        #[arg(long)]
        ell_range: Option<String>,
        /// Also estimate the naive speed at every epsilon
        #[arg(long)]
        with_speed: bool,
    },
}

pub enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

const THREADS_VAR: &str = "COOKIE_WALK_THREADS";

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow::anyhow!("{THREADS_VAR}={v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    init_threads().map_err(Failure::Config)?;
    let (common, defaults) = match &cli.command {
        Command::Criteria(c) => (c, Defaults { replicas: 1, horizon: 1, format: Format::Json }),
        Command::Simulate(c) => (c, Defaults { replicas: 1, horizon: 100_000, format: Format::Csv }),
        Command::Speed(c) => (c, Defaults { replicas: 20, horizon: 100_000, format: Format::Json }),
        Command::Couple(c) => (c, Defaults { replicas: 4, horizon: 100_000, format: Format::Json }),
        Command::VerifyLemmas { common, .. } => {
            (common, Defaults { replicas: 10_000, horizon: 100_000, format: Format::Json })
        }
        Command::Sweep { common, .. } => (common, Defaults { replicas: 20, horizon: 100_000, format: Format::Csv }),
    };
    let (raw, family) = common.merge().map_err(Failure::Config)?;
    if family.is_some_and(|f| f.epsilon.is_none()) && !matches!(cli.command, Command::Sweep { .. }) {
        return Err(Failure::Config(anyhow::anyhow!("--family: eps is required outside `sweep`")));
    }
    let resolved = raw.resolve(&defaults).map_err(Failure::Config)?;
    if common.dump_config {
        let text = serde_json::to_string_pretty(&resolved.raw).map_err(|e| Failure::Runtime(e.into()))?;
        println!("{text}");
        return Ok(true);
    }
    match &cli.command {
        Command::Criteria(_) => commands::criteria(&resolved),
        Command::Simulate(_) => commands::simulate(&resolved),
        Command::Speed(_) => commands::speed(&resolved),
        Command::Couple(_) => commands::couple(&resolved),
        Command::VerifyLemmas { gap_bound, .. } => commands::verify_lemmas(&resolved, *gap_bound),
        Command::Sweep { eps, c_range, ell_range, with_speed, .. } => commands::sweep(
            &resolved,
            &commands::SweepArgs {
                family,
                eps: eps.as_deref(),
                c_range: c_range.as_deref(),
                ell_range: ell_range.as_deref(),
                with_speed: *with_speed,
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("cookie-walk-lab: one or more checks failed");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("cookie-walk-lab: configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("cookie-walk-lab: {e:#}");
            ExitCode::from(1)
        }
    }
}
