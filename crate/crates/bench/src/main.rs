use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ggm_bench::experiments::{run_compare, run_ggm_fit, run_glasso_fit, run_table1, run_table2, run_tune_hmc};
use ggm_bench::{Config, Result};

#[derive(Parser)]
#[command(name = "ggm-bench", about = "GWishart sampler and GGM structure-learning benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; missing keys take built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Sampler ESS and ESS/sec on synthetic cases.
    Table1(Common),
    /// Mass-matrix construction methods on one case.
    Table2(Common),
    /// Test log likelihood of the joint samplers against glasso and the empirical precision.
    Compare(Common),
    /// Step-size tuning towards 65% acceptance.
    TuneHmc(Common),
    /// Cross-validated graphical lasso.
    GlassoFit(Common),
    /// Joint graph and precision sampler.
    GgmFit(Common),
}

fn run(cli: Cli) -> Result<()> {
    let (common, f): (Common, fn(&Config, u64, &std::path::Path) -> Result<()>) = match cli.command {
        Command::Table1(c) => (c, |cfg, s, o| run_table1(cfg, s, o).map(|_| ())),
        Command::Table2(c) => (c, |cfg, s, o| run_table2(cfg, s, o).map(|_| ())),
        Command::Compare(c) => (c, |cfg, s, o| run_compare(cfg, s, o).map(|_| ())),
        Command::TuneHmc(c) => (c, |cfg, s, o| run_tune_hmc(cfg, s, o).map(|_| ())),
        Command::GlassoFit(c) => (c, |cfg, s, o| run_glasso_fit(cfg, s, o).map(|_| ())),
        Command::GgmFit(c) => (c, |cfg, s, o| run_ggm_fit(cfg, s, o).map(|_| ())),
    };
    let config = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    f(&config, common.seed, &common.out)?;
    eprintln!("wrote results to {}", common.out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
