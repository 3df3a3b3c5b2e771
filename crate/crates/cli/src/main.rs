use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use twinsearch::{DEFAULT_ANCHORS, DEFAULT_TOLERANCE};
use twinsearch_cli::bench::DEFAULT_REPEATS;
use twinsearch_cli::{
    cmd_analyze, cmd_bench, cmd_verify, AnalyzeConfig, BenchConfig, CliError, DatasetSpec, Format,
    Method, Mode, SyntheticShape,
};

#[derive(Parser)]
#[command(
    name = "twinsearch",
    version,
    about = "Twin-user similarity list experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time k identical-user insertions, twin search vs full build
    Bench(BenchArgs),
    /// Randomised equivalence check of twin search against the full build
    Verify(VerifyArgs),
    /// Per-user similarity distributions and measured candidate-set sizes
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value = "movielens")]
    format: Format,
    #[arg(long, default_value = "user")]
    mode: Mode,
    /// Synthetic format: number of users
    #[arg(long, default_value_t = 200)]
    users: usize,
    /// Synthetic format: number of items
    #[arg(long, default_value_t = 100)]
    items: usize,
    /// Synthetic format: fraction of items each user rates
    #[arg(long, default_value_t = 0.1)]
    density: f64,
}

impl DataArgs {
    fn spec(&self, seed: u64) -> DatasetSpec {
        DatasetSpec {
            path: self.dataset.clone(),
            format: self.format,
            synthetic: SyntheticShape {
                users: self.users,
                items: self.items,
                density: self.density,
            },
            seed,
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 30)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_ANCHORS)]
    c: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of similarity buckets over [0, 1]
    #[arg(long = "x", default_value_t = 10)]
    partitions: u32,
    /// Number of twin injections measured
    #[arg(long, default_value_t = 50)]
    seeds: usize,
    #[arg(long, default_value_t = DEFAULT_ANCHORS)]
    c: usize,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn ms(ns: u128) -> f64 {
    ns as f64 / 1e6
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bench(a) => {
            let mut cfg = BenchConfig::new(a.data.spec(a.seed));
            cfg.mode = a.data.mode;
            cfg.k = a.k;
            cfg.anchors = a.c;
            cfg.seed = a.seed;
            cfg.tolerance = a.tolerance;
            cfg.repeats = a.repeats;
            cfg.out = a.out;
            let r = cmd_bench(&cfg)?;
            let fast = r.total_ns(Method::TwinSearch);
            let slow = r.total_ns(Method::Baseline);
            println!(
                "{}: n={} m={} ratings={} | {} twins, base users {}",
                r.meta.name, r.meta.n, r.meta.m, r.meta.rating_count, cfg.k, r.base_users
            );
            println!(
                "twinsearch total {:.3} ms, baseline total {:.3} ms, ratio {:.4}",
                ms(fast),
                ms(slow),
                fast as f64 / slow as f64
            );
            if cfg.out.is_none() {
                r.write_csv(std::io::stdout().lock())?;
            }
        }
        Command::Verify(a) => {
            if a.trials == 0 {
                eprintln!("warning: 0 trials requested, nothing verified");
            }
            let (oracle, fallback) = cmd_verify(a.trials, a.seed)?;
            println!(
                "oracle equivalence: {}/{} passed; fallback: {}/{} passed",
                oracle.passed, oracle.trials, fallback.passed, fallback.trials
            );
        }
        Command::Analyze(a) => {
            let mut cfg = AnalyzeConfig::new(a.data.spec(0));
            cfg.mode = a.data.mode;
            cfg.partitions = a.partitions;
            cfg.seeds = a.seeds;
            cfg.anchors = a.c;
            cfg.tolerance = a.tolerance;
            cfg.out = a.out;
            let r = cmd_analyze(&cfg)?;
            println!(
                "{}: n={} | {} set0 samples, median {:?}, n/125 = {:.3}, median ratio {:?}",
                r.meta.name,
                r.meta.n,
                r.set0.len(),
                r.median_set0(),
                r.n_over_125(),
                r.median_ratio()
            );
            if cfg.out.is_none() {
                r.write_users_csv(std::io::stdout().lock())?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
