mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use snowball_core::design::DesignKind;
use snowball_core::graph::MissingPolicy;
use snowball_core::resample::ResampleMode;
use snowball_core::spatial::Adjacency;

use crate::config::ConfigFile;

/// Snowball network sampling, inclusion-frequency estimation and Monte
/// Carlo evaluation.
///
/// Every flag can also be set in a `key = value` config file passed with
/// `--config`; keys are the long flag names without dashes in front (for
/// example `resample-size = 70`). Flags override the file.
#[derive(Debug, Parser)]
#[command(name = "snowball", version)]
struct Cli {
    /// Flat `key = value` config file; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master random seed [default: 2024].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files [default: .].
    #[arg(long = "out-dir", global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads: a count or `auto`. Never changes the output.
    #[arg(long, global = true)]
    threads: Option<Threads>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a snowball sample from a population network.
    ///
    /// Writes events.csv, sample_edges.txt, degrees.csv and attributes.csv.
    Sample {
        #[command(flatten)]
        population: PopulationArgs,
        #[command(flatten)]
        design: DesignArgs,
    },
    /// Estimate inclusion frequencies of sampled units by resampling the
    /// observed sample network. Writes frequencies.csv.
    Resample {
        #[command(flatten)]
        input: SampleInput,
        #[command(flatten)]
        resample: ResampleArgs,
    },
    /// Estimate population means from an observed sample. Writes
    /// estimates.csv.
    Estimate {
        #[command(flatten)]
        input: SampleInput,
        /// Frequency table (unit_label,f[,floored]); computed by resampling
        /// when absent.
        #[arg(long)]
        freqs: Option<PathBuf>,
        #[command(flatten)]
        resample: ResampleArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Run a Monte Carlo study. Writes report.csv, coverage.csv,
    /// parabola.csv and freq_hist.csv, and prints a summary.
    Simulate {
        #[command(flatten)]
        population: PopulationArgs,
        #[command(flatten)]
        synthetic: SyntheticArgs,
        #[command(flatten)]
        design: DesignArgs,
        #[command(flatten)]
        resample: ResampleArgs,
        #[command(flatten)]
        report: ReportArgs,
        /// Number of replicates (at least 2) [default: 200].
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Turn a grid of plot counts into a network. Writes edges.txt and
    /// counts.csv.
    Spatial {
        /// Grid file: a `rows cols` header, then one line of counts per row.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// `rook` or `queen` [default: rook].
        #[arg(long)]
        adjacency: Option<Adjacency>,
        /// Count at which a plot is occupied [default: 1].
        #[arg(long)]
        threshold: Option<f64>,
    },
}

#[derive(Debug, Args)]
struct PopulationArgs {
    /// Population edge list (`a b` per line, `a b ->` for one-way links).
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Node attribute CSV with an `id` column.
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// Allow one-way links in the edge list.
    #[arg(long)]
    directed: bool,
    /// Empty attribute cells: `zero` or `error` [default: zero].
    #[arg(long)]
    missing: Option<MissingPolicy>,
}

#[derive(Debug, Args)]
struct SyntheticArgs {
    /// Synthetic population size when no edge list is given [default: 1000].
    #[arg(long)]
    nodes: Option<usize>,
    /// Mean degree of the synthetic population [default: 8].
    #[arg(long = "mean-degree")]
    mean_degree: Option<f64>,
    /// Degree tail exponent of the synthetic population [default: 2.2].
    #[arg(long)]
    exponent: Option<f64>,
}

#[derive(Debug, Args)]
struct DesignArgs {
    /// `regular` or `re-recruit`.
    #[arg(long)]
    design: Option<DesignKind>,
    /// Target sample size.
    #[arg(long = "n")]
    n: Option<usize>,
    /// Probability of tracing each link.
    #[arg(long = "q")]
    q: Option<f64>,
    /// Number of initial seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// Stop after this many tracing waves.
    #[arg(long = "max-waves")]
    max_waves: Option<usize>,
    /// Do not reseed when the frontier runs dry.
    #[arg(long = "no-reseed")]
    no_reseed: bool,
}

#[derive(Debug, Args)]
struct ResampleArgs {
    /// `process` or `repeated`.
    #[arg(long)]
    mode: Option<ResampleMode>,
    /// Number of counted resamples.
    #[arg(long = "T")]
    resamples: Option<usize>,
    /// Resample size m.
    #[arg(long = "resample-size")]
    resample_size: Option<usize>,
    /// Steps discarded before counting (process mode) [default: 10 m].
    #[arg(long = "burn-in")]
    burn_in: Option<usize>,
    /// Per-addition reseed probability (process mode).
    #[arg(long = "reseed-rate")]
    reseed_rate: Option<f64>,
    /// Lower bound on frequencies [default: 1/(2T)].
    #[arg(long = "freq-floor")]
    freq_floor: Option<f64>,
    /// Links traced per process step.
    #[arg(long = "step-trace")]
    step_trace: Option<usize>,
    /// Units removed per process step.
    #[arg(long = "step-remove")]
    step_remove: Option<usize>,
}

#[derive(Debug, Args)]
struct SampleInput {
    /// Directory holding sample_edges.txt, degrees.csv and attributes.csv
    /// [default: .].
    #[arg(long = "sample-dir")]
    sample_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Comma-separated variables: `degree`, `kconc:K`, or attribute names.
    #[arg(long)]
    variables: Option<String>,
    /// Comma-separated estimators from NEW, YBAR, VH [default: all].
    #[arg(long)]
    estimators: Option<String>,
    /// Interval level is 1 - alpha [default: 0.05].
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
enum Threads {
    Auto,
    Count(usize),
}

impl FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Threads::Auto);
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected a positive count or `auto`, got `{s}`")),
            Ok(n) => Ok(Threads::Count(n)),
        }
    }
}

/// Settings shared by every subcommand.
pub struct Common {
    pub seed: u64,
    pub out_dir: PathBuf,
}

const GLOBAL_KEYS: &[&str] = &["seed", "out-dir", "threads"];

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let common = Common {
        seed: file.pick(cli.seed, "seed")?.unwrap_or(commands::DEFAULT_SEED),
        out_dir: file.pick(cli.out_dir, "out-dir")?.unwrap_or_else(|| PathBuf::from(".")),
    };
    let threads = match file.pick(cli.threads, "threads")?.unwrap_or(Threads::Auto) {
        Threads::Auto => 0,
        Threads::Count(n) => n,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("starting worker threads")?;
    pool.install(|| commands::dispatch(cli.command, &file, &common))
}
