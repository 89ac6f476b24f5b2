//! `fastzip`: security sizing, signal processing, live pairing and
//! evaluation from one binary.

mod cmd;
mod error;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::{usage, CliError};
use settings::Settings;

/// Context-based zero-interaction pairing toolkit.
///
/// Exit status: 0 success, 1 usage error, 2 data error, 3 pairing aborted.
#[derive(Parser)]
#[command(name = "fastzip", version)]
struct Cli {
    /// Config file of `key = value` lines (default: $FASTZIP_CONFIG, then ./fastzip.conf).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for every random choice; output is reproducible with it.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Progress and diagnostics on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    /// Worker threads for the evaluation subcommands (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Offline-attack probabilities, fingerprint sizes and pairing times.
    CalcParams(cmd::calc::Args),
    /// Resample, decompose and smooth raw CSV recordings into context streams.
    Preprocess(cmd::data::PreprocessArgs),
    /// Turn raw CSV recordings into per-window fingerprints (dump format).
    Quantize(cmd::data::QuantizeArgs),
    /// Pair with a peer over TCP using a fingerprint dump.
    Pair(cmd::pair::Args),
    /// TAR and FAR per sensor set and scenario.
    Evaluate(cmd::eval::EvaluateArgs),
    /// FAR under injection, replay or similar-context attacks.
    Attack(cmd::eval::AttackArgs),
    /// Randomness diagnostics for a fingerprint corpus.
    Entropy(cmd::eval::EntropyArgs),
    /// Write synthetic in-car recordings as CSV.
    Generate(cmd::data::GenerateArgs),
    /// Time loopback pairing sessions per phase.
    Bench(cmd::bench::Args),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| usage(format!("--jobs: {e}")))?;
    }
    let s = Settings::new(cli.config.as_deref(), cli.seed, cli.verbose)?;
    if let Some(p) = &s.source {
        s.note(format!("config {}", p.display()));
    }
    match cli.command {
        Command::CalcParams(a) => cmd::calc::run(&s, a),
        Command::Preprocess(a) => cmd::data::preprocess(&s, a),
        Command::Quantize(a) => cmd::data::quantize(&s, a),
        Command::Pair(a) => cmd::pair::run(&s, a),
        Command::Evaluate(a) => cmd::eval::evaluate(&s, a),
        Command::Attack(a) => cmd::eval::attack(&s, a),
        Command::Entropy(a) => cmd::eval::entropy(&s, a),
        Command::Generate(a) => cmd::data::generate(&s, a),
        Command::Bench(a) => cmd::bench::run(&s, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fastzip: {e}");
            e.exit_code()
        }
    }
}
