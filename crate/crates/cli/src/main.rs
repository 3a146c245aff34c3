use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mispro::error::{Category, Error};

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

mod commands;

#[derive(Debug, Parser)]
#[command(
    name = "mispro",
    version,
    about = "Phoneme mispronunciation detection with classic learners and ensembles"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Flat `key = value` config file; reproducibility records are valid configs
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Increase log detail (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic tone corpus
    SynthCorpus(commands::SynthArgs),
    /// Noise-gate and trim every clip of a manifest
    Prep(commands::PrepArgs),
    /// Write four augmented derivatives per training clip
    Augment(commands::AugmentArgs),
    /// Export a feature table
    Extract(commands::ExtractArgs),
    /// Train on a holdout split and save a model bundle
    Train(commands::TrainArgs),
    /// Holdout or k-fold evaluation report
    Evaluate(commands::EvaluateArgs),
    /// Classify one WAV with a saved bundle
    Predict(commands::PredictArgs),
    /// Time the full inference path of a bundle
    Bench(commands::BenchArgs),
}

fn exit_status(e: &Error) -> u8 {
    match e.category() {
        Category::Usage => 2,
        Category::Data => 3,
        Category::Training => 4,
        Category::Version => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(jobs) = cli.global.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let global = commands::GlobalOpts {
        config: cli.global.config,
        seed: cli.global.seed,
    };
    let result = match cli.command {
        Command::SynthCorpus(a) => commands::synth_corpus(&global, a),
        Command::Prep(a) => commands::prep(&global, a),
        Command::Augment(a) => commands::augment(&global, a),
        Command::Extract(a) => commands::extract(&global, a),
        Command::Train(a) => commands::train(&global, a),
        Command::Evaluate(a) => commands::evaluate(&global, a),
        Command::Predict(a) => commands::predict(&global, a),
        Command::Bench(a) => commands::bench(&global, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({
                "error": { "code": e.code(), "message": e.to_string() }
            });
            say!("{report}");
            eprintln!("error: {e}");
            ExitCode::from(exit_status(&e))
        }
    }
}
