use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use loadwatch::cli::{self, Completion, Overrides, RunConfig};
use loadwatch::Error;

#[derive(Parser)]
#[command(name = "loadwatch", version, about = "Training-load injury-prediction pipeline")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "loadwatch.toml")]
    config: PathBuf,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of simulations, overriding the configuration.
    #[arg(long, global = true)]
    sims: Option<usize>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the daily feature matrix with outcome labels.
    Features,
    /// Generate a synthetic cohort at the configured input paths.
    Synth {
        /// Zero every non-intercept hazard coefficient.
        #[arg(long)]
        null: bool,
    },
    /// Tune and fit every configured cell and save the models.
    Train,
    /// Score the panel rows with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
    },
    /// Test-set ROC curves, cost-ratio operating points and subgroup AUCs.
    Evaluate,
    /// Repeat the whole pipeline and summarize test AUCs.
    Simulate,
    /// Train and test AUC against training-set size.
    LearningCurve,
    /// Per-feature medians and rank-biserial contrasts between seasons.
    Describe,
}

fn run(args: Cli) -> Result<Completion, Error> {
    let mut cfg = RunConfig::load(&args.config)?;
    Overrides {
        seed: args.seed,
        n_sims: args.sims,
        output: args.out,
    }
    .apply(&mut cfg)?;
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match args.command {
        Command::Synth { null } => cli::cmd_synth(&cfg, null),
        command => {
            cfg.check_inputs()?;
            match command {
                Command::Features => cli::cmd_features(&cfg),
                Command::Train => cli::cmd_train(&cfg),
                Command::Predict { model } => cli::cmd_predict(&cfg, &model),
                Command::Evaluate => cli::cmd_evaluate(&cfg),
                Command::Simulate => cli::cmd_simulate(&cfg),
                Command::LearningCurve => cli::cmd_learning_curve(&cfg),
                Command::Describe => cli::cmd_describe(&cfg),
                Command::Synth { .. } => unreachable!(),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Cli::parse();
    match run(args) {
        Ok(Completion::Complete) => ExitCode::SUCCESS,
        Ok(Completion::Partial) => {
            eprintln!("loadwatch: finished with failures; see status.csv and the manifest");
            ExitCode::from(2)
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("loadwatch: {e}");
            ExitCode::from(64)
        }
        Err(e) => {
            eprintln!("loadwatch: {e}");
            ExitCode::FAILURE
        }
    }
}
