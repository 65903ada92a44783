use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use godice::harness::{
    cmd_eval, cmd_generate, cmd_segment, cmd_train, cmd_transfer, format_eval, ExperimentConfig,
    TrainOptions,
};
use godice::Result;

#[derive(Parser)]
#[command(name = "godice", version, about = "Offline hierarchical imitation learning on grid pick-and-place")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a demonstration dataset.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a policy and append its metrics to a CSV.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Resume from this checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Greedy evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Decode option labels for a dataset and score them.
    Segment {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an n-object high-level policy over a one-object low-level policy.
    /// Pass the low-level checkpoint first, then the high-level one.
    Transfer {
        #[arg(long, num_args = 1, required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn fmt_acc(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |a| format!("{a:.4}"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, out, seed } => {
            let cfg = load_config(config.as_ref())?;
            let s = cmd_generate(&cfg, out.as_deref(), seed)?;
            println!(
                "wrote {}: {} expert, {} imperfect, {} transitions",
                s.path.display(),
                s.n_expert,
                s.n_imperfect,
                s.n_transitions
            );
        }
        Command::Train {
            config,
            dataset,
            checkpoint,
            out,
            seed,
        } => {
            let cfg = load_config(config.as_ref())?;
            let opts = TrainOptions {
                dataset,
                resume: checkpoint,
                out,
                seed,
            };
            let s = cmd_train(&cfg, &opts)?;
            if let Some(last) = s.rows.last() {
                println!(
                    "iteration {}: mean_return {:.4} std_return {:.4}",
                    last.iteration, last.mean_return, last.std_return
                );
            }
            println!(
                "checkpoint {} metrics {}",
                s.checkpoint_path.display(),
                s.metrics_path.display()
            );
        }
        Command::Eval {
            checkpoint,
            episodes,
            seed,
        } => {
            let stats = cmd_eval(&checkpoint, episodes, seed)?;
            print!("{}", format_eval(&stats));
        }
        Command::Segment {
            checkpoint,
            dataset,
            out,
        } => {
            let r = cmd_segment(&checkpoint, &dataset, &out)?;
            if let Some(msg) = &r.k_mismatch {
                eprintln!("warning: {msg}");
            }
            println!("trajectories          {}", r.n_trajectories);
            println!("permutation_accuracy  {}", fmt_acc(r.permutation_accuracy));
            println!("exact_accuracy        {}", fmt_acc(r.exact_accuracy));
        }
        Command::Transfer {
            checkpoint,
            episodes,
            seed,
        } => {
            let [low, high] = checkpoint.as_slice() else {
                return Err(godice::Error::Config(
                    "transfer takes --checkpoint LOW --checkpoint HIGH".into(),
                ));
            };
            let stats = cmd_transfer(low, high, episodes, seed)?;
            print!("{}", format_eval(&stats));
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
