//! Command-line entry point tying generation, training, evaluation,
//! ablations, and statistics into reproducible experiments.
//!
//! Exit codes are a stable contract: 0 on success, 1 on runtime failure,
//! 2 on configuration or validation errors (including usage errors).

use clap::{Parser, Subcommand};
use motiondesc::config::{load_config, parse_config, ConfigError, ExperimentConfig};
use motiondesc::experiment::{Experiment, ExperimentError};
use motiondesc::qualstats::{
    iaa_percent, likert_mean, read_ratings_csv, read_votes_csv, tally_votes, QualError,
    VoteOutcome,
};
use motiondesc::textenc::{corpus_stats, read_descriptions, TextError};
use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "motiondesc",
    version,
    about = "Zero-shot motion-description retrieval experiments on synthetic data"
)]
struct Cli {
    /// JSON experiment config; defaults to ./experiment.json when present,
    /// otherwise built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Dotted-path override applied after parsing, e.g. --set train.epochs=20.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the source and target synthetic datasets
    Gen,
    /// Train the visual encoder on the source split
    Train,
    /// Evaluate the trained checkpoint zero-shot on the target split
    Eval {
        /// Score masked descriptions instead of full ones
        #[arg(long)]
        masked: bool,
    },
    /// Train once and evaluate after each requested epoch count
    Sweep {
        /// Comma-separated 1-based epoch counts, e.g. --epochs 5,10,20
        #[arg(long, value_delimiter = ',', required = true)]
        epochs: Vec<usize>,
    },
    /// Compare mean pooling against attention pooling with identical seeds
    Ablate {
        /// Number of attention blocks in the attention variant
        #[arg(long, default_value_t = 1)]
        attn_layers: usize,
    },
    /// Check analytic gradients against central finite differences
    Gradcheck,
    /// Print corpus statistics for description files
    Stats {
        /// Description files (one JSON object per line)
        #[arg(required = true, value_name = "FILE")]
        files: Vec<PathBuf>,
    },
    /// Score annotation quality from ratings and/or pairwise-vote CSV files
    #[command(group(clap::ArgGroup::new("input").required(true).multiple(true)))]
    Quality {
        /// CSV with columns item_id,annotator_id,rating (Likert 1-5)
        #[arg(long, group = "input", value_name = "FILE")]
        ratings: Option<PathBuf>,
        /// CSV with columns pair_id,candidate,voter_id
        #[arg(long, group = "input", value_name = "FILE")]
        votes: Option<PathBuf>,
    },
    /// Rewrite a description file with masked tokens filled from a lexicon
    Mask {
        /// Input description file
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Object lexicon, one word per line
        #[arg(long, value_name = "FILE")]
        lexicon: PathBuf,
        /// Output description file
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Qual(#[from] QualError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("{0}")]
    Check(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Experiment(e) => e.exit_code(),
            CliError::Config(_) => 2,
            CliError::Qual(_) | CliError::Text(_) | CliError::Check(_) => 1,
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    match &cli.config {
        Some(path) => Ok(parse_config(path, &cli.set)?),
        None => {
            let implicit = Path::new("experiment.json");
            if implicit.exists() {
                Ok(parse_config(implicit, &cli.set)?)
            } else {
                Ok(load_config(None, &cli.set)?)
            }
        }
    }
}

fn print_eval_table(unmasked: Option<f64>, masked: Option<f64>) {
    let cell6 = |v: Option<f64>| v.map_or_else(|| "     -".to_string(), |a| format!("{a:6.2}"));
    let cell13 = |v: Option<f64>| v.map_or_else(|| "            -".to_string(), |a| format!("{a:13.2}"));
    println!("Method              | Object | Masked Object");
    println!("--------------------+--------+--------------");
    println!(
        "prototype-retrieval | {} | {}",
        cell6(unmasked),
        cell13(masked)
    );
    if let (Some(u), Some(m)) = (unmasked, masked) {
        println!("Delta (Object - Masked Object): {:.2} points", u - m);
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Gen => {
            let exp = Experiment::new(resolve_config(cli)?)?;
            let s = exp.generate()?;
            println!(
                "wrote {} source videos ({} classes) and {} target videos ({} classes) to {}",
                s.source_videos,
                s.source_classes,
                s.target_videos,
                s.target_classes,
                s.data_dir.display()
            );
        }
        Command::Train => {
            let exp = Experiment::new(resolve_config(cli)?)?;
            let t = exp.train()?;
            for log in &t.log {
                println!(
                    "epoch {:>3}  lr {:.3e}  loss {:.4}  train acc {:6.2}%  ({} ms)",
                    log.epoch, log.lr, log.mean_loss, log.train_acc, log.wall_ms
                );
            }
            if t.run_final_train_acc.len() > 1 {
                println!(
                    "kept run {} of {} (final train acc {:.2}%)",
                    t.chosen_run + 1,
                    t.run_final_train_acc.len(),
                    t.run_final_train_acc[t.chosen_run]
                );
            }
            println!("checkpoint: {}", t.checkpoint.display());
        }
        Command::Eval { masked } => {
            let exp = Experiment::new(resolve_config(cli)?)?;
            let report = exp.evaluate(*masked)?;
            let other = exp.read_report(!*masked).map(|r| r.accuracy_percent);
            let here = Some(report.accuracy_percent);
            let (unmasked, masked_acc) = if *masked { (other, here) } else { (here, other) };
            print_eval_table(unmasked, masked_acc);
        }
        Command::Sweep { epochs } => {
            let exp = Experiment::new(resolve_config(cli)?)?;
            let reports = exp.sweep(epochs)?;
            println!("Epochs | Zero-shot accuracy");
            println!("-------+-------------------");
            for r in &reports {
                println!("{:>6} | {:18.2}", r.epoch, r.accuracy_percent);
            }
        }
        Command::Ablate { attn_layers } => {
            let exp = Experiment::new(resolve_config(cli)?)?;
            let pair = exp.ablate(*attn_layers)?;
            let attn_label = format!("attention ({attn_layers} block)");
            println!("Method               | Accuracy");
            println!("---------------------+---------");
            println!("mean pooling         | {:8.2}", pair.mean.accuracy_percent);
            println!("{attn_label:<20} | {:8.2}", pair.attention.accuracy_percent);
        }
        Command::Gradcheck => {
            let exp = Experiment::new(resolve_config(cli)?)?;
            let r = exp.grad_check_report()?;
            println!(
                "checked {} parameters: max rel err {:.3e} (threshold {:.0e})",
                r.params_checked, r.max_rel_err, r.threshold
            );
            if !r.passed() {
                return Err(CliError::Check(format!(
                    "gradient check failed: {:.3e} exceeds {:.0e}",
                    r.max_rel_err, r.threshold
                )));
            }
        }
        Command::Stats { files } => {
            for file in files {
                let descs = read_descriptions(file)?;
                let stats = corpus_stats(&descs)?;
                let classes: HashSet<u32> = descs.iter().map(|d| d.class_id).collect();
                println!(
                    "{}: {} classes, {} descriptions ({} unique), avg {:.2} words",
                    file.display(),
                    classes.len(),
                    descs.len(),
                    stats.unique_descriptions,
                    stats.avg_words
                );
            }
        }
        Command::Quality { ratings, votes } => {
            if let Some(path) = ratings {
                let table = read_ratings_csv(path)?;
                let mean = likert_mean(&table);
                let iaa = iaa_percent(&table)?;
                println!(
                    "{}: {} items x {} annotators, Likert mean {:.2}, IAA {:.2}%",
                    path.display(),
                    table.items.len(),
                    table.annotators.len(),
                    mean,
                    iaa
                );
            }
            if let Some(path) = votes {
                let outcomes = tally_votes(&read_votes_csv(path)?)?;
                for (pair, outcome) in &outcomes {
                    match outcome {
                        VoteOutcome::Winner(w) => println!("pair {pair}: winner {w}"),
                        VoteOutcome::Tie => println!("pair {pair}: tie"),
                    }
                }
            }
        }
        Command::Mask {
            input,
            lexicon,
            output,
        } => {
            let changed = Experiment::mask_file(input, lexicon, output)?;
            println!("wrote {} ({} descriptions changed)", output.display(), changed);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
