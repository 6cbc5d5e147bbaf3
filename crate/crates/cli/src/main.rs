mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use secluster_core::ConstraintKind;

use crate::config::RunFlags;

/// Semi-supervised clustering by structural entropy minimization.
#[derive(Parser, Debug)]
#[command(name = "secluster", version)]
struct Cli {
    /// TOML file supplying defaults for `partition` and `hierarchy` flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Flat clustering: merge and move on a two-level encoding tree.
    Partition {
        #[command(flatten)]
        run: RunFlags,
    },
    /// Hierarchical clustering: stretch to a binary tree, then compress.
    Hierarchy {
        #[command(flatten)]
        run: RunFlags,
        /// Target tree height (at least 2).
        #[arg(long)]
        height: Option<usize>,
        /// Write the compressed tree here in Newick form.
        #[arg(long)]
        newick: Option<PathBuf>,
        /// Write the binary tree here in Newick form.
        #[arg(long)]
        binary_newick: Option<PathBuf>,
    },
    /// Sample a constraint file from ground-truth labels.
    GenConstraints {
        /// Labels, one per line or as the last field of CSV rows.
        #[arg(short, long)]
        labels: PathBuf,
        #[arg(long, default_value = "pairwise")]
        kind: ConstraintKind,
        /// Constraints per polarity as a fraction of n [default: 0.2
        /// pairwise, 0.1 label].
        #[arg(long)]
        amount: Option<f64>,
        #[arg(short, long, default_value_t = 0)]
        seed: u64,
        /// Output path; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Score a clustering or a tree against ground-truth labels.
    Eval {
        /// Predicted labels, or a `partition` / `hierarchy` JSON result.
        #[arg(long, required_unless_present = "tree", conflicts_with = "tree")]
        pred: Option<PathBuf>,
        /// Tree in Newick or JSON form, or a `hierarchy` JSON result.
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        /// Comma-separated subset of ari, nmi, dp.
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<commands::Metric>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Partition { run } => commands::partition(run, cli.config.as_deref()),
        Command::Hierarchy {
            run,
            height,
            newick,
            binary_newick,
        } => commands::hierarchy(run, height, newick, binary_newick, cli.config.as_deref()),
        Command::GenConstraints {
            labels,
            kind,
            amount,
            seed,
            output,
        } => commands::gen_constraints(&labels, kind, amount, seed, output.as_deref()),
        Command::Eval {
            pred,
            tree,
            truth,
            metrics,
            output,
        } => commands::eval(
            pred.as_deref(),
            tree.as_deref(),
            &truth,
            &metrics,
            output.as_deref(),
        ),
    };
    match result {
        Ok(status) => status.into(),
        Err(e) => {
            eprintln!("error: {e:#}");
            commands::exit_code(&e).into()
        }
    }
}
