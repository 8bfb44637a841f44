//! `minibert` command-line driver.

mod commands;
mod config;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use minibert::error::Category;

use commands::convert::Format;
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "minibert",
    version,
    about = "Pre-train, fine-tune and evaluate a small BERT"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every stage; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: $MINIBERT_OUTPUT_ROOT/<command> or runs/<command>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Validate and print the plan without computing or writing anything.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Override a config key, e.g. `--set finetune.epochs=5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Masked-LM pre-training, from scratch or continued from a checkpoint.
    Pretrain {
        /// Continue from this checkpoint (sets paths.init).
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Fine-tune an encoder checkpoint on one task, optionally over a grid.
    Finetune {
        /// Encoder checkpoint (sets paths.checkpoint).
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Score prediction files or a fine-tuned model, optionally by k-fold.
    Evaluate {
        /// Fine-tuned model (sets paths.checkpoint).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Convert between dataset formats.
    Convert {
        #[arg(long, value_enum)]
        from: Format,
        #[arg(long, value_enum)]
        to: Format,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// JSON object mapping document ids to passage text (BioASQ input).
        #[arg(long)]
        passages: Option<PathBuf>,
        /// Repair invalid tag sequences instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Tokenization statistics of a corpus under a vocabulary.
    CorpusStats {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Downstream scores across corpus fractions or pre-training checkpoints.
    Sweep,
    /// Write a synthetic corpus, vocabulary and task datasets.
    Fixtures,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Pretrain { .. } => "pretrain",
            Command::Finetune { .. } => "finetune",
            Command::Evaluate { .. } => "evaluate",
            Command::Convert { .. } => "convert",
            Command::CorpusStats { .. } => "corpus-stats",
            Command::Sweep => "sweep",
            Command::Fixtures => "fixtures",
        }
    }
}

/// Resolved settings shared by every command.
pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub dry_run: bool,
}

fn run(cli: Cli) -> minibert::Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.set, cli.seed)?;
    let out = cli.out.clone().unwrap_or_else(|| {
        std::env::var_os("MINIBERT_OUTPUT_ROOT")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"))
            .join(cli.command.name())
    });
    let mut ctx = Ctx {
        cfg,
        out,
        dry_run: cli.dry_run,
    };
    match cli.command {
        Command::Pretrain { init } => {
            if init.is_some() {
                ctx.cfg.paths.init = init;
            }
            commands::pretrain::run(&ctx)
        }
        Command::Finetune { init } => {
            if init.is_some() {
                ctx.cfg.paths.checkpoint = init;
            }
            commands::finetune::run(&ctx)
        }
        Command::Evaluate { model } => {
            if model.is_some() {
                ctx.cfg.paths.checkpoint = model;
            }
            commands::evaluate::run(&ctx)
        }
        Command::Convert {
            from,
            to,
            input,
            output,
            passages,
            lenient,
        } => commands::convert::run(
            &ctx,
            commands::convert::Request {
                from,
                to,
                input,
                output,
                passages,
                lenient: lenient || ctx.cfg.task.lenient,
            },
        ),
        Command::CorpusStats { corpus, vocab } => {
            if corpus.is_some() {
                ctx.cfg.paths.corpus = corpus;
            }
            if vocab.is_some() {
                ctx.cfg.paths.vocab = vocab;
            }
            commands::stats::run(&ctx)
        }
        Command::Sweep => commands::sweep::run(&ctx),
        Command::Fixtures => commands::fixtures::run(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e.category() {
                Category::Config => 2,
                Category::Data => 3,
                Category::Compute => 4,
            };
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
