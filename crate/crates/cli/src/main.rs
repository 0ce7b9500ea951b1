mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Layer;

/// Generate structured comments for C and C++ sources.
#[derive(Debug, Parser)]
#[command(name = "comcat", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Comment files or directories end to end
    Comment {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Config file (default: ./comcat.toml when present)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write per-file JSONL reports here instead of stderr
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        layer: Layer,
    },
    /// List extracted snippets as JSONL
    Extract {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        max_depth: Option<usize>,
        /// Only declarations outside function bodies
        #[arg(long)]
        top_level_declarations_only: bool,
    },
    /// Print the comment type chosen for every snippet as JSONL
    Classify {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        layer: Layer,
    },
    /// Show the prompts for one file, or run them and print the conversation
    Prompts {
        file: PathBuf,
        /// Print the plan without constructing a backend
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        layer: Layer,
    },
    /// Comment density per 100 LOC and function coverage
    Analyze {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Emit JSON lines instead of tables
        #[arg(long)]
        json: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        layer: Layer,
    },
    /// Inter-rater agreement for an annotation dataset (JSONL)
    Agreement {
        dataset: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Comment {
            paths,
            config,
            report,
            layer,
        } => commands::comment(&paths, config.as_deref(), report.as_deref(), layer),
        Command::Extract {
            paths,
            max_depth,
            top_level_declarations_only,
        } => commands::extract(&paths, max_depth, top_level_declarations_only),
        Command::Classify {
            paths,
            config,
            layer,
        } => commands::classify(&paths, config.as_deref(), layer),
        Command::Prompts {
            file,
            dry_run,
            config,
            layer,
        } => commands::prompts(&file, dry_run, config.as_deref(), layer),
        Command::Analyze {
            paths,
            json,
            config,
            layer,
        } => commands::analyze(&paths, json, config.as_deref(), layer),
        Command::Agreement { dataset, json } => commands::agreement(&dataset, json),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("comcat: {err:#}");
            ExitCode::from(commands::EXIT_FAILURE)
        }
    }
}
