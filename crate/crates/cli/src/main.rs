use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hotspot_cli::commands::{self, KdeSource, LabelSource};
use hotspot_cli::config::RunConfig;
use hotspot_cli::CliError;
use hotspot_core::coherence::Trainer;

/// Incident-narrative topic modeling and spatial density-ratio hotspot maps.
#[derive(Parser)]
#[command(name = "hotspot", version, about)]
struct Cli {
    /// Config file of `key = value` lines; flags override file values.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override any config key, e.g. --set k=25 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory (overrides the `out` config key).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Input incidents file (overrides the `input` config key).
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Master seed (overrides the `seed` config key).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest incidents and build the bag-of-words corpus files.
    Preprocess,
    /// Train a topic model and write its top-words report.
    Train {
        #[arg(long)]
        method: Trainer,
        /// Topic count (defaults to the `topics` config key).
        #[arg(long)]
        topics: Option<usize>,
    },
    /// UMass coherence sweep over a range of topic counts.
    Sweep {
        #[arg(long)]
        method: Trainer,
        #[arg(long)]
        t_min: Option<usize>,
        #[arg(long)]
        t_max: Option<usize>,
    },
    /// Per-label kNN density-ratio grids, smoothed, with heatmaps.
    Dre {
        /// call-type | topic
        #[arg(long, default_value = "call-type")]
        labels: String,
        /// Which trainer's model labels the documents (topic source).
        #[arg(long, default_value = "nmf")]
        method: Trainer,
    },
    /// Weighted Gaussian KDE map of all incidents, one call type, or one topic.
    Kde {
        /// Map one topic's predominantly-about documents.
        #[arg(long, conflicts_with = "call_type")]
        topic: Option<usize>,
        /// Map one call type's incidents.
        #[arg(long)]
        call_type: Option<String>,
        /// Which trainer's model to read topic weights from.
        #[arg(long, default_value = "nmf")]
        method: Trainer,
    },
    /// Generate a synthetic incident set with known ground truth.
    Synth,
    /// Call-type frequency table.
    Report,
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    let mut overrides: Vec<(String, String)> = Vec::new();
    for spec in &cli.overrides {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {spec:?}")))?;
        overrides.push((key.trim().to_string(), value.trim().to_string()));
    }
    if let Some(out) = &cli.out {
        overrides.push(("out".into(), out.display().to_string()));
    }
    if let Some(input) = &cli.input {
        overrides.push(("input".into(), input.display().to_string()));
    }
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    let config = RunConfig::load(cli.config.as_deref(), &overrides)?;

    match cli.command {
        Command::Preprocess => commands::cmd_preprocess(&config),
        Command::Train { method, topics } => {
            commands::cmd_train(&config, method, topics.unwrap_or(config.topics))
        }
        Command::Sweep {
            method,
            t_min,
            t_max,
        } => commands::cmd_sweep(
            &config,
            method,
            t_min.unwrap_or(config.t_min),
            t_max.unwrap_or(config.t_max),
        ),
        Command::Dre { labels, method } => {
            let source = match labels.as_str() {
                "call-type" | "call_type" => LabelSource::CallType,
                "topic" => LabelSource::Topic(method),
                other => {
                    return Err(CliError::Config(format!(
                        "unknown label source {other:?} (expected call-type or topic)"
                    )))
                }
            };
            commands::cmd_dre(&config, source)
        }
        Command::Kde {
            topic,
            call_type,
            method,
        } => {
            let source = match (topic, call_type) {
                (Some(k), None) => KdeSource::Topic(k, method),
                (None, Some(code)) => KdeSource::CallType(code),
                (None, None) => KdeSource::All,
                (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
            };
            commands::cmd_kde(&config, source)
        }
        Command::Synth => commands::cmd_synth(&config).map(|_| ()),
        Command::Report => commands::cmd_report(&config),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hotspot: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
