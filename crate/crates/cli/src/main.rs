use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use semsample_cli::commands::{self, ChannelCheckArgs, Common, EvaluateArgs, GenerateArgs, IngestArgs, TrainArgs};
use semsample_cli::{CliError, CliResult, EXIT_USAGE};

/// Semantic sampling simulator: train a sampling agent, compare it with
/// periodic schedules, check the channel model, convert annotations.
#[derive(Parser)]
#[command(name = "semsample", version)]
struct Cli {
    /// Worker threads for parallel evaluation (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (TOML). Built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl CommonArgs {
    fn into_common(self) -> Common {
        Common { config: self.config, seed: self.seed, out: self.out }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the agent; writes a snapshot, a learning curve and a checkpoint.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Overrides the configured episode count.
        #[arg(long)]
        episodes: Option<usize>,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Compare a trained snapshot with the configured baselines.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Policy snapshot written by `train`.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Clip files (XML or JSON) replacing the configured evaluation clips.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        clips: Vec<PathBuf>,
    },
    /// Check closed-form fading statistics against sampling and integration.
    ChannelCheck {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Multipath shape.
        #[arg(long)]
        m: Option<f64>,
        /// Shadowing shape.
        #[arg(long = "m-s")]
        m_s: Option<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        draws: usize,
        /// Packet size for the energy line.
        #[arg(long, default_value_t = 22)]
        bits: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Convert a DETRAC XML annotation file to a native JSON clip.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one configured synthetic clip as native JSON.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Position in the clip list.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Take the clip from the evaluation list instead of the training list.
        #[arg(long)]
        eval: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Usage(anyhow::anyhow!("--jobs must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Runtime(e.into()))?;
    }
    match cli.command {
        Command::Train { common, episodes, resume } => {
            let m = commands::train(&TrainArgs { common: common.into_common(), episodes, resume })?;
            log::info!("training finished in {:.1} s", m.wall_clock.seconds);
        }
        Command::Evaluate { common, snapshot, clips } => {
            let report = commands::evaluate(&EvaluateArgs { common: common.into_common(), snapshot, clips })?;
            print!("{}", report.table);
        }
        Command::ChannelCheck { config, m, m_s, draws, bits, seed } => {
            commands::channel_check(&ChannelCheckArgs { config, m, m_s, draws, bits, seed })?;
        }
        Command::Ingest { input, out } => {
            commands::ingest(&IngestArgs { input, out })?;
        }
        Command::Generate { config, index, eval, out } => {
            let s = commands::generate(&GenerateArgs { config, index, eval, out })?;
            println!("{}", serde_json::to_string_pretty(&s).map_err(|e| CliError::Runtime(e.into()))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("SEMSAMPLE_LOG", "info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE as u8) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
