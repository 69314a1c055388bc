//! Thin CLI over the pipeline commands in [`evpoison::cli`].

use clap::{Parser, Subcommand};
use evpoison::cli::{self, CliError, PoisonArgs};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "evpoison",
    version,
    about = "Event-stream backdoor pipeline: synthesize, poison, represent, train, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset with train/val/test splits.
    Synth {
        /// Dataset scene config (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Inject triggers into a seeded fraction of a dataset and relabel it.
    Poison {
        /// immutable | mutable | patch
        #[arg(long)]
        mode: String,
        /// Trigger spec (JSON); defaults to the standard 10x10 trigger.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Generator checkpoint, required in mutable mode.
        #[arg(long)]
        generator: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        rho: f64,
        #[arg(long, default_value_t = 0)]
        target: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convert a dataset into representation dumps.
    Represent {
        /// est | ef | ts | vg | tencode
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 4)]
        bins: usize,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a (possibly backdoored) classifier; writes checkpoints and
    /// history.
    Train {
        /// Train job config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Dataset directory; overrides the config's `data` field.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate CDA/ASR of a checkpoint against clean and poisoned sets.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        poisoned: PathBuf,
        /// Target class; defaults to the poisoned set's flags.json.
        #[arg(long)]
        target: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Denoise a dataset (currently: the stc filter).
    Filter {
        /// Filter algorithm; `stc`.
        algorithm: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        radius: u16,
        #[arg(long, default_value_t = 0.05)]
        window: f64,
    },
    /// PSNR/SSIM between paired clean and poisoned representation dumps.
    Stealth {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        poisoned: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render SVG bar charts of CDA/ASR/PSNR across runs.
    Report {
        #[arg(long = "in", num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth { config, out, seed } => cli::cmd_synth(&config, &out, seed),
        Command::Poison {
            mode,
            spec,
            input,
            out,
            generator,
            rho,
            target,
            seed,
        } => cli::cmd_poison(&PoisonArgs {
            mode,
            spec,
            input,
            out,
            generator,
            rho,
            target,
            seed,
        }),
        Command::Represent {
            method,
            bins,
            input,
            out,
        } => cli::cmd_represent(&method, bins, &input, &out),
        Command::Train { config, data, out } => cli::cmd_train(&config, data.as_deref(), &out),
        Command::Eval {
            ckpt,
            clean,
            poisoned,
            target,
            out,
        } => cli::cmd_eval(&ckpt, &clean, &poisoned, target, &out),
        Command::Filter {
            algorithm,
            input,
            out,
            radius,
            window,
        } => cli::cmd_filter(&algorithm, &input, &out, radius, window),
        Command::Stealth {
            clean,
            poisoned,
            out,
        } => cli::cmd_stealth(&clean, &poisoned, &out),
        Command::Report { inputs, out } => cli::cmd_report(&inputs, &out),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli.command) {
        eprintln!("error: {}", err.message());
        std::process::exit(err.exit_code());
    }
}
