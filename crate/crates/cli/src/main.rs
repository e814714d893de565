use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "aad", version, about = "Adaptive optical-flow anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute (or reuse) the flow cache for a frame directory.
    Flow {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        stride: usize,
        #[arg(long, default_value = "*.pgm")]
        pattern: String,
    },
    /// Run detection as described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override `detector.k`.
        #[arg(long)]
        k: Option<f64>,
        /// Override `detector.adapt`.
        #[arg(long)]
        adapt: Option<bool>,
        /// Override `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Recompute flow even when cached.
        #[arg(long)]
        no_cache: bool,
    },
    /// ROC over a list of k values for a finished run.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6")]
        k: Vec<f64>,
        /// Re-run the adaptive pipeline per k instead of sweeping frozen statistics.
        #[arg(long)]
        live: bool,
        /// Where to write the CSV (default: <run>/roc.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a statistics snapshot (and optionally an object map) as images.
    Render {
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        objects: Option<PathBuf>,
        /// Pixels per cell edge in the motion image.
        #[arg(long, default_value_t = 4)]
        scale: usize,
    },
    /// Generate a synthetic scene with ground truth.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Flow {
            frames,
            out,
            stride,
            pattern,
        } => commands::flow(&frames, &out, stride, &pattern),
        Command::Run {
            config,
            k,
            adapt,
            out,
            no_cache,
        } => commands::run(&config, commands::RunOverrides { k, adapt, out, no_cache }),
        Command::Eval {
            run,
            truth,
            k,
            live,
            out,
        } => commands::eval(&run, &truth, &k, live, out.as_deref()),
        Command::Render {
            stats,
            out,
            objects,
            scale,
        } => commands::render(&stats, &out, objects.as_deref(), scale),
        Command::Synth { spec, out } => commands::synth(&spec, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aad: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
