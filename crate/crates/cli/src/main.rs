//! `vigil`: process surveillance footage, build augmented datasets, score
//! reports against labels and benchmark the pipeline.
//!
//! Exit codes: 0 on success, 1 for invalid input or arguments, 2 for runtime
//! failures (backend errors, unwritable output).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "vigil", version, about = "Distancing and mask-compliance analytics for video frames")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the pipeline over a frame manifest and write annotated frames plus report.json.
    Process(ProcessArgs),
    /// Generate augmented classifier datasets.
    #[command(subcommand)]
    Augment(AugmentCommand),
    /// Score a report against labelled frame counts.
    Evaluate(EvaluateArgs),
    /// Time repeated pipeline runs and print per-stage cost per second of video.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Synthetic,
    Graph,
}

impl BackendKind {
    fn name(self) -> &'static str {
        match self {
            BackendKind::Synthetic => "synthetic",
            BackendKind::Graph => "graph",
        }
    }
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Frame manifest: {"fps": F, "frames": ["relative/path.png", ...]}
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "synthetic")]
    backend: BackendKind,
    /// Scenario file replayed by the synthetic backend.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Directory with person/face/mask .onnx graphs and .json sidecars.
    #[arg(long)]
    models: Option<PathBuf>,
    /// Process every Nth frame.
    #[arg(long, default_value_t = 5)]
    stride: usize,
    /// DBSCAN radius in pixels.
    #[arg(long, default_value_t = 200.0)]
    eps: f64,
    #[arg(long, default_value_t = 2)]
    min_pts: usize,
    /// Person confidence threshold.
    #[arg(long, default_value_t = 0.5)]
    conf: f64,
    /// IoU above which overlapping person boxes are suppressed.
    #[arg(long, default_value_t = 0.3)]
    nms: f64,
    #[arg(long, default_value_t = 0.5)]
    mask_threshold: f64,
    /// Replaces --eps with two meters at this scale.
    #[arg(long)]
    pixels_per_meter: Option<f64>,
    #[arg(long, default_value_t = 416)]
    detector_input: u32,
    #[arg(long, default_value_t = 128)]
    classifier_input: u32,
    /// Accepted for reproducible invocations; both backends are deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frame worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct ProcessArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum AugmentCommand {
    /// Overlay masks on unmasked faces (and blur).
    Mask(MaskArgs),
    /// Blur every image and split into train/test.
    Blur(BlurArgs),
}

#[derive(Debug, Args)]
struct MaskArgs {
    /// CSV with header `path,label`.
    #[arg(long)]
    manifest: PathBuf,
    /// Directory of RGBA mask PNGs.
    #[arg(long)]
    masks: PathBuf,
    /// Directory of `<image stem>.json` landmark files.
    #[arg(long)]
    landmarks: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_blur: bool,
    #[arg(long)]
    test_fraction: Option<f64>,
}

#[derive(Debug, Args)]
struct BlurArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.10)]
    test_fraction: f64,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = 3)]
    repeat: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Process(args) => commands::process(&args),
        Command::Augment(AugmentCommand::Mask(args)) => commands::augment_mask(&args),
        Command::Augment(AugmentCommand::Blur(args)) => commands::augment_blur(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Bench(args) => commands::bench(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
