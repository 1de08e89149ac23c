use std::path::Path;

use vigil::augmentation::dataset::load_mask_assets;
use vigil::augmentation::{generate_dataset, BlurConfig, GenerateOptions};
use vigil::backends::{Backends, SyntheticScript};
use vigil::distancing::DbscanParams;
use vigil::evaluation::{evaluate as score, GroundTruthLabels, MetricsReport};
use vigil::pipeline::{self, OutputOptions, PipelineConfig, VideoReport, VideoSource};
use vigil::{Error, ErrorClass, NmsParams};

use crate::{BackendKind, BenchArgs, BlurArgs, EvaluateArgs, MaskArgs, PipelineArgs, ProcessArgs};

pub const EXIT_INVALID: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e.class() {
            ErrorClass::Validation => Failure::invalid(e.to_string()),
            ErrorClass::Runtime => Failure::runtime(e.to_string()),
        }
    }
}

/// Failures while reading a user-supplied input document are input errors,
/// whatever their cause.
fn input(e: Error) -> Failure {
    Failure::invalid(e.to_string())
}

type Outcome = Result<(), Failure>;

fn write(path: &Path, text: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::runtime(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

fn pipeline_config(args: &PipelineArgs) -> Result<PipelineConfig, Failure> {
    let cfg = PipelineConfig {
        stride: args.stride,
        detector_input: args.detector_input,
        classifier_input: args.classifier_input,
        nms: NmsParams {
            confidence_threshold: args.conf,
            iou_threshold: args.nms,
        },
        dbscan: DbscanParams {
            eps: args.eps,
            min_pts: args.min_pts,
        },
        mask_threshold: args.mask_threshold,
        pixels_per_meter: args.pixels_per_meter,
        workers: args.workers,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn backends(args: &PipelineArgs) -> Result<Backends, Failure> {
    match args.backend {
        BackendKind::Synthetic => {
            let Some(path) = &args.scenario else {
                return Err(Failure::invalid(
                    "the synthetic backend needs a scenario\n\nUsage: vigil process --manifest PATH --out DIR --backend synthetic --scenario PATH",
                ));
            };
            Ok(Backends::synthetic(SyntheticScript::load(path).map_err(input)?))
        }
        BackendKind::Graph => {
            let Some(dir) = &args.models else {
                return Err(Failure::invalid(
                    "the graph backend needs a model directory\n\nUsage: vigil process --manifest PATH --out DIR --backend graph --models DIR",
                ));
            };
            Ok(Backends::graph(dir, args.detector_input, args.classifier_input)?)
        }
    }
}

struct Prepared {
    source: VideoSource,
    cfg: PipelineConfig,
    backends: Backends,
}

fn prepare(args: &PipelineArgs) -> Result<Prepared, Failure> {
    let cfg = pipeline_config(args)?;
    let source = VideoSource::open(&args.manifest).map_err(input)?;
    let backends = backends(args)?;
    log::debug!("seed {} (no stochastic stages)", args.seed);
    Ok(Prepared { source, cfg, backends })
}

fn failed_frames(report: &VideoReport) -> Outcome {
    let failed: Vec<String> = report
        .frames
        .iter()
        .filter(|f| f.failed)
        .map(|f| format!("frame {}: {}", f.index, f.error.as_deref().unwrap_or("failed")))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::runtime(format!(
            "{} of {} frames failed\n  {}",
            failed.len(),
            report.frames.len(),
            failed.join("\n  ")
        )))
    }
}

pub fn process(args: &ProcessArgs) -> Outcome {
    let p = prepare(&args.pipeline)?;
    let out = OutputOptions { dir: args.out.clone() };
    let report = pipeline::run(&p.source, &p.cfg, &p.backends, args.pipeline.backend.name(), Some(&out))?;
    let a = &report.aggregates;
    println!(
        "{} frames processed ({} failed): people {}, violators {}, faces {}, masked {}",
        a.frames_processed, a.frames_failed, a.totals.people, a.totals.violators, a.totals.faces, a.totals.masked
    );
    println!("report: {}", args.out.join("report.json").display());
    failed_frames(&report)
}

fn check_fraction(f: Option<f64>) -> Outcome {
    match f {
        Some(f) if !(0.0..=1.0).contains(&f) => Err(Failure::invalid(format!("test fraction {f} must lie in [0, 1]"))),
        _ => Ok(()),
    }
}

fn run_augment(manifest: &Path, out: &Path, opts: &GenerateOptions) -> Outcome {
    let output = generate_dataset(manifest, out, opts).map_err(|e| match e {
        Error::Io { ref path, .. } if path == manifest => input(e),
        other => other.into(),
    })?;
    println!("{} images written, {} failed", output.rows.len(), output.failures.len());
    if let (Some(train), Some(test)) = (&output.train, &output.test) {
        println!("split: {} train, {} test", train.len(), test.len());
    }
    Ok(())
}

pub fn augment_mask(args: &MaskArgs) -> Outcome {
    check_fraction(args.test_fraction)?;
    let masks = load_mask_assets(&args.masks).map_err(input)?;
    if masks.is_empty() {
        return Err(Failure::invalid(format!("no mask PNGs in {}", args.masks.display())));
    }
    let opts = GenerateOptions {
        masks,
        landmarks_dir: Some(args.landmarks.clone()),
        blur: (!args.no_blur).then(BlurConfig::default),
        seed: args.seed,
        test_fraction: args.test_fraction,
    };
    run_augment(&args.manifest, &args.out, &opts)
}

pub fn augment_blur(args: &BlurArgs) -> Outcome {
    check_fraction(Some(args.test_fraction))?;
    let opts = GenerateOptions {
        blur: Some(BlurConfig::default()),
        seed: args.seed,
        test_fraction: Some(args.test_fraction),
        ..Default::default()
    };
    run_augment(&args.manifest, &args.out, &opts)
}

fn fmt_ratio(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

fn print_metrics(m: &MetricsReport) {
    println!("{:<22} {:>9} {:>9} {:>12}", "stage", "accuracy", "f1", "s/video-s");
    for row in &m.rows {
        println!(
            "{:<22} {:>9} {:>9} {:>12.6}",
            row.stage,
            fmt_ratio(row.accuracy),
            fmt_ratio(row.f1),
            row.seconds_per_video_second
        );
    }
    println!("{:<22} {:>9} {:>9} {:>12.6}", "total", "", "", m.total_seconds_per_video_second);
}

pub fn evaluate(args: &EvaluateArgs) -> Outcome {
    let text = std::fs::read_to_string(&args.report)
        .map_err(|e| Failure::invalid(format!("{}: {e}", args.report.display())))?;
    let report = VideoReport::from_json_str(&text).map_err(input)?;
    let labels = GroundTruthLabels::load(&args.labels).map_err(input)?;
    let metrics = score(&report, &labels)?;
    write(&args.out, &metrics.to_json_pretty())?;
    print_metrics(&metrics);
    Ok(())
}

/// Table rows: label and the matching per-video-second timing field.
pub const BENCH_ROWS: [&str; 5] = [
    "person_detection",
    "social_distancing",
    "face_detection",
    "mask_classification",
    "total",
];

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn bench(args: &BenchArgs) -> Outcome {
    if args.repeat == 0 {
        return Err(Failure::invalid("--repeat must be at least 1"));
    }
    let p = prepare(&args.pipeline)?;
    let mut samples: [Vec<f64>; 5] = Default::default();
    for run in 0..args.repeat {
        let report = pipeline::run(&p.source, &p.cfg, &p.backends, args.pipeline.backend.name(), None)?;
        failed_frames(&report)?;
        let t = &report.timing_per_video_second_s;
        let values = [t.person_detection, t.distancing, t.face_detection, t.mask_classification, t.total];
        for (s, v) in samples.iter_mut().zip(values) {
            s.push(v);
        }
        log::info!("run {}: {:.6} s per video second", run + 1, t.total);
    }
    println!(
        "{} runs, {} frames sampled of {} ({:.2} s of video)",
        args.repeat,
        pipeline::sample_indices(p.source.manifest.frames.len() as u64, p.cfg.stride).len(),
        p.source.manifest.frames.len(),
        p.source.manifest.duration_s()
    );
    println!("{:<22} {:>30}", "stage", "seconds per video second");
    for (name, s) in BENCH_ROWS.iter().zip(&samples) {
        let (mean, std) = mean_std(s);
        println!("{name:<22} {mean:>16.6} ± {std:<12.6}");
    }
    Ok(())
}
