//! End-to-end frame processing: sample, detect people, suppress duplicates,
//! check distancing, detect faces, classify masks, annotate, report.
//!
//! Distancing and the face/mask chain run concurrently within a frame and
//! frames are spread over a worker pool. Everything except timings is
//! identical to a sequential run.

pub mod annotate;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{Backends, FaceQuery, FrameContext};
use crate::distancing::{assess, DbscanParams};
use crate::error::{Error, Result};
use crate::geometry::{non_max_suppression, Detection, NmsParams};
use crate::image_io;
use crate::imaging::{crop, resize_bilinear, ImageBuffer};

pub use annotate::annotate;
pub use report::{
    Counts, FaceObservation, FrameResult, ReportConfig, StageTimings, VideoInfo, VideoReport,
};

/// Physical distance the DBSCAN radius stands for when a pixel scale is set.
pub const SAFE_DISTANCE_M: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Process one frame out of every `stride`.
    pub stride: usize,
    /// Square side the person detector input is resized to.
    pub detector_input: u32,
    /// Square side face crops are resized to before mask classification.
    pub classifier_input: u32,
    pub nms: NmsParams,
    pub dbscan: DbscanParams,
    pub mask_threshold: f64,
    /// When set, the DBSCAN radius becomes two meters at this scale,
    /// overriding `dbscan.eps`.
    pub pixels_per_meter: Option<f64>,
    /// Frame worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stride: 5,
            detector_input: 416,
            classifier_input: 128,
            nms: NmsParams::default(),
            dbscan: DbscanParams::default(),
            mask_threshold: 0.5,
            pixels_per_meter: None,
            workers: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::validation("config", m));
        if self.stride < 1 {
            return fail("stride must be at least 1");
        }
        if self.detector_input < 1 || self.classifier_input < 1 {
            return fail("input sizes must be at least 1");
        }
        if !self.nms.is_valid() {
            return fail("confidence and NMS thresholds must lie in [0, 1]");
        }
        if !self.effective_dbscan().is_valid() {
            return fail("eps must be positive and min_pts at least 1");
        }
        if !(0.0..=1.0).contains(&self.mask_threshold) {
            return fail("mask threshold must lie in [0, 1]");
        }
        if matches!(self.pixels_per_meter, Some(p) if !(p > 0.0 && p.is_finite())) {
            return fail("pixels per meter must be positive");
        }
        if self.workers == Some(0) {
            return fail("workers must be at least 1");
        }
        Ok(())
    }

    pub fn effective_dbscan(&self) -> DbscanParams {
        match self.pixels_per_meter {
            Some(ppm) => DbscanParams {
                eps: SAFE_DISTANCE_M * ppm,
                ..self.dbscan
            },
            None => self.dbscan,
        }
    }

    pub fn report_config(&self, backend: &str) -> ReportConfig {
        ReportConfig {
            stride: self.stride,
            conf: self.nms.confidence_threshold,
            nms: self.nms.iou_threshold,
            eps: self.effective_dbscan().eps,
            min_pts: self.dbscan.min_pts,
            mask_threshold: self.mask_threshold,
            detector_input: self.detector_input,
            classifier_input: self.classifier_input,
            pixels_per_meter: self.pixels_per_meter,
            backend: backend.to_string(),
        }
    }
}

/// Frame list plus frame rate. Frame paths are relative to the manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoManifest {
    pub fps: f64,
    pub frames: Vec<String>,
}

impl VideoManifest {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let m: VideoManifest =
            serde_json::from_str(text).map_err(|e| Error::parse("video manifest", e))?;
        if !(m.fps > 0.0 && m.fps.is_finite()) {
            return Err(Error::validation("video manifest", format!("fps {} must be positive", m.fps)));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }
}

/// A manifest together with the directory its relative paths resolve from.
#[derive(Debug, Clone)]
pub struct VideoSource {
    pub manifest: VideoManifest,
    pub base_dir: PathBuf,
}

impl VideoSource {
    pub fn open(manifest_path: &Path) -> Result<Self> {
        Ok(Self {
            manifest: VideoManifest::load(manifest_path)?,
            base_dir: manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf(),
        })
    }

    pub fn frame_path(&self, index: u64) -> PathBuf {
        self.base_dir.join(&self.manifest.frames[index as usize])
    }

    pub fn load_frame(&self, index: u64) -> Result<FrameRecord> {
        Ok(FrameRecord {
            index,
            timestamp_s: index as f64 / self.manifest.fps,
            image: image_io::load(&self.frame_path(index))?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct FrameRecord {
    pub index: u64,
    pub timestamp_s: f64,
    pub image: ImageBuffer,
}

/// `0, stride, 2 * stride, …` below `frame_count`.
pub fn sample_indices(frame_count: u64, stride: usize) -> Vec<u64> {
    assert!(stride >= 1, "stride must be positive");
    (0..frame_count).step_by(stride).collect()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn rescale(dets: Vec<Detection>, sx: f64, sy: f64) -> Vec<Detection> {
    dets.into_iter()
        .map(|d| Detection {
            bbox: d.bbox.scaled(sx, sy),
            ..d
        })
        .collect()
}

/// Face detection and mask classification for one frame. Returns the
/// observations and the two stage durations.
fn face_chain(
    frame: &FrameRecord,
    ctx: &FrameContext,
    cfg: &PipelineConfig,
    backends: &Backends,
) -> Result<(Vec<FaceObservation>, f64, f64)> {
    let src = &frame.image;
    let (faces, face_secs) = timed(|| -> Result<Vec<Detection>> {
        let input = match backends.face.input_size() {
            Some((w, h)) if (w, h) != (src.width(), src.height()) => resize_bilinear(src, w, h),
            _ => src.clone(),
        };
        let dets = backends.face.detect_faces(ctx, &input)?;
        let (sx, sy) = (
            src.width() as f64 / input.width() as f64,
            src.height() as f64 / input.height() as f64,
        );
        Ok(rescale(dets, sx, sy))
    });
    let faces = faces?;

    let (observations, mask_secs) = timed(|| -> Result<Vec<FaceObservation>> {
        let side = cfg.classifier_input;
        let mut out = Vec::with_capacity(faces.len());
        for (face_index, face) in faces.iter().enumerate() {
            let patch = match crop(src, &face.bbox) {
                Ok(p) => p,
                Err(e) => {
                    log::debug!("frame {}: skipping face {face_index}: {e}", frame.index);
                    continue;
                }
            };
            let patch = resize_bilinear(&patch, side, side);
            let query = FaceQuery {
                frame_index: frame.index,
                face_index,
                face_box: face.bbox,
            };
            let mask_prob = backends.mask.mask_probability(&query, &patch)?;
            out.push(FaceObservation {
                bbox: face.bbox,
                confidence: face.confidence,
                mask_prob,
                masked: mask_prob >= cfg.mask_threshold,
            });
        }
        Ok(out)
    });
    Ok((observations?, face_secs, mask_secs))
}

/// Runs every analysis stage on one frame. Annotation is separate, see
/// [`annotate`]; its timing is filled in by [`run`].
pub fn process_frame(frame: &FrameRecord, cfg: &PipelineConfig, backends: &Backends) -> Result<FrameResult> {
    let start = Instant::now();
    let src = &frame.image;
    let ctx = FrameContext {
        index: frame.index,
        source_width: src.width(),
        source_height: src.height(),
    };

    let (persons, person_secs) = timed(|| -> Result<Vec<Detection>> {
        let side = cfg.detector_input;
        let input = resize_bilinear(src, side, side);
        let raw = backends.person.detect_persons(&ctx, &input)?;
        let raw = rescale(
            raw,
            src.width() as f64 / side as f64,
            src.height() as f64 / side as f64,
        );
        Ok(non_max_suppression(&raw, &cfg.nms))
    });
    let persons = persons?;

    let dbscan = cfg.effective_dbscan();
    let ((violation, distancing_secs), faces) = rayon::join(
        || {
            let boxes: Vec<_> = persons.iter().map(|d| d.bbox).collect();
            timed(|| assess(&boxes, &dbscan))
        },
        || face_chain(frame, &ctx, cfg, backends),
    );
    let (faces, face_secs, mask_secs) = faces?;

    let mut result = FrameResult {
        index: frame.index,
        timestamp_s: frame.timestamp_s,
        persons,
        violation,
        faces,
        timings_s: StageTimings {
            person_detection: person_secs,
            distancing: distancing_secs,
            face_detection: face_secs,
            mask_classification: mask_secs,
            annotation: 0.0,
            total: 0.0,
        },
        ..Default::default()
    };
    result.recount();
    result.timings_s.total = start.elapsed().as_secs_f64();
    Ok(result)
}

/// Where annotated frames go.
#[derive(Debug, Clone)]
pub struct OutputOptions {
    pub dir: PathBuf,
}

pub fn annotated_frame_name(index: u64) -> String {
    format!("frame_{index:06}.png")
}

fn run_one(
    source: &VideoSource,
    index: u64,
    cfg: &PipelineConfig,
    backends: &Backends,
    frames_dir: Option<&Path>,
) -> FrameResult {
    let start = Instant::now();
    let timestamp_s = index as f64 / source.manifest.fps;
    let frame = match source.load_frame(index) {
        Ok(f) => f,
        Err(e) => {
            log::warn!("frame {index}: {e}");
            return FrameResult::failed(index, timestamp_s, &e);
        }
    };
    let mut result = match process_frame(&frame, cfg, backends) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("frame {index}: {e}");
            FrameResult::failed(index, timestamp_s, &e)
        }
    };
    let (annotated, annotate_secs) = timed(|| annotate(&frame.image, &result));
    result.timings_s.annotation = annotate_secs;
    if let Some(dir) = frames_dir {
        if let Err(e) = image_io::save(&annotated, &dir.join(annotated_frame_name(index))) {
            log::warn!("frame {index}: {e}");
            result.failed = true;
            result.error.get_or_insert_with(|| e.to_string());
        }
    }
    result.timings_s.total = start.elapsed().as_secs_f64();
    result
}

/// Processes the sampled frames of `source` and builds the report. With
/// `output`, annotated frames and their manifest are written to
/// `<dir>/frames/` and the report to `<dir>/report.json`.
pub fn run(
    source: &VideoSource,
    cfg: &PipelineConfig,
    backends: &Backends,
    backend_name: &str,
    output: Option<&OutputOptions>,
) -> Result<VideoReport> {
    cfg.validate()?;
    let start = Instant::now();
    let frame_count = source.manifest.frames.len() as u64;
    let indices = sample_indices(frame_count, cfg.stride);

    let frames_dir = match output {
        Some(o) => {
            let dir = o.dir.join("frames");
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            Some(dir)
        }
        None => None,
    };

    let work = || -> Vec<FrameResult> {
        indices
            .par_iter()
            .map(|&i| run_one(source, i, cfg, backends, frames_dir.as_deref()))
            .collect()
    };
    let frames = match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::validation("config", e))?
            .install(work),
        None => work(),
    };

    let video = VideoInfo {
        fps: source.manifest.fps,
        frame_count,
        duration_s: source.manifest.duration_s(),
    };
    let report = VideoReport::new(
        cfg.report_config(backend_name),
        video,
        frames,
        start.elapsed().as_secs_f64(),
    );

    if let (Some(o), Some(dir)) = (output, frames_dir) {
        let written = VideoManifest {
            fps: source.manifest.fps / cfg.stride as f64,
            frames: report
                .frames
                .iter()
                .filter(|f| dir.join(annotated_frame_name(f.index)).is_file())
                .map(|f| annotated_frame_name(f.index))
                .collect(),
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&written).expect("manifest serializes");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        let path = o.dir.join("report.json");
        std::fs::write(&path, report.to_json_pretty()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(report)
}
