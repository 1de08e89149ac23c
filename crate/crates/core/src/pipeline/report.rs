//! Serializable pipeline outputs.

use serde::{Deserialize, Serialize};

use crate::distancing::ViolationReport;
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Detection};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub people: u64,
    pub violators: u64,
    pub faces: u64,
    pub masked: u64,
}

impl Counts {
    pub fn add(&mut self, other: &Counts) {
        self.people += other.people;
        self.violators += other.violators;
        self.faces += other.faces;
        self.masked += other.masked;
    }
}

/// Wall-clock seconds spent in each stage of one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub person_detection: f64,
    pub distancing: f64,
    pub face_detection: f64,
    pub mask_classification: f64,
    pub annotation: f64,
    /// Whole frame, including loading and any time the stages overlapped.
    pub total: f64,
}

impl StageTimings {
    pub fn stages(&self) -> [(&'static str, f64); 5] {
        [
            ("person_detection", self.person_detection),
            ("distancing", self.distancing),
            ("face_detection", self.face_detection),
            ("mask_classification", self.mask_classification),
            ("annotation", self.annotation),
        ]
    }

    pub fn max_stage(&self) -> f64 {
        self.stages().iter().map(|s| s.1).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceObservation {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub mask_prob: f64,
    pub masked: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub index: u64,
    pub timestamp_s: f64,
    pub counts: Counts,
    pub timings_s: StageTimings,
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Person detections after suppression, in source-frame coordinates.
    #[serde(default)]
    pub persons: Vec<Detection>,
    #[serde(default)]
    pub violation: ViolationReport,
    #[serde(default)]
    pub faces: Vec<FaceObservation>,
}

impl FrameResult {
    pub fn failed(index: u64, timestamp_s: f64, error: &Error) -> Self {
        Self {
            index,
            timestamp_s,
            failed: true,
            error: Some(error.to_string()),
            ..Default::default()
        }
    }

    /// Recomputes `counts` from the detailed fields.
    pub fn recount(&mut self) {
        self.counts = Counts {
            people: self.persons.len() as u64,
            violators: self.violation.violator_count() as u64,
            faces: self.faces.len() as u64,
            masked: self.faces.iter().filter(|f| f.masked).count() as u64,
        };
    }
}

/// Configuration echo stored in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub stride: usize,
    pub conf: f64,
    pub nms: f64,
    /// Effective DBSCAN radius in pixels.
    pub eps: f64,
    pub min_pts: usize,
    pub mask_threshold: f64,
    pub detector_input: u32,
    pub classifier_input: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels_per_meter: Option<f64>,
    pub backend: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanCounts {
    pub people: f64,
    pub violators: f64,
    pub faces: f64,
    pub masked: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub frames_processed: u64,
    pub frames_failed: u64,
    pub totals: Counts,
    /// Per processed frame, failed frames included as zeros.
    pub means: MeanCounts,
}

/// Seconds of processing per second of source video.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingPerVideoSecond {
    pub person_detection: f64,
    pub distancing: f64,
    pub face_detection: f64,
    pub mask_classification: f64,
    pub annotation: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VideoInfo {
    pub fps: f64,
    pub frame_count: u64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoReport {
    pub config: ReportConfig,
    pub video: VideoInfo,
    pub frames: Vec<FrameResult>,
    pub aggregates: Aggregates,
    pub timing_per_video_second_s: TimingPerVideoSecond,
    pub wall_clock_s: f64,
}

impl VideoReport {
    pub fn new(config: ReportConfig, video: VideoInfo, frames: Vec<FrameResult>, wall_clock_s: f64) -> Self {
        let mut aggregates = Aggregates {
            frames_processed: frames.len() as u64,
            frames_failed: frames.iter().filter(|f| f.failed).count() as u64,
            ..Default::default()
        };
        for f in &frames {
            aggregates.totals.add(&f.counts);
        }
        if !frames.is_empty() {
            let n = frames.len() as f64;
            let t = &aggregates.totals;
            aggregates.means = MeanCounts {
                people: t.people as f64 / n,
                violators: t.violators as f64 / n,
                faces: t.faces as f64 / n,
                masked: t.masked as f64 / n,
            };
        }

        let mut timing = TimingPerVideoSecond::default();
        if video.duration_s > 0.0 {
            for f in &frames {
                let t = &f.timings_s;
                timing.person_detection += t.person_detection;
                timing.distancing += t.distancing;
                timing.face_detection += t.face_detection;
                timing.mask_classification += t.mask_classification;
                timing.annotation += t.annotation;
                timing.total += t.total;
            }
            let d = video.duration_s;
            timing.person_detection /= d;
            timing.distancing /= d;
            timing.face_detection /= d;
            timing.mask_classification /= d;
            timing.annotation /= d;
            timing.total /= d;
        }

        Self {
            config,
            video,
            frames,
            aggregates,
            timing_per_video_second_s: timing,
            wall_clock_s,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("report", e))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn frame(&self, index: u64) -> Option<&FrameResult> {
        self.frames.iter().find(|f| f.index == index)
    }

    /// The report with every clock-derived field zeroed; two runs over the
    /// same inputs agree on this exactly.
    pub fn without_timings(&self) -> VideoReport {
        let mut r = self.clone();
        r.wall_clock_s = 0.0;
        r.timing_per_video_second_s = TimingPerVideoSecond::default();
        for f in &mut r.frames {
            f.timings_s = StageTimings::default();
        }
        r
    }
}
