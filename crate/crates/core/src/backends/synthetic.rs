//! Scripted backend that replays detections from a scenario document.
//!
//! Scenario format (UTF-8 JSON, source-frame pixel coordinates):
//!
//! ```json
//! { "frames": { "5": { "persons": [{"box": [x, y, w, h], "conf": 0.9}],
//!                      "faces":   [{"box": [x, y, w, h], "conf": 0.8, "mask_prob": 0.9}] } } }
//! ```
//!
//! Frames missing from the document have no detections.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{FaceDetector, FaceQuery, FrameContext, MaskClassifier, PersonDetector};
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Detection};
use crate::imaging::ImageBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedPerson {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub conf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedFace {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub conf: f64,
    pub mask_prob: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedFrame {
    #[serde(default)]
    pub persons: Vec<ScriptedPerson>,
    #[serde(default)]
    pub faces: Vec<ScriptedFace>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    frames: BTreeMap<String, ScriptedFrame>,
}

/// Per-frame scripted detections and mask probabilities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SyntheticScript {
    frames: BTreeMap<u64, ScriptedFrame>,
}

static EMPTY: ScriptedFrame = ScriptedFrame {
    persons: Vec::new(),
    faces: Vec::new(),
};

impl SyntheticScript {
    pub fn from_frames(frames: BTreeMap<u64, ScriptedFrame>) -> Result<Self> {
        let script = Self { frames };
        script.validate()?;
        Ok(script)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawScenario =
            serde_json::from_str(text).map_err(|e| Error::parse("scenario", e))?;
        let mut frames = BTreeMap::new();
        for (key, frame) in raw.frames {
            let index: u64 = key.parse().map_err(|_| {
                Error::parse("scenario", format!("frames: key {key:?} is not a frame index"))
            })?;
            frames.insert(index, frame);
        }
        Self::from_frames(frames)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
            Error::Validation { message, .. } => {
                Error::validation(path.display().to_string(), message)
            }
            other => other,
        })
    }

    fn validate(&self) -> Result<()> {
        let ratio = |v: f64| (0.0..=1.0).contains(&v);
        let fail = |msg: String| Err(Error::validation("scenario", msg));
        for (index, frame) in &self.frames {
            for (i, p) in frame.persons.iter().enumerate() {
                if !ratio(p.conf) {
                    return fail(format!("frames.{index}.persons[{i}].conf = {} is outside [0, 1]", p.conf));
                }
                if !p.bbox.is_valid() {
                    return fail(format!("frames.{index}.persons[{i}].box is not a valid box"));
                }
            }
            for (i, f) in frame.faces.iter().enumerate() {
                if !ratio(f.conf) {
                    return fail(format!("frames.{index}.faces[{i}].conf = {} is outside [0, 1]", f.conf));
                }
                if !ratio(f.mask_prob) {
                    return fail(format!(
                        "frames.{index}.faces[{i}].mask_prob = {} is outside [0, 1]",
                        f.mask_prob
                    ));
                }
                if !f.bbox.is_valid() {
                    return fail(format!("frames.{index}.faces[{i}].box is not a valid box"));
                }
            }
        }
        Ok(())
    }

    pub fn frame(&self, index: u64) -> &ScriptedFrame {
        self.frames.get(&index).unwrap_or(&EMPTY)
    }

    pub fn frames(&self) -> impl Iterator<Item = (u64, &ScriptedFrame)> {
        self.frames.iter().map(|(&i, f)| (i, f))
    }

    /// Scripted persons for `index`, scaled by `(sx, sy)` from source coordinates.
    pub fn persons(&self, index: u64, sx: f64, sy: f64) -> Vec<Detection> {
        self.frame(index)
            .persons
            .iter()
            .map(|p| Detection::person(p.bbox.scaled(sx, sy), p.conf))
            .collect()
    }

    pub fn faces(&self, index: u64, sx: f64, sy: f64) -> Vec<Detection> {
        self.frame(index)
            .faces
            .iter()
            .map(|f| Detection::face(f.bbox.scaled(sx, sy), f.conf))
            .collect()
    }

    /// Probability scripted for the `face_index`-th face of frame `index`.
    pub fn mask_prob(&self, index: u64, face_index: usize) -> Option<f64> {
        self.frame(index).faces.get(face_index).map(|f| f.mask_prob)
    }
}

/// Answers all three roles from one [`SyntheticScript`].
#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    script: SyntheticScript,
}

impl SyntheticBackend {
    pub fn new(script: SyntheticScript) -> Self {
        Self { script }
    }

    pub fn script(&self) -> &SyntheticScript {
        &self.script
    }
}

impl PersonDetector for SyntheticBackend {
    fn detect_persons(&self, ctx: &FrameContext, input: &ImageBuffer) -> Result<Vec<Detection>> {
        let (sx, sy) = ctx.scale_to(input);
        Ok(self.script.persons(ctx.index, sx, sy))
    }
}

impl FaceDetector for SyntheticBackend {
    fn detect_faces(&self, ctx: &FrameContext, input: &ImageBuffer) -> Result<Vec<Detection>> {
        let (sx, sy) = ctx.scale_to(input);
        Ok(self.script.faces(ctx.index, sx, sy))
    }
}

impl MaskClassifier for SyntheticBackend {
    fn mask_probability(&self, query: &FaceQuery, _crop: &ImageBuffer) -> Result<f64> {
        self.script
            .mask_prob(query.frame_index, query.face_index)
            .ok_or_else(|| Error::Backend {
                role: "mask",
                message: format!(
                    "frame {} has no scripted face {}",
                    query.frame_index, query.face_index
                ),
            })
    }
}
