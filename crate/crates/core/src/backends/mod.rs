//! Inference seam for the three model roles: person detector, face detector
//! and mask classifier.
//!
//! Two implementations exist. [`synthetic::SyntheticBackend`] replays a
//! scenario file and makes the whole pipeline deterministic.
//! [`graph`] runs serialized ONNX networks (behind the `graph` feature).
//!
//! Whatever the implementation, [`Backends::new`] wraps each role in a
//! validating adapter, so downstream stages can rely on confidences and
//! probabilities lying in `[0, 1]` and on category tags being correct.

pub mod graph;
pub mod synthetic;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Category, Detection};
use crate::imaging::ImageBuffer;

pub use graph::{load_graph, GraphManifest, GraphSession};
pub use synthetic::{SyntheticBackend, SyntheticScript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Person,
    Face,
    Mask,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Person => "person",
            Role::Face => "face",
            Role::Mask => "mask",
        }
    }
}

/// Where the image handed to a backend came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameContext {
    /// Frame number in the source video.
    pub index: u64,
    pub source_width: u32,
    pub source_height: u32,
}

impl FrameContext {
    /// Scale factors from source-frame coordinates into `input` coordinates.
    pub fn scale_to(&self, input: &ImageBuffer) -> (f64, f64) {
        (
            input.width() as f64 / self.source_width as f64,
            input.height() as f64 / self.source_height as f64,
        )
    }
}

/// One face handed to the mask classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceQuery {
    pub frame_index: u64,
    /// Position in the face detector's output for this frame.
    pub face_index: usize,
    /// Face box in source-frame coordinates.
    pub face_box: BoundingBox,
}

pub trait PersonDetector: Send + Sync {
    /// Detections in the coordinates of `input`. No suppression is applied.
    fn detect_persons(&self, ctx: &FrameContext, input: &ImageBuffer) -> Result<Vec<Detection>>;
}

pub trait FaceDetector: Send + Sync {
    /// Input size the detector wants, or `None` to receive the source frame.
    fn input_size(&self) -> Option<(u32, u32)> {
        None
    }

    fn detect_faces(&self, ctx: &FrameContext, input: &ImageBuffer) -> Result<Vec<Detection>>;
}

pub trait MaskClassifier: Send + Sync {
    /// Probability that `crop` shows a masked face.
    fn mask_probability(&self, query: &FaceQuery, crop: &ImageBuffer) -> Result<f64>;
}

/// The three roles, each behind output validation.
#[derive(Clone)]
pub struct Backends {
    pub person: Arc<dyn PersonDetector>,
    pub face: Arc<dyn FaceDetector>,
    pub mask: Arc<dyn MaskClassifier>,
}

impl Backends {
    pub fn new(
        person: Arc<dyn PersonDetector>,
        face: Arc<dyn FaceDetector>,
        mask: Arc<dyn MaskClassifier>,
    ) -> Self {
        Self {
            person: Arc::new(Validated(person)),
            face: Arc::new(Validated(face)),
            mask: Arc::new(Validated(mask)),
        }
    }

    pub fn synthetic(script: SyntheticScript) -> Self {
        let backend = Arc::new(SyntheticBackend::new(script));
        Self::new(backend.clone(), backend.clone(), backend)
    }

    /// Loads `person.onnx`, `face.onnx` and `mask.onnx` (each with its `.json`
    /// sidecar) from `dir`. The person and mask graphs must accept the given
    /// square inputs; the face graph keeps whatever size its manifest declares.
    pub fn graph(dir: &std::path::Path, detector_input: u32, classifier_input: u32) -> Result<Self> {
        let person = load_graph(&dir.join("person.onnx"), Role::Person, Some((detector_input, detector_input)))?;
        let face = load_graph(&dir.join("face.onnx"), Role::Face, None)?;
        let mask = load_graph(&dir.join("mask.onnx"), Role::Mask, Some((classifier_input, classifier_input)))?;
        Ok(Self::new(Arc::new(person), Arc::new(face), Arc::new(mask)))
    }
}

struct Validated<T: ?Sized>(Arc<T>);

fn check_detections(role: &'static str, dets: &[Detection], category: Category) -> Result<()> {
    for (i, d) in dets.iter().enumerate() {
        let problem = if d.category != category {
            Some(format!("detection {i} has category {:?}", d.category))
        } else if !(0.0..=1.0).contains(&d.confidence) {
            Some(format!("detection {i} has confidence {} outside [0, 1]", d.confidence))
        } else if !d.bbox.is_valid() {
            Some(format!("detection {i} has an invalid box {:?}", d.bbox))
        } else {
            None
        };
        if let Some(message) = problem {
            return Err(Error::Backend { role, message });
        }
    }
    Ok(())
}

impl PersonDetector for Validated<dyn PersonDetector> {
    fn detect_persons(&self, ctx: &FrameContext, input: &ImageBuffer) -> Result<Vec<Detection>> {
        let dets = self.0.detect_persons(ctx, input)?;
        check_detections("person", &dets, Category::Person)?;
        Ok(dets)
    }
}

impl FaceDetector for Validated<dyn FaceDetector> {
    fn input_size(&self) -> Option<(u32, u32)> {
        self.0.input_size()
    }

    fn detect_faces(&self, ctx: &FrameContext, input: &ImageBuffer) -> Result<Vec<Detection>> {
        let dets = self.0.detect_faces(ctx, input)?;
        check_detections("face", &dets, Category::Face)?;
        Ok(dets)
    }
}

impl MaskClassifier for Validated<dyn MaskClassifier> {
    fn mask_probability(&self, query: &FaceQuery, crop: &ImageBuffer) -> Result<f64> {
        let p = self.0.mask_probability(query, crop)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Backend {
                role: "mask",
                message: format!("probability {p} outside [0, 1]"),
            });
        }
        Ok(p)
    }
}
