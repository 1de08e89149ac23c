//! ONNX graph backend.
//!
//! Every graph `foo.onnx` comes with a sidecar manifest `foo.json`:
//!
//! ```json
//! { "input": "images", "outputs": ["output"], "input_size": [416, 416], "role": "person" }
//! ```
//!
//! The graph input must be a `[1, 3, h, w]` float tensor; pixels are fed as
//! RGB scaled to `[0, 1]`. Output conventions per role:
//!
//! * person: `[1, n, 5 + classes]` rows of `cx, cy, w, h, objectness,
//!   class scores…` in input pixels. Rows whose best class is class 0 become
//!   person detections with confidence `objectness * score[0]`. No
//!   suppression happens here.
//! * face: `[1, n, 5]` rows of `x1, y1, x2, y2, score` in input pixels.
//! * mask: one value (sigmoid output) or two (`[no_mask, mask]` softmax); the
//!   mask probability is the last value.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Role;
use crate::error::{Error, GraphError, Result};

/// Sidecar manifest describing a graph file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphManifest {
    pub input: String,
    pub outputs: Vec<String>,
    pub input_size: [u32; 2],
    pub role: Role,
}

impl GraphManifest {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let m: GraphManifest =
            serde_json::from_str(text).map_err(|e| Error::parse("graph manifest", e))?;
        if m.outputs.is_empty() {
            return Err(Error::validation("graph manifest", "outputs must not be empty"));
        }
        if m.input_size.contains(&0) {
            return Err(Error::validation("graph manifest", "input_size must be positive"));
        }
        Ok(m)
    }

    /// Manifest path for a graph path: same stem, `.json` extension.
    pub fn sidecar_path(graph: &Path) -> PathBuf {
        graph.with_extension("json")
    }

    pub fn load_for(graph: &Path) -> Result<Self> {
        let path = Self::sidecar_path(graph);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_json_str(&text)
    }
}

/// Reads the sidecar and checks it against the requested role and size.
fn checked_manifest(
    path: &Path,
    role: Role,
    input_size: Option<(u32, u32)>,
) -> Result<GraphManifest> {
    if !path.is_file() {
        return Err(GraphError::MissingFile(path.to_path_buf()).into());
    }
    let manifest = GraphManifest::load_for(path)?;
    if manifest.role != role {
        return Err(GraphError::Invalid {
            path: path.to_path_buf(),
            message: format!(
                "manifest declares role {}, loaded as {}",
                manifest.role.name(),
                role.name()
            ),
        }
        .into());
    }
    if let Some((w, h)) = input_size {
        if manifest.input_size != [w, h] {
            return Err(GraphError::ShapeMismatch {
                path: path.to_path_buf(),
                declared: vec![manifest.input_size[0] as usize, manifest.input_size[1] as usize],
                expected: vec![w as usize, h as usize],
            }
            .into());
        }
    }
    Ok(manifest)
}

#[cfg(feature = "graph")]
mod session {
    use std::path::{Path, PathBuf};

    use tract_onnx::prelude::*;
    use tract_onnx::tract_hir::infer::Factoid;
    use tract_onnx::tract_hir::internal::DimLike;

    use super::{checked_manifest, GraphManifest};
    use crate::backends::{
        FaceDetector, FaceQuery, FrameContext, MaskClassifier, PersonDetector, Role,
    };
    use crate::error::{Error, GraphError, Result};
    use crate::geometry::{BoundingBox, Detection};
    use crate::imaging::{resize_bilinear, ImageBuffer};

    type Plan = SimplePlan<TypedFact, Box<dyn TypedOp>, Graph<TypedFact, Box<dyn TypedOp>>>;

    /// A loaded graph bound to one role.
    pub struct GraphSession {
        path: PathBuf,
        manifest: GraphManifest,
        plan: Plan,
    }

    impl std::fmt::Debug for GraphSession {
        fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            f.debug_struct("GraphSession")
                .field("path", &self.path)
                .field("manifest", &self.manifest)
                .finish_non_exhaustive()
        }
    }

    fn is_unsupported(err: &TractError) -> bool {
        err.chain().any(|cause| {
            let text = cause.to_string().to_lowercase();
            text.contains("unimplemented") || text.contains("not implemented") || text.contains("unsupported")
        })
    }

    fn graph_error(path: &Path, err: TractError) -> Error {
        let message = format!("{err:#}");
        if is_unsupported(&err) {
            GraphError::UnsupportedOperator {
                path: path.to_path_buf(),
                message,
            }
            .into()
        } else {
            GraphError::Invalid {
                path: path.to_path_buf(),
                message,
            }
            .into()
        }
    }

    pub fn load_graph(path: &Path, role: Role, input_size: Option<(u32, u32)>) -> Result<GraphSession> {
        let manifest = checked_manifest(path, role, input_size)?;
        let [w, h] = manifest.input_size;
        let expected = vec![1usize, 3, h as usize, w as usize];

        let mut model = tract_onnx::onnx()
            .model_for_path(path)
            .map_err(|e| graph_error(path, e))?;
        model
            .set_input_names([manifest.input.as_str()])
            .map_err(|e| graph_error(path, e))?;
        model
            .set_output_names(&manifest.outputs)
            .map_err(|e| graph_error(path, e))?;

        let declared = model.input_fact(0).map_err(|e| graph_error(path, e))?.clone();
        if !declared.shape.is_open() {
            // Symbolic dims (e.g. a dynamic batch) are accepted; concrete ones must match.
            let dims: Vec<Option<usize>> = declared
                .shape
                .dims()
                .map(|d| d.concretize().and_then(|d| d.to_usize().ok()))
                .collect();
            let compatible = dims.len() == expected.len()
                && dims.iter().zip(&expected).all(|(d, e)| d.is_none_or(|d| d == *e));
            if !compatible {
                return Err(GraphError::ShapeMismatch {
                    path: path.to_path_buf(),
                    declared: dims.into_iter().map(|d| d.unwrap_or(0)).collect(),
                    expected,
                }
                .into());
            }
        }

        let plan = model
            .with_input_fact(0, f32::fact(&expected).into())
            .and_then(|m| m.into_optimized())
            .and_then(|m| m.into_runnable())
            .map_err(|e| graph_error(path, e))?;

        Ok(GraphSession {
            path: path.to_path_buf(),
            manifest,
            plan,
        })
    }

    impl GraphSession {
        pub fn manifest(&self) -> &GraphManifest {
            &self.manifest
        }

        pub fn input_size(&self) -> (u32, u32) {
            (self.manifest.input_size[0], self.manifest.input_size[1])
        }

        fn role_error(&self, message: impl ToString) -> Error {
            Error::Backend {
                role: self.manifest.role.name(),
                message: format!("{}: {}", self.path.display(), message.to_string()),
            }
        }

        /// Runs the graph on `img` (resized to the declared input if needed)
        /// and returns the first output flattened, with its shape.
        pub fn run(&self, img: &ImageBuffer) -> Result<(Vec<usize>, Vec<f32>)> {
            let (w, h) = self.input_size();
            let img = if (img.width(), img.height()) == (w, h) {
                img.to_rgb()
            } else {
                resize_bilinear(&img.to_rgb(), w, h)
            };
            let (wu, hu) = (w as usize, h as usize);
            let data = img.data();
            let input = tract_ndarray::Array4::from_shape_fn((1, 3, hu, wu), |(_, c, y, x)| {
                data[(y * wu + x) * 3 + c] as f32 / 255.0
            });
            let outputs = self
                .plan
                .run(tvec!(Tensor::from(input).into()))
                .map_err(|e| self.role_error(format!("{e:#}")))?;
            let out = outputs[0]
                .to_array_view::<f32>()
                .map_err(|e| self.role_error(format!("{e:#}")))?;
            Ok((out.shape().to_vec(), out.iter().copied().collect()))
        }

        /// Row width of a `[.., n, width]` output.
        fn row_width(&self, shape: &[usize], min_width: usize) -> Result<usize> {
            match shape.last() {
                Some(&width) if width >= min_width => Ok(width),
                _ => Err(self.role_error(format!(
                    "output shape {shape:?} has rows narrower than {min_width}"
                ))),
            }
        }
    }

    impl PersonDetector for GraphSession {
        fn detect_persons(&self, _ctx: &FrameContext, input: &ImageBuffer) -> Result<Vec<Detection>> {
            let (shape, values) = self.run(input)?;
            let width = self.row_width(&shape, 6)?;
            let mut dets = Vec::new();
            for row in values.chunks_exact(width) {
                let scores = &row[5..];
                let best = scores
                    .iter()
                    .enumerate()
                    .fold(0, |best, (i, &s)| if s > scores[best] { i } else { best });
                if best != 0 {
                    continue;
                }
                let (cx, cy, w, h) = (row[0] as f64, row[1] as f64, row[2] as f64, row[3] as f64);
                let conf = (row[4] as f64 * scores[0] as f64).clamp(0.0, 1.0);
                let bbox = BoundingBox::new(cx - w / 2.0, cy - h / 2.0, w.max(0.0), h.max(0.0));
                dets.push(Detection::person(bbox, conf));
            }
            Ok(dets)
        }
    }

    impl FaceDetector for GraphSession {
        fn input_size(&self) -> Option<(u32, u32)> {
            Some(GraphSession::input_size(self))
        }

        fn detect_faces(&self, _ctx: &FrameContext, input: &ImageBuffer) -> Result<Vec<Detection>> {
            let (shape, values) = self.run(input)?;
            let width = self.row_width(&shape, 5)?;
            Ok(values
                .chunks_exact(width)
                .map(|row| {
                    let (x1, y1, x2, y2) = (row[0] as f64, row[1] as f64, row[2] as f64, row[3] as f64);
                    let bbox = BoundingBox::new(x1, y1, (x2 - x1).max(0.0), (y2 - y1).max(0.0));
                    Detection::face(bbox, (row[4] as f64).clamp(0.0, 1.0))
                })
                .collect())
        }
    }

    impl MaskClassifier for GraphSession {
        fn mask_probability(&self, _query: &FaceQuery, crop: &ImageBuffer) -> Result<f64> {
            let (_, values) = self.run(crop)?;
            match values.as_slice() {
                [p] | [_, p] => Ok(*p as f64),
                other => Err(self.role_error(format!("expected 1 or 2 outputs, got {}", other.len()))),
            }
        }
    }
}

#[cfg(feature = "graph")]
pub use session::{load_graph, GraphSession};

/// Placeholder when the crate is built without the `graph` feature.
#[cfg(not(feature = "graph"))]
#[derive(Debug)]
pub struct GraphSession {
    _private: (),
}

/// Loads a graph for `role`. `input_size`, when given, must match the size
/// declared by the sidecar manifest and by the graph itself.
#[cfg(not(feature = "graph"))]
pub fn load_graph(path: &Path, role: Role, input_size: Option<(u32, u32)>) -> Result<GraphSession> {
    checked_manifest(path, role, input_size)?;
    Err(GraphError::NotCompiled.into())
}

#[cfg(not(feature = "graph"))]
mod stub {
    use super::GraphSession;
    use crate::backends::{FaceDetector, FaceQuery, FrameContext, MaskClassifier, PersonDetector};
    use crate::error::{GraphError, Result};
    use crate::geometry::Detection;
    use crate::imaging::ImageBuffer;

    impl PersonDetector for GraphSession {
        fn detect_persons(&self, _: &FrameContext, _: &ImageBuffer) -> Result<Vec<Detection>> {
            Err(GraphError::NotCompiled.into())
        }
    }

    impl FaceDetector for GraphSession {
        fn detect_faces(&self, _: &FrameContext, _: &ImageBuffer) -> Result<Vec<Detection>> {
            Err(GraphError::NotCompiled.into())
        }
    }

    impl MaskClassifier for GraphSession {
        fn mask_probability(&self, _: &FaceQuery, _: &ImageBuffer) -> Result<f64> {
            Err(GraphError::NotCompiled.into())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_parses() {
        let m = GraphManifest::from_json_str(
            r#"{"input": "x", "outputs": ["y"], "input_size": [128, 128], "role": "mask"}"#,
        )
        .unwrap();
        assert_eq!(m.role, Role::Mask);
        assert_eq!(m.input_size, [128, 128]);
        assert!(GraphManifest::from_json_str(
            r#"{"input": "x", "outputs": [], "input_size": [128, 128], "role": "mask"}"#
        )
        .is_err());
        assert!(GraphManifest::from_json_str(
            r#"{"input": "x", "outputs": ["y"], "input_size": [128, 128], "role": "car"}"#
        )
        .is_err());
    }

    #[test]
    fn missing_graph_file() {
        let err = load_graph(Path::new("/nonexistent/person.onnx"), Role::Person, Some((416, 416)))
            .unwrap_err();
        assert!(matches!(err, Error::Graph(GraphError::MissingFile(_))));
    }

    #[test]
    fn manifest_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let graph = dir.path().join("person.onnx");
        std::fs::write(&graph, b"").unwrap();
        std::fs::write(
            dir.path().join("person.json"),
            r#"{"input": "x", "outputs": ["y"], "input_size": [224, 224], "role": "person"}"#,
        )
        .unwrap();
        let err = load_graph(&graph, Role::Person, Some((416, 416))).unwrap_err();
        assert!(matches!(err, Error::Graph(GraphError::ShapeMismatch { .. })), "{err}");
    }
}
