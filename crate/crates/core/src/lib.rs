//! Video analytics for crowd-safety monitoring.
//!
//! The pipeline samples frames, detects people, suppresses duplicate boxes,
//! clusters person centroids with DBSCAN to find distancing violations,
//! detects faces and classifies mask wearing, then annotates frames and
//! reports counts and per-stage timings. Alongside it live the dataset
//! augmentation procedures used to train the mask classifier and the
//! count-based evaluation against labelled videos.

pub mod augmentation;
pub mod backends;
pub mod distancing;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod image_io;
pub mod imaging;
pub mod pipeline;

pub use error::{Error, ErrorClass, GraphError, Result};
pub use geometry::{BoundingBox, Category, Detection, NmsParams, Point};
pub use imaging::ImageBuffer;
