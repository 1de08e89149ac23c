//! Dataset augmentation: mask overlay on unmasked faces and random blur.

pub mod blur;
pub mod dataset;
pub mod mask;

pub use blur::{blur_augment, pick_blur, BlurConfig};
pub use dataset::{generate_dataset, DatasetOutput, GenerateOptions, ManifestRow};
pub use mask::{mask_fit, overlay_mask, LandmarkSet, MaskAsset, MaskPlacement};
