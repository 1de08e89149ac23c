use std::ops::RangeInclusive;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::imaging::{convolve2d, BlurChoice, BlurKind, ImageBuffer, MotionDirection};

/// Inclusive kernel-size ranges for each blur option. Options are drawn
/// uniformly, including "no blur".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlurConfig {
    pub gaussian_range: RangeInclusive<usize>,
    pub average_range: RangeInclusive<usize>,
    pub motion_range: RangeInclusive<usize>,
}

impl Default for BlurConfig {
    fn default() -> Self {
        Self {
            gaussian_range: 6..=10,
            average_range: 3..=9,
            motion_range: 3..=10,
        }
    }
}

impl BlurConfig {
    pub fn range(&self, kind: BlurKind) -> Option<&RangeInclusive<usize>> {
        match kind {
            BlurKind::None => None,
            BlurKind::Gaussian => Some(&self.gaussian_range),
            BlurKind::Average => Some(&self.average_range),
            BlurKind::Motion => Some(&self.motion_range),
        }
    }
}

/// Draws one blur option.
///
/// Draw order: option index in `0..4` (gaussian, average, motion, none), then
/// the kernel size, then for motion blur the direction.
pub fn pick_blur<R: Rng + ?Sized>(rng: &mut R, cfg: &BlurConfig) -> BlurChoice {
    let kind = BlurKind::ALL[rng.random_range(0..BlurKind::ALL.len())];
    let Some(range) = cfg.range(kind) else {
        return BlurChoice::NONE;
    };
    let kernel_size = rng.random_range(range.clone());
    let motion_direction = (kind == BlurKind::Motion)
        .then(|| MotionDirection::ALL[rng.random_range(0..MotionDirection::ALL.len())]);
    BlurChoice {
        kind,
        kernel_size,
        motion_direction,
    }
}

pub fn blur_augment(img: &ImageBuffer, choice: &BlurChoice) -> ImageBuffer {
    match choice.kernel() {
        None => img.clone(),
        Some(kernel) => convolve2d(img, &kernel),
    }
}
