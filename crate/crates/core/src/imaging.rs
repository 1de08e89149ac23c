//! 8-bit image buffers, resampling, cropping and the blur kernels used for
//! augmentation.
//!
//! Every operation rounds to the nearest integer sample and clamps to
//! `[0, 255]` before storing, so results are bit-reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Row-major, channel-interleaved 8-bit image with 1, 3 or 4 channels.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation("image", "width and height must be at least 1"));
        }
        if !matches!(channels, 1 | 3 | 4) {
            return Err(Error::validation(
                "image",
                format!("unsupported channel count {channels}"),
            ));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::validation(
                "image",
                format!("data length {} != {expected}", data.len()),
            ));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image filled with one color; `color.len()` is the channel count.
    pub fn filled(width: u32, height: u32, color: &[u8]) -> Result<Self> {
        let n = width as usize * height as usize;
        let data = color.iter().copied().cycle().take(n * color.len()).collect();
        Self::new(width, height, color.len() as u8, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let o = self.offset(x, y);
        &self.data[o..o + self.channels as usize]
    }

    pub fn pixel_mut(&mut self, x: u32, y: u32) -> &mut [u8] {
        let o = self.offset(x, y);
        let c = self.channels as usize;
        &mut self.data[o..o + c]
    }

    /// Converts to 3-channel RGB. Gray is replicated, alpha is dropped.
    pub fn to_rgb(&self) -> ImageBuffer {
        match self.channels {
            3 => self.clone(),
            1 => {
                let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
                ImageBuffer::new(self.width, self.height, 3, data).expect("valid dims")
            }
            _ => {
                let data = self
                    .data
                    .chunks_exact(4)
                    .flat_map(|p| [p[0], p[1], p[2]])
                    .collect();
                ImageBuffer::new(self.width, self.height, 3, data).expect("valid dims")
            }
        }
    }
}

#[inline]
fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Bilinear resize with half-pixel centers and edge clamping.
///
/// Source coordinate for output column `dx` is `(dx + 0.5) * (w / out_w) - 0.5`,
/// likewise for rows.
pub fn resize_bilinear(img: &ImageBuffer, out_w: u32, out_h: u32) -> ImageBuffer {
    assert!(out_w >= 1 && out_h >= 1, "output dimensions must be positive");
    if out_w == img.width && out_h == img.height {
        return img.clone();
    }
    let c = img.channels as usize;
    let sx = img.width as f64 / out_w as f64;
    let sy = img.height as f64 / out_h as f64;
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;

    let taps = |d: u32, scale: f64, max: f64| {
        let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
        let i0 = s.floor();
        let i1 = (i0 + 1.0).min(max);
        (i0 as u32, i1 as u32, s - i0)
    };
    let cols: Vec<_> = (0..out_w).map(|dx| taps(dx, sx, max_x)).collect();

    let mut data = Vec::with_capacity(out_w as usize * out_h as usize * c);
    for dy in 0..out_h {
        let (y0, y1, fy) = taps(dy, sy, max_y);
        for &(x0, x1, fx) in &cols {
            let p00 = img.pixel(x0, y0);
            let p10 = img.pixel(x1, y0);
            let p01 = img.pixel(x0, y1);
            let p11 = img.pixel(x1, y1);
            for ch in 0..c {
                let top = p00[ch] as f64 * (1.0 - fx) + p10[ch] as f64 * fx;
                let bot = p01[ch] as f64 * (1.0 - fx) + p11[ch] as f64 * fx;
                data.push(quantize(top * (1.0 - fy) + bot * fy));
            }
        }
    }
    ImageBuffer::new(out_w, out_h, img.channels, data).expect("valid dims")
}

/// Extracts the part of `bbox` inside the image, rounded outward to whole
/// pixels.
pub fn crop(img: &ImageBuffer, bbox: &BoundingBox) -> Result<ImageBuffer> {
    let outside = || Error::FaceOutsideFrame {
        x: bbox.x,
        y: bbox.y,
        w: bbox.w,
        h: bbox.h,
        width: img.width,
        height: img.height,
    };
    if !bbox.is_valid() {
        return Err(outside());
    }
    let x0 = bbox.x.max(0.0).floor();
    let y0 = bbox.y.max(0.0).floor();
    let x1 = bbox.right().min(img.width as f64).ceil();
    let y1 = bbox.bottom().min(img.height as f64).ceil();
    if x1 <= x0 || y1 <= y0 {
        return Err(outside());
    }
    let (x0, y0, x1, y1) = (x0 as u32, y0 as u32, x1 as u32, y1 as u32);
    let c = img.channels as usize;
    let mut data = Vec::with_capacity(((x1 - x0) * (y1 - y0)) as usize * c);
    for y in y0..y1 {
        let start = img.offset(x0, y);
        data.extend_from_slice(&img.data[start..start + (x1 - x0) as usize * c]);
    }
    ImageBuffer::new(x1 - x0, y1 - y0, img.channels, data)
}

/// Square convolution kernel stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2D {
    size: usize,
    weights: Vec<f64>,
}

impl Kernel2D {
    pub fn new(size: usize, weights: Vec<f64>) -> Result<Self> {
        if size == 0 || weights.len() != size * size {
            return Err(Error::validation(
                "kernel",
                format!("{} weights for size {size}", weights.len()),
            ));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::validation("kernel", "non-finite weight"));
        }
        Ok(Self { size, weights })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.size + col]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Row and column of the sample that lands on the output pixel.
    pub fn anchor(&self) -> usize {
        (self.size - 1) / 2
    }
}

/// Sigma used for a gaussian kernel of size `k`.
pub fn gaussian_sigma(k: usize) -> f64 {
    0.3 * ((k as f64 - 1.0) * 0.5 - 1.0) + 0.8
}

/// Normalized isotropic gaussian. The center `(k - 1) / 2` is real-valued,
/// so even sizes stay symmetric about a half-pixel center.
pub fn gaussian_kernel(k: usize) -> Kernel2D {
    assert!(k >= 1, "kernel size must be positive");
    let sigma = gaussian_sigma(k);
    let center = (k as f64 - 1.0) / 2.0;
    let one_d: Vec<f64> = (0..k)
        .map(|i| {
            let d = i as f64 - center;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let mut weights: Vec<f64> = one_d
        .iter()
        .flat_map(|&a| one_d.iter().map(move |&b| a * b))
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Kernel2D { size: k, weights }
}

/// Box filter: every weight is `1 / k²`.
pub fn average_kernel(k: usize) -> Kernel2D {
    assert!(k >= 1, "kernel size must be positive");
    Kernel2D {
        size: k,
        weights: vec![1.0 / (k * k) as f64; k * k],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionDirection {
    Vertical,
    Horizontal,
    MainDiagonal,
    AntiDiagonal,
}

impl MotionDirection {
    pub const ALL: [MotionDirection; 4] = [
        MotionDirection::Vertical,
        MotionDirection::Horizontal,
        MotionDirection::MainDiagonal,
        MotionDirection::AntiDiagonal,
    ];
}

/// Line of `k` weights of `1 / k` along `dir`.
pub fn motion_kernel(k: usize, dir: MotionDirection) -> Kernel2D {
    assert!(k >= 1, "kernel size must be positive");
    let mut weights = vec![0.0; k * k];
    let v = 1.0 / k as f64;
    let mid = (k - 1) / 2;
    for i in 0..k {
        let (r, c) = match dir {
            MotionDirection::Horizontal => (mid, i),
            MotionDirection::Vertical => (i, mid),
            MotionDirection::MainDiagonal => (i, i),
            MotionDirection::AntiDiagonal => (i, k - 1 - i),
        };
        weights[r * k + c] = v;
    }
    Kernel2D { size: k, weights }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlurKind {
    None,
    Gaussian,
    Average,
    Motion,
}

impl BlurKind {
    pub const ALL: [BlurKind; 4] = [
        BlurKind::Gaussian,
        BlurKind::Average,
        BlurKind::Motion,
        BlurKind::None,
    ];
}

/// One draw of the blur augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlurChoice {
    pub kind: BlurKind,
    pub kernel_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion_direction: Option<MotionDirection>,
}

impl BlurChoice {
    pub const NONE: BlurChoice = BlurChoice {
        kind: BlurKind::None,
        kernel_size: 1,
        motion_direction: None,
    };

    /// Kernel for this choice; `None` for [`BlurKind::None`].
    pub fn kernel(&self) -> Option<Kernel2D> {
        match self.kind {
            BlurKind::None => None,
            BlurKind::Gaussian => Some(gaussian_kernel(self.kernel_size)),
            BlurKind::Average => Some(average_kernel(self.kernel_size)),
            BlurKind::Motion => Some(motion_kernel(
                self.kernel_size,
                self.motion_direction.unwrap_or(MotionDirection::Horizontal),
            )),
        }
    }
}

/// Per-channel correlation with replicate-edge padding.
///
/// The kernel sample at `(anchor, anchor)` lands on the output pixel. Sums run
/// over kernel rows, then columns, in `f64`.
pub fn convolve2d(img: &ImageBuffer, kernel: &Kernel2D) -> ImageBuffer {
    let k = kernel.size;
    let anchor = kernel.anchor() as i64;
    let (w, h) = (img.width as i64, img.height as i64);
    let c = img.channels as usize;

    // Clamped source index for every (output coordinate, kernel offset).
    let clamp_table = |len: i64, out: i64| -> Vec<u32> {
        (0..k as i64)
            .map(|t| (out + t - anchor).clamp(0, len - 1) as u32)
            .collect()
    };
    let col_taps: Vec<Vec<u32>> = (0..w).map(|x| clamp_table(w, x)).collect();

    let mut data = Vec::with_capacity(img.data.len());
    let mut acc = vec![0.0f64; c];
    for y in 0..h {
        let rows = clamp_table(h, y);
        for cols in &col_taps {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (kr, &sy) in rows.iter().enumerate() {
                let kernel_row = &kernel.weights[kr * k..(kr + 1) * k];
                for (&wgt, &sx) in kernel_row.iter().zip(cols) {
                    let px = img.pixel(sx, sy);
                    for ch in 0..c {
                        acc[ch] += wgt * px[ch] as f64;
                    }
                }
            }
            data.extend(acc.iter().map(|&v| quantize(v)));
        }
    }
    ImageBuffer::new(img.width, img.height, img.channels, data).expect("valid dims")
}
