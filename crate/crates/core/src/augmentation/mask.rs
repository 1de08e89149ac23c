//! Landmark-driven mask superimposition.
//!
//! The mask graphic is split at its vertical center line. The center line is
//! pinned to the nose-bridge → chin-bottom segment, the outer top corners to
//! the left and right chin points, and each half is warped onto its
//! quadrilateral with a projective mapping before alpha compositing.

use std::path::Path;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::imaging::ImageBuffer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub nose_bridge: Point,
    pub chin_left: Point,
    pub chin_bottom: Point,
    pub chin_right: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chin_contour: Option<Vec<Point>>,
}

impl LandmarkSet {
    pub fn new(nose_bridge: Point, chin_left: Point, chin_bottom: Point, chin_right: Point) -> Self {
        Self {
            nose_bridge,
            chin_left,
            chin_bottom,
            chin_right,
            chin_contour: None,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let lm: LandmarkSet = serde_json::from_str(text).map_err(|e| Error::parse("landmarks", e))?;
        lm.validate()?;
        Ok(lm)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    fn named(&self) -> [(&'static str, Point); 4] {
        [
            ("nose_bridge", self.nose_bridge),
            ("chin_left", self.chin_left),
            ("chin_bottom", self.chin_bottom),
            ("chin_right", self.chin_right),
        ]
    }

    /// Named points must be finite and pairwise distinct.
    pub fn validate(&self) -> Result<()> {
        let named = self.named();
        for (name, p) in &named {
            if !p.is_finite() {
                return Err(Error::DegenerateLandmarks(format!("{name} is not finite")));
            }
        }
        for i in 0..named.len() {
            for j in i + 1..named.len() {
                if named[i].1 == named[j].1 {
                    return Err(Error::DegenerateLandmarks(format!(
                        "{} and {} coincide",
                        named[i].0, named[j].0
                    )));
                }
            }
        }
        Ok(())
    }

    /// Rigid rotation of every point about `center` by `degrees`, clockwise on
    /// screen (y grows downward).
    pub fn rotated(&self, center: Point, degrees: f64) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        let rot = |p: Point| {
            let d = p - center;
            Point::new(center.x + d.x * c - d.y * s, center.y + d.x * s + d.y * c)
        };
        Self {
            nose_bridge: rot(self.nose_bridge),
            chin_left: rot(self.chin_left),
            chin_bottom: rot(self.chin_bottom),
            chin_right: rot(self.chin_right),
            chin_contour: self
                .chin_contour
                .as_ref()
                .map(|pts| pts.iter().copied().map(rot).collect()),
        }
    }
}

/// RGBA mask graphic.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskAsset {
    pub name: String,
    image: ImageBuffer,
}

impl MaskAsset {
    pub fn new(name: impl Into<String>, image: ImageBuffer) -> Result<Self> {
        if image.channels() != 4 {
            return Err(Error::validation(
                "mask asset",
                format!("expected 4 channels (RGBA), got {}", image.channels()),
            ));
        }
        Ok(Self {
            name: name.into(),
            image,
        })
    }

    pub fn image(&self) -> &ImageBuffer {
        &self.image
    }
}

/// Destination geometry for the two mask halves.
///
/// Each quad lists its corners in the order they pair with the asset half's
/// top-center, top-outer, bottom-outer and bottom-center corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskPlacement {
    /// Face orientation, 0 for upright, positive clockwise.
    pub rotation_deg: f64,
    pub left_quad: [Point; 4],
    pub right_quad: [Point; 4],
}

/// Placement of the mask for a set of landmarks.
///
/// The rotation is `atan2(u.x, -u.y)` with `u = nose_bridge - chin_bottom`.
/// The bottom-outer corner of each half completes the parallelogram spanned
/// by the chin point and the nose-to-chin segment.
pub fn mask_fit(lm: &LandmarkSet) -> Result<MaskPlacement> {
    let u = lm.nose_bridge - lm.chin_bottom;
    if u.x == 0.0 && u.y == 0.0 {
        return Err(Error::DegenerateLandmarks(
            "nose_bridge and chin_bottom coincide".into(),
        ));
    }
    lm.validate()?;
    let rotation_deg = u.x.atan2(-u.y).to_degrees();
    let down = lm.chin_bottom - lm.nose_bridge;
    Ok(MaskPlacement {
        rotation_deg,
        left_quad: [lm.nose_bridge, lm.chin_left, lm.chin_left + down, lm.chin_bottom],
        right_quad: [lm.nose_bridge, lm.chin_right, lm.chin_right + down, lm.chin_bottom],
    })
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Strictly convex quad with a consistent winding; returns the winding sign.
fn convex_orientation(quad: &[Point; 4]) -> Result<f64> {
    let turns: Vec<f64> = (0..4)
        .map(|i| cross(quad[i], quad[(i + 1) % 4], quad[(i + 2) % 4]))
        .collect();
    if turns.iter().all(|&t| t > 0.0) {
        Ok(1.0)
    } else if turns.iter().all(|&t| t < 0.0) {
        Ok(-1.0)
    } else {
        Err(Error::DegenerateQuad(format!("{quad:?} is not a convex quadrilateral")))
    }
}

fn inside(quad: &[Point; 4], orientation: f64, p: Point) -> bool {
    (0..4).all(|i| orientation * cross(quad[i], quad[(i + 1) % 4], p) >= 0.0)
}

/// Projective map sending `from[i]` to `to[i]`.
struct Homography([f64; 9]);

impl Homography {
    fn between(from: &[Point; 4], to: &[Point; 4]) -> Result<Self> {
        let mut a = SMatrix::<f64, 8, 8>::zeros();
        let mut b = SVector::<f64, 8>::zeros();
        for i in 0..4 {
            let (x, y) = (from[i].x, from[i].y);
            let (u, v) = (to[i].x, to[i].y);
            let r = 2 * i;
            a.row_mut(r)
                .copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]);
            a.row_mut(r + 1)
                .copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]);
            b[r] = u;
            b[r + 1] = v;
        }
        let h = a
            .lu()
            .solve(&b)
            .filter(|h| h.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::DegenerateQuad("singular projective mapping".into()))?;
        Ok(Self([h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0]))
    }

    fn apply(&self, p: Point) -> Point {
        let m = &self.0;
        let w = m[6] * p.x + m[7] * p.y + m[8];
        Point::new(
            (m[0] * p.x + m[1] * p.y + m[2]) / w,
            (m[3] * p.x + m[4] * p.y + m[5]) / w,
        )
    }
}

/// Bilinear RGBA sample at continuous pixel-center coordinates, with x
/// clamped to `[x_lo, x_hi]` and y to the image.
fn sample_rgba(img: &ImageBuffer, x: f64, y: f64, x_lo: f64, x_hi: f64) -> [f64; 4] {
    let x = x.clamp(x_lo, x_hi);
    let y = y.clamp(0.0, (img.height() - 1) as f64);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let x1 = (x0 + 1.0).min((img.width() - 1) as f64);
    let y1 = (y0 + 1.0).min((img.height() - 1) as f64);
    let p00 = img.pixel(x0 as u32, y0 as u32);
    let p10 = img.pixel(x1 as u32, y0 as u32);
    let p01 = img.pixel(x0 as u32, y1 as u32);
    let p11 = img.pixel(x1 as u32, y1 as u32);
    let mut out = [0.0; 4];
    for (c, o) in out.iter_mut().enumerate() {
        let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
        let bot = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
        *o = top * (1.0 - fy) + bot * fy;
    }
    out
}

fn composite(dst: &mut [u8], src: [f64; 4]) {
    let a = src[3] / 255.0;
    if a <= 0.0 {
        return;
    }
    let blend = |s: f64, d: u8| (a * s + (1.0 - a) * d as f64).round().clamp(0.0, 255.0) as u8;
    match dst.len() {
        1 => {
            let luma = 0.299 * src[0] + 0.587 * src[1] + 0.114 * src[2];
            dst[0] = blend(luma, dst[0]);
        }
        3 => {
            for c in 0..3 {
                dst[c] = blend(src[c], dst[c]);
            }
        }
        _ => {
            for c in 0..3 {
                dst[c] = blend(src[c], dst[c]);
            }
            dst[3] = (255.0 * a + (1.0 - a) * dst[3] as f64).round().clamp(0.0, 255.0) as u8;
        }
    }
}

/// Pixel-index rectangle `(x0, y0, x1, y1)`, exclusive ends, covering `quad`
/// and clipped to a `width` x `height` image.
fn quad_bounds(quad: &[Point; 4], width: u32, height: u32) -> (u32, u32, u32, u32) {
    let min_x = quad.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let max_x = quad.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let min_y = quad.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let max_y = quad.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let clip = |v: f64, hi: u32| v.clamp(0.0, hi as f64) as u32;
    (
        clip(min_x.floor(), width),
        clip(min_y.floor(), height),
        clip(max_x.ceil(), width),
        clip(max_y.ceil(), height),
    )
}

/// Union of the two quads' bounding rectangles, clipped to the image. Pixels
/// outside it are never touched by [`overlay_mask`].
pub fn placement_bounds(placement: &MaskPlacement, width: u32, height: u32) -> (u32, u32, u32, u32) {
    let a = quad_bounds(&placement.left_quad, width, height);
    let b = quad_bounds(&placement.right_quad, width, height);
    (a.0.min(b.0), a.1.min(b.1), a.2.max(b.2), a.3.max(b.3))
}

/// Superimposes `asset` onto `img` according to the landmarks.
pub fn overlay_mask(img: &ImageBuffer, lm: &LandmarkSet, asset: &MaskAsset) -> Result<ImageBuffer> {
    let (w, h) = (img.width() as f64, img.height() as f64);
    for (name, p) in lm.named() {
        if !(0.0..=w).contains(&p.x) || !(0.0..=h).contains(&p.y) {
            return Err(Error::validation(
                "landmarks",
                format!("{name} ({}, {}) lies outside the {w}x{h} image", p.x, p.y),
            ));
        }
    }
    let placement = mask_fit(lm)?;

    let mask = &asset.image;
    let (mw, mh) = (mask.width() as f64, mask.height() as f64);
    let cx = mw / 2.0;
    let left_src = [Point::new(cx, 0.0), Point::new(0.0, 0.0), Point::new(0.0, mh), Point::new(cx, mh)];
    let right_src = [Point::new(cx, 0.0), Point::new(mw, 0.0), Point::new(mw, mh), Point::new(cx, mh)];
    // Sample ranges in pixel-center coordinates for each half.
    let seam = (cx - 0.5).max(0.0);
    let halves = [
        (placement.left_quad, left_src, 0.0, seam),
        (placement.right_quad, right_src, seam, mw - 1.0),
    ];

    let mut prepared = Vec::with_capacity(2);
    for (quad, src, lo, hi) in halves {
        let orientation = convex_orientation(&quad)?;
        let to_asset = Homography::between(&quad, &src)?;
        prepared.push((quad, orientation, to_asset, lo, hi));
    }

    let mut out = img.clone();
    let (x0, y0, x1, y1) = placement_bounds(&placement, img.width(), img.height());
    for y in y0..y1 {
        for x in x0..x1 {
            let center = Point::new(x as f64 + 0.5, y as f64 + 0.5);
            let Some((_, _, to_asset, lo, hi)) = prepared
                .iter()
                .find(|(quad, orientation, ..)| inside(quad, *orientation, center))
            else {
                continue;
            };
            let s = to_asset.apply(center);
            let rgba = sample_rgba(mask, s.x - 0.5, s.y - 0.5, *lo, *hi);
            composite(out.pixel_mut(x, y), rgba);
        }
    }
    Ok(out)
}
