//! Frame annotation.
//!
//! Safe people get orange outlines, people in a violation cluster blue ones,
//! and every close pair a red segment between centroids. Faces are outlined
//! green when masked and red otherwise. Strokes are 2 px wide.

use super::report::FrameResult;
use crate::geometry::{BoundingBox, Point};
use crate::imaging::ImageBuffer;

pub const SAFE: [u8; 3] = [255, 165, 0];
pub const VIOLATOR: [u8; 3] = [0, 0, 255];
pub const VIOLATION_EDGE: [u8; 3] = [255, 0, 0];
pub const MASKED: [u8; 3] = [0, 200, 0];
pub const UNMASKED: [u8; 3] = [255, 0, 0];
pub const STROKE: i64 = 2;

/// Inclusive pixel rectangle `(x0, y0, x1, y1)` covered by a box: edges are
/// rounded to the nearest pixel boundary.
pub fn pixel_rect(b: &BoundingBox) -> (i64, i64, i64, i64) {
    let x0 = b.x.round() as i64;
    let y0 = b.y.round() as i64;
    let x1 = (b.right().round() as i64 - 1).max(x0);
    let y1 = (b.bottom().round() as i64 - 1).max(y0);
    (x0, y0, x1, y1)
}

fn put(img: &mut ImageBuffer, x: i64, y: i64, color: [u8; 3]) {
    if x < 0 || y < 0 || x >= img.width() as i64 || y >= img.height() as i64 {
        return;
    }
    let px = img.pixel_mut(x as u32, y as u32);
    px[..3].copy_from_slice(&color);
    if px.len() == 4 {
        px[3] = 255;
    }
}

/// Outline drawn inward from the rectangle edges.
pub fn draw_rect(img: &mut ImageBuffer, b: &BoundingBox, color: [u8; 3]) {
    let (x0, y0, x1, y1) = pixel_rect(b);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let on_border = x - x0 < STROKE || x1 - x < STROKE || y - y0 < STROKE || y1 - y < STROKE;
            if on_border {
                put(img, x, y, color);
            }
        }
    }
}

/// Integer Bresenham rasterization from `a` to `b`, endpoints included.
pub fn bresenham(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push((x, y));
        if (x, y) == b {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

fn rounded(p: Point) -> (i64, i64) {
    (p.x.round() as i64, p.y.round() as i64)
}

/// 2 px segment: the Bresenham line plus a copy shifted by one pixel along
/// the minor axis (down for mostly-horizontal lines, right otherwise).
pub fn draw_segment(img: &mut ImageBuffer, a: Point, b: Point, color: [u8; 3]) {
    let (pa, pb) = (rounded(a), rounded(b));
    let horizontal = (pb.0 - pa.0).abs() >= (pb.1 - pa.1).abs();
    for (x, y) in bresenham(pa, pb) {
        put(img, x, y, color);
        if horizontal {
            put(img, x, y + 1, color);
        } else {
            put(img, x + 1, y, color);
        }
    }
}

/// Draws `result` onto a copy of `frame`. Gray frames are promoted to RGB.
pub fn annotate(frame: &ImageBuffer, result: &FrameResult) -> ImageBuffer {
    let mut img = if frame.channels() == 1 {
        frame.to_rgb()
    } else {
        frame.clone()
    };
    let no_marks = result.persons.is_empty() && result.faces.is_empty();
    if no_marks {
        return img;
    }

    for (i, person) in result.persons.iter().enumerate() {
        let color = if result.violation.is_violator(i) { VIOLATOR } else { SAFE };
        draw_rect(&mut img, &person.bbox, color);
    }
    for &(i, j) in &result.violation.edges {
        let (a, b) = (&result.persons[i].bbox, &result.persons[j].bbox);
        draw_segment(&mut img, a.centroid(), b.centroid(), VIOLATION_EDGE);
    }
    for face in &result.faces {
        draw_rect(&mut img, &face.bbox, if face.masked { MASKED } else { UNMASKED });
    }
    img
}
