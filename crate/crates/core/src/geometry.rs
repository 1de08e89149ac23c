//! Bounding-box arithmetic shared by the detection stages.
//!
//! Boxes are `(x, y, w, h)` in pixels with the origin at the top-left corner,
//! x growing rightward and y downward.

use serde::{Deserialize, Serialize};

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    /// Checks `w >= 0`, `h >= 0` and that every field is finite.
    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite())
            && self.w >= 0.0
            && self.h >= 0.0
    }

    pub fn centroid(&self) -> Point {
        centroid(self)
    }

    /// Scales both axes independently, e.g. to map between detector-input and
    /// source-frame coordinates.
    pub fn scaled(&self, sx: f64, sy: f64) -> Self {
        Self::new(self.x * sx, self.y * sy, self.w * sx, self.h * sy)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy, self.w, self.h)
    }
}

impl From<[f64; 4]> for BoundingBox {
    fn from([x, y, w, h]: [f64; 4]) -> Self {
        Self { x, y, w, h }
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Person,
    Face,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub category: Category,
}

impl Detection {
    pub fn new(bbox: BoundingBox, confidence: f64, category: Category) -> Self {
        Self {
            bbox,
            confidence,
            category,
        }
    }

    pub fn person(bbox: BoundingBox, confidence: f64) -> Self {
        Self::new(bbox, confidence, Category::Person)
    }

    pub fn face(bbox: BoundingBox, confidence: f64) -> Self {
        Self::new(bbox, confidence, Category::Face)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Confidence filter and overlap threshold for [`non_max_suppression`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmsParams {
    pub confidence_threshold: f64,
    pub iou_threshold: f64,
}

impl Default for NmsParams {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.5,
            iou_threshold: 0.3,
        }
    }
}

impl NmsParams {
    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.confidence_threshold) && (0.0..=1.0).contains(&self.iou_threshold)
    }
}

pub fn centroid(b: &BoundingBox) -> Point {
    Point::new(b.x + b.w / 2.0, b.y + b.h / 2.0)
}

/// Intersection over union. Zero when the union has no area.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Greedy non-maximum suppression.
///
/// Detections below `confidence_threshold` are dropped first. The rest are
/// visited by descending confidence (ties keep input order) and a detection
/// survives unless its IoU with an already kept detection is strictly greater
/// than `iou_threshold`.
pub fn non_max_suppression(dets: &[Detection], params: &NmsParams) -> Vec<Detection> {
    nms_indices(dets, params)
        .into_iter()
        .map(|i| dets[i])
        .collect()
}

/// Same as [`non_max_suppression`] but returns indices into `dets`.
pub fn nms_indices(dets: &[Detection], params: &NmsParams) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len())
        .filter(|&i| dets[i].confidence >= params.confidence_threshold)
        .collect();
    // `sort_by` is stable, so equal confidences stay in input order.
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence));

    let mut kept: Vec<usize> = Vec::with_capacity(order.len());
    for i in order {
        let suppressed = kept
            .iter()
            .any(|&k| iou(&dets[k].bbox, &dets[i].bbox) > params.iou_threshold);
        if !suppressed {
            kept.push(i);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h)
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(centroid(&bx(0.0, 0.0, 10.0, 10.0)), Point::new(5.0, 5.0));
        assert_eq!(centroid(&bx(2.0, 3.0, 4.0, 6.0)), Point::new(4.0, 6.0));
        assert_eq!(centroid(&bx(7.0, 7.0, 0.0, 0.0)), Point::new(7.0, 7.0));
    }

    #[test]
    fn iou_examples() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bx(20.0, 20.0, 5.0, 5.0)), 0.0);
        assert!((iou(&a, &bx(5.0, 0.0, 10.0, 10.0)) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn iou_of_zero_area_boxes_is_zero() {
        let p = bx(3.0, 3.0, 0.0, 0.0);
        assert_eq!(iou(&p, &p), 0.0);
    }

    #[test]
    fn nms_examples() {
        let params = NmsParams::default();
        assert!(non_max_suppression(&[], &params).is_empty());

        let single = [Detection::person(bx(0.0, 0.0, 10.0, 10.0), 0.9)];
        assert_eq!(non_max_suppression(&single, &params), single.to_vec());

        let a = Detection::person(bx(0.0, 0.0, 10.0, 10.0), 0.9);
        let b = Detection::person(bx(5.0, 0.0, 10.0, 10.0), 0.8);
        assert_eq!(non_max_suppression(&[a, b], &params), vec![a]);

        let weak = Detection::person(bx(100.0, 100.0, 10.0, 10.0), 0.4);
        let out = non_max_suppression(&[weak, b], &params);
        assert_eq!(out, vec![b]);
    }

    #[test]
    fn nms_confidence_threshold_is_inclusive() {
        let d = Detection::person(bx(0.0, 0.0, 10.0, 10.0), 0.5);
        assert_eq!(non_max_suppression(&[d], &NmsParams::default()), vec![d]);
    }

    #[test]
    fn nms_overlap_at_threshold_is_kept() {
        // IoU exactly 1/3 against a threshold of 1/3: only "more than" suppresses.
        let a = Detection::person(bx(0.0, 0.0, 10.0, 10.0), 0.9);
        let b = Detection::person(bx(5.0, 0.0, 10.0, 10.0), 0.8);
        let params = NmsParams {
            confidence_threshold: 0.5,
            iou_threshold: iou(&a.bbox, &b.bbox),
        };
        assert_eq!(non_max_suppression(&[a, b], &params), vec![a, b]);
    }

    #[test]
    fn nms_ties_follow_input_order() {
        let a = Detection::person(bx(0.0, 0.0, 10.0, 10.0), 0.7);
        let b = Detection::person(bx(1.0, 0.0, 10.0, 10.0), 0.7);
        assert_eq!(non_max_suppression(&[a, b], &NmsParams::default()), vec![a]);
        assert_eq!(non_max_suppression(&[b, a], &NmsParams::default()), vec![b]);
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (0.0..500.0f64, 0.0..500.0f64, 0.0..200.0f64, 0.0..200.0f64)
            .prop_map(|(x, y, w, h)| bx(x, y, w, h))
    }

    proptest! {
        #[test]
        fn iou_is_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou(&a, &b);
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn iou_self_is_one(a in arb_box()) {
            prop_assume!(a.w > 1e-3 && a.h > 1e-3);
            prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn nms_keep_set_is_translation_invariant(
            boxes in prop::collection::vec((arb_box(), 0.0..1.0f64), 0..40),
            dx in -50.0..50.0f64,
            dy in -50.0..50.0f64,
        ) {
            // Integer offsets keep the shifted coordinates exact.
            let (dx, dy) = (dx.round(), dy.round());
            let dets: Vec<_> = boxes.iter().map(|&(b, c)| Detection::person(
                bx(b.x.round(), b.y.round(), b.w.round(), b.h.round()), c)).collect();
            let shifted: Vec<_> = dets.iter()
                .map(|d| Detection::person(d.bbox.translated(dx, dy), d.confidence))
                .collect();
            let params = NmsParams::default();
            prop_assert_eq!(nms_indices(&dets, &params), nms_indices(&shifted, &params));
        }

        #[test]
        fn nms_output_is_non_overlapping_subset(
            boxes in prop::collection::vec((arb_box(), 0.0..1.0f64), 0..60),
        ) {
            let dets: Vec<_> = boxes.iter().map(|&(b, c)| Detection::person(b, c)).collect();
            let params = NmsParams::default();
            let kept = nms_indices(&dets, &params);
            for (n, &i) in kept.iter().enumerate() {
                prop_assert!(dets[i].confidence >= params.confidence_threshold);
                for &j in &kept[..n] {
                    prop_assert!(iou(&dets[i].bbox, &dets[j].bbox) <= params.iou_threshold);
                    prop_assert!(dets[j].confidence >= dets[i].confidence);
                }
            }
        }
    }
}
