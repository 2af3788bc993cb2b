//! Axis-aligned boxes and overlap arithmetic.
//!
//! Coordinates are continuous image-frame reals with the origin at the
//! top-left corner. A box spans `[x_min, x_max) x [y_min, y_max)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scored, labelled axis-aligned rectangle.
///
/// Construction rejects zero or negative area and scores outside `[0, 1]`,
/// so every `BBox` in circulation has a well-defined IoU with any other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
    score: f64,
    label: u32,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, score: f64, label: u32) -> Result<Self> {
        let invalid = |reason| Error::InvalidBox {
            x_min,
            y_min,
            x_max,
            y_max,
            score,
            reason,
        };
        if ![x_min, y_min, x_max, y_max, score].iter().all(|v| v.is_finite()) {
            return Err(invalid("non-finite value"));
        }
        if x_min >= x_max || y_min >= y_max {
            return Err(invalid("zero or negative area"));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(invalid("score outside [0, 1]"));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
            score,
            label,
        })
    }

    /// Unscored box (score 1), as used for ground truth.
    pub fn ground_truth(x_min: f64, y_min: f64, x_max: f64, y_max: f64, label: u32) -> Result<Self> {
        Self::new(x_min, y_min, x_max, y_max, 1.0, label)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }
    pub fn score(&self) -> f64 {
        self.score
    }
    pub fn label(&self) -> u32 {
        self.label
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn with_score(&self, score: f64) -> Result<Self> {
        Self::new(self.x_min, self.y_min, self.x_max, self.y_max, score, self.label)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self> {
        Self::new(
            self.x_min + dx,
            self.y_min + dy,
            self.x_max + dx,
            self.y_max + dy,
            self.score,
            self.label,
        )
    }

    /// True if the point lies in the half-open box.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        iou(self, other)
    }

    /// Total order used wherever a deterministic tie-break is needed:
    /// score descending, then coordinates ascending, then label.
    pub fn rank_cmp(&self, other: &BBox) -> std::cmp::Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.coord_cmp(other))
    }

    /// Lexicographic order on `(x_min, y_min, x_max, y_max, label)`.
    pub fn coord_cmp(&self, other: &BBox) -> std::cmp::Ordering {
        self.x_min
            .total_cmp(&other.x_min)
            .then(self.y_min.total_cmp(&other.y_min))
            .then(self.x_max.total_cmp(&other.x_max))
            .then(self.y_max.total_cmp(&other.y_max))
            .then(self.label.cmp(&other.label))
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            x_min: f64,
            y_min: f64,
            x_max: f64,
            y_max: f64,
            score: f64,
            label: u32,
        }
        let r = Raw::deserialize(deserializer)?;
        BBox::new(r.x_min, r.y_min, r.x_max, r.y_max, r.score, r.label).map_err(serde::de::Error::custom)
    }
}

pub fn area(a: &BBox) -> f64 {
    a.area()
}

/// Intersection over union; 0 for disjoint or edge-touching boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    if a.coords() == b.coords() {
        return 1.0;
    }
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1, 0.5, 0).unwrap()
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&b(0., 0., 10., 10.), &b(0., 0., 10., 10.)), 1.0);
        assert_eq!(iou(&b(0., 0., 10., 10.), &b(20., 20., 30., 30.)), 0.0);
        let v = iou(&b(0., 0., 10., 10.), &b(5., 0., 15., 10.));
        assert!((v - 50.0 / 150.0).abs() < 1e-15);
    }

    #[test]
    fn touching_edges_do_not_overlap() {
        assert_eq!(iou(&b(0., 0., 10., 10.), &b(10., 0., 20., 10.)), 0.0);
    }

    #[test]
    fn area_examples() {
        assert_eq!(area(&b(0., 0., 1., 1.)), 1.0);
        assert_eq!(area(&b(0., 0., 10., 10.)), 100.0);
        assert_eq!(area(&b(2., 3., 7., 5.)), 10.0);
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(BBox::new(0., 0., 0., 10., 0.5, 0).is_err());
        assert!(BBox::new(0., 5., 10., 4., 0.5, 0).is_err());
        assert!(BBox::new(0., 0., 1., 1., 1.5, 0).is_err());
        assert!(BBox::new(0., 0., 1., 1., -0.1, 0).is_err());
        assert!(BBox::new(0., 0., f64::NAN, 1., 0.5, 0).is_err());
    }

    #[test]
    fn deserialize_validates() {
        let ok: BBox = serde_json::from_str(r#"{"x_min":0,"y_min":0,"x_max":1,"y_max":2,"score":0.3,"label":1}"#).unwrap();
        assert_eq!(ok.area(), 2.0);
        let bad = serde_json::from_str::<BBox>(r#"{"x_min":3,"y_min":0,"x_max":1,"y_max":2,"score":0.3,"label":1}"#);
        assert!(bad.is_err());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (-100.0..100.0f64, -100.0..100.0f64, 0.1..50.0f64, 0.1..50.0f64)
            .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h, 0.5, 0).unwrap())
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), c in arb_box()) {
            let ab = iou(&a, &c);
            prop_assert_eq!(ab, iou(&c, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            let interiors_meet = a.x_min() < c.x_max() && c.x_min() < a.x_max()
                && a.y_min() < c.y_max() && c.y_min() < a.y_max();
            prop_assert_eq!(ab > 0.0, interiors_meet);
        }

        #[test]
        fn iou_self_is_one(a in arb_box()) {
            prop_assert_eq!(iou(&a, &a), 1.0);
        }

        #[test]
        fn iou_translation_invariant(a in arb_box(), c in arb_box(), dx in -500.0..500.0f64, dy in -500.0..500.0f64) {
            let moved = iou(&a.translated(dx, dy).unwrap(), &c.translated(dx, dy).unwrap());
            prop_assert!((moved - iou(&a, &c)).abs() < 1e-12);
        }
    }
}
