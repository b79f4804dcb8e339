//! Axis-aligned bounding boxes in continuous pixel coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A box with strictly positive area (`x1 < x2`, `y1 < y2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "[f64; 4]")]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let finite = [x1, y1, x2, y2].iter().all(|v| v.is_finite());
        if !finite || x1 >= x2 || y1 >= y2 {
            return Err(Error::InvalidBox(x1, y1, x2, y2));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn y1(&self) -> f64 {
        self.y1
    }
    pub fn x2(&self) -> f64 {
        self.x2
    }
    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// Area of the intersection; zero when the boxes do not overlap.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Intersection over union, in `[0, 1]`.
    pub fn iou(&self, other: &BBox) -> f64 {
        if self == other {
            return 1.0;
        }
        let inter = self.intersection_area(other);
        if inter == 0.0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        (inter / union).clamp(0.0, 1.0)
    }

    /// Smallest box containing both `self` and `other`.
    pub fn enclose(&self, other: &BBox) -> BBox {
        BBox {
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
            x2: self.x2.max(other.x2),
            y2: self.y2.max(other.y2),
        }
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.x1 <= other.x1 && self.y1 <= other.y1 && self.x2 >= other.x2 && self.y2 >= other.y2
    }
}

/// Free-function form of [`BBox::iou`].
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

/// Free-function form of [`BBox::enclose`].
pub fn enclose(a: &BBox, b: &BBox) -> BBox {
    a.enclose(b)
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;
    fn try_from(v: [f64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = <[f64; 4]>::deserialize(d)?;
        BBox::try_from(raw).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = b(3.0, 4.0, 9.5, 12.0);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(b(0.0, 0.0, 1.0, 1.0).iou(&b(5.0, 5.0, 6.0, 6.0)), 0.0);
        // intersection 5x5 = 25, union 100 + 100 - 25 = 175
        let v = b(0.0, 0.0, 10.0, 10.0).iou(&b(5.0, 5.0, 15.0, 15.0));
        assert!((v - 25.0 / 175.0).abs() < 1e-12);
        assert!((v - 0.142857).abs() < 1e-6);
    }

    #[test]
    fn touching_edges_do_not_intersect() {
        assert_eq!(b(0.0, 0.0, 1.0, 1.0).iou(&b(1.0, 0.0, 2.0, 1.0)), 0.0);
    }

    #[test]
    fn enclose_examples() {
        let a = b(0.0, 0.0, 10.0, 10.0);
        assert_eq!(a.enclose(&a), a);
        assert_eq!(a.enclose(&b(5.0, 5.0, 15.0, 15.0)), b(0.0, 0.0, 15.0, 15.0));
        let inner = b(2.0, 2.0, 3.0, 3.0);
        assert_eq!(inner.enclose(&a), a);
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(BBox::new(1.0, 0.0, 1.0, 2.0).is_err());
        assert!(BBox::new(0.0, 3.0, 1.0, 2.0).is_err());
        assert!(BBox::new(0.0, 0.0, f64::NAN, 2.0).is_err());
    }

    #[test]
    fn json_form_is_four_reals() {
        let a = b(0.0, 1.5, 2.0, 3.0);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[0.0,1.5,2.0,3.0]");
        let back: BBox = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<BBox>("[2.0,0.0,1.0,1.0]").is_err());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (-50.0..50.0f64, -50.0..50.0f64, 0.01..40.0f64, 0.01..40.0f64)
            .prop_map(|(x, y, w, h)| b(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), c in arb_box()) {
            let v = a.iou(&c);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, c.iou(&a));
        }

        #[test]
        fn iou_one_only_for_equal_boxes(a in arb_box(), c in arb_box()) {
            prop_assert_eq!(a.iou(&c) == 1.0, a == c);
        }

        #[test]
        fn enclose_laws(a in arb_box(), c in arb_box(), d in arb_box()) {
            let e = a.enclose(&c);
            prop_assert_eq!(e, c.enclose(&a));
            prop_assert_eq!(e.enclose(&d), a.enclose(&c.enclose(&d)));
            prop_assert_eq!(a.enclose(&a), a);
            prop_assert!(e.contains(&a) && e.contains(&c));
            prop_assert!(e.area() >= a.area().max(c.area()));
        }
    }
}
