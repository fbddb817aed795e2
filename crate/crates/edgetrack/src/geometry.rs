//! Axis-aligned integer boxes on a pixel grid.
//!
//! A box covers the half-open pixel range `[x, x+w) x [y, y+h)`. All overlap
//! math is exact integer arithmetic; floating point appears only in the final
//! IoU division, so equal boxes compare equal across platforms.

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GeometryError {
    /// The box has no pixels inside the frame.
    #[error("box {0:?} lies entirely outside the frame")]
    OutOfFrame(BoundingBox),
}

/// Frame size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameDims {
    pub width: u32,
    pub height: u32,
}

impl FrameDims {
    pub const QVGA: FrameDims = FrameDims {
        width: 320,
        height: 240,
    };

    pub fn new(width: u32, height: u32) -> Self {
        FrameDims { width, height }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// The frame extent as a box anchored at the origin.
    pub fn as_box(&self) -> BoundingBox {
        BoundingBox {
            x: 0,
            y: 0,
            w: self.width,
            h: self.height,
        }
    }
}

impl Default for FrameDims {
    fn default() -> Self {
        FrameDims::QVGA
    }
}

/// Half-open pixel rectangle. `x`/`y` may be negative (partially off-frame
/// candidates show up during tracking); `w`/`h` are always at least 1
/// for boxes produced by this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

impl BoundingBox {
    pub fn new(x: i32, y: i32, w: u32, h: u32) -> Self {
        BoundingBox { x, y, w, h }
    }

    /// One past the right-most column, widened so `x + w` cannot overflow.
    pub fn right(&self) -> i64 {
        self.x as i64 + self.w as i64
    }

    /// One past the bottom-most row.
    pub fn bottom(&self) -> i64 {
        self.y as i64 + self.h as i64
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }

    pub fn translated(&self, dx: i32, dy: i32) -> BoundingBox {
        BoundingBox {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    /// Overlapping region of two boxes, if any.
    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let x0 = self.x.max(other.x) as i64;
        let y0 = self.y.max(other.y) as i64;
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 <= x0 || y1 <= y0 {
            return None;
        }
        Some(BoundingBox {
            x: x0 as i32,
            y: y0 as i32,
            w: (x1 - x0) as u32,
            h: (y1 - y0) as u32,
        })
    }

    /// Intersection over union in `[0, 1]`. Exact up to the one final
    /// division: both areas are accumulated in integers.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = match self.intersection(other) {
            Some(b) => b.area(),
            None => return 0.0,
        };
        let union = self.area() + other.area() - inter;
        if union == 0 {
            return 0.0;
        }
        inter as f64 / union as f64
    }

    /// Smallest distance from any box edge to the frame edge. Zero when the
    /// box touches the border, negative when it pokes outside.
    pub fn border_distance(&self, dims: FrameDims) -> i64 {
        let left = self.x as i64;
        let top = self.y as i64;
        let right = dims.width as i64 - self.right();
        let bottom = dims.height as i64 - self.bottom();
        left.min(top).min(right).min(bottom)
    }

    /// Restrict the box to the frame. Errors when nothing remains.
    pub fn clamp_to_frame(&self, dims: FrameDims) -> Result<BoundingBox, GeometryError> {
        self.intersection(&dims.as_box())
            .ok_or(GeometryError::OutOfFrame(*self))
    }

    /// Box with the same center and dimensions scaled by `factor`
    /// (rounded to the nearest pixel, at least 1x1).
    pub fn scaled_about_center(&self, factor: f64) -> BoundingBox {
        let w = (self.w as f64 * factor).round().max(1.0) as u32;
        let h = (self.h as f64 * factor).round().max(1.0) as u32;
        let (cx, cy) = self.center();
        BoundingBox {
            x: (cx - w as f64 / 2.0).round() as i32,
            y: (cy - h as f64 / 2.0).round() as i32,
            w,
            h,
        }
    }
}

// Logs store boxes as a bare `[x, y, w, h]` array.
impl Serialize for BoundingBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(4)?;
        t.serialize_element(&self.x)?;
        t.serialize_element(&self.y)?;
        t.serialize_element(&self.w)?;
        t.serialize_element(&self.h)?;
        t.end()
    }
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct BoxVisitor;
        impl<'de> Visitor<'de> for BoxVisitor {
            type Value = BoundingBox;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("an [x, y, w, h] array")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<BoundingBox, A::Error> {
                let x = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let y = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(1, &self))?;
                let w = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(2, &self))?;
                let h = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(3, &self))?;
                Ok(BoundingBox { x, y, w, h })
            }
        }
        deserializer.deserialize_tuple(4, BoxVisitor)
    }
}
