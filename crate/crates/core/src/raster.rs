//! Raster data model: image references, binary masks, mask collections,
//! boxes and points, plus the zero-first RLE wire format for masks.
//!
//! Coordinates follow the screen convention everywhere: `x` indexes columns
//! left to right, `y` indexes rows top to bottom.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RasterError {
    #[error("RLE runs sum to {got}, expected {expected} (w*h)")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid dimensions {width}x{height}")]
    BadDimensions { width: usize, height: usize },
    #[error("pixel ({x}, {y}) outside {width}x{height} grid")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("mask set element is {got_w}x{got_h}, set is {width}x{height}")]
    DimensionMismatch {
        width: usize,
        height: usize,
        got_w: usize,
        got_h: usize,
    },
}

/// An image known to the dataset: an opaque id and its pixel dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageRef {
    #[serde(rename = "image_id")]
    pub id: String,
    #[serde(rename = "w")]
    pub width: usize,
    #[serde(rename = "h")]
    pub height: usize,
}

impl ImageRef {
    pub fn new(id: impl Into<String>, width: usize, height: usize) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::BadDimensions { width, height });
        }
        Ok(Self {
            id: id.into(),
            width,
            height,
        })
    }
}

/// Binary raster region stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    /// All-false mask.
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, RasterError> {
        if bits.len() != width * height {
            return Err(RasterError::LengthMismatch {
                expected: width * height,
                got: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    /// Builds a mask from a list of `(x, y)` true pixels.
    pub fn from_pixels(
        width: usize,
        height: usize,
        pixels: &[(usize, usize)],
    ) -> Result<Self, RasterError> {
        let mut m = Self::empty(width, height);
        for &(x, y) in pixels {
            if x >= width || y >= height {
                return Err(RasterError::OutOfBounds {
                    x,
                    y,
                    width,
                    height,
                });
            }
            m.bits[y * width + x] = true;
        }
        Ok(m)
    }

    /// Filled inclusive rectangle, clipped to the grid.
    pub fn from_rect(width: usize, height: usize, rect: BBox) -> Self {
        let mut m = Self::empty(width, height);
        for y in rect.ymin..=rect.ymax.min(height.saturating_sub(1)) {
            for x in rect.xmin..=rect.xmax.min(width.saturating_sub(1)) {
                m.bits[y * width + x] = true;
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn same_dims(&self, other: &Mask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// True pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn or_assign(&mut self, other: &Mask) {
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }
}

/// Ordered collection of same-sized masks. Carries its grid dimensions so an
/// empty set still knows the context it was produced in.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskSet {
    width: usize,
    height: usize,
    elements: Vec<Mask>,
}

impl MaskSet {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            elements: Vec::new(),
        }
    }

    pub fn new(width: usize, height: usize, elements: Vec<Mask>) -> Result<Self, RasterError> {
        for m in &elements {
            if m.width != width || m.height != height {
                return Err(RasterError::DimensionMismatch {
                    width,
                    height,
                    got_w: m.width,
                    got_h: m.height,
                });
            }
        }
        Ok(Self {
            width,
            height,
            elements,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Mask> {
        self.elements.get(i)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Mask> {
        self.elements.iter()
    }

    pub fn elements(&self) -> &[Mask] {
        &self.elements
    }
}

/// Inclusive pixel box: `xmin..=xmax` by `ymin..=ymax`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BBox {
    pub xmin: usize,
    pub ymin: usize,
    pub xmax: usize,
    pub ymax: usize,
}

impl BBox {
    pub fn new(xmin: usize, ymin: usize, xmax: usize, ymax: usize) -> Self {
        Self {
            xmin,
            ymin,
            xmax,
            ymax,
        }
    }

    /// Pixel count of the box.
    pub fn area(&self) -> usize {
        (self.xmax - self.xmin + 1) * (self.ymax - self.ymin + 1)
    }

    pub fn is_well_formed(&self) -> bool {
        self.xmin <= self.xmax && self.ymin <= self.ymax
    }

    /// Intersection-over-union on inclusive pixel areas.
    pub fn iou(&self, other: &BBox) -> f64 {
        let ix0 = self.xmin.max(other.xmin);
        let iy0 = self.ymin.max(other.ymin);
        let ix1 = self.xmax.min(other.xmax);
        let iy1 = self.ymax.min(other.ymax);
        let inter = if ix0 <= ix1 && iy0 <= iy1 {
            (ix1 - ix0 + 1) * (iy1 - iy0 + 1)
        } else {
            0
        };
        let union = self.area() + other.area() - inter;
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Zero-first run lengths over the row-major bit grid: the first run counts
/// false pixels (possibly zero), then runs alternate.
pub fn rle_encode(mask: &Mask) -> Vec<u64> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0u64;
    for &b in &mask.bits {
        if b != current {
            runs.push(len);
            len = 0;
            current = b;
        }
        len += 1;
    }
    runs.push(len);
    runs
}

pub fn rle_decode(runs: &[u64], width: usize, height: usize) -> Result<Mask, RasterError> {
    let expected = width * height;
    let total: u128 = runs.iter().map(|&r| r as u128).sum();
    if total != expected as u128 {
        return Err(RasterError::LengthMismatch {
            expected,
            got: usize::try_from(total).unwrap_or(usize::MAX),
        });
    }
    let mut bits = Vec::with_capacity(expected);
    let mut value = false;
    for &r in runs {
        bits.extend(std::iter::repeat_n(value, r as usize));
        value = !value;
    }
    Ok(Mask {
        width,
        height,
        bits,
    })
}

/// Wire form of a mask: `{"w": int, "h": int, "rle": [int, ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub w: usize,
    pub h: usize,
    pub rle: Vec<u64>,
}

impl MaskRecord {
    pub fn decode(&self) -> Result<Mask, RasterError> {
        rle_decode(&self.rle, self.w, self.h)
    }
}

impl From<&Mask> for MaskRecord {
    fn from(m: &Mask) -> Self {
        Self {
            w: m.width,
            h: m.height,
            rle: rle_encode(m),
        }
    }
}
