//! Dense per-pixel field types shared by every stage of the pipeline.
//!
//! Coordinate convention: x is the column index (increasing rightward),
//! y is the row index (increasing downward). Storage is row-major, so the
//! linear index of (x, y) is `y * width + x`. A flow vector (u, v) moves a
//! pixel u columns right and v rows down per frame.

use crate::error::{check_dims, Error, Result};
use crate::scalar::Scalar;

/// Dense 2-vector displacement field between two frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField<T: Scalar> {
    width: usize,
    height: usize,
    u: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> FlowField<T> {
    /// Builds a field from row-major component buffers. Rejects empty
    /// dimensions, size mismatches, and non-finite values.
    pub fn from_components(width: usize, height: usize, u: Vec<T>, v: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { w: width, h: height });
        }
        let n = width * height;
        if u.len() != n {
            return Err(Error::LengthMismatch {
                what: "u component",
                expected: n,
                got: u.len(),
            });
        }
        if v.len() != n {
            return Err(Error::LengthMismatch {
                what: "v component",
                expected: n,
                got: v.len(),
            });
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "u component" });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "v component" });
        }
        Ok(Self { width, height, u, v })
    }

    /// Constant field with the same (u, v) at every pixel.
    pub fn constant(width: usize, height: usize, u: T, v: T) -> Result<Self> {
        let n = width
            .checked_mul(height)
            .ok_or(Error::InvalidDimensions { w: width, h: height })?;
        Self::from_components(width, height, vec![u; n], vec![v; n])
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::constant(width, height, T::zero(), T::zero())
    }

    /// Builds a field by evaluating `f(x, y) -> (u, v)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> (T, T)) -> Result<Self> {
        let mut u = Vec::with_capacity(width * height);
        let mut v = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                u.push(a);
                v.push(b);
            }
        }
        Self::from_components(width, height, u, v)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false // width, height >= 1 by construction
    }

    #[inline]
    pub fn u(&self) -> &[T] {
        &self.u
    }

    #[inline]
    pub fn v(&self) -> &[T] {
        &self.v
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (T, T) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn check_dims_match(&self, w: usize, h: usize) -> Result<()> {
        check_dims(self.width, self.height, w, h)
    }

    /// Converts component storage to another scalar type.
    pub fn cast<U: Scalar>(&self) -> FlowField<U> {
        FlowField {
            width: self.width,
            height: self.height,
            u: self.u.iter().map(|x| U::narrow(x.widen())).collect(),
            v: self.v.iter().map(|x| U::narrow(x.widen())).collect(),
        }
    }
}

/// Flow direction within a sequence: frame i -> i+1 or i+1 -> i.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowDirection {
    Forward,
    Backward,
}

/// Ordered flows between consecutive frames, all of equal size.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSequence<T: Scalar> {
    fields: Vec<FlowField<T>>,
    direction: FlowDirection,
}

impl<T: Scalar> FlowSequence<T> {
    pub fn new(fields: Vec<FlowField<T>>, direction: FlowDirection) -> Result<Self> {
        let first = fields.first().ok_or(Error::LengthMismatch {
            what: "flow sequence",
            expected: 1,
            got: 0,
        })?;
        let (w, h) = (first.width(), first.height());
        for f in &fields {
            f.check_dims_match(w, h)?;
        }
        Ok(Self { fields, direction })
    }

    #[inline]
    pub fn direction(&self) -> FlowDirection {
        self.direction
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn fields(&self) -> &[FlowField<T>] {
        &self.fields
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.fields[0].width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.fields[0].height()
    }
}

/// Per-pixel boolean mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { w: width, h: height });
        }
        if bits.len() != width * height {
            return Err(Error::LengthMismatch {
                what: "mask bits",
                expected: width * height,
                got: bits.len(),
            });
        }
        Ok(Self { width, height, bits })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Number of set pixels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_all_false(&self) -> bool {
        self.bits.iter().all(|&b| !b)
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|&b| !b).collect(),
        }
    }

    pub fn check_dims_match(&self, w: usize, h: usize) -> Result<()> {
        check_dims(self.width, self.height, w, h)
    }
}

/// Ordered masks of uniform size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSequence {
    masks: Vec<BinaryMask>,
}

impl MaskSequence {
    pub fn new(masks: Vec<BinaryMask>) -> Result<Self> {
        let first = masks.first().ok_or(Error::LengthMismatch {
            what: "mask sequence",
            expected: 1,
            got: 0,
        })?;
        let (w, h) = (first.width(), first.height());
        for m in &masks {
            m.check_dims_match(w, h)?;
        }
        Ok(Self { masks })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn masks(&self) -> &[BinaryMask] {
        &self.masks
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.masks[0].width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.masks[0].height()
    }
}

/// 8-bit RGB image, row-major interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { w: width, h: height });
        }
        if data.len() != width * height * 3 {
            return Err(Error::LengthMismatch {
                what: "frame bytes",
                expected: width * height * 3,
                got: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// RGB at (x, y).
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// One channel as scalars in [0, 255].
    pub fn channel<T: Scalar>(&self, c: usize) -> Vec<T> {
        assert!(c < 3);
        self.data
            .chunks_exact(3)
            .map(|px| T::narrow(px[c] as f64))
            .collect()
    }

    pub fn check_dims_match(&self, w: usize, h: usize) -> Result<()> {
        check_dims(self.width, self.height, w, h)
    }
}

/// Mean flow over a mask region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFlow<T: Scalar> {
    pub u_mean: T,
    pub v_mean: T,
    pub support_count: usize,
}
