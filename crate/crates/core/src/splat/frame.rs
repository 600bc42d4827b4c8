use crate::error::{Error, Result};

/// Depth value marking "no measurement".
pub const INVALID_DEPTH: f64 = -1.0;

/// Pixels whose accumulated opacity is below this count as background when a
/// frame is used as a depth measurement.
pub const BACKGROUND_ALPHA: f64 = 0.02;

/// Row-major RGB-D image with accumulated opacity.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub color: Vec<[f64; 3]>,
    pub depth: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl Frame {
    /// Black, depth-invalid, transparent frame.
    pub fn background(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            color: vec![[0.0; 3]; n],
            depth: vec![INVALID_DEPTH; n],
            alpha: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn depth_valid(&self, i: usize) -> bool {
        is_valid_depth(self.depth[i])
    }

    pub fn valid_depth_count(&self) -> usize {
        self.depth.iter().filter(|d| is_valid_depth(**d)).count()
    }

    pub fn check_same_shape(&self, other: &Frame) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.width, self.height),
                actual: format!("{}x{}", other.width, other.height),
            });
        }
        Ok(())
    }

    /// Mark depth invalid wherever accumulated opacity is below
    /// [`BACKGROUND_ALPHA`].
    pub fn mask_background(&mut self) {
        for (d, a) in self.depth.iter_mut().zip(&self.alpha) {
            if *a < BACKGROUND_ALPHA {
                *d = INVALID_DEPTH;
            }
        }
    }

    /// One colour channel as a plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.color.iter().map(|px| px[c]).collect()
    }
}

pub(crate) fn is_valid_depth(d: f64) -> bool {
    d > 0.0
}
