use serde::{Deserialize, Serialize};

use super::frame::{is_valid_depth, Frame};
use super::ssim::{ssim, ssim_with_grad};
use crate::error::Result;

/// Weights of the colour L1 and the SSIM term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 0.4,
            lambda2: 0.1,
        }
    }
}

/// Gradient of the loss with respect to each rendered pixel.
#[derive(Debug, Clone)]
pub struct PixelGrads {
    pub color: Vec<[f64; 3]>,
    pub depth: Vec<f64>,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Depth L1 counts wherever the observation is valid. The rendered side is
/// the raw alpha-weighted depth, zero where nothing was drawn, so the term is
/// continuous in the map parameters.
fn depth_residual(rendered: &Frame, observed: &Frame, i: usize) -> Option<f64> {
    is_valid_depth(observed.depth[i]).then(|| rendered.depth[i].max(0.0) - observed.depth[i])
}

/// `(1/Np) * sum_p (|d^ - d| + l1 * |c^ - c|) + l2 * (1 - SSIM(c^, c))`, with
/// `Np` the number of pixels and the colour L1 averaged over channels.
pub fn loss(rendered: &Frame, observed: &Frame, weights: LossWeights) -> Result<f64> {
    rendered.check_same_shape(observed)?;
    let n = rendered.len() as f64;
    let mut l1 = 0.0;
    for i in 0..rendered.len() {
        if let Some(d) = depth_residual(rendered, observed, i) {
            l1 += d.abs();
        }
        let (a, b) = (rendered.color[i], observed.color[i]);
        l1 += weights.lambda1 * ((a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs()) / 3.0;
    }
    let s = ssim(&rendered.color, &observed.color, rendered.width, rendered.height)?;
    Ok(l1 / n + weights.lambda2 * (1.0 - s))
}

/// Loss value together with its per-pixel gradient.
pub fn loss_and_pixel_grads(rendered: &Frame, observed: &Frame, weights: LossWeights) -> Result<(f64, PixelGrads)> {
    rendered.check_same_shape(observed)?;
    let len = rendered.len();
    let n = len as f64;
    let (s, ds) = ssim_with_grad(&rendered.color, &observed.color, rendered.width, rendered.height);
    let mut l1 = 0.0;
    let mut color = vec![[0.0; 3]; len];
    let mut depth = vec![0.0; len];
    let wc = weights.lambda1 / (3.0 * n);
    for i in 0..len {
        if let Some(d) = depth_residual(rendered, observed, i) {
            l1 += d.abs();
            depth[i] = sign(d) / n;
        }
        let (a, b) = (rendered.color[i], observed.color[i]);
        let mut px = 0.0;
        for c in 0..3 {
            let d = a[c] - b[c];
            px += d.abs();
            color[i][c] = wc * sign(d) - weights.lambda2 * ds[i][c];
        }
        l1 += weights.lambda1 * px / 3.0;
    }
    Ok((l1 / n + weights.lambda2 * (1.0 - s), PixelGrads { color, depth }))
}
