use nalgebra::Vector3;
use rayon::prelude::*;

use super::camera::{CameraIntrinsics, Pose};
use super::frame::Frame;
use super::gaussian::GaussianMap;
use super::loss::{loss_and_pixel_grads, LossWeights};
use super::render::{Contribution, Rasterizer, TILE};
use crate::error::Result;

/// Loss gradient for one Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianGrad {
    pub color: [f64; 3],
    pub mean: Vector3<f64>,
    pub radius: f64,
    pub opacity: f64,
}

impl Default for GaussianGrad {
    fn default() -> Self {
        Self {
            color: [0.0; 3],
            mean: Vector3::zeros(),
            radius: 0.0,
            opacity: 0.0,
        }
    }
}

impl GaussianGrad {
    pub fn norm_squared(&self) -> f64 {
        self.color.iter().map(|v| v * v).sum::<f64>()
            + self.mean.norm_squared()
            + self.radius * self.radius
            + self.opacity * self.opacity
    }

    pub fn is_finite(&self) -> bool {
        self.color.iter().all(|v| v.is_finite())
            && self.mean.iter().all(|v| v.is_finite())
            && self.radius.is_finite()
            && self.opacity.is_finite()
    }
}

/// Output of a forward/backward pass. `per_gaussian` is aligned with the map order.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub loss: f64,
    pub rendered: Frame,
    pub per_gaussian: Vec<GaussianGrad>,
}

/// Image-space gradient of one splat.
#[derive(Debug, Clone, Copy, Default)]
struct SplatGrad {
    color: [f64; 3],
    depth: f64,
    opacity: f64,
    mu: [f64; 2],
    r2d: f64,
}

impl SplatGrad {
    fn add(&mut self, o: &SplatGrad) {
        for c in 0..3 {
            self.color[c] += o.color[c];
        }
        self.depth += o.depth;
        self.opacity += o.opacity;
        self.mu[0] += o.mu[0];
        self.mu[1] += o.mu[1];
        self.r2d += o.r2d;
    }
}

/// Render, evaluate the loss against `observed` and back-propagate it to
/// every Gaussian parameter.
///
/// Tiles are processed in parallel into private buffers that are reduced in
/// tile order, so the result does not depend on the worker count.
pub fn backward(
    map: &GaussianMap,
    pose: &Pose,
    intr: &CameraIntrinsics,
    observed: &Frame,
    weights: LossWeights,
) -> Result<Gradients> {
    let rast = Rasterizer::new(map, pose, intr);
    let rendered = rast.render();
    let (loss, pixel) = loss_and_pixel_grads(&rendered, observed, weights)?;

    let width = rast.width;
    let height = rast.height;
    let tile_grads: Vec<Vec<SplatGrad>> = (0..rast.bins.len())
        .into_par_iter()
        .map(|tile| {
            let bin = &rast.bins[tile];
            let mut local = vec![SplatGrad::default(); bin.len()];
            if bin.is_empty() {
                return local;
            }
            let tx = tile % rast.tiles_x;
            let ty = tile / rast.tiles_x;
            let mut scratch: Vec<Contribution> = Vec::with_capacity(bin.len());
            for row in ty * TILE..((ty + 1) * TILE).min(height) {
                for col in tx * TILE..((tx + 1) * TILE).min(width) {
                    let i = row * width + col;
                    let dc = pixel.color[i];
                    let dd = pixel.depth[i];
                    if dc == [0.0; 3] && dd == 0.0 {
                        continue;
                    }
                    scratch.clear();
                    rast.composite(col, row, |c| scratch.push(c));
                    // Colour / depth composited behind the current splat.
                    let mut behind_c = [0.0; 3];
                    let mut behind_d = 0.0;
                    for c in scratch.iter().rev() {
                        let s = &rast.splats[c.splat as usize];
                        let pos = bin.binary_search(&c.splat).expect("splat is binned in its tile");
                        let g = &mut local[pos];
                        let w = c.f * c.transmittance;
                        let mut dl_df = 0.0;
                        for k in 0..3 {
                            g.color[k] += dc[k] * w;
                            dl_df += dc[k] * (s.color[k] - behind_c[k]);
                        }
                        g.depth += dd * w;
                        dl_df += dd * (s.depth - behind_d);
                        dl_df *= c.transmittance;
                        for k in 0..3 {
                            behind_c[k] = s.color[k] * c.f + (1.0 - c.f) * behind_c[k];
                        }
                        behind_d = s.depth * c.f + (1.0 - c.f) * behind_d;

                        g.opacity += dl_df * c.kernel;
                        let a = dl_df * c.f * s.inv_r2;
                        g.mu[0] += a * c.dx;
                        g.mu[1] += a * c.dy;
                        g.r2d += a * (c.dx * c.dx + c.dy * c.dy) / s.r2d;
                    }
                }
            }
            local
        })
        .collect();

    let mut splat_grads = vec![SplatGrad::default(); rast.splats.len()];
    for (bin, local) in rast.bins.iter().zip(&tile_grads) {
        for (&si, g) in bin.iter().zip(local) {
            splat_grads[si as usize].add(g);
        }
    }

    let focal = intr.focal();
    let mut per_gaussian = vec![GaussianGrad::default(); map.len()];
    let gaussians = map.gaussians();
    for (s, g) in rast.splats.iter().zip(&splat_grads) {
        let (x, y, z) = (s.pc.x, s.pc.y, s.pc.z);
        let radius = gaussians[s.index].radius;
        let d_pc = Vector3::new(
            g.mu[0] * intr.fx / z,
            g.mu[1] * intr.fy / z,
            -g.mu[0] * intr.fx * x / (z * z) - g.mu[1] * intr.fy * y / (z * z) - g.r2d * focal * radius / (z * z)
                + g.depth,
        );
        per_gaussian[s.index] = GaussianGrad {
            color: g.color,
            mean: pose.rotation * d_pc,
            radius: g.r2d * focal / z,
            opacity: g.opacity,
        };
    }

    Ok(Gradients {
        loss,
        rendered,
        per_gaussian,
    })
}
