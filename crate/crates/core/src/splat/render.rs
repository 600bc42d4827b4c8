use nalgebra::Vector3;
use rayon::prelude::*;

use super::camera::{CameraIntrinsics, Pose, NEAR_PLANE};
use super::frame::{Frame, INVALID_DEPTH};
use super::gaussian::{GaussianId, GaussianMap};

/// Pixel support of a splat, in units of its projected radius. At this
/// distance the kernel weight is `exp(-18) ~ 1.5e-8`, so the truncation is
/// far below the compositing tolerance and the loss stays smooth to within
/// finite-difference resolution.
pub const SUPPORT_SIGMAS: f64 = 6.0;

/// Compositing stops once transmittance falls below this; everything further
/// back could change a pixel by at most this much.
pub const MIN_TRANSMITTANCE: f64 = 1e-8;

pub(crate) const TILE: usize = 8;
const SUPPORT_Q: f64 = SUPPORT_SIGMAS * SUPPORT_SIGMAS;

#[derive(Debug, Clone)]
pub(crate) struct Splat {
    pub index: usize,
    pub id: GaussianId,
    pub mu: [f64; 2],
    pub r2d: f64,
    pub inv_r2: f64,
    pub depth: f64,
    pub opacity: f64,
    pub color: [f64; 3],
    /// Mean in camera coordinates.
    pub pc: Vector3<f64>,
}

/// Per-pixel kernel evaluation kept for the backward pass.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Contribution {
    /// Index into `Rasterizer::splats`.
    pub splat: u32,
    /// `exp(-q/2)`, the unscaled kernel value.
    pub kernel: f64,
    /// `opacity * kernel`.
    pub f: f64,
    /// Transmittance before this splat.
    pub transmittance: f64,
    pub dx: f64,
    pub dy: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PixelValue {
    pub color: [f64; 3],
    pub depth: f64,
    pub alpha: f64,
}

/// Depth-sorted splats binned into square pixel tiles.
pub(crate) struct Rasterizer {
    pub splats: Vec<Splat>,
    pub width: usize,
    pub height: usize,
    pub tiles_x: usize,
    pub bins: Vec<Vec<u32>>,
}

impl Rasterizer {
    pub fn new(map: &GaussianMap, pose: &Pose, intr: &CameraIntrinsics) -> Self {
        let (w, h) = (intr.width, intr.height);
        let focal = intr.focal();
        let mut splats: Vec<Splat> = map
            .iter()
            .enumerate()
            .filter_map(|(index, (id, g))| {
                let pc = pose.to_camera(&g.mean);
                if !(pc.z > NEAR_PLANE) {
                    return None;
                }
                let r2d = focal * g.radius / pc.z;
                if !(r2d > 0.0) || !r2d.is_finite() {
                    return None;
                }
                Some(Splat {
                    index,
                    id,
                    mu: [intr.fx * pc.x / pc.z + intr.cx, intr.fy * pc.y / pc.z + intr.cy],
                    r2d,
                    inv_r2: 1.0 / (r2d * r2d),
                    depth: pc.z,
                    opacity: g.opacity,
                    color: g.color,
                    pc,
                })
            })
            .collect();
        splats.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.id.cmp(&b.id)));

        let tiles_x = w.div_ceil(TILE);
        let tiles_y = h.div_ceil(TILE);
        let mut bins = vec![Vec::new(); tiles_x * tiles_y];
        for (si, s) in splats.iter().enumerate() {
            let Some((c0, c1, r0, r1)) = pixel_bounds(s, w, h) else {
                continue;
            };
            for ty in r0 / TILE..=r1 / TILE {
                for tx in c0 / TILE..=c1 / TILE {
                    bins[ty * tiles_x + tx].push(si as u32);
                }
            }
        }
        Self {
            splats,
            width: w,
            height: h,
            tiles_x,
            bins,
        }
    }

    pub fn bin(&self, col: usize, row: usize) -> &[u32] {
        &self.bins[(row / TILE) * self.tiles_x + col / TILE]
    }

    /// Front-to-back compositing of one pixel. `visit` sees every splat that
    /// contributes, in order.
    #[inline]
    pub fn composite(
        &self,
        col: usize,
        row: usize,
        mut visit: impl FnMut(Contribution),
    ) -> PixelValue {
        let px = col as f64 + 0.5;
        let py = row as f64 + 0.5;
        let mut out = PixelValue::default();
        let mut t = 1.0;
        for &si in self.bin(col, row) {
            let s = &self.splats[si as usize];
            let dx = px - s.mu[0];
            let dy = py - s.mu[1];
            let q = (dx * dx + dy * dy) * s.inv_r2;
            if q > SUPPORT_Q {
                continue;
            }
            let kernel = (-0.5 * q).exp();
            let f = s.opacity * kernel;
            let w = f * t;
            out.color[0] += s.color[0] * w;
            out.color[1] += s.color[1] * w;
            out.color[2] += s.color[2] * w;
            out.depth += s.depth * w;
            out.alpha += w;
            visit(Contribution {
                splat: si,
                kernel,
                f,
                transmittance: t,
                dx,
                dy,
            });
            t *= 1.0 - f;
            if t < MIN_TRANSMITTANCE {
                break;
            }
        }
        out
    }

    pub fn render(&self) -> Frame {
        let mut frame = Frame::background(self.width, self.height);
        let w = self.width;
        frame
            .color
            .par_chunks_mut(w)
            .zip(frame.depth.par_chunks_mut(w))
            .zip(frame.alpha.par_chunks_mut(w))
            .enumerate()
            .for_each(|(row, ((color, depth), alpha))| {
                for col in 0..w {
                    let v = self.composite(col, row, |_| {});
                    color[col] = v.color;
                    alpha[col] = v.alpha;
                    depth[col] = if v.alpha > 0.0 {
                        v.depth
                    } else {
                        INVALID_DEPTH
                    };
                }
            });
        frame
    }
}

/// Inclusive pixel rectangle covered by a splat's support, clipped to the image.
fn pixel_bounds(s: &Splat, w: usize, h: usize) -> Option<(usize, usize, usize, usize)> {
    let rs = SUPPORT_SIGMAS * s.r2d;
    let c0 = (s.mu[0] - rs - 0.5).ceil().max(0.0);
    let c1 = (s.mu[0] + rs - 0.5).floor().min(w as f64 - 1.0);
    let r0 = (s.mu[1] - rs - 0.5).ceil().max(0.0);
    let r1 = (s.mu[1] + rs - 0.5).floor().min(h as f64 - 1.0);
    if !(c0 <= c1 && r0 <= r1) {
        return None;
    }
    Some((c0 as usize, c1 as usize, r0 as usize, r1 as usize))
}

/// Alpha-composited colour, depth and opacity of `map` seen from `pose`.
///
/// Splats are sorted globally by camera depth (ties by id) and composited
/// front to back; depth is the opacity-weighted sum of splat depths, not
/// normalised by the accumulated opacity. Depth is reported for every pixel
/// something touched, however faintly, so it stays continuous in the map
/// parameters; [`Frame::mask_background`] turns faint pixels into invalid
/// measurements.
pub fn render(map: &GaussianMap, pose: &Pose, intr: &CameraIntrinsics) -> Frame {
    Rasterizer::new(map, pose, intr).render()
}
