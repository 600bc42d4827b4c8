use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scene::Scene;
use crate::error::{Error, Result};
use crate::splat::{render, CameraIntrinsics, Frame, Pose, INVALID_DEPTH};

/// RGB-D camera model. Depths beyond `max_range` are dropped; optional
/// additive Gaussian depth noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub intr: CameraIntrinsics,
    pub max_range: f64,
    /// Standard deviation of the depth noise, metres.
    pub depth_noise_sigma: f64,
}

impl SensorModel {
    pub fn new(intr: CameraIntrinsics, max_range: f64, depth_noise_sigma: f64) -> Result<Self> {
        if !(max_range > 0.0) || !(depth_noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig("sensor range must be > 0 and noise ≥ 0".into()));
        }
        Ok(Self {
            intr,
            max_range,
            depth_noise_sigma,
        })
    }
}

/// Invalidate pixels whose surface range (depth over alpha) exceeds
/// `max_range`. Testing the alpha-weighted depth itself would keep faint
/// edges of distant objects.
pub fn truncate_range(frame: &mut Frame, max_range: f64) {
    for (d, &a) in frame.depth.iter_mut().zip(&frame.alpha) {
        if *d > 0.0 && *d > max_range * a.min(1.0) {
            *d = INVALID_DEPTH;
        }
    }
}

/// Smallest depth a noisy reading is clamped to.
const MIN_NOISY_DEPTH: f64 = 1e-3;

/// Render the ground truth at `pose`, truncate at the sensor range and add
/// depth noise drawn from `rng`.
pub fn sense<R: Rng>(scene: &Scene, pose: &Pose, model: &SensorModel, rng: &mut R) -> Frame {
    let mut frame = render(&scene.gt_map, pose, &model.intr);
    frame.mask_background();
    truncate_range(&mut frame, model.max_range);
    if model.depth_noise_sigma > 0.0 {
        let noise = Normal::new(0.0, model.depth_noise_sigma).expect("validated sigma");
        // Noise perturbs the range of the surface hit; the stored depth stays
        // alpha-weighted so partially covered pixels keep their small weight.
        for (d, &a) in frame.depth.iter_mut().zip(&frame.alpha) {
            if *d > 0.0 {
                let a = a.clamp(f64::EPSILON, 1.0);
                let surface = (*d / a + noise.sample(rng)).clamp(MIN_NOISY_DEPTH, model.max_range);
                *d = a * surface;
            }
        }
    }
    frame
}
