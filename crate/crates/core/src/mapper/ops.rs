use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::ledger::UncertaintyLedger;
use crate::error::{Error, Result};
use crate::splat::{backward, loss, GaussianGrad, render, CameraIntrinsics, Frame, Gaussian, GaussianMap, LossWeights, Pose};

/// Step sizes per parameter group. Steps are taken along the gradient of the
/// pixel-summed loss (the mean loss times the pixel count), which keeps the
/// rates independent of image resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningRates {
    pub mean: f64,
    pub color: f64,
    pub opacity: f64,
    pub radius: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            mean: 1e-4,
            color: 2.5e-3,
            opacity: 5e-3,
            radius: 1e-4,
        }
    }
}

impl LearningRates {
    fn scaled(self, k: f64) -> Self {
        Self {
            mean: self.mean * k,
            color: self.color * k,
            opacity: self.opacity * k,
            radius: self.radius * k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapperConfig {
    pub iterations_per_frame: usize,
    pub rates: LearningRates,
    pub loss: LossWeights,
    pub prune_opacity_min: f64,
    pub prune_radius_max: f64,
    pub densify_stride: usize,
    pub densify_alpha_max: f64,
    pub densify_depth_err: f64,
    pub new_opacity: f64,
    pub min_radius: f64,
}

impl Default for MapperConfig {
    fn default() -> Self {
        Self {
            iterations_per_frame: 10,
            rates: LearningRates::default(),
            loss: LossWeights::default(),
            prune_opacity_min: 0.005,
            prune_radius_max: 1.0,
            densify_stride: 4,
            densify_alpha_max: 0.5,
            densify_depth_err: 0.1,
            new_opacity: 0.5,
            min_radius: 1e-4,
        }
    }
}

impl MapperConfig {
    pub fn validate(&self) -> Result<()> {
        let r = &self.rates;
        if self.iterations_per_frame == 0 {
            return Err(Error::InvalidConfig("iterations_per_frame must be >= 1".into()));
        }
        if !(r.mean > 0.0 && r.color > 0.0 && r.opacity > 0.0 && r.radius > 0.0) {
            return Err(Error::InvalidConfig("learning rates must be positive".into()));
        }
        if self.densify_stride == 0 {
            return Err(Error::InvalidConfig("densify_stride must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    /// Loss of the map after the last step.
    pub loss: f64,
    /// Loss at every accepted iterate, followed by the final loss. Overshooting
    /// steps are undone and do not appear.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpdateStats {
    pub added: usize,
    pub pruned: usize,
    pub loss: f64,
}

/// Back-project every `densify_stride`-th valid pixel that the current map
/// leaves transparent or places at the wrong depth.
pub fn densify(
    map: &mut GaussianMap,
    ledger: &mut UncertaintyLedger,
    frame: &Frame,
    pose: &Pose,
    intr: &CameraIntrinsics,
    cfg: &MapperConfig,
    frame_index: u64,
) -> usize {
    let stride = cfg.densify_stride.max(1);
    let offset = stride / 2;
    let rendered = render(map, pose, intr);
    let focal = intr.focal();
    let mut added = 0;
    for row in (offset..frame.height).step_by(stride) {
        for col in (offset..frame.width).step_by(stride) {
            let i = frame.index(col, row);
            if !frame.depth_valid(i) {
                continue;
            }
            // Depths are alpha-weighted sums, which shrink towards the camera at
            // partially covered pixels; compare and place on surface depths.
            let observed_alpha = if frame.alpha[i] > 0.0 { frame.alpha[i].min(1.0) } else { 1.0 };
            let surface = frame.depth[i] / observed_alpha;
            // Coverage is judged against what the frame itself shows, so
            // translucent surfaces are not re-densified on every frame.
            let thin = rendered.alpha[i] < cfg.densify_alpha_max * observed_alpha;
            let wrong_depth = rendered.alpha[i] <= 0.0
                || (rendered.depth[i] / rendered.alpha[i].min(1.0) - surface).abs() > cfg.densify_depth_err;
            if !(thin || wrong_depth) {
                continue;
            }
            let cam = Vector3::new(
                (col as f64 + 0.5 - intr.cx) * surface / intr.fx,
                (row as f64 + 0.5 - intr.cy) * surface / intr.fy,
                surface,
            );
            let g = Gaussian::new(
                pose.to_world(&cam),
                surface / focal * stride as f64 / 2.0,
                cfg.new_opacity,
                frame.color[i].map(|c| c.clamp(0.0, 1.0)),
            );
            let id = map.insert(g);
            ledger.insert_newborn(id, frame_index);
            added += 1;
        }
    }
    added
}

fn step(map: &mut GaussianMap, grads: &[crate::splat::GaussianGrad], rates: LearningRates, scale: f64, min_radius: f64) {
    for (g, d) in map.gaussians_mut().iter_mut().zip(grads) {
        for c in 0..3 {
            g.color[c] -= rates.color * scale * d.color[c];
        }
        g.mean -= d.mean * (rates.mean * scale);
        g.radius -= rates.radius * scale * d.radius;
        g.opacity -= rates.opacity * scale * d.opacity;
        g.clamp_params(min_radius);
    }
}

/// Gradient descent on the rendering loss against one frame, followed by the
/// displacement bookkeeping. Gaussians whose mean did not move keep their
/// previous ledger value.
pub fn optimize(
    map: &mut GaussianMap,
    frame: &Frame,
    pose: &Pose,
    intr: &CameraIntrinsics,
    cfg: &MapperConfig,
    ledger: &mut UncertaintyLedger,
    frame_index: u64,
) -> Result<OptimizeReport> {
    let scale = (frame.width * frame.height) as f64;
    let before: Vec<Vector3<f64>> = map.gaussians().iter().map(|g| g.mean).collect();
    let mut rates = cfg.rates;
    let mut retried = false;
    let mut history = Vec::with_capacity(cfg.iterations_per_frame + 1);
    // Last accepted iterate: map, its gradients and its loss.
    let mut accepted: Option<(GaussianMap, Vec<GaussianGrad>, f64)> = None;
    let mut it = 0;
    while it < cfg.iterations_per_frame {
        let grads = backward(map, pose, intr, frame, cfg.loss)?;
        let finite = grads.loss.is_finite() && grads.per_gaussian.iter().all(|g| g.is_finite());
        if !finite {
            match (retried, accepted.as_ref()) {
                (false, Some((prev, _, _))) => {
                    log::warn!("non-finite loss at iteration {it}; halving learning rates");
                    *map = prev.clone();
                    rates = rates.scaled(0.5);
                    retried = true;
                    history.pop();
                    it -= 1;
                    accepted = None;
                    continue;
                }
                _ => return Err(Error::NonFiniteLoss),
            }
        }
        let per_gaussian = match accepted.as_ref() {
            // The last step overshot: go back and take a shorter one.
            Some((prev, prev_grads, prev_loss)) if grads.loss > *prev_loss => {
                *map = prev.clone();
                rates = rates.scaled(0.5);
                prev_grads.clone()
            }
            _ => {
                history.push(grads.loss);
                accepted = Some((map.clone(), grads.per_gaussian.clone(), grads.loss));
                grads.per_gaussian
            }
        };
        step(map, &per_gaussian, rates, scale, cfg.min_radius);
        it += 1;
    }
    let mut final_loss = loss(&render(map, pose, intr), frame, cfg.loss)?;
    if !final_loss.is_finite() && accepted.is_none() {
        return Err(Error::NonFiniteLoss);
    }
    if let Some((prev, _, prev_loss)) = accepted {
        if !(final_loss <= prev_loss) {
            *map = prev;
            final_loss = prev_loss;
        }
    }
    history.push(final_loss);

    for ((id, g), b) in map.iter().zip(&before) {
        if g.mean != *b {
            ledger.record(id, (g.mean - b).norm(), frame_index);
        }
    }
    Ok(OptimizeReport {
        loss: final_loss,
        history,
    })
}

/// Remove near-transparent or oversized Gaussians and retire their ledger entries.
pub fn prune(map: &mut GaussianMap, cfg: &MapperConfig, ledger: &mut UncertaintyLedger) -> usize {
    let removed = map.remove_where(|g| g.opacity < cfg.prune_opacity_min || g.radius > cfg.prune_radius_max);
    for id in &removed {
        ledger.retire(*id);
    }
    removed.len()
}

/// One mapping cycle: densify, optimise against the frame, prune.
pub fn map_update(
    map: &mut GaussianMap,
    ledger: &mut UncertaintyLedger,
    frame: &Frame,
    pose: &Pose,
    intr: &CameraIntrinsics,
    cfg: &MapperConfig,
    frame_index: u64,
) -> Result<UpdateStats> {
    let added = densify(map, ledger, frame, pose, intr, cfg, frame_index);
    let loss = if map.is_empty() {
        loss(&render(map, pose, intr), frame, cfg.loss)?
    } else {
        optimize(map, frame, pose, intr, cfg, ledger, frame_index)?.loss
    };
    let pruned = prune(map, cfg, ledger);
    Ok(UpdateStats { added, pruned, loss })
}
