//! Image metrics, held-out evaluation and the collision-checking benchmark.

use std::time::Instant;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::local_planner::{
    check_all_pairs_parallel, check_all_pairs_serial, plan_to_goal, CollisionChecker, CollisionRule, PlannerConfig,
    RobotState,
};
use crate::sim::{sense, truncate_range, Scene, SensorModel};
use crate::splat::{render, ssim, Gaussian, GaussianMap, Pose};

/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Peak signal-to-noise ratio of two colour images in `[0, 1]`, MSE over all
/// channels, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &[[f64; 3]], b: &[[f64; 3]]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len().to_string(),
            actual: b.len().to_string(),
        });
    }
    let mut se = 0.0;
    for (x, y) in a.iter().zip(b) {
        for c in 0..3 {
            se += (x[c] - y[c]).powi(2);
        }
    }
    let mse = se / (3 * a.len()) as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// RMSE over pixels where both depths are valid.
pub fn depth_rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len().to_string(),
            actual: b.len().to_string(),
        });
    }
    let (mut se, mut n) = (0.0, 0usize);
    for (x, y) in a.iter().zip(b) {
        if *x > 0.0 && *y > 0.0 {
            se += (x - y).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::NoCommonValidPixels);
    }
    Ok((se / n as f64).sqrt())
}

/// Rejection-sample `n` collision-free camera poses inside the scene bounds
/// (ground-truth γ rule at robot height, uniform heading).
pub fn sample_test_poses(scene: &Scene, n: usize, seed: u64, cfg: &PlannerConfig) -> Result<Vec<RobotState>> {
    let rule = cfg.rule();
    let checker = CollisionChecker::new(&scene.gt_map, rule);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (scene.bounds_min, scene.bounds_max);
    let mut out = Vec::with_capacity(n);
    let max_attempts = 1000 * n.max(1);
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::InvalidConfig("could not find free test poses in the scene".into()));
        }
        let p = Vector2::new(rng.gen_range(lo.x..=hi.x), rng.gen_range(lo.y..=hi.y));
        let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        if checker.is_free(&Vector3::new(p.x, p.y, cfg.robot_height)) {
            out.push(RobotState::new(p.x, p.y, theta));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoseMetrics {
    pub pose_index: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub psnr_db: f64,
    pub ssim: f64,
    /// `None` when the map renders no valid depth where the ground truth has one.
    pub depth_rmse_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub per_pose: Vec<PoseMetrics>,
    pub psnr_db: f64,
    pub ssim: f64,
    /// Mean over poses where depth RMSE is defined; `None` if none is.
    pub depth_rmse_m: Option<f64>,
    pub pose_count: usize,
    pub gaussian_count: usize,
}

impl MetricsReport {
    pub fn per_pose_csv(&self) -> Result<String> {
        crate::csv_out::to_csv_string(&self.per_pose)
    }

    pub fn summary_csv(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Row {
            pose_count: usize,
            gaussian_count: usize,
            psnr_db: f64,
            ssim: f64,
            depth_rmse_m: Option<f64>,
        }
        crate::csv_out::to_csv_string(&[Row {
            pose_count: self.pose_count,
            gaussian_count: self.gaussian_count,
            psnr_db: self.psnr_db,
            ssim: self.ssim,
            depth_rmse_m: self.depth_rmse_m,
        }])
    }
}

/// Render `map` and the noise-free ground truth at each test pose and compare.
pub fn evaluate(map: &GaussianMap, scene: &Scene, poses: &[RobotState], model: &SensorModel, height: f64) -> Result<MetricsReport> {
    let clean = SensorModel {
        depth_noise_sigma: 0.0,
        ..*model
    };
    let per_pose: Vec<PoseMetrics> = poses
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let pose = Pose::from_planar(s.p.x, s.p.y, s.theta, height);
            let gt = sense(scene, &pose, &clean, &mut ChaCha8Rng::seed_from_u64(0));
            let mut est = render(map, &pose, &model.intr);
            est.mask_background();
            truncate_range(&mut est, model.max_range);
            let w = model.intr.width;
            let h = model.intr.height;
            Ok(PoseMetrics {
                pose_index: i,
                x: s.p.x,
                y: s.p.y,
                theta: s.theta,
                psnr_db: psnr(&est.color, &gt.color)?,
                ssim: ssim(&est.color, &gt.color, w, h)?,
                depth_rmse_m: match depth_rmse(&est.depth, &gt.depth) {
                    Ok(v) => Some(v),
                    Err(Error::NoCommonValidPixels) => None,
                    Err(e) => return Err(e),
                },
            })
        })
        .collect::<Result<_>>()?;
    let n = per_pose.len().max(1) as f64;
    let rmses: Vec<f64> = per_pose.iter().filter_map(|p| p.depth_rmse_m).collect();
    Ok(MetricsReport {
        psnr_db: per_pose.iter().map(|p| p.psnr_db).sum::<f64>() / n,
        ssim: per_pose.iter().map(|p| p.ssim).sum::<f64>() / n,
        depth_rmse_m: (!rmses.is_empty()).then(|| rmses.iter().sum::<f64>() / rmses.len() as f64),
        pose_count: per_pose.len(),
        gaussian_count: map.len(),
        per_pose,
    })
}

/// One row of the collision benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub gaussian_count: usize,
    pub points_checked: usize,
    pub serial_ms: f64,
    pub parallel_ms: f64,
    pub speedup: f64,
    pub serial_std_ms: f64,
    pub parallel_std_ms: f64,
    /// Mean time of a full horizon plan on an obstacle field of this size.
    pub plan_ms: f64,
    pub identical: bool,
}

/// A 20 m square populated with `count` Gaussians packed into box obstacles,
/// leaving open ground for the planner to route through.
pub fn obstacle_field(count: usize, seed: u64) -> GaussianMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boxes: Vec<(Vector2<f64>, f64)> = (0..25)
        .map(|_| {
            let c = Vector2::new(rng.gen_range(1.0..19.0), rng.gen_range(1.0..19.0));
            (c, rng.gen_range(0.3..0.8))
        })
        .filter(|(c, _)| (c - Vector2::new(10.0, 10.0)).norm() > 2.0)
        .collect();
    GaussianMap::from_gaussians((0..count).map(|i| {
        let (c, h) = boxes[i % boxes.len()];
        Gaussian::new(
            Vector3::new(c.x + rng.gen_range(-h..h), c.y + rng.gen_range(-h..h), rng.gen_range(0.1..1.5)),
            0.05,
            0.9,
            [0.5; 3],
        )
    }))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len().max(1) as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

/// Time the exhaustive point × Gaussian check serially and data-parallel, and
/// a full plan with the hashed checker, on an obstacle field of each size.
pub fn bench_planner(sizes: &[usize], points: usize, repeats: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be ≥ 1".into()));
    }
    let cfg = PlannerConfig::default();
    let rule = cfg.rule();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut rows = Vec::with_capacity(sizes.len());
    for (k, &n) in sizes.iter().enumerate() {
        // Box obstacles leave most of the square free, so most points scan the
        // whole map instead of stopping at the first hit.
        let map = obstacle_field(n, seed.wrapping_add(k as u64));
        let pts: Vec<Vector3<f64>> = (0..points)
            .map(|_| Vector3::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0), cfg.robot_height))
            .collect();
        let (mut ts, mut tp) = (Vec::new(), Vec::new());
        let mut identical = true;
        for _ in 0..repeats {
            let t0 = Instant::now();
            let s = check_all_pairs_serial(&pts, &map, &rule);
            ts.push(t0.elapsed().as_secs_f64() * 1e3);
            let t1 = Instant::now();
            let p = check_all_pairs_parallel(&pts, &map, &rule);
            tp.push(t1.elapsed().as_secs_f64() * 1e3);
            identical &= s == p;
        }
        let mut tplan = Vec::new();
        for _ in 0..repeats {
            tplan.push(time_plan(&map, &cfg)?);
        }
        let (sm, ss) = mean_std(&ts);
        let (pm, ps) = mean_std(&tp);
        rows.push(BenchRow {
            gaussian_count: n,
            points_checked: points,
            serial_ms: sm,
            parallel_ms: pm,
            speedup: sm / pm,
            serial_std_ms: ss,
            parallel_std_ms: ps,
            plan_ms: mean_std(&tplan).0,
            identical,
        });
    }
    Ok(rows)
}

/// Wall time of one plan with a horizon-length goal from the field centre,
/// including building the broadphase.
pub fn time_plan(field: &GaussianMap, cfg: &PlannerConfig) -> Result<f64> {
    let t0 = Instant::now();
    let checker = CollisionChecker::new(field, CollisionRule { ..cfg.rule() });
    let start = RobotState::new(10.0, 10.0, 0.0);
    let goal = Vector2::new(10.0 + cfg.horizon, 10.0);
    match plan_to_goal(&start, &goal, &checker, |_| 0.0, cfg) {
        Ok(_) | Err(Error::Trapped) | Err(Error::Unreachable) => {}
        Err(e) => return Err(e),
    }
    Ok(t0.elapsed().as_secs_f64() * 1e3)
}

pub fn bench_csv(rows: &[BenchRow]) -> Result<String> {
    crate::csv_out::to_csv_string(rows)
}
