//! Independent oracles shared by the integration and acceptance suites.
//!
//! Nothing here calls into the code paths it is used to check: the
//! compositor has no tiling and no support cutoff, the SSIM is a direct
//! per-pixel window sum, and the collision check is an all-pairs loop.
#![allow(dead_code)]

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtg_core::splat::{CameraIntrinsics, Gaussian, GaussianMap, Pose};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct BruteFrame {
    pub color: Vec<[f64; 3]>,
    pub depth: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Per-pixel compositing over every Gaussian, sorted by (depth, id), with
/// the full kernel and no tiling.
pub fn brute_force_render(map: &GaussianMap, pose: &Pose, intr: &CameraIntrinsics) -> BruteFrame {
    let mut items: Vec<(f64, u64, [f64; 2], f64, f64, [f64; 3])> = Vec::new();
    for (id, g) in map.iter() {
        let rel = g.mean - pose.translation;
        let cam = pose.rotation.transpose() * rel;
        let d = cam.z;
        if d <= 0.01 {
            continue;
        }
        let u = intr.fx * cam.x / d + intr.cx;
        let v = intr.fy * cam.y / d + intr.cy;
        let r = 0.5 * (intr.fx + intr.fy) * g.radius / d;
        items.push((d, id, [u, v], r, g.opacity, g.color));
    }
    items.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let n = intr.width * intr.height;
    let mut out = BruteFrame {
        color: vec![[0.0; 3]; n],
        depth: vec![0.0; n],
        alpha: vec![0.0; n],
    };
    for row in 0..intr.height {
        for col in 0..intr.width {
            let p = [col as f64 + 0.5, row as f64 + 0.5];
            let mut t = 1.0;
            let i = row * intr.width + col;
            for (d, _, mu, r, a, c) in &items {
                let dist2 = (p[0] - mu[0]).powi(2) + (p[1] - mu[1]).powi(2);
                let f = a * (-dist2 / (2.0 * r * r)).exp();
                for k in 0..3 {
                    out.color[i][k] += c[k] * f * t;
                }
                out.depth[i] += d * f * t;
                out.alpha[i] += f * t;
                t *= 1.0 - f;
            }
        }
    }
    out
}

/// Direct SSIM: for every pixel, sum the Gaussian window over the in-image
/// neighbourhood and normalise by the in-image weight.
pub fn reference_ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize) -> f64 {
    let sigma: f64 = 1.5;
    let c1 = 0.0001;
    let c2 = 0.0009;
    let mut total = 0.0;
    for r in 0..h as isize {
        for c in 0..w as isize {
            let (mut sw, mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            for dr in -5isize..=5 {
                for dc in -5isize..=5 {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                        continue;
                    }
                    let wt = (-((dr * dr + dc * dc) as f64) / (2.0 * sigma * sigma)).exp();
                    let i = rr as usize * w + cc as usize;
                    sw += wt;
                    ma += wt * a[i];
                    mb += wt * b[i];
                    saa += wt * a[i] * a[i];
                    sbb += wt * b[i] * b[i];
                    sab += wt * a[i] * b[i];
                }
            }
            let (ma, mb) = (ma / sw, mb / sw);
            let va = saa / sw - ma * ma;
            let vb = sbb / sw - mb * mb;
            let cov = sab / sw - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    total / (w * h) as f64
}

pub fn reference_ssim_rgb(a: &[[f64; 3]], b: &[[f64; 3]], w: usize, h: usize) -> f64 {
    (0..3)
        .map(|c| {
            let pa: Vec<f64> = a.iter().map(|p| p[c]).collect();
            let pb: Vec<f64> = b.iter().map(|p| p[c]).collect();
            reference_ssim_plane(&pa, &pb, w, h)
        })
        .sum::<f64>()
        / 3.0
}

/// All-pairs collision rule: free iff every Gaussian above `ground_z` is at
/// least `r_robot + lambda_g * r` away.
pub fn all_pairs_free(point: &Vector3<f64>, map: &GaussianMap, r_robot: f64, lambda_g: f64, ground_z: f64) -> bool {
    map.gaussians()
        .iter()
        .filter(|g| g.mean.z > ground_z)
        .all(|g| (point - g.mean).norm() >= r_robot + lambda_g * g.radius)
}

/// Gaussians scattered in front of an identity camera so most of them land in view.
pub fn random_scene(rng: &mut ChaCha8Rng, count: usize, intr: &CameraIntrinsics) -> GaussianMap {
    GaussianMap::from_gaussians((0..count).map(|_| {
        let depth = rng.gen_range(1.5..4.0);
        let u = rng.gen_range(-0.2..intr.width as f64 + 0.2);
        let v = rng.gen_range(-0.2..intr.height as f64 + 0.2);
        let mean = Vector3::new((u - intr.cx) * depth / intr.fx, (v - intr.cy) * depth / intr.fy, depth);
        let r2d = rng.gen_range(1.0..4.0);
        Gaussian::new(
            mean,
            r2d * depth / intr.focal(),
            rng.gen_range(0.2..0.95),
            [rng.gen(), rng.gen(), rng.gen()],
        )
    }))
}

/// Parameter `k` of a Gaussian: 0..3 colour, 3..6 mean, 6 radius, 7 opacity.
pub fn param_mut(g: &mut Gaussian, k: usize) -> &mut f64 {
    match k {
        0..=2 => &mut g.color[k],
        3..=5 => &mut g.mean[k - 3],
        6 => &mut g.radius,
        7 => &mut g.opacity,
        _ => unreachable!(),
    }
}

pub fn analytic_param(g: &rtg_core::splat::GaussianGrad, k: usize) -> f64 {
    match k {
        0..=2 => g.color[k],
        3..=5 => g.mean[k - 3],
        6 => g.radius,
        7 => g.opacity,
        _ => unreachable!(),
    }
}

/// Central finite difference of the rendering loss for one parameter.
pub fn fd_param(
    map: &GaussianMap,
    index: usize,
    k: usize,
    h: f64,
    pose: &Pose,
    intr: &CameraIntrinsics,
    observed: &rtg_core::splat::Frame,
) -> f64 {
    use rtg_core::splat::{loss, render, LossWeights};
    let eval = |delta: f64| {
        let mut m = map.clone();
        *param_mut(&mut m.gaussians_mut()[index], k) += delta;
        loss(&render(&m, pose, intr), observed, LossWeights::default()).unwrap()
    };
    (eval(h) - eval(-h)) / (2.0 * h)
}

/// Worst mismatch between analytic and finite-difference gradients over all
/// parameters of all Gaussians, measured as `|a - n| / max(|a|, |n|)` unless
/// both are below `abs_floor`.
pub fn gradient_check(
    map: &GaussianMap,
    pose: &Pose,
    intr: &CameraIntrinsics,
    observed: &rtg_core::splat::Frame,
    h: f64,
    abs_floor: f64,
) -> (f64, usize) {
    use rtg_core::splat::{backward, LossWeights};
    let grads = backward(map, pose, intr, observed, LossWeights::default()).unwrap();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for i in 0..map.len() {
        for k in 0..8 {
            let a = analytic_param(&grads.per_gaussian[i], k);
            let n = fd_param(map, i, k, h, pose, intr, observed);
            let diff = (a - n).abs();
            let rel = if diff <= abs_floor { 0.0 } else { diff / a.abs().max(n.abs()) };
            if rel >= 1e-3 {
                failures += 1;
                eprintln!("gaussian {i} param {k}: analytic {a:e} fd {n:e} rel {rel:e}");
            }
            worst = worst.max(rel);
        }
    }
    (worst, failures)
}

/// Unicycle closed form, written out independently of the planner.
pub fn unicycle(x: f64, y: f64, th: f64, v: f64, w: f64, t: f64) -> (f64, f64, f64) {
    if w == 0.0 {
        (x + v * t * th.cos(), y + v * t * th.sin(), th)
    } else {
        let th1 = th + w * t;
        (x + v / w * (th1.sin() - th.sin()), y - v / w * (th1.cos() - th.cos()), th1)
    }
}

/// Exhaustive depth-bounded enumeration of the primitive tree. Returns the
/// cheapest cost of any collision-free node (root included) inside the goal
/// disc, or `None` when no such node exists within `depth`.
pub fn astar_cost_oracle(
    start: (f64, f64, f64),
    goal: (f64, f64),
    cfg: &rtg_core::local_planner::PlannerConfig,
    map: &GaussianMap,
    depth: usize,
) -> Option<f64> {
    let vs: Vec<f64> = (0..cfg.n_v).map(|i| cfg.v_max * i as f64 / (cfg.n_v - 1) as f64).collect();
    let ws: Vec<f64> = (0..cfg.n_omega)
        .map(|j| cfg.omega_max * (2.0 * j as f64 - (cfg.n_omega - 1) as f64) / (cfg.n_omega - 1) as f64)
        .collect();
    let in_goal = |x: f64, y: f64| ((x - goal.0).powi(2) + (y - goal.1).powi(2)).sqrt() <= cfg.goal_radius;
    fn rec(
        s: (f64, f64, f64),
        g: f64,
        left: usize,
        ctx: &(
            &[f64],
            &[f64],
            &rtg_core::local_planner::PlannerConfig,
            &GaussianMap,
            &dyn Fn(f64, f64) -> bool,
        ),
        best: &mut Option<f64>,
    ) {
        let (vs, ws, cfg, map, in_goal) = ctx;
        if in_goal(s.0, s.1) {
            *best = Some(best.map_or(g, |b: f64| b.min(g)));
            return;
        }
        if left == 0 {
            return;
        }
        for &v in vs.iter() {
            for &w in ws.iter() {
                let n = cfg.samples_per_primitive;
                let free = (1..n).all(|k| {
                    let (x, y, _) = unicycle(s.0, s.1, s.2, v, w, cfg.dt * k as f64 / (n - 1) as f64);
                    all_pairs_free(&Vector3::new(x, y, cfg.robot_height), map, cfg.r_robot, cfg.lambda_g, cfg.ground_z)
                });
                if !free {
                    continue;
                }
                let e = unicycle(s.0, s.1, s.2, v, w, cfg.dt);
                rec(e, g + (cfg.lambda_t + v * v + w * w) * cfg.dt, left - 1, ctx, best);
            }
        }
    }
    let mut best = None;
    rec(start, 0.0, depth, &(&vs, &ws, cfg, map, &in_goal), &mut best);
    best
}
