use std::collections::HashMap;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::splat::GaussianMap;

/// The γ rule: a point is free of Gaussian `g` iff its distance to the mean is
/// at least `r_robot + lambda_g · r_g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionRule {
    pub r_robot: f64,
    pub lambda_g: f64,
    /// Gaussians with mean z at or below this height are ignored.
    pub ground_z: f64,
}

impl CollisionRule {
    #[inline]
    pub fn gamma(&self, radius: f64) -> f64 {
        self.r_robot + self.lambda_g * radius
    }
}

/// Broadphase-accelerated checker over an immutable map snapshot.
///
/// Gaussian means are bucketed in a uniform hash grid whose cell edge equals
/// the largest γ in the map, so every Gaussian that can reach a query point
/// lives in the 27 cells around it.
#[derive(Debug, Clone)]
pub struct CollisionChecker {
    rule: CollisionRule,
    cell: f64,
    means: Vec<Vector3<f64>>,
    gammas: Vec<f64>,
    buckets: HashMap<[i64; 3], Vec<u32>>,
}

impl CollisionChecker {
    pub fn new(map: &GaussianMap, rule: CollisionRule) -> Self {
        let mut means = Vec::new();
        let mut gammas = Vec::new();
        let mut r_max: f64 = 0.0;
        for g in map.gaussians() {
            if g.mean.z > rule.ground_z {
                means.push(g.mean);
                gammas.push(rule.gamma(g.radius));
                r_max = r_max.max(g.radius);
            }
        }
        let cell = rule.gamma(r_max).max(0.05);
        let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (i, m) in means.iter().enumerate() {
            buckets.entry(key(m, cell)).or_default().push(i as u32);
        }
        Self {
            rule,
            cell,
            means,
            gammas,
            buckets,
        }
    }

    pub fn rule(&self) -> CollisionRule {
        self.rule
    }

    /// Number of Gaussians that take part in checks (above the ground filter).
    pub fn obstacle_count(&self) -> usize {
        self.means.len()
    }

    pub fn is_free(&self, p: &Vector3<f64>) -> bool {
        let k = key(p, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = self.buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &i in bucket {
                            let i = i as usize;
                            if (p - self.means[i]).norm() < self.gammas[i] {
                                return false;
                            }
                        }
                    }
                }
            }
        }
        true
    }

    /// Data-parallel batch check; `true` means free.
    pub fn check(&self, points: &[Vector3<f64>]) -> Vec<bool> {
        points.par_iter().map(|p| self.is_free(p)).collect()
    }
}

fn key(p: &Vector3<f64>, cell: f64) -> [i64; 3] {
    [
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    ]
}

fn point_free(p: &Vector3<f64>, map: &GaussianMap, rule: &CollisionRule) -> bool {
    map.gaussians()
        .iter()
        .filter(|g| g.mean.z > rule.ground_z)
        .all(|g| (p - g.mean).norm() >= rule.gamma(g.radius))
}

/// Exhaustive point × Gaussian test on one thread. No broadphase.
pub fn check_all_pairs_serial(points: &[Vector3<f64>], map: &GaussianMap, rule: &CollisionRule) -> Vec<bool> {
    points.iter().map(|p| point_free(p, map, rule)).collect()
}

/// Exhaustive point × Gaussian test, data-parallel over the full grid: each
/// point's Gaussians are split into chunks that are checked concurrently.
pub fn check_all_pairs_parallel(points: &[Vector3<f64>], map: &GaussianMap, rule: &CollisionRule) -> Vec<bool> {
    const CHUNK: usize = 8192;
    points
        .par_iter()
        .map(|p| {
            map.gaussians().par_chunks(CHUNK).all(|chunk| {
                chunk
                    .iter()
                    .filter(|g| g.mean.z > rule.ground_z)
                    .all(|g| (p - g.mean).norm() >= rule.gamma(g.radius))
            })
        })
        .collect()
}
