use serde::{Deserialize, Serialize};

use super::dynamics::{propagate, ControlInput, RobotState};
use crate::error::{Error, Result};

/// Trajectory search and collision parameters. Defaults follow the real-time
/// configuration used on the robot: 3 × 5 controls held for one second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub n_v: usize,
    pub n_omega: usize,
    pub v_max: f64,
    pub omega_max: f64,
    /// Primitive duration, seconds.
    pub dt: f64,
    /// Weight of elapsed time against control effort.
    pub lambda_t: f64,
    /// Goal is the furthest guidance point within this distance.
    pub horizon: f64,
    /// Number of candidate trajectories kept for information scoring.
    pub n_traj: usize,
    /// Segments per candidate scored for information; `None` uses one per primitive.
    pub info_segments: Option<usize>,
    pub r_robot: f64,
    pub lambda_g: f64,
    pub samples_per_primitive: usize,
    pub max_depth: usize,
    pub goal_radius: f64,
    /// Height of the collision spheres and of the camera, metres.
    pub robot_height: f64,
    /// Gaussians at or below this height are ignored for collisions.
    pub ground_z: f64,
    /// Merge states that fall into the same (xy, heading) lattice cell.
    pub dedup: bool,
    pub lattice_xy: f64,
    pub lattice_heading_deg: f64,
    pub max_expansions: usize,
    /// Without goal-reaching candidates, return the leaves closest to the goal
    /// instead of failing.
    pub frontier_fallback: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            n_v: 3,
            n_omega: 5,
            v_max: 0.6,
            omega_max: 0.9,
            dt: 1.0,
            lambda_t: 1.0,
            horizon: 5.0,
            n_traj: 10,
            info_segments: None,
            r_robot: 0.3,
            lambda_g: 3.0,
            samples_per_primitive: 5,
            max_depth: 8,
            goal_radius: 0.5,
            robot_height: 0.3,
            ground_z: 0.05,
            dedup: true,
            lattice_xy: 0.1,
            lattice_heading_deg: 10.0,
            max_expansions: 4000,
            frontier_fallback: true,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.v_max,
            self.omega_max,
            self.dt,
            self.lambda_t,
            self.horizon,
            self.r_robot,
            self.lambda_g,
            self.goal_radius,
            self.lattice_xy,
            self.lattice_heading_deg,
        ];
        if positive.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::InvalidConfig("planner scalars must be positive".into()));
        }
        if self.n_v == 0 || self.n_omega == 0 || self.n_v * self.n_omega < 2 {
            return Err(Error::InvalidConfig("need n_v·n_omega ≥ 2 controls".into()));
        }
        if self.n_traj == 0 || self.max_depth == 0 || self.samples_per_primitive < 2 {
            return Err(Error::InvalidConfig(
                "n_traj, max_depth ≥ 1 and samples_per_primitive ≥ 2 required".into(),
            ));
        }
        if self.info_segments == Some(0) {
            return Err(Error::InvalidConfig("info_segments must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn rule(&self) -> super::CollisionRule {
        super::CollisionRule {
            r_robot: self.r_robot,
            lambda_g: self.lambda_g,
            ground_z: self.ground_z,
        }
    }

    /// Uniform grid over `[0, v_max]`, endpoints included.
    pub fn v_grid(&self) -> Vec<f64> {
        grid(self.n_v, |i, n| self.v_max * i as f64 / n as f64, self.v_max)
    }

    /// Uniform grid over `[−ω_max, ω_max]`, endpoints included.
    pub fn omega_grid(&self) -> Vec<f64> {
        grid(
            self.n_omega,
            |i, n| self.omega_max * (2.0 * i as f64 - n as f64) / n as f64,
            0.0,
        )
    }

    /// Cost of holding `u` for one primitive.
    pub fn primitive_cost(&self, u: &ControlInput) -> f64 {
        (self.lambda_t + u.v * u.v + u.omega * u.omega) * self.dt
    }
}

fn grid(n: usize, at: impl Fn(usize, usize) -> f64, single: f64) -> Vec<f64> {
    if n == 1 {
        return vec![single];
    }
    (0..n).map(|i| at(i, n - 1)).collect()
}

/// A constant-control segment with its sampled states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotionPrimitive {
    pub u: ControlInput,
    pub duration: f64,
    pub start: RobotState,
    pub end: RobotState,
    /// Evenly spaced in time; first is `start`, last is `end`.
    pub samples: Vec<RobotState>,
    pub cost: f64,
}

impl MotionPrimitive {
    pub fn new(start: RobotState, u: ControlInput, cfg: &PlannerConfig) -> Self {
        let n = cfg.samples_per_primitive.max(2);
        let mut samples: Vec<RobotState> = (0..n)
            .map(|k| {
                if k == 0 {
                    start
                } else {
                    propagate(&start, &u, cfg.dt * k as f64 / (n - 1) as f64)
                }
            })
            .collect();
        let end = propagate(&start, &u, cfg.dt);
        *samples.last_mut().unwrap() = end;
        Self {
            u,
            duration: cfg.dt,
            start,
            end,
            samples,
            cost: cfg.primitive_cost(&u),
        }
    }
}

/// All `n_v · n_omega` primitives from `x`, velocity-major.
pub fn expand(x: &RobotState, cfg: &PlannerConfig) -> Vec<MotionPrimitive> {
    let omegas = cfg.omega_grid();
    cfg.v_grid()
        .into_iter()
        .flat_map(|v| omegas.iter().map(move |&omega| ControlInput { v, omega }))
        .map(|u| MotionPrimitive::new(*x, u, cfg))
        .collect()
}

/// A chain of primitives plus its scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub start: RobotState,
    pub primitives: Vec<MotionPrimitive>,
    pub cost: f64,
    pub reaches_goal: bool,
    /// Summed viewpoint utility along the trajectory; filled in by selection.
    pub info: f64,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.primitives.iter().map(|p| p.duration).sum()
    }

    pub fn end(&self) -> RobotState {
        self.primitives.last().map_or(self.start, |p| p.end)
    }

    /// State after `t` seconds (clamped to the trajectory).
    pub fn state_at(&self, t: f64) -> RobotState {
        let mut t = t.max(0.0);
        for p in &self.primitives {
            if t == 0.0 {
                return p.start;
            }
            if t < p.duration {
                return propagate(&p.start, &p.u, t);
            }
            t -= p.duration;
        }
        self.end()
    }

    /// States at the ends of `segments` equal-duration pieces, start included.
    pub fn segment_endpoints(&self, segments: Option<usize>) -> Vec<RobotState> {
        let l = segments.unwrap_or(self.primitives.len());
        if l == 0 {
            return vec![self.start];
        }
        if l == self.primitives.len() {
            let mut out = vec![self.start];
            out.extend(self.primitives.iter().map(|p| p.end));
            return out;
        }
        let tau = self.duration();
        (0..=l).map(|i| self.state_at(tau * i as f64 / l as f64)).collect()
    }
}
