use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use super::collision::CollisionChecker;
use super::dynamics::RobotState;
use super::primitives::{expand, MotionPrimitive, PlannerConfig, Trajectory};
use crate::error::{Error, Result};
use crate::splat::Pose;

/// Outcome of one planning call.
#[derive(Debug, Clone, Serialize)]
pub struct PlanResult {
    pub goal: Vector2<f64>,
    /// Ranked by cost; `info` filled in.
    pub candidates: Vec<Trajectory>,
    /// Index into `candidates`.
    pub selected: usize,
    pub expansions: usize,
}

impl PlanResult {
    pub fn trajectory(&self) -> &Trajectory {
        &self.candidates[self.selected]
    }
}

/// The furthest point along the polyline `waypoints` that still lies within
/// `horizon` of `from`. Segments are walked in order and the search stops at
/// the first segment that leaves the ball.
pub fn goal_along_path(from: &Vector2<f64>, waypoints: &[Vector2<f64>], horizon: f64) -> Option<Vector2<f64>> {
    let first = *waypoints.first()?;
    let mut goal = if (first - from).norm() <= horizon { first } else { return Some(first) };
    for w in waypoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (b - from).norm() <= horizon {
            goal = b;
            continue;
        }
        // Largest t in [0,1] with |a + t(b−a) − from| ≤ horizon.
        let d = b - a;
        let f = a - from;
        let qa = d.norm_squared();
        let qb = 2.0 * f.dot(&d);
        let qc = f.norm_squared() - horizon * horizon;
        let disc = qb * qb - 4.0 * qa * qc;
        if qa > 0.0 && disc >= 0.0 {
            let t = ((-qb + disc.sqrt()) / (2.0 * qa)).clamp(0.0, 1.0);
            goal = a + d * t;
        }
        break;
    }
    Some(goal)
}

struct Node {
    state: RobotState,
    g: f64,
    h: f64,
    depth: usize,
    parent: usize,
    prim: Option<MotionPrimitive>,
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    index: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // Min-heap on f, then on creation order.
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn lattice_key(s: &RobotState, cfg: &PlannerConfig) -> (i64, i64, i64) {
    (
        (s.p.x / cfg.lattice_xy).floor() as i64,
        (s.p.y / cfg.lattice_xy).floor() as i64,
        (s.theta.to_degrees() / cfg.lattice_heading_deg).floor() as i64,
    )
}

/// Minimum-time heuristic: even at full speed the robot needs this long to
/// enter the goal disc, and every second costs at least `lambda_t`.
pub fn heuristic(p: &Vector2<f64>, goal: &Vector2<f64>, cfg: &PlannerConfig) -> f64 {
    cfg.lambda_t * ((goal - p).norm() - cfg.goal_radius).max(0.0) / cfg.v_max
}

fn unwind(nodes: &[Node], mut i: usize, start: RobotState, reaches_goal: bool) -> Trajectory {
    let cost = nodes[i].g;
    let mut prims = Vec::with_capacity(nodes[i].depth);
    while let Some(p) = &nodes[i].prim {
        prims.push(p.clone());
        i = nodes[i].parent;
    }
    prims.reverse();
    Trajectory {
        start,
        primitives: prims,
        cost,
        reaches_goal,
        info: 0.0,
    }
}

/// A* over the primitive tree towards the disc of radius `goal_radius` around
/// `goal`. Returns up to `n_traj` candidates ranked by cost, without
/// information scores, and the number of expansions performed.
pub fn search(
    start: &RobotState,
    goal: &Vector2<f64>,
    checker: &CollisionChecker,
    cfg: &PlannerConfig,
) -> Result<(Vec<Trajectory>, usize)> {
    let mut nodes = vec![Node {
        state: *start,
        g: 0.0,
        h: heuristic(&start.p, goal, cfg),
        depth: 0,
        parent: 0,
        prim: None,
    }];
    let mut open = BinaryHeap::new();
    open.push(Open { f: nodes[0].h, index: 0 });
    let mut best_g: HashMap<(i64, i64, i64), f64> = HashMap::new();
    if cfg.dedup {
        best_g.insert(lattice_key(start, cfg), 0.0);
    }
    let mut goals = Vec::new();
    let mut expansions = 0;
    let mut any_child = false;

    while let Some(Open { index, .. }) = open.pop() {
        let node = &nodes[index];
        if (node.state.p - goal).norm() <= cfg.goal_radius {
            goals.push(index);
            if goals.len() >= cfg.n_traj {
                break;
            }
            continue;
        }
        if node.depth >= cfg.max_depth || expansions >= cfg.max_expansions {
            continue;
        }
        expansions += 1;
        let (g0, depth) = (node.g, node.depth);
        let prims = expand(&node.state, cfg);
        // One batched check over every non-initial sample of every child.
        let per = cfg.samples_per_primitive - 1;
        let points: Vec<Vector3<f64>> = prims
            .iter()
            .flat_map(|p| p.samples[1..].iter().map(|s| Vector3::new(s.p.x, s.p.y, cfg.robot_height)))
            .collect();
        let free = checker.check(&points);
        for (k, prim) in prims.into_iter().enumerate() {
            if !free[k * per..(k + 1) * per].iter().all(|&f| f) {
                continue;
            }
            any_child = any_child || depth == 0;
            let g = g0 + prim.cost;
            if cfg.dedup {
                let key = lattice_key(&prim.end, cfg);
                match best_g.get(&key) {
                    Some(&old) if old <= g => continue,
                    _ => {
                        best_g.insert(key, g);
                    }
                }
            }
            let h = heuristic(&prim.end.p, goal, cfg);
            let i = nodes.len();
            nodes.push(Node {
                state: prim.end,
                g,
                h,
                depth: depth + 1,
                parent: index,
                prim: Some(prim),
            });
            open.push(Open { f: g + h, index: i });
        }
    }

    if !goals.is_empty() {
        let out = goals.iter().map(|&i| unwind(&nodes, i, *start, true)).collect();
        return Ok((out, expansions));
    }
    if !any_child {
        return Err(Error::Trapped);
    }
    if !cfg.frontier_fallback {
        return Err(Error::Unreachable);
    }
    let mut order: Vec<usize> = (1..nodes.len()).collect();
    order.sort_by(|&a, &b| {
        nodes[a]
            .h
            .total_cmp(&nodes[b].h)
            .then(nodes[a].g.total_cmp(&nodes[b].g))
            .then(a.cmp(&b))
    });
    order.truncate(cfg.n_traj);
    let mut out: Vec<Trajectory> = order.iter().map(|&i| unwind(&nodes, i, *start, false)).collect();
    out.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    Ok((out, expansions))
}

/// Camera pose for a robot state: looking along the heading at mounting height.
pub fn camera_pose(s: &RobotState, cfg: &PlannerConfig) -> Pose {
    Pose::from_planar(s.p.x, s.p.y, s.theta, cfg.robot_height)
}

/// Score every candidate with `score` summed over its segment endpoints and
/// return the index of the best one (ties: lower cost, then lower index).
pub fn select<F>(candidates: &mut [Trajectory], score: F, cfg: &PlannerConfig) -> usize
where
    F: Fn(&Pose) -> f64 + Sync,
{
    let infos: Vec<f64> = candidates
        .par_iter()
        .map(|t| {
            t.segment_endpoints(cfg.info_segments)
                .iter()
                .map(|s| score(&camera_pose(s, cfg)))
                .sum()
        })
        .collect();
    for (t, i) in candidates.iter_mut().zip(infos) {
        t.info = i;
    }
    let mut best = 0;
    for (i, t) in candidates.iter().enumerate().skip(1) {
        let b = &candidates[best];
        if t.info > b.info || (t.info == b.info && t.cost < b.cost) {
            best = i;
        }
    }
    best
}

/// Search towards an explicit goal point and pick the most informative candidate.
pub fn plan_to_goal<F>(
    start: &RobotState,
    goal: &Vector2<f64>,
    checker: &CollisionChecker,
    score: F,
    cfg: &PlannerConfig,
) -> Result<PlanResult>
where
    F: Fn(&Pose) -> f64 + Sync,
{
    let (mut candidates, expansions) = search(start, goal, checker, cfg)?;
    let selected = select(&mut candidates, score, cfg);
    Ok(PlanResult {
        goal: *goal,
        candidates,
        selected,
        expansions,
    })
}

/// Plan along a guidance polyline: the goal is its furthest point within the
/// planning horizon.
pub fn plan<F>(
    start: &RobotState,
    waypoints: &[Vector2<f64>],
    checker: &CollisionChecker,
    score: F,
    cfg: &PlannerConfig,
) -> Result<PlanResult>
where
    F: Fn(&Pose) -> f64 + Sync,
{
    let goal = goal_along_path(&start.p, waypoints, cfg.horizon).ok_or(Error::Unreachable)?;
    plan_to_goal(start, &goal, checker, score, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_planner::CollisionRule;
    use crate::splat::GaussianMap;

    fn open_checker() -> CollisionChecker {
        CollisionChecker::new(
            &GaussianMap::new(),
            CollisionRule {
                r_robot: 0.3,
                lambda_g: 3.0,
                ground_z: 0.05,
            },
        )
    }

    #[test]
    fn goal_clips_to_horizon() {
        let wps = [Vector2::new(0.0, 0.0), Vector2::new(3.0, 0.0), Vector2::new(3.0, 10.0)];
        let g = goal_along_path(&Vector2::zeros(), &wps, 5.0).unwrap();
        assert!((g - Vector2::new(3.0, 4.0)).norm() < 1e-12);
        let g = goal_along_path(&Vector2::zeros(), &wps[..2], 5.0).unwrap();
        assert_eq!(g, Vector2::new(3.0, 0.0));
    }

    #[test]
    fn goal_at_start_is_an_empty_trajectory() {
        let cfg = PlannerConfig::default();
        let s = RobotState::new(1.0, 1.0, 0.0);
        let r = plan_to_goal(&s, &s.p, &open_checker(), |_| 0.0, &cfg).unwrap();
        assert_eq!(r.trajectory().cost, 0.0);
        assert!(r.trajectory().primitives.is_empty());
    }

    #[test]
    fn straight_ahead_in_open_space() {
        let cfg = PlannerConfig::default();
        let s = RobotState::new(0.0, 0.0, 0.0);
        let r = plan_to_goal(&s, &Vector2::new(3.0, 0.0), &open_checker(), |_| 0.0, &cfg).unwrap();
        let t = r.trajectory();
        assert!(t.reaches_goal);
        assert!((t.end().p - Vector2::new(3.0, 0.0)).norm() <= cfg.goal_radius);
        let bound = 3.0 / cfg.v_max * (cfg.lambda_t + cfg.v_max * cfg.v_max);
        assert!(t.cost <= 1.1 * bound, "{} vs {}", t.cost, bound);
    }
}
