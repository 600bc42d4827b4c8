use std::path::Path;
use std::time::Instant;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scene::Scene;
use super::sensor::{sense, SensorModel};
use crate::error::{Error, Result};
use crate::global_planner::{ranked_guidance, sample_viewpoints, NodeId, TopoTree};
use crate::info_gain::{region_utilities, RegionGrid, VariantKind, ViewScorer};
use crate::local_planner::{camera_pose, plan, propagate, CollisionChecker, ControlInput, PlannerConfig, RobotState};
use crate::mapper::{map_update, MapperConfig, UncertaintyLedger};
use crate::splat::{CameraIntrinsics, GaussianMap};

/// Everything that parameterises an exploration run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorationConfig {
    /// Step budget T; one sense/map/plan/act cycle per step.
    pub budget_steps: usize,
    pub seed: u64,
    pub variant: VariantKind,
    pub image_width: usize,
    pub image_height: usize,
    pub hfov_deg: f64,
    pub max_range: f64,
    pub depth_noise_sigma: f64,
    pub region_size: f64,
    pub top_k_regions: usize,
    pub viewpoints_per_region: usize,
    pub odometry_spacing: f64,
    /// Viewpoints closer than this to the robot count as visited.
    pub consume_radius: f64,
    pub lambda_xi: f64,
    /// Guidance targets tried per step before falling back to recovery.
    pub guidance_attempts: usize,
    /// Steps a guidance target may stay selected before it is abandoned.
    pub target_patience: usize,
    /// The start heading is the scene's spawn heading plus a seeded uniform
    /// offset in `[-spread, spread]`, radians.
    pub spawn_heading_spread: f64,
    pub mapper: MapperConfig,
    pub planner: PlannerConfig,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            budget_steps: 150,
            seed: 0,
            variant: VariantKind::Standard,
            image_width: 64,
            image_height: 64,
            hfov_deg: 90.0,
            max_range: 5.0,
            depth_noise_sigma: 0.0,
            region_size: 2.5,
            top_k_regions: 10,
            viewpoints_per_region: 8,
            odometry_spacing: 0.5,
            consume_radius: 0.5,
            lambda_xi: 1.0,
            guidance_attempts: 3,
            target_patience: 20,
            spawn_heading_spread: std::f64::consts::PI,
            mapper: MapperConfig::default(),
            planner: PlannerConfig::default(),
        }
    }
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget_steps == 0 {
            return Err(Error::InvalidConfig("budget_steps must be ≥ 1".into()));
        }
        if self.top_k_regions == 0 || self.viewpoints_per_region == 0 || self.guidance_attempts == 0 {
            return Err(Error::InvalidConfig("top_k_regions, viewpoints_per_region and guidance_attempts must be ≥ 1".into()));
        }
        if !(self.spawn_heading_spread >= 0.0) {
            return Err(Error::InvalidConfig("spawn_heading_spread must be ≥ 0".into()));
        }
        if !(self.region_size > 0.0 && self.odometry_spacing > 0.0 && self.consume_radius >= 0.0 && self.lambda_xi >= 0.0) {
            return Err(Error::InvalidConfig("region_size, odometry_spacing > 0 and consume_radius, lambda_xi ≥ 0 required".into()));
        }
        self.mapper.validate()?;
        self.planner.validate()?;
        self.sensor().map(|_| ())
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        CameraIntrinsics::from_hfov(self.image_width, self.image_height, self.hfov_deg.to_radians(), self.max_range)
    }

    pub fn sensor(&self) -> Result<SensorModel> {
        SensorModel::new(self.intrinsics()?, self.max_range, self.depth_noise_sigma)
    }
}

/// Executed motion per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    pub recovery: bool,
}

/// Per-step mapping and planning summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepMetrics {
    pub step: usize,
    pub loss: f64,
    pub added: usize,
    pub pruned: usize,
    pub gaussian_count: usize,
    pub region_count: usize,
    pub omega_mean: f64,
    pub omega_max: f64,
    pub high_count: usize,
    pub low_count: usize,
    pub target_node: Option<NodeId>,
    pub guidance_score: Option<f64>,
    pub trajectory_info: Option<f64>,
    pub candidates: usize,
    pub recovery: bool,
}

/// Mapping timing log; wall-clock, so not reproducible across machines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MappingRow {
    pub frame: usize,
    pub added: usize,
    pub pruned: usize,
    pub loss: f64,
    pub gaussian_count: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub metrics: StepMetrics,
    pub executed: TrajectoryRow,
    /// Guidance reported nothing left to explore; the run should stop.
    pub exploration_complete: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    BudgetExhausted,
    ExplorationComplete,
}

/// Closed-loop world state.
#[derive(Debug, Clone)]
pub struct World {
    pub scene: Scene,
    pub cfg: ExplorationConfig,
    pub sensor: SensorModel,
    pub map: GaussianMap,
    pub ledger: UncertaintyLedger,
    pub tree: TopoTree,
    pub grid: RegionGrid,
    pub state: RobotState,
    pub step_index: usize,
    rng: ChaCha8Rng,
    current_target: Option<(NodeId, usize)>,
    pub trajectory_log: Vec<TrajectoryRow>,
    pub metrics_log: Vec<StepMetrics>,
    pub mapping_log: Vec<MappingRow>,
}

impl World {
    pub fn new(scene: Scene, cfg: ExplorationConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut state = scene.spawn;
        if cfg.spawn_heading_spread > 0.0 {
            let offset = rng.gen_range(-cfg.spawn_heading_spread..=cfg.spawn_heading_spread);
            state = RobotState::new(state.p.x, state.p.y, state.theta + offset);
        }
        let mut tree = TopoTree::new(cfg.odometry_spacing);
        tree.append_odometry(state.p, state.theta);
        Ok(Self {
            sensor: cfg.sensor()?,
            grid: RegionGrid::new(cfg.region_size)?,
            state,
            rng,
            scene,
            cfg,
            map: GaussianMap::new(),
            ledger: UncertaintyLedger::new(),
            tree,
            step_index: 0,
            current_target: None,
            trajectory_log: Vec::new(),
            metrics_log: Vec::new(),
            mapping_log: Vec::new(),
        })
    }

    pub fn is_done(&self) -> bool {
        self.step_index >= self.cfg.budget_steps
    }

    fn ground_z(&self) -> f64 {
        self.cfg.planner.ground_z
    }

    /// One sense → map → plan → act cycle.
    pub fn step(&mut self) -> Result<StepReport> {
        if self.is_done() {
            return Err(Error::BudgetExhausted(self.cfg.budget_steps));
        }
        let k = self.step_index;
        let pcfg = self.cfg.planner;
        let pose = camera_pose(&self.state, &pcfg);

        // Sense and map.
        let frame = sense(&self.scene, &pose, &self.sensor, &mut self.rng);
        let t0 = Instant::now();
        let stats = map_update(&mut self.map, &mut self.ledger, &frame, &pose, &self.sensor.intr, &self.cfg.mapper, k as u64)?;
        self.mapping_log.push(MappingRow {
            frame: k,
            added: stats.added,
            pruned: stats.pruned,
            loss: stats.loss,
            gaussian_count: self.map.len(),
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        });

        // Information.
        let ground_z = self.ground_z();
        region_utilities(&self.map, &self.ledger, &mut self.grid, ground_z);
        let checker = CollisionChecker::new(&self.map, pcfg.rule());
        self.tree.consume_near(&self.state.p, self.cfg.consume_radius);
        self.resample_viewpoints(&checker)?;
        self.tree.refresh_utilities(&self.grid);
        let scorer = ViewScorer::new(
            self.cfg.variant,
            &self.map,
            &self.ledger,
            self.ground_z(),
            self.sensor.intr,
            self.sensor.max_range,
            self.cfg.lambda_xi,
        );

        // Plan.
        let mut metrics = StepMetrics {
            step: k,
            loss: stats.loss,
            added: stats.added,
            pruned: stats.pruned,
            gaussian_count: self.map.len(),
            region_count: self.grid.cells.len(),
            omega_mean: mean(self.grid.cells.values().map(|c| c.omega)),
            omega_max: self.grid.cells.values().map(|c| c.omega).fold(0.0, f64::max),
            high_count: scorer.partition().high.len(),
            low_count: scorer.partition().low.len(),
            target_node: None,
            guidance_score: None,
            trajectory_info: None,
            candidates: 0,
            recovery: false,
        };
        let mut complete = false;
        let mut control = None;
        let current = self.tree.last_odometry().expect("tree is seeded with the spawn");
        match ranked_guidance(&self.tree, current) {
            Err(Error::ExplorationComplete) => complete = true,
            Err(e) => return Err(e),
            Ok(paths) => {
                for g in paths.iter().take(self.cfg.guidance_attempts) {
                    match plan(&self.state, &g.waypoints, &checker, |p| scorer.score(p), &pcfg) {
                        Ok(r) => {
                            let t = r.trajectory();
                            let Some(first) = t.primitives.first() else {
                                // Already at the goal: the target is reached.
                                self.tree.consume(g.target);
                                continue;
                            };
                            metrics.target_node = Some(g.target);
                            metrics.guidance_score = Some(g.score);
                            metrics.trajectory_info = Some(t.info);
                            metrics.candidates = r.candidates.len();
                            control = Some(first.u);
                            self.track_target(g.target);
                            break;
                        }
                        Err(Error::Trapped) => break,
                        Err(Error::Unreachable) => {
                            self.tree.consume(g.target);
                            continue;
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
        }

        // Act.
        let (u, recovery) = match control {
            Some(u) => (u, false),
            None if complete => (ControlInput { v: 0.0, omega: 0.0 }, false),
            None => (
                ControlInput {
                    v: 0.0,
                    omega: pcfg.omega_max,
                },
                true,
            ),
        };
        metrics.recovery = recovery;
        self.state = propagate(&self.state, &u, pcfg.dt);
        self.tree.consume_near(&self.state.p, self.cfg.consume_radius);
        self.tree.append_odometry(self.state.p, self.state.theta);
        let executed = TrajectoryRow {
            step: k,
            x: self.state.p.x,
            y: self.state.p.y,
            theta: self.state.theta,
            v: u.v,
            omega: u.omega,
            recovery,
        };
        self.trajectory_log.push(executed);
        self.metrics_log.push(metrics);
        self.step_index += 1;
        Ok(StepReport {
            metrics,
            executed,
            exploration_complete: complete,
        })
    }

    /// Abandon a target that has been pursued for too long without arriving.
    fn track_target(&mut self, target: NodeId) {
        match self.current_target {
            Some((t, since)) if t == target => {
                if self.step_index - since >= self.cfg.target_patience {
                    self.tree.consume(target);
                    self.current_target = None;
                }
            }
            _ => self.current_target = Some((target, self.step_index)),
        }
    }

    /// Give each of the top-K regions without a live viewpoint a fresh ring of
    /// viewpoints, keeping only positions inside the known bounds that are
    /// free in the current map.
    fn resample_viewpoints(&mut self, checker: &CollisionChecker) -> Result<()> {
        let margin = self.cfg.planner.r_robot;
        let (lo, hi) = (self.scene.bounds_min, self.scene.bounds_max);
        let height = self.cfg.planner.robot_height;
        let top: Vec<_> = self
            .grid
            .top_k(self.cfg.top_k_regions)
            .into_iter()
            .filter(|(_, c)| c.omega > 0.0)
            .map(|(i, c)| (i, c.centroid, c.omega))
            .collect();
        for (index, centroid, omega) in top {
            if self.tree.has_live_viewpoint(&index) {
                continue;
            }
            sample_viewpoints(
                &mut self.tree,
                index,
                &centroid,
                omega,
                self.grid.cell_size,
                &self.sensor.intr,
                self.cfg.viewpoints_per_region,
                |p: &Vector2<f64>| {
                    p.x >= lo.x + margin
                        && p.x <= hi.x - margin
                        && p.y >= lo.y + margin
                        && p.y <= hi.y - margin
                        && checker.is_free(&Vector3::new(p.x, p.y, height))
                },
            )?;
        }
        Ok(())
    }

    /// Step until the budget is spent or nothing is left to explore.
    pub fn run_to_end(&mut self) -> Result<StopReason> {
        while !self.is_done() {
            if self.step()?.exploration_complete {
                return Ok(StopReason::ExplorationComplete);
            }
        }
        Ok(StopReason::BudgetExhausted)
    }

    pub fn trajectory_csv(&self) -> Result<String> {
        crate::csv_out::to_csv_string(&self.trajectory_log)
    }

    pub fn metrics_csv(&self) -> Result<String> {
        crate::csv_out::to_csv_string(&self.metrics_log)
    }

    /// Write the map snapshot and all logs into `dir`.
    pub fn persist(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        crate::snapshot::save(&dir.join("map.rtg"), &self.map, &self.ledger)?;
        std::fs::write(dir.join("trajectory.csv"), self.trajectory_csv()?)?;
        std::fs::write(dir.join("metrics.csv"), self.metrics_csv()?)?;
        crate::csv_out::write_csv(&dir.join("mapping.csv"), &self.mapping_log)?;
        crate::csv_out::write_csv(&dir.join("regions.csv"), &region_rows(&self.grid))?;
        crate::csv_out::write_csv(&dir.join("tree.csv"), &tree_rows(&self.tree))?;
        Ok(())
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

#[derive(Serialize)]
struct RegionRow {
    ix: i64,
    iy: i64,
    iz: i64,
    cx: f64,
    cy: f64,
    cz: f64,
    members: usize,
    omega: f64,
}

fn region_rows(grid: &RegionGrid) -> Vec<RegionRow> {
    grid.cells
        .iter()
        .map(|(i, c)| RegionRow {
            ix: i[0],
            iy: i[1],
            iz: i[2],
            cx: c.centroid.x,
            cy: c.centroid.y,
            cz: c.centroid.z,
            members: c.members.len(),
            omega: c.omega,
        })
        .collect()
}

#[derive(Serialize)]
struct TreeRow {
    node: NodeId,
    kind: crate::global_planner::NodeKind,
    x: f64,
    y: f64,
    omega: f64,
    parent: Option<NodeId>,
}

fn tree_rows(tree: &TopoTree) -> Vec<TreeRow> {
    tree.nodes
        .iter()
        .map(|n| TreeRow {
            node: n.id,
            kind: n.kind,
            x: n.position.x,
            y: n.position.y,
            omega: n.utility,
            parent: n.parent,
        })
        .collect()
}

/// Outputs of a finished run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub world: World,
    pub stop: StopReason,
}

/// Run a full exploration; persist into `out` when given.
pub fn run(scene: Scene, cfg: ExplorationConfig, out: Option<&Path>) -> Result<RunArtifacts> {
    let mut world = World::new(scene, cfg)?;
    let stop = world.run_to_end()?;
    if let Some(dir) = out {
        world.persist(dir)?;
    }
    Ok(RunArtifacts { world, stop })
}
