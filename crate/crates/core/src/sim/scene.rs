use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_planner::{check_all_pairs_serial, CollisionRule, RobotState};
use crate::splat::{Gaussian, GaussianMap};

/// Procedural environment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneKind {
    /// Enclosure split into rooms by walls with doorways, plus pillars.
    Rooms,
    /// Straight enclosed corridor along x.
    Corridor,
    /// Enclosure with randomly placed pillars.
    Clutter,
    /// A 20 × 10 grid of 200 Gaussians facing a fixed camera, for mapping tests.
    Panel,
}

/// Parameters of a generated scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub kind: SceneKind,
    /// Footprint in x and y, metres.
    pub extent: [f64; 2],
    /// Obstacle density multiplier; 0 gives an empty scene.
    pub density: f64,
    pub seed: u64,
    /// Free width of the corridor kind, metres.
    pub corridor_width: f64,
    pub wall_height: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            kind: SceneKind::Rooms,
            extent: [8.0, 8.0],
            density: 1.0,
            seed: 0,
            corridor_width: 2.0,
            wall_height: 1.5,
        }
    }
}

/// Ground truth world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub gt_map: GaussianMap,
    /// Axis-aligned enclosing box known a priori, metres.
    pub bounds_min: Vector3<f64>,
    pub bounds_max: Vector3<f64>,
    pub ground_z: f64,
    pub spawn: RobotState,
}

/// Geometry constants shared by the generators.
pub const WALL_RADIUS: f64 = 0.1;
pub const WALL_SPACING: f64 = 0.1;
const WALL_BOTTOM: f64 = 0.1;
const WALL_OPACITY: f64 = 0.9;

/// Default ground filter height, metres.
pub const GROUND_Z: f64 = 0.05;

impl Scene {
    /// Whether `p` lies inside the footprint of the bounds.
    pub fn contains_xy(&self, p: &Vector2<f64>) -> bool {
        p.x >= self.bounds_min.x && p.x <= self.bounds_max.x && p.y >= self.bounds_min.y && p.y <= self.bounds_max.y
    }

    /// Exhaustive γ-rule test against the ground truth.
    pub fn is_free(&self, p: &Vector2<f64>, height: f64, rule: &CollisionRule) -> bool {
        check_all_pairs_serial(&[Vector3::new(p.x, p.y, height)], &self.gt_map, rule)[0]
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SceneFile = serde_json::from_str(text)?;
        file.into_scene()
    }
}

/// On-disk scene description: either generator parameters or an explicit world.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SceneFile {
    Explicit(Scene),
    Params(SceneParams),
}

impl SceneFile {
    pub fn into_scene(self) -> Result<Scene> {
        match self {
            SceneFile::Explicit(s) => Ok(s),
            SceneFile::Params(params) => generate_scene(&params),
        }
    }
}

fn hsv(h: f64, s: f64, v: f64) -> [f64; 3] {
    let c = v * s;
    let hp = (h.rem_euclid(1.0)) * 6.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

struct Builder {
    gaussians: Vec<Gaussian>,
    rng: ChaCha8Rng,
    height: f64,
}

impl Builder {
    fn surface_colour(&mut self) -> [f64; 3] {
        hsv(self.rng.gen::<f64>(), 0.55, 0.75)
    }

    /// Vertical sheet of Gaussians between `a` and `b`.
    fn wall(&mut self, a: Vector2<f64>, b: Vector2<f64>) {
        let base = self.surface_colour();
        let len = (b - a).norm();
        let n_along = (len / WALL_SPACING).round().max(1.0) as usize;
        let n_up = ((self.height - WALL_BOTTOM) / WALL_SPACING).round().max(1.0) as usize;
        for i in 0..=n_along {
            let p = a + (b - a) * (i as f64 / n_along as f64);
            for k in 0..=n_up {
                let z = WALL_BOTTOM + (self.height - WALL_BOTTOM) * k as f64 / n_up as f64;
                // Horizontal banding gives the photometric loss some texture.
                let shade = 0.85 + 0.15 * ((z * 4.0).floor() as i64 % 2) as f64;
                let jitter: f64 = self.rng.gen_range(-0.03..0.03);
                let c = base.map(|v| (v * shade + jitter).clamp(0.0, 1.0));
                self.gaussians.push(Gaussian::new(Vector3::new(p.x, p.y, z), WALL_RADIUS, WALL_OPACITY, c));
            }
        }
    }

    /// Wall from `a` to `b` with the interval `[gap.0, gap.1]` (distances from `a`) left open.
    fn wall_with_door(&mut self, a: Vector2<f64>, b: Vector2<f64>, gap: (f64, f64)) {
        let dir = (b - a).normalize();
        self.wall(a, a + dir * gap.0);
        self.wall(a + dir * gap.1, b);
    }

    /// Square pillar of side `side` centred at `c`.
    fn pillar(&mut self, c: Vector2<f64>, side: f64) {
        let h = side / 2.0;
        let corners = [
            c + Vector2::new(-h, -h),
            c + Vector2::new(h, -h),
            c + Vector2::new(h, h),
            c + Vector2::new(-h, h),
        ];
        for i in 0..4 {
            self.wall(corners[i], corners[(i + 1) % 4]);
        }
    }

    fn enclosure(&mut self, w: f64, h: f64) {
        let c = [
            Vector2::new(0.0, 0.0),
            Vector2::new(w, 0.0),
            Vector2::new(w, h),
            Vector2::new(0.0, h),
        ];
        for i in 0..4 {
            self.wall(c[i], c[(i + 1) % 4]);
        }
    }
}

fn default_rule() -> CollisionRule {
    CollisionRule {
        r_robot: 0.3,
        lambda_g: 3.0,
        ground_z: GROUND_Z,
    }
}

/// Deterministic procedural scene.
pub fn generate_scene(params: &SceneParams) -> Result<Scene> {
    let [w, h] = params.extent;
    if !(w > 0.0 && h > 0.0 && params.density >= 0.0 && params.wall_height > WALL_BOTTOM) {
        return Err(Error::InvalidConfig("scene extent, density or wall height out of range".into()));
    }
    if params.kind == SceneKind::Panel {
        return Ok(panel_scene(params.density > 0.0));
    }
    let mut b = Builder {
        gaussians: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        height: params.wall_height,
    };
    let mut spawn = RobotState::new(1.0, 1.0, std::f64::consts::FRAC_PI_4);
    let mut pillars = 0usize;
    if params.density > 0.0 {
        match params.kind {
            SceneKind::Rooms => {
                b.enclosure(w, h);
                // A full-height divider with a central doorway, and a second
                // divider splitting the far half.
                b.wall_with_door(Vector2::new(w / 2.0, 0.0), Vector2::new(w / 2.0, h), (h / 2.0 - 1.0, h / 2.0 + 1.0));
                b.wall_with_door(Vector2::new(w / 2.0, h / 2.0 + 1.0), Vector2::new(w, h / 2.0 + 1.0), (1.0, 3.0));
                pillars = (params.density * 2.0).round() as usize;
            }
            SceneKind::Corridor => {
                let y0 = h / 2.0 - params.corridor_width / 2.0 - WALL_RADIUS;
                let y1 = h / 2.0 + params.corridor_width / 2.0 + WALL_RADIUS;
                b.wall(Vector2::new(0.0, y0), Vector2::new(w, y0));
                b.wall(Vector2::new(0.0, y1), Vector2::new(w, y1));
                b.wall(Vector2::new(0.0, y0), Vector2::new(0.0, y1));
                b.wall(Vector2::new(w, y0), Vector2::new(w, y1));
                spawn = RobotState::new(1.0, h / 2.0, 0.0);
            }
            SceneKind::Clutter => {
                b.enclosure(w, h);
                pillars = (params.density * 0.1 * w * h).round() as usize;
            }
            SceneKind::Panel => unreachable!(),
        }
    }
    let rule = default_rule();
    let mut placed = 0;
    let mut attempts = 0;
    while placed < pillars && attempts < 200 * pillars.max(1) {
        attempts += 1;
        let c = Vector2::new(b.rng.gen_range(1.0..w - 1.0), b.rng.gen_range(1.0..h - 1.0));
        let side = b.rng.gen_range(0.4..0.8);
        // Keep the spawn and a margin around it open.
        if (c - spawn.p).norm() < 1.8 {
            continue;
        }
        b.pillar(c, side);
        placed += 1;
    }
    let scene = Scene {
        gt_map: GaussianMap::from_gaussians(b.gaussians),
        bounds_min: Vector3::new(0.0, 0.0, 0.0),
        bounds_max: Vector3::new(w, h, params.wall_height + 0.5),
        ground_z: GROUND_Z,
        spawn,
    };
    if !scene.is_free(&scene.spawn.p, 0.3, &rule) {
        return Err(Error::InvalidConfig("generated scene has an occupied spawn".into()));
    }
    Ok(scene)
}

/// Camera pose used to train on the panel scene: at the origin, 0.3 m high,
/// looking along +x.
pub fn panel_training_state() -> RobotState {
    RobotState::new(0.0, 0.0, 0.0)
}

/// 200 overlapping Gaussians on a plane 3 m in front of the training pose,
/// with a smooth colour field. `filled = false` gives an empty world.
pub fn panel_scene(filled: bool) -> Scene {
    let mut gs = Vec::new();
    if filled {
        for i in 0..20 {
            for k in 0..10 {
                let y = -1.9 + 0.2 * i as f64;
                let z = -0.6 + 0.2 * k as f64 + 0.3;
                let x = 3.0 + 0.15 * ((i as f64) * 0.7).sin();
                let c = hsv(i as f64 / 24.0, 0.6, 0.5 + 0.04 * k as f64);
                gs.push(Gaussian::new(Vector3::new(x, y, z), 0.2, 0.85, c));
            }
        }
    }
    Scene {
        gt_map: GaussianMap::from_gaussians(gs),
        bounds_min: Vector3::new(-1.0, -3.0, -1.0),
        bounds_max: Vector3::new(4.0, 3.0, 2.0),
        ground_z: f64::NEG_INFINITY,
        spawn: panel_training_state(),
    }
}
