//! Closed-loop simulation: ground-truth Gaussian worlds, RGB-D sensing and the
//! sense → map → plan → act exploration loop.

mod scene;
mod sensor;
mod world;

pub use scene::{
    generate_scene, panel_scene, panel_training_state, Scene, SceneFile, SceneKind, SceneParams, GROUND_Z, WALL_RADIUS,
    WALL_SPACING,
};
pub use sensor::{sense, truncate_range, SensorModel};
pub use world::{
    run, ExplorationConfig, MappingRow, RunArtifacts, StepMetrics, StepReport, StopReason, TrajectoryRow, World,
};
