//! Kinodynamic trajectory generation: unicycle motion primitives searched with
//! A*, collision checking against the Gaussian map, and information-driven
//! selection among the cheapest candidates.

mod collision;
mod dynamics;
mod primitives;
mod search;

pub use collision::{check_all_pairs_parallel, check_all_pairs_serial, CollisionChecker, CollisionRule};
pub use dynamics::{propagate, wrap_angle, ControlInput, RobotState};
pub use primitives::{expand, MotionPrimitive, PlannerConfig, Trajectory};
pub use search::{camera_pose, goal_along_path, heuristic, plan, plan_to_goal, search, select, PlanResult};
