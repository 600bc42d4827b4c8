//! Active mapping with isotropic Gaussian splats.
//!
//! The crate is organised along the pipeline a ground robot runs once per
//! planning cycle:
//!
//! * [`splat`] renders an isotropic Gaussian map into colour, depth and
//!   accumulated-opacity images and differentiates the rendering loss.
//! * [`mapper`] grows and refines the map from RGB-D frames and keeps the
//!   per-Gaussian displacement ledger.
//! * [`info_gain`] turns the ledger into region utilities and viewpoint scores.
//! * [`global_planner`] keeps the topological tree and picks a guidance path.
//! * [`local_planner`] searches unicycle motion primitives and selects the most
//!   informative collision-free trajectory.
//! * [`sim`] closes the loop against a ground-truth Gaussian world.
//! * [`eval`] holds the image metrics, held-out evaluation and the collision
//!   checking benchmark.

pub mod error;
pub mod eval;
pub mod global_planner;
pub mod info_gain;
pub mod local_planner;
pub mod mapper;
pub mod sim;
pub mod snapshot;
pub mod splat;

mod csv_out;

pub use error::{Error, Result};
