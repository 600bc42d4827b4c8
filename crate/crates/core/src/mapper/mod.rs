//! Online map construction: densify, optimise, prune, and the displacement ledger.

mod ledger;
mod ops;

pub use ledger::{LedgerEntry, UncertaintyLedger};
pub use ops::{densify, map_update, optimize, prune, LearningRates, MapperConfig, OptimizeReport, UpdateStats};
