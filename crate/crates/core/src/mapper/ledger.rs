use std::collections::BTreeMap;

use crate::splat::{GaussianId, GaussianMap};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    /// Norm of the mean displacement over the last optimisation pass that
    /// moved this Gaussian. `+inf` until the first such pass.
    pub displacement: f64,
    /// Frame index of that pass (or of the Gaussian's creation).
    pub last_update: u64,
}

/// Per-Gaussian displacement bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UncertaintyLedger {
    entries: BTreeMap<GaussianId, LedgerEntry>,
}

impl UncertaintyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_newborn(&mut self, id: GaussianId, frame: u64) {
        self.entries.insert(
            id,
            LedgerEntry {
                displacement: f64::INFINITY,
                last_update: frame,
            },
        );
    }

    pub fn record(&mut self, id: GaussianId, displacement: f64, frame: u64) {
        debug_assert!(displacement >= 0.0);
        self.entries.insert(
            id,
            LedgerEntry {
                displacement,
                last_update: frame,
            },
        );
    }

    pub fn retire(&mut self, id: GaussianId) -> Option<LedgerEntry> {
        self.entries.remove(&id)
    }

    pub fn get(&self, id: GaussianId) -> Option<&LedgerEntry> {
        self.entries.get(&id)
    }

    pub fn displacement(&self, id: GaussianId) -> Option<f64> {
        self.entries.get(&id).map(|e| e.displacement)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (GaussianId, &LedgerEntry)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    /// Largest finite displacement, if any.
    pub fn max_finite(&self) -> Option<f64> {
        self.entries
            .values()
            .map(|e| e.displacement)
            .filter(|d| d.is_finite())
            .fold(None, |acc, d| Some(acc.map_or(d, |m: f64| m.max(d))))
    }

    /// True when the key set equals the live ids of `map`.
    pub fn covers_exactly(&self, map: &GaussianMap) -> bool {
        self.entries.len() == map.len() && map.ids().iter().zip(self.entries.keys()).all(|(a, b)| a == b)
    }
}
