use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub type GaussianId = u64;

/// One isotropic splat: RGB colour, world-frame mean, radius and opacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub color: [f64; 3],
    pub mean: Vector3<f64>,
    pub radius: f64,
    pub opacity: f64,
}

impl Gaussian {
    pub fn new(mean: Vector3<f64>, radius: f64, opacity: f64, color: [f64; 3]) -> Self {
        Self {
            color,
            mean,
            radius,
            opacity,
        }
    }

    /// Clamp to the parameter domain kept between optimizer steps.
    pub fn clamp_params(&mut self, min_radius: f64) {
        for c in &mut self.color {
            *c = c.clamp(0.0, 1.0);
        }
        self.opacity = self.opacity.clamp(0.0, 1.0);
        self.radius = self.radius.max(min_radius);
    }
}

/// Ordered Gaussian collection with stable identifiers.
///
/// Identifiers are handed out monotonically and never reused, so the id
/// sequence stays sorted and lookups are binary searches.
///
/// Serialises as a plain list of Gaussians; identifiers are reassigned
/// sequentially on load.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Gaussian>", from = "Vec<Gaussian>")]
pub struct GaussianMap {
    ids: Vec<GaussianId>,
    gaussians: Vec<Gaussian>,
    next_id: GaussianId,
    generation: u64,
}

impl From<Vec<Gaussian>> for GaussianMap {
    fn from(v: Vec<Gaussian>) -> Self {
        Self::from_gaussians(v)
    }
}

impl From<GaussianMap> for Vec<Gaussian> {
    fn from(m: GaussianMap) -> Self {
        m.gaussians
    }
}

impl GaussianMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_gaussians(gaussians: impl IntoIterator<Item = Gaussian>) -> Self {
        let mut map = Self::new();
        for g in gaussians {
            map.insert(g);
        }
        map
    }

    /// Rebuild a map with explicit identifiers (snapshot import).
    /// Identifiers must be strictly increasing.
    pub fn from_parts(ids: Vec<GaussianId>, gaussians: Vec<Gaussian>) -> Option<Self> {
        if ids.len() != gaussians.len() || ids.windows(2).any(|w| w[0] >= w[1]) {
            return None;
        }
        let next_id = ids.last().map_or(0, |&id| id + 1);
        Some(Self {
            ids,
            gaussians,
            next_id,
            generation: 0,
        })
    }

    pub fn insert(&mut self, g: Gaussian) -> GaussianId {
        let id = self.next_id;
        self.next_id += 1;
        self.ids.push(id);
        self.gaussians.push(g);
        self.generation += 1;
        id
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    /// Bumped on every structural or parameter change made through the map.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn ids(&self) -> &[GaussianId] {
        &self.ids
    }

    pub fn gaussians(&self) -> &[Gaussian] {
        &self.gaussians
    }

    /// Mutable parameter access; the id sequence cannot be changed through it.
    pub fn gaussians_mut(&mut self) -> &mut [Gaussian] {
        self.generation += 1;
        &mut self.gaussians
    }

    pub fn iter(&self) -> impl Iterator<Item = (GaussianId, &Gaussian)> + '_ {
        self.ids.iter().copied().zip(self.gaussians.iter())
    }

    pub fn index_of(&self, id: GaussianId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn get(&self, id: GaussianId) -> Option<&Gaussian> {
        self.index_of(id).map(|i| &self.gaussians[i])
    }

    pub fn get_mut(&mut self, id: GaussianId) -> Option<&mut Gaussian> {
        let i = self.index_of(id)?;
        self.generation += 1;
        Some(&mut self.gaussians[i])
    }

    /// Remove every Gaussian matching `pred`, returning the retired ids in order.
    pub fn remove_where(&mut self, mut pred: impl FnMut(&Gaussian) -> bool) -> Vec<GaussianId> {
        let mut removed = Vec::new();
        let mut keep_ids = Vec::with_capacity(self.ids.len());
        let mut keep = Vec::with_capacity(self.gaussians.len());
        for (&id, g) in self.ids.iter().zip(&self.gaussians) {
            if pred(g) {
                removed.push(id);
            } else {
                keep_ids.push(id);
                keep.push(*g);
            }
        }
        if !removed.is_empty() {
            self.ids = keep_ids;
            self.gaussians = keep;
            self.generation += 1;
        }
        removed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(x: f64) -> Gaussian {
        Gaussian::new(Vector3::new(x, 0.0, 1.0), 0.1, 0.5, [0.5; 3])
    }

    #[test]
    fn ids_are_never_reused() {
        let mut map = GaussianMap::from_gaussians((0..4).map(|i| blob(i as f64)));
        let removed = map.remove_where(|g| g.mean.x > 2.5);
        assert_eq!(removed, vec![3]);
        let id = map.insert(blob(9.0));
        assert_eq!(id, 4);
        assert_eq!(map.ids(), &[0, 1, 2, 4]);
        assert_eq!(map.get(4).unwrap().mean.x, 9.0);
        assert!(map.get(3).is_none());
    }

    #[test]
    fn from_parts_rejects_unsorted_ids() {
        assert!(GaussianMap::from_parts(vec![2, 1], vec![blob(0.0), blob(1.0)]).is_none());
        let map = GaussianMap::from_parts(vec![3, 7], vec![blob(0.0), blob(1.0)]).unwrap();
        let mut map = map;
        assert_eq!(map.insert(blob(2.0)), 8);
    }
}
