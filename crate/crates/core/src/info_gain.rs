//! Information scores derived from the displacement ledger: the high / low /
//! other uncertainty partition, cuboidal region utilities, frustum visibility,
//! the viewpoint utility ξ and the trace proxy.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapper::UncertaintyLedger;
use crate::splat::{CameraIntrinsics, GaussianId, GaussianMap, Pose};

pub type CellIndex = [i64; 3];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionCell {
    pub members: Vec<GaussianId>,
    /// Region utility: mean member displacement.
    pub omega: f64,
    /// Mean of the member means.
    pub centroid: Vector3<f64>,
}

/// Partition of space into axis-aligned cubes of edge `cell_size`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionGrid {
    pub cell_size: f64,
    pub cells: BTreeMap<CellIndex, RegionCell>,
}

impl RegionGrid {
    pub fn new(cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0) {
            return Err(Error::InvalidConfig("cell_size must be positive".into()));
        }
        Ok(Self {
            cell_size,
            cells: BTreeMap::new(),
        })
    }

    pub fn cell_of(&self, p: &Vector3<f64>) -> CellIndex {
        [
            (p.x / self.cell_size).floor() as i64,
            (p.y / self.cell_size).floor() as i64,
            (p.z / self.cell_size).floor() as i64,
        ]
    }

    pub fn omega(&self, cell: &CellIndex) -> f64 {
        self.cells.get(cell).map_or(0.0, |c| c.omega)
    }

    /// Cells sorted by decreasing Ω (ties by index), at most `k`.
    pub fn top_k(&self, k: usize) -> Vec<(CellIndex, &RegionCell)> {
        let mut v: Vec<_> = self.cells.iter().map(|(i, c)| (*i, c)).collect();
        v.sort_by(|a, b| b.1.omega.total_cmp(&a.1.omega).then(a.0.cmp(&b.0)));
        v.truncate(k);
        v
    }
}

/// Stand-in for the newborn sentinel in averaged quantities: twice the largest
/// finite displacement, or 1 when nothing finite exists yet.
pub fn newborn_value(max_finite: Option<f64>) -> f64 {
    match max_finite {
        Some(m) if m > 0.0 => 2.0 * m,
        _ => 1.0,
    }
}

fn above_ground<'a>(
    map: &'a GaussianMap,
    ledger: &'a UncertaintyLedger,
    ground_z: f64,
) -> impl Iterator<Item = (GaussianId, &'a Vector3<f64>, f64)> + 'a {
    map.iter()
        .filter(move |(_, g)| g.mean.z > ground_z)
        .filter_map(move |(id, g)| ledger.displacement(id).map(|d| (id, &g.mean, d)))
}

/// Rebuild the grid's cells and their utilities from the current map.
/// Gaussians at or below `ground_z` are skipped.
pub fn region_utilities(map: &GaussianMap, ledger: &UncertaintyLedger, grid: &mut RegionGrid, ground_z: f64) {
    let max_finite = above_ground(map, ledger, ground_z)
        .map(|(_, _, d)| d)
        .filter(|d| d.is_finite())
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))));
    let newborn = newborn_value(max_finite);
    let mut acc: BTreeMap<CellIndex, (Vec<GaussianId>, f64, Vector3<f64>)> = BTreeMap::new();
    for (id, mean, d) in above_ground(map, ledger, ground_z) {
        let e = acc.entry(grid.cell_of(mean)).or_insert_with(|| (Vec::new(), 0.0, Vector3::zeros()));
        e.0.push(id);
        e.1 += if d.is_finite() { d } else { newborn };
        e.2 += mean;
    }
    grid.cells = acc
        .into_iter()
        .map(|(k, (members, sum, msum))| {
            let n = members.len() as f64;
            (
                k,
                RegionCell {
                    omega: sum / n,
                    centroid: msum / n,
                    members,
                },
            )
        })
        .collect();
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct UncertaintyPartition {
    pub high: BTreeSet<GaussianId>,
    pub low: BTreeSet<GaussianId>,
    pub other: BTreeSet<GaussianId>,
    /// `None` when no finite value took part.
    pub tau_hi: Option<f64>,
    pub tau_lo: Option<f64>,
}

impl UncertaintyPartition {
    /// Split `(id, value)` pairs at half a population standard deviation
    /// around the mean of the finite values. Infinite values are high.
    pub fn from_values(values: impl IntoIterator<Item = (GaussianId, f64)>) -> Self {
        let values: Vec<(GaussianId, f64)> = values.into_iter().collect();
        let finite: Vec<f64> = values.iter().map(|v| v.1).filter(|d| d.is_finite()).collect();
        let mut out = Self::default();
        if !finite.is_empty() {
            let n = finite.len() as f64;
            let m = finite.iter().sum::<f64>() / n;
            let var = finite.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / n;
            let s = var.sqrt();
            out.tau_hi = Some(m + 0.5 * s);
            out.tau_lo = Some(m - 0.5 * s);
        }
        for (id, d) in values {
            let set = match (out.tau_hi, out.tau_lo) {
                _ if d.is_infinite() => &mut out.high,
                (Some(hi), _) if d > hi => &mut out.high,
                (_, Some(lo)) if d < lo => &mut out.low,
                _ => &mut out.other,
            };
            set.insert(id);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.high.len() + self.low.len() + self.other.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Partition the ledger entries of Gaussians above `ground_z`.
pub fn classify(map: &GaussianMap, ledger: &UncertaintyLedger, ground_z: f64) -> UncertaintyPartition {
    UncertaintyPartition::from_values(above_ground(map, ledger, ground_z).map(|(id, _, d)| (id, d)))
}

/// Frustum test without occlusion: the mean projects inside the image with
/// depth in `(0, range]`.
pub fn is_visible(mean: &Vector3<f64>, pose: &Pose, intr: &CameraIntrinsics, range: f64) -> bool {
    let pc = pose.to_camera(mean);
    if !(pc.z > 0.0 && pc.z <= range) {
        return false;
    }
    let u = intr.fx * pc.x / pc.z + intr.cx;
    let v = intr.fy * pc.y / pc.z + intr.cy;
    u >= 0.0 && u < intr.width as f64 && v >= 0.0 && v < intr.height as f64
}

pub fn visible_set(pose: &Pose, intr: &CameraIntrinsics, range: f64, map: &GaussianMap) -> BTreeSet<GaussianId> {
    map.iter()
        .filter(|(_, g)| is_visible(&g.mean, pose, intr, range))
        .map(|(id, _)| id)
        .collect()
}

/// ξ = |visible ∩ high| − λ_ξ·|visible ∩ low|.
pub fn viewpoint_utility(
    pose: &Pose,
    partition: &UncertaintyPartition,
    map: &GaussianMap,
    intr: &CameraIntrinsics,
    range: f64,
    lambda_xi: f64,
) -> f64 {
    let (mut hi, mut lo) = (0usize, 0usize);
    for (id, g) in map.iter() {
        if is_visible(&g.mean, pose, intr, range) {
            if partition.high.contains(&id) {
                hi += 1;
            } else if partition.low.contains(&id) {
                lo += 1;
            }
        }
    }
    hi as f64 - lambda_xi * lo as f64
}

/// Tr(J Σ Jᵀ) for a binary visibility Jacobian and diagonal Σ, which is the
/// sum of the visible variances. `variances` is aligned with map order.
pub fn trace_proxy(pose: &Pose, intr: &CameraIntrinsics, range: f64, map: &GaussianMap, variances: &[f64]) -> Result<f64> {
    if variances.len() != map.len() {
        return Err(Error::DimensionMismatch {
            expected: map.len().to_string(),
            actual: variances.len().to_string(),
        });
    }
    let mut total = 0.0;
    for (g, v) in map.gaussians().iter().zip(variances) {
        if is_visible(&g.mean, pose, intr, range) {
            total += v;
        }
    }
    Ok(total)
}

/// Which information score drives trajectory selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantKind {
    /// ξ on the displacement partition.
    #[default]
    Standard,
    /// Plain sum of visible displacements.
    Sum,
    /// ξ on a partition of squared displacements.
    Squared,
}

impl std::str::FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Self::Standard),
            "sum" => Ok(Self::Sum),
            "squared" => Ok(Self::Squared),
            other => Err(Error::InvalidConfig(format!("unknown variant '{other}'"))),
        }
    }
}

/// Everything needed to score viewpoints against one map snapshot. Built once
/// per planning cycle so all candidates see the same partition.
#[derive(Debug, Clone)]
pub struct ViewScorer {
    kind: VariantKind,
    intr: CameraIntrinsics,
    range: f64,
    lambda_xi: f64,
    means: Vec<Vector3<f64>>,
    /// Per scored Gaussian: +1 high, −λ_ξ low, 0 other (ξ kinds), or the
    /// displacement with newborns capped (sum kind).
    weights: Vec<f64>,
    partition: UncertaintyPartition,
}

impl ViewScorer {
    pub fn new(
        kind: VariantKind,
        map: &GaussianMap,
        ledger: &UncertaintyLedger,
        ground_z: f64,
        intr: CameraIntrinsics,
        range: f64,
        lambda_xi: f64,
    ) -> Self {
        let entries: Vec<(GaussianId, Vector3<f64>, f64)> =
            above_ground(map, ledger, ground_z).map(|(id, m, d)| (id, *m, d)).collect();
        let partition = match kind {
            VariantKind::Squared => UncertaintyPartition::from_values(entries.iter().map(|e| (e.0, e.2 * e.2))),
            _ => UncertaintyPartition::from_values(entries.iter().map(|e| (e.0, e.2))),
        };
        let newborn = newborn_value(
            entries
                .iter()
                .map(|e| e.2)
                .filter(|d| d.is_finite())
                .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d)))),
        );
        let weights = entries
            .iter()
            .map(|(id, _, d)| match kind {
                VariantKind::Sum => {
                    if d.is_finite() {
                        *d
                    } else {
                        newborn
                    }
                }
                _ if partition.high.contains(id) => 1.0,
                _ if partition.low.contains(id) => -lambda_xi,
                _ => 0.0,
            })
            .collect();
        Self {
            kind,
            intr,
            range,
            lambda_xi,
            means: entries.iter().map(|e| e.1).collect(),
            weights,
            partition,
        }
    }

    pub fn kind(&self) -> VariantKind {
        self.kind
    }

    pub fn lambda_xi(&self) -> f64 {
        self.lambda_xi
    }

    pub fn partition(&self) -> &UncertaintyPartition {
        &self.partition
    }

    pub fn score(&self, pose: &Pose) -> f64 {
        let mut s = 0.0;
        for (m, w) in self.means.iter().zip(&self.weights) {
            if *w != 0.0 && is_visible(m, pose, &self.intr, self.range) {
                s += w;
            }
        }
        s
    }
}
