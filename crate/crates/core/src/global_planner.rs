//! Topological tree over the travelled path with viewpoint leaves, and the
//! Dijkstra-based guidance that trades region utility against path length.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{Vector2, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::info_gain::{CellIndex, RegionGrid};
use crate::splat::CameraIntrinsics;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Odometry,
    Viewpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopoNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub position: Vector2<f64>,
    pub heading: f64,
    /// Region utility Ω (viewpoints only).
    pub utility: f64,
    /// Region the viewpoint was sampled for.
    pub region: Option<CellIndex>,
    /// Visited or abandoned viewpoints no longer compete for guidance.
    pub consumed: bool,
    /// Tree parent (the node this one was attached to).
    pub parent: Option<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TopoEdge {
    pub a: NodeId,
    pub b: NodeId,
    pub length: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TopoTree {
    pub nodes: Vec<TopoNode>,
    pub edges: Vec<TopoEdge>,
    #[serde(skip)]
    adjacency: Vec<Vec<(NodeId, f64)>>,
    last_odometry: Option<NodeId>,
    /// Minimum spacing between consecutive odometry nodes.
    pub odometry_spacing: f64,
}

impl TopoTree {
    pub fn new(odometry_spacing: f64) -> Self {
        Self {
            odometry_spacing,
            ..Default::default()
        }
    }

    pub fn root(&self) -> Option<NodeId> {
        (!self.nodes.is_empty()).then_some(0)
    }

    pub fn last_odometry(&self) -> Option<NodeId> {
        self.last_odometry
    }

    pub fn neighbours(&self, n: NodeId) -> &[(NodeId, f64)] {
        &self.adjacency[n]
    }

    fn push_node(&mut self, kind: NodeKind, position: Vector2<f64>, heading: f64, utility: f64, region: Option<CellIndex>) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(TopoNode {
            id,
            kind,
            position,
            heading,
            utility,
            region,
            consumed: false,
            parent: None,
        });
        self.adjacency.push(Vec::new());
        id
    }

    fn connect(&mut self, parent: NodeId, child: NodeId) {
        let length = (self.nodes[parent].position - self.nodes[child].position).norm();
        self.edges.push(TopoEdge { a: parent, b: child, length });
        self.adjacency[parent].push((child, length));
        self.adjacency[child].push((parent, length));
        self.nodes[child].parent = Some(parent);
    }

    /// Odometry nodes among all nodes, in travel order.
    pub fn odometry_nodes(&self) -> impl Iterator<Item = &TopoNode> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Odometry)
    }

    pub fn viewpoint_nodes(&self) -> impl Iterator<Item = &TopoNode> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Viewpoint)
    }

    /// Nearest odometry node by Euclidean distance (ties: lower id).
    pub fn nearest_odometry(&self, p: &Vector2<f64>) -> Option<NodeId> {
        self.odometry_nodes()
            .map(|n| (n.id, (n.position - p).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(id, _)| id)
    }

    /// Add an odometry node if the robot moved at least `odometry_spacing`
    /// since the last one.
    pub fn append_odometry(&mut self, position: Vector2<f64>, heading: f64) -> Option<NodeId> {
        if let Some(last) = self.last_odometry {
            if (self.nodes[last].position - position).norm() < self.odometry_spacing {
                return None;
            }
        }
        let id = self.push_node(NodeKind::Odometry, position, heading, 0.0, None);
        if let Some(last) = self.last_odometry {
            self.connect(last, id);
        }
        self.last_odometry = Some(id);
        Some(id)
    }

    /// Add a viewpoint leaf attached to the nearest odometry node.
    pub fn add_viewpoint(&mut self, position: Vector2<f64>, heading: f64, utility: f64, region: Option<CellIndex>) -> Result<NodeId> {
        let anchor = self
            .nearest_odometry(&position)
            .ok_or_else(|| Error::InvalidConfig("viewpoints need an odometry node to attach to".into()))?;
        let id = self.push_node(NodeKind::Viewpoint, position, heading, utility, region);
        self.connect(anchor, id);
        Ok(id)
    }

    /// Mark viewpoints within `radius` of `p` as visited.
    pub fn consume_near(&mut self, p: &Vector2<f64>, radius: f64) -> usize {
        let mut n = 0;
        for node in self.nodes.iter_mut().filter(|n| n.kind == NodeKind::Viewpoint && !n.consumed) {
            if (node.position - p).norm() <= radius {
                node.consumed = true;
                n += 1;
            }
        }
        n
    }

    pub fn consume(&mut self, id: NodeId) {
        self.nodes[id].consumed = true;
    }

    /// Whether `region` still has a live viewpoint.
    pub fn has_live_viewpoint(&self, region: &CellIndex) -> bool {
        self.viewpoint_nodes().any(|n| !n.consumed && n.region.as_ref() == Some(region))
    }

    /// Copy current region utilities onto the viewpoints; regions that have
    /// disappeared score 0.
    pub fn refresh_utilities(&mut self, grid: &RegionGrid) {
        for n in self.nodes.iter_mut().filter(|n| n.kind == NodeKind::Viewpoint) {
            n.utility = n.region.map_or(0.0, |r| grid.omega(&r));
        }
    }

    /// Shortest-path distances and predecessors from `source`.
    pub fn dijkstra(&self, source: NodeId) -> (Vec<f64>, Vec<Option<NodeId>>) {
        #[derive(PartialEq)]
        struct Item(f64, NodeId);
        impl Eq for Item {}
        impl Ord for Item {
            fn cmp(&self, o: &Self) -> Ordering {
                o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
            }
        }
        impl PartialOrd for Item {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut prev = vec![None; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Item(0.0, source));
        while let Some(Item(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adjacency[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = Some(u);
                    heap.push(Item(nd, v));
                }
            }
        }
        (dist, prev)
    }
}

/// Path through the tree from the current node to a viewpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuidancePath {
    pub nodes: Vec<NodeId>,
    pub waypoints: Vec<Vector2<f64>>,
    /// Path length d, metres.
    pub length: f64,
    /// Ω of the target viewpoint.
    pub utility: f64,
    /// Ω / e^d.
    pub score: f64,
    pub target: NodeId,
}

/// Radius of the viewing circle around a region: the distance at which one
/// cell edge fills the narrower field of view.
pub fn viewing_distance(cell_size: f64, intr: &CameraIntrinsics) -> f64 {
    (cell_size / 2.0) / (intr.hfov().min(intr.vfov()) / 2.0).tan()
}

/// `n` evenly spaced poses on the viewing circle around `centroid`, each
/// facing the centroid. The first sits at angle 0 (east of the centroid).
pub fn viewpoint_ring(centroid: &Vector3<f64>, cell_size: f64, intr: &CameraIntrinsics, n: usize) -> Vec<(Vector2<f64>, f64)> {
    let r = viewing_distance(cell_size, intr);
    let c = centroid.xy();
    (0..n)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let p = c + Vector2::new(a.cos(), a.sin()) * r;
            let heading = (c.y - p.y).atan2(c.x - p.x);
            (p, heading)
        })
        .collect()
}

/// Place up to `n` viewpoints around a region; `accept` filters positions
/// (e.g. to keep them inside the known bounds and out of obstacles).
pub fn sample_viewpoints(
    tree: &mut TopoTree,
    region: CellIndex,
    centroid: &Vector3<f64>,
    omega: f64,
    cell_size: f64,
    intr: &CameraIntrinsics,
    n: usize,
    accept: impl Fn(&Vector2<f64>) -> bool,
) -> Result<Vec<NodeId>> {
    let mut ids = Vec::new();
    for (p, heading) in viewpoint_ring(centroid, cell_size, intr, n) {
        if accept(&p) {
            ids.push(tree.add_viewpoint(p, heading, omega, Some(region))?);
        }
    }
    Ok(ids)
}

/// All live viewpoints reachable from `current`, best first by Ω/e^d (ties:
/// shorter path, then lower node id).
pub fn ranked_guidance(tree: &TopoTree, current: NodeId) -> Result<Vec<GuidancePath>> {
    let (dist, prev) = tree.dijkstra(current);
    let mut live: Vec<(f64, f64, NodeId)> = tree
        .viewpoint_nodes()
        .filter(|n| !n.consumed && dist[n.id].is_finite())
        .map(|n| (n.utility / dist[n.id].exp(), dist[n.id], n.id))
        .collect();
    if live.is_empty() {
        return Err(Error::ExplorationComplete);
    }
    live.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    Ok(live
        .into_iter()
        .map(|(score, d, target)| {
            let mut nodes = vec![target];
            while let Some(p) = prev[*nodes.last().unwrap()] {
                nodes.push(p);
            }
            nodes.reverse();
            GuidancePath {
                waypoints: nodes.iter().map(|&i| tree.nodes[i].position).collect(),
                nodes,
                length: d,
                utility: tree.nodes[target].utility,
                score,
                target,
            }
        })
        .collect())
}

/// The maximal cost-benefit path from `current`.
pub fn guidance(tree: &TopoTree, current: NodeId) -> Result<GuidancePath> {
    Ok(ranked_guidance(tree, current)?.swap_remove(0))
}
