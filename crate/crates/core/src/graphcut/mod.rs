//! Visibility rays to an s-t flow network over tetrahedra, and the
//! minimum cut that labels cells free-space or matter.
//!
//! One node per finite tetrahedron plus source and sink. For every
//! camera-point visibility ray: the cell holding the camera is linked to
//! the source, every facet crossed by the segment from the camera to the
//! point votes with weight `alpha_vis * (1 - exp(-d^2 / (2 sigma^2)))`
//! where `d` is the distance from the crossing to the point, and the cell
//! a few `sigma` behind the point is linked to the sink. Infinite cells
//! are identified with the source side (free space), so hull-entry
//! crossings become source links and arcs back into the hull exterior are
//! dropped.

mod maxflow;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::delaunay::{CellHandle, CellLabel, Tetrahedralization};
use crate::geom::{Camera, PointSample};

#[derive(Debug, Error, PartialEq)]
pub enum GraphCutError {
    #[error("camera {0} is not in the sample's visibility set")]
    CameraNotVisible(usize),
    #[error("triangulation has no finite edge")]
    EmptyTriangulation,
    #[error("ray walk failed: {0}")]
    Walk(#[from] crate::delaunay::WalkError),
}

/// Functional form of the facet vote weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum WeightForm {
    /// `1 - exp(-d^2 / (2 sigma^2))`: bounded in [0, 1), saturating with
    /// distance. Default.
    Gaussian,
    /// The literal printed form `1 - exp(d / (2 sigma))`, clamped at zero
    /// since capacities must be non-negative. Kept for ablation; it
    /// degenerates to zero for every positive distance.
    PaperLiteral,
}

/// Visibility-voting parameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct VisParams {
    pub alpha_vis: f64,
    /// 25th percentile of the triangulation edge lengths; must be computed
    /// via [`compute_sigma`] before accumulating rays.
    pub sigma: f64,
    /// The sink cell sits `sink_offset_mult * sigma` behind the point.
    pub sink_offset_mult: f64,
    /// Smoothness prior added to every inter-cell arc.
    pub quality_weight: f64,
    pub weight_form: WeightForm,
}

impl Default for VisParams {
    fn default() -> Self {
        Self {
            alpha_vis: 32.0,
            sigma: 0.0,
            sink_offset_mult: 3.0,
            quality_weight: 1.0,
            weight_form: WeightForm::Gaussian,
        }
    }
}

impl VisParams {
    pub fn facet_weight(&self, d: f64) -> f64 {
        match self.weight_form {
            WeightForm::Gaussian => {
                if self.sigma <= 0.0 {
                    return 0.0;
                }
                self.alpha_vis * (1.0 - (-d * d / (2.0 * self.sigma * self.sigma)).exp())
            }
            WeightForm::PaperLiteral => {
                if self.sigma <= 0.0 {
                    return 0.0;
                }
                (self.alpha_vis * (1.0 - (d / (2.0 * self.sigma)).exp())).max(0.0)
            }
        }
    }
}

/// Nearest-rank 25th percentile of the finite edge lengths.
pub fn compute_sigma(tri: &Tetrahedralization) -> Result<f64, GraphCutError> {
    let mut lens = tri.edge_lengths();
    if lens.is_empty() {
        return Err(GraphCutError::EmptyTriangulation);
    }
    lens.sort_by(f64::total_cmp);
    let rank = (0.25 * lens.len() as f64).ceil().max(1.0) as usize;
    Ok(lens[rank - 1])
}

/// Minimum-cut result: per-node side and the cut value (equal to the max
/// flow). Source side is labeled free space.
#[derive(Debug, Clone)]
pub struct MinCut {
    pub source_side: Vec<bool>,
    pub cut_value: f64,
}

/// Directed-arc flow network. Nodes are finite tetrahedra when built from
/// a triangulation, or abstract indices for standalone graphs.
#[derive(Debug, Clone)]
pub struct FlowGraph {
    n: usize,
    arcs: BTreeMap<(u32, u32), f64>,
    source: Vec<f64>,
    sink: Vec<f64>,
    node_cell: Vec<CellHandle>,
    cell_node: Vec<u32>,
    /// Rays that touched no finite cell (no-op with warning).
    pub skipped_rays: u32,
}

const NO_NODE: u32 = u32::MAX;

impl FlowGraph {
    /// Standalone graph over `n` abstract nodes.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            arcs: BTreeMap::new(),
            source: vec![0.0; n],
            sink: vec![0.0; n],
            node_cell: Vec::new(),
            cell_node: Vec::new(),
            skipped_rays: 0,
        }
    }

    /// Graph with one node per finite cell of `tri`.
    pub fn for_tetrahedralization(tri: &Tetrahedralization) -> Self {
        let mut node_cell = Vec::new();
        let mut cell_node = vec![NO_NODE; tri.raw_cell_count()];
        for c in tri.finite_cells() {
            cell_node[c.0 as usize] = node_cell.len() as u32;
            node_cell.push(c);
        }
        let n = node_cell.len();
        Self {
            n,
            arcs: BTreeMap::new(),
            source: vec![0.0; n],
            sink: vec![0.0; n],
            node_cell,
            cell_node,
            skipped_rays: 0,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn node_of_cell(&self, c: CellHandle) -> Option<u32> {
        match self.cell_node.get(c.0 as usize) {
            Some(&n) if n != NO_NODE => Some(n),
            _ => None,
        }
    }

    pub fn add_arc(&mut self, from: u32, to: u32, cap: f64) {
        debug_assert!(cap >= 0.0 && cap.is_finite());
        if from == to {
            return;
        }
        *self.arcs.entry((from, to)).or_insert(0.0) += cap;
    }

    pub fn add_source_cap(&mut self, node: u32, cap: f64) {
        self.source[node as usize] += cap;
    }

    pub fn add_sink_cap(&mut self, node: u32, cap: f64) {
        self.sink[node as usize] += cap;
    }

    /// Adds one camera-point visibility ray.
    pub fn accumulate_ray(
        &mut self,
        tri: &Tetrahedralization,
        cam: &Camera,
        sample: &PointSample,
        params: &VisParams,
    ) -> Result<(), GraphCutError> {
        if !sample.visibility.contains(&(cam.id as u32)) {
            return Err(GraphCutError::CameraNotVisible(cam.id));
        }
        let p = sample.position;
        let dir = p - cam.center;
        let dist_p = dir.norm();
        if dist_p == 0.0 {
            self.skipped_rays += 1;
            return Ok(());
        }
        let dir = dir / dist_p;
        let p_ext = crate::geom::Point3::from(
            p.coords + dir * (params.sink_offset_mult * params.sigma),
        );
        let walk = tri.walk_ray(&cam.center, &p_ext)?;
        if walk.cells.is_empty() {
            self.skipped_rays += 1;
            return Ok(());
        }
        // (a) Camera cell to source. Outside the hull the camera sits in an
        // infinite cell, which is already source-merged.
        if !walk.clipped_start {
            let node = self.cell_node[walk.cells[0].0 as usize];
            self.add_source_cap(node, params.alpha_vis);
        }
        // (b) Directed facet votes in ray direction, for crossings between
        // the camera and the point.
        for crossing in &walk.crossings {
            if (crossing.point - cam.center).norm() >= dist_p {
                continue;
            }
            let to = self.node_of_cell(crossing.to);
            let Some(to) = to else { continue }; // arc into the hull exterior: no-op
            let d = (crossing.point - p).norm();
            let w = params.facet_weight(d);
            match self.node_of_cell(crossing.from) {
                Some(from) => self.add_arc(from, to, w),
                None => self.add_source_cap(to, w), // hull entry: from the source side
            }
        }
        // (c) The cell behind the point (clipped to the last finite cell
        // along the walk) to the sink.
        let last = *walk.cells.last().expect("non-empty");
        let node = self.cell_node[last.0 as usize];
        self.add_sink_cap(node, params.alpha_vis);
        Ok(())
    }

    /// Surface-quality prior: every arc between two finite cells gains
    /// `quality_weight` in both directions.
    pub fn add_quality_prior(&mut self, tri: &Tetrahedralization, params: &VisParams) {
        if params.quality_weight == 0.0 {
            return;
        }
        for c in tri.finite_cells() {
            let u = self.cell_node[c.0 as usize];
            for n in tri.cell_neighbors(c) {
                if tri.is_infinite(n) || n.0 <= c.0 {
                    continue;
                }
                let v = self.cell_node[n.0 as usize];
                self.add_arc(u, v, params.quality_weight);
                self.add_arc(v, u, params.quality_weight);
            }
        }
    }

    /// Exact minimum s-t cut (Dinic). Deterministic for identical graphs;
    /// ties are broken by node index. Nodes on the source side are free
    /// space.
    pub fn min_cut(&self) -> MinCut {
        let mut solver = maxflow::Dinic::new(self.n + 2);
        let s = self.n as u32;
        let t = self.n as u32 + 1;
        for (&(u, v), &cap) in &self.arcs {
            if cap > 0.0 {
                solver.add_edge(u, v, cap);
            }
        }
        for (u, &cap) in self.source.iter().enumerate() {
            if cap > 0.0 {
                solver.add_edge(s, u as u32, cap);
            }
        }
        for (u, &cap) in self.sink.iter().enumerate() {
            if cap > 0.0 {
                solver.add_edge(u as u32, t, cap);
            }
        }
        let flow = solver.max_flow(s, t);
        let reach = solver.residual_reachable(s);
        MinCut { source_side: (0..self.n).map(|u| reach[u]).collect(), cut_value: flow }
    }

    /// Capacity of the cut induced by a labeling (`true` = source side),
    /// recomputed independently of the solver.
    pub fn cut_capacity(&self, source_side: &[bool]) -> f64 {
        let mut total = 0.0;
        for (&(u, v), &cap) in &self.arcs {
            if source_side[u as usize] && !source_side[v as usize] {
                total += cap;
            }
        }
        for (u, &cap) in self.source.iter().enumerate() {
            if !source_side[u] {
                total += cap;
            }
        }
        for (u, &cap) in self.sink.iter().enumerate() {
            if source_side[u] {
                total += cap;
            }
        }
        total
    }

    /// Writes the labeling into the triangulation: source side FREE, sink
    /// side MATTER, infinite cells FREE.
    pub fn apply_labels(&self, tri: &mut Tetrahedralization, cut: &MinCut) {
        let infinite: Vec<CellHandle> =
            tri.cell_handles().filter(|&c| tri.is_infinite(c)).collect();
        for c in infinite {
            tri.set_label(c, CellLabel::Free);
        }
        for (node, &c) in self.node_cell.iter().enumerate() {
            let label = if cut.source_side[node] { CellLabel::Free } else { CellLabel::Matter };
            tri.set_label(c, label);
        }
    }

    /// ASCII dump: node count, then `S u cap` / `u T cap` / `u v cap`
    /// triples for cross-checking against external max-flow tools.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "nodes {}", self.n);
        for (u, &cap) in self.source.iter().enumerate() {
            if cap > 0.0 {
                let _ = writeln!(out, "S {u} {cap:.17e}");
            }
        }
        for (u, &cap) in self.sink.iter().enumerate() {
            if cap > 0.0 {
                let _ = writeln!(out, "{u} T {cap:.17e}");
            }
        }
        for (&(u, v), &cap) in &self.arcs {
            if cap > 0.0 {
                let _ = writeln!(out, "{u} {v} {cap:.17e}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests;
