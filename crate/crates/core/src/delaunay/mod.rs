//! Incremental 3D Delaunay tetrahedralization.
//!
//! Bowyer-Watson insertion with a conflict cavity, exact predicates from
//! [`crate::geom`], and a symbolic infinite vertex so every finite facet is
//! shared by exactly two cells. Ties (cospherical or coplanar input) are
//! handled by a cavity-repair pass that grows the conflict region until the
//! star fill is valid, so the structure stays a conforming complex on any
//! input.
//!
//! Cells store their four vertices and the four face-neighbors (neighbor
//! `k` lies across the facet opposite vertex `k`). Finite cells keep
//! `orient3d(v0, v1, v2, v3) > 0`; infinite cells keep the infinite vertex
//! at slot 3.

mod walk;

pub use walk::{LocateResult, RayCrossing, RayWalk, WalkError};

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geom::{insphere, orient3d, orient3d_exact, Point3};

/// Vertex index; `INFINITE_VERTEX` is the symbolic vertex at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexHandle(pub u32);

/// Stable cell index; valid until the cell is removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellHandle(pub u32);

pub const INFINITE_VERTEX: u32 = u32::MAX;

/// Free-space/matter label carried by every tetrahedron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellLabel {
    Unset,
    Free,
    Matter,
}

#[derive(Debug, Error, PartialEq)]
pub enum DelaunayError {
    #[error("need at least 4 affinely independent points, got {0} distinct")]
    TooFewPoints(usize),
    #[error("input points are all coplanar")]
    Coplanar,
    #[error("invalid handle {0}")]
    InvalidHandle(u32),
    #[error("operation requires a finite cell")]
    InfiniteCell,
    #[error("cavity for inserted point could not be repaired")]
    CavityFailure,
}

/// Facet opposite slot `k`, ordered so that for a positively oriented cell
/// `orient3d(f0, f1, f2, verts[k]) > 0` (the apex sees the facet CCW).
const OPP: [[usize; 3]; 4] = [[1, 3, 2], [0, 2, 3], [0, 3, 1], [0, 1, 2]];

#[derive(Debug, Clone)]
pub(crate) struct Cell {
    pub verts: [u32; 4],
    pub neighbors: [u32; 4],
    pub label: CellLabel,
    pub removed: bool,
}

impl Cell {
    fn slot_of(&self, v: u32) -> Option<usize> {
        self.verts.iter().position(|&w| w == v)
    }
}

const NO_CELL: u32 = u32::MAX;

/// 3D cell complex with per-tetrahedron labels, adjacency and incidence
/// queries.
#[derive(Debug, Clone)]
pub struct Tetrahedralization {
    pub(crate) points: Vec<Point3>,
    pub(crate) cells: Vec<Cell>,
    incident_cell: Vec<u32>,
    /// Input point index -> vertex handle (duplicates merged at build time).
    point_vertex: Vec<u32>,
    /// Set by centroid splits: the global Delaunay property no longer holds.
    delaunay_property: bool,
    bbox_diag: f64,
}

impl Tetrahedralization {
    /// Builds the Delaunay tetrahedralization of `points` with the default
    /// insertion-order seed.
    pub fn build(points: &[Point3]) -> Result<Self, DelaunayError> {
        Self::build_with_seed(points, 0x5eed)
    }

    pub fn build_with_seed(points: &[Point3], seed: u64) -> Result<Self, DelaunayError> {
        let (mut tri, distinct) = Self::merge_points(points);
        if distinct.len() < 4 {
            return Err(DelaunayError::TooFewPoints(distinct.len()));
        }
        let mut order: Vec<usize> = (0..distinct.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);

        // First simplex: four affinely independent points, scanned in
        // insertion order.
        let i0 = order[0];
        let mut i1 = None;
        for (pos, &i) in order.iter().enumerate().skip(1) {
            if distinct[i] != distinct[i0] {
                i1 = Some(pos);
                break;
            }
        }
        let p1 = i1.ok_or(DelaunayError::TooFewPoints(1))?;
        let i1 = order[p1];
        let mut i2 = None;
        for (pos, &i) in order.iter().enumerate().skip(p1 + 1) {
            if !collinear(&distinct[i0], &distinct[i1], &distinct[i]) {
                i2 = Some(pos);
                break;
            }
        }
        let p2 = i2.ok_or(DelaunayError::Coplanar)?;
        let i2 = order[p2];
        let mut i3 = None;
        for (pos, &i) in order.iter().enumerate().skip(p2 + 1) {
            if orient3d(&distinct[i0], &distinct[i1], &distinct[i2], &distinct[i]) != 0 {
                i3 = Some(pos);
                break;
            }
        }
        let p3 = i3.ok_or(DelaunayError::Coplanar)?;
        let i3 = order[p3];

        tri.init_first_simplex(&distinct, [i0, i1, i2, i3]);
        let mut hint = CellHandle(0);
        for (pos, &i) in order.iter().enumerate() {
            if pos == 0 || pos == p1 || pos == p2 || pos == p3 {
                continue;
            }
            hint = tri.insert_distinct(i as u32, hint)?;
        }
        Ok(tri)
    }

    /// Merge near-duplicate points (closer than 1e-12 of the bbox diagonal)
    /// and size the vertex tables; returns the distinct point list.
    fn merge_points(points: &[Point3]) -> (Self, Vec<Point3>) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let diag = if points.is_empty() { 0.0 } else { (hi - lo).norm() };
        let tol = 1e-12 * diag;
        let mut grid: HashMap<(i128, i128, i128), Vec<u32>> = HashMap::new();
        let mut distinct: Vec<Point3> = Vec::new();
        let mut point_vertex = Vec::with_capacity(points.len());
        let quant = |c: f64| -> i128 {
            if tol > 0.0 {
                (c / tol).floor() as i128
            } else {
                0
            }
        };
        for p in points {
            let key = (quant(p.x), quant(p.y), quant(p.z));
            let mut found = None;
            'search: for dx in -1..=1i128 {
                for dy in -1..=1i128 {
                    for dz in -1..=1i128 {
                        let k = (key.0 + dx, key.1 + dy, key.2 + dz);
                        if let Some(ids) = grid.get(&k) {
                            for &id in ids {
                                if (distinct[id as usize] - p).norm() <= tol {
                                    found = Some(id);
                                    break 'search;
                                }
                            }
                        }
                    }
                }
            }
            let id = match found {
                Some(id) => id,
                None => {
                    let id = distinct.len() as u32;
                    distinct.push(*p);
                    grid.entry(key).or_default().push(id);
                    id
                }
            };
            point_vertex.push(id);
        }
        let n = distinct.len();
        (
            Self {
                points: distinct.clone(),
                cells: Vec::new(),
                incident_cell: vec![NO_CELL; n],
                point_vertex,
                delaunay_property: true,
                bbox_diag: diag,
            },
            distinct,
        )
    }

    fn init_first_simplex(&mut self, pts: &[Point3], mut ids: [usize; 4]) {
        if orient3d(&pts[ids[0]], &pts[ids[1]], &pts[ids[2]], &pts[ids[3]]) < 0 {
            ids.swap(0, 1);
        }
        let v = [ids[0] as u32, ids[1] as u32, ids[2] as u32, ids[3] as u32];
        // Finite cell 0 plus one infinite cell per facet.
        self.cells.push(Cell {
            verts: v,
            neighbors: [1, 2, 3, 4],
            label: CellLabel::Unset,
            removed: false,
        });
        for k in 0..4 {
            // Outward orientation: reverse of the apex-positive OPP order.
            let f = [v[OPP[k][0]], v[OPP[k][2]], v[OPP[k][1]]];
            self.cells.push(Cell {
                verts: [f[0], f[1], f[2], INFINITE_VERTEX],
                neighbors: [NO_CELL, NO_CELL, NO_CELL, 0],
                label: CellLabel::Unset,
                removed: false,
            });
        }
        // Glue the infinite cells to each other across their facets that
        // contain the infinite vertex.
        let mut edge_map: HashMap<(u32, u32), (u32, usize)> = HashMap::new();
        for c in 1..=4u32 {
            for s in 0..3 {
                let f = facet_verts(&self.cells[c as usize], s);
                let mut fin: Vec<u32> = f.iter().copied().filter(|&x| x != INFINITE_VERTEX).collect();
                fin.sort_unstable();
                let key = (fin[0], fin[1]);
                if let Some((oc, os)) = edge_map.remove(&key) {
                    self.cells[c as usize].neighbors[s] = oc;
                    self.cells[oc as usize].neighbors[os] = c;
                } else {
                    edge_map.insert(key, (c, s));
                }
            }
        }
        for &vi in &v {
            self.incident_cell[vi as usize] = 0;
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.points.len()
    }

    /// Handles of all live cells, infinite included.
    pub fn cell_handles(&self) -> impl Iterator<Item = CellHandle> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.removed)
            .map(|(i, _)| CellHandle(i as u32))
    }

    pub fn finite_cells(&self) -> impl Iterator<Item = CellHandle> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.removed && c.verts[3] != INFINITE_VERTEX)
            .map(|(i, _)| CellHandle(i as u32))
    }

    pub fn n_finite_cells(&self) -> usize {
        self.finite_cells().count()
    }

    /// Length of the raw cell table (live and removed), for dense
    /// handle-indexed side tables.
    pub fn raw_cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn is_infinite(&self, c: CellHandle) -> bool {
        self.cells[c.0 as usize].verts[3] == INFINITE_VERTEX
    }

    pub fn is_live(&self, c: CellHandle) -> bool {
        (c.0 as usize) < self.cells.len() && !self.cells[c.0 as usize].removed
    }

    pub fn cell_vertices(&self, c: CellHandle) -> [u32; 4] {
        self.cells[c.0 as usize].verts
    }

    pub fn cell_neighbors(&self, c: CellHandle) -> [CellHandle; 4] {
        self.cells[c.0 as usize].neighbors.map(CellHandle)
    }

    pub fn label(&self, c: CellHandle) -> CellLabel {
        self.cells[c.0 as usize].label
    }

    pub fn set_label(&mut self, c: CellHandle, label: CellLabel) {
        self.cells[c.0 as usize].label = label;
    }

    pub fn position(&self, v: VertexHandle) -> &Point3 {
        &self.points[v.0 as usize]
    }

    /// Vertex handle the `i`-th input point was merged into.
    pub fn vertex_of_point(&self, i: usize) -> VertexHandle {
        VertexHandle(self.point_vertex[i])
    }

    pub fn bbox_diagonal(&self) -> f64 {
        self.bbox_diag
    }

    /// False once a centroid split has been applied.
    pub fn has_delaunay_property(&self) -> bool {
        self.delaunay_property
    }

    /// Facet of `c` opposite slot `s`, apex-positive order (for finite
    /// cells: `orient3d(f, verts[s]) > 0`).
    pub(crate) fn facet(&self, c: CellHandle, s: usize) -> [u32; 3] {
        facet_verts(&self.cells[c.0 as usize], s)
    }

    /// Finite facet of an infinite cell, ordered so its normal points out
    /// of the convex hull. Derived from the finite neighbor across it.
    pub(crate) fn outward_hull_facet(&self, c: CellHandle) -> [u32; 3] {
        debug_assert!(self.is_infinite(c));
        let fin = self.cells[c.0 as usize].neighbors[3];
        let mirror = self.mirror_slot(CellHandle(fin), c);
        let f = self.facet(CellHandle(fin), mirror);
        [f[0], f[2], f[1]]
    }

    /// Slot of `c` whose neighbor is `n`.
    pub(crate) fn mirror_slot(&self, c: CellHandle, n: CellHandle) -> usize {
        self.cells[c.0 as usize]
            .neighbors
            .iter()
            .position(|&x| x == n.0)
            .expect("neighbor relation must be symmetric")
    }

    fn pt(&self, v: u32) -> &Point3 {
        &self.points[v as usize]
    }

    /// Conflict predicate of the Bowyer-Watson cavity: `p` strictly inside
    /// the circumsphere of a finite cell; for infinite cells, strictly
    /// outside the hull facet, with coplanar ties delegated to the finite
    /// neighbor.
    fn in_conflict(&self, c: CellHandle, p: &Point3) -> bool {
        let cell = &self.cells[c.0 as usize];
        if cell.verts[3] == INFINITE_VERTEX {
            let f = self.outward_hull_facet(c);
            match orient3d(self.pt(f[0]), self.pt(f[1]), self.pt(f[2]), p) {
                1 => true,
                -1 => false,
                _ => {
                    let fin = CellHandle(cell.neighbors[3]);
                    let v = self.cells[fin.0 as usize].verts;
                    insphere(self.pt(v[0]), self.pt(v[1]), self.pt(v[2]), self.pt(v[3]), p)
                        .map(|s| s > 0)
                        .unwrap_or(false)
                }
            }
        } else {
            let v = cell.verts;
            insphere(self.pt(v[0]), self.pt(v[1]), self.pt(v[2]), self.pt(v[3]), p)
                .map(|s| s > 0)
                .unwrap_or(false)
        }
    }

    fn insert_distinct(&mut self, vid: u32, hint: CellHandle) -> Result<CellHandle, DelaunayError> {
        let p = self.points[vid as usize];
        // Seed the cavity with every cell containing p (handles points on
        // facets/edges) or, outside the hull, with a conflicting infinite
        // cell.
        let mut seeds: Vec<CellHandle> = Vec::new();
        match self.locate_from(&p, hint) {
            walk::LocateResult::Cell(c) => seeds.extend(self.containing_cells(&p, c)),
            walk::LocateResult::OutsideHull(inf) => seeds.push(inf),
        }
        let mut in_cavity = vec![false; self.cells.len()];
        let mut cavity: Vec<CellHandle> = Vec::new();
        let mut queue: VecDeque<CellHandle> = VecDeque::new();
        let mut seeded = false;
        for s in seeds {
            if self.in_conflict(s, &p) && !in_cavity[s.0 as usize] {
                in_cavity[s.0 as usize] = true;
                cavity.push(s);
                queue.push_back(s);
                seeded = true;
            }
        }
        if !seeded {
            // Maximally degenerate: p on the circumsphere of each cell that
            // contains it. Take the containing cells themselves as cavity.
            match self.locate_from(&p, hint) {
                walk::LocateResult::Cell(c) => {
                    for s in self.containing_cells(&p, c) {
                        if !in_cavity[s.0 as usize] {
                            in_cavity[s.0 as usize] = true;
                            cavity.push(s);
                            queue.push_back(s);
                        }
                    }
                }
                walk::LocateResult::OutsideHull(_) => return Err(DelaunayError::CavityFailure),
            }
        }
        while let Some(c) = queue.pop_front() {
            for s in 0..4 {
                let n = self.cells[c.0 as usize].neighbors[s];
                if n == NO_CELL || in_cavity[n as usize] {
                    continue;
                }
                if self.in_conflict(CellHandle(n), &p) {
                    in_cavity[n as usize] = true;
                    cavity.push(CellHandle(n));
                    queue.push_back(CellHandle(n));
                }
            }
        }

        // Repair: grow the cavity until every boundary facet sees p
        // strictly from the cavity side (or, for hull-edge facets, until
        // the new hull facet is non-degenerate).
        loop {
            let mut grew = false;
            for i in 0..cavity.len() {
                let c = cavity[i];
                for s in 0..4 {
                    let n = self.cells[c.0 as usize].neighbors[s];
                    if in_cavity[n as usize] {
                        continue;
                    }
                    if !self.boundary_facet_valid(c, s, CellHandle(n), &p) {
                        in_cavity[n as usize] = true;
                        cavity.push(CellHandle(n));
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
            if cavity.len() == self.cells.iter().filter(|c| !c.removed).count() {
                return Err(DelaunayError::CavityFailure);
            }
        }

        self.fill_cavity(vid, &cavity, &in_cavity);
        Ok(CellHandle(self.incident_cell[vid as usize]))
    }

    /// All live cells whose closure contains `p`, starting from one of them.
    fn containing_cells(&self, p: &Point3, start: CellHandle) -> Vec<CellHandle> {
        let mut out = vec![start];
        let mut seen = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            for s in 0..4 {
                if self.is_infinite(c) && s == 3 {
                    continue;
                }
                let f = self.facet(c, s);
                if f.contains(&INFINITE_VERTEX) {
                    continue;
                }
                if orient3d(self.pt(f[0]), self.pt(f[1]), self.pt(f[2]), p) == 0 {
                    let n = CellHandle(self.cells[c.0 as usize].neighbors[s]);
                    if !seen.contains(&n) && !self.is_infinite(n) && self.contains_point(n, p) {
                        seen.push(n);
                        out.push(n);
                        queue.push_back(n);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn contains_point(&self, c: CellHandle, p: &Point3) -> bool {
        if self.is_infinite(c) {
            return false;
        }
        (0..4).all(|s| {
            let f = self.facet(c, s);
            orient3d(self.pt(f[0]), self.pt(f[1]), self.pt(f[2]), p) >= 0
        })
    }

    fn boundary_facet_valid(&self, k: CellHandle, s: usize, o: CellHandle, p: &Point3) -> bool {
        let f = self.facet(k, s);
        if f.contains(&INFINITE_VERTEX) {
            // Hull-edge facet: the new hull facet (edge + p) must not be
            // degenerate.
            let fin: Vec<u32> = f.iter().copied().filter(|&x| x != INFINITE_VERTEX).collect();
            return !collinear(self.pt(fin[0]), self.pt(fin[1]), p);
        }
        if !self.is_infinite(o) {
            let mirror = self.mirror_slot(o, k);
            let fo = self.facet(o, mirror);
            orient3d(self.pt(fo[0]), self.pt(fo[1]), self.pt(fo[2]), p) == -1
        } else {
            // k is finite: p must be strictly on k's side of the facet.
            orient3d(self.pt(f[0]), self.pt(f[1]), self.pt(f[2]), p) == 1
        }
    }

    fn fill_cavity(&mut self, vid: u32, cavity: &[CellHandle], in_cavity: &[bool]) {
        // Boundary facets in deterministic order.
        struct Boundary {
            verts_in: [u32; 3],
            outside: u32,
            outside_slot: usize,
        }
        let mut boundary: Vec<Boundary> = Vec::new();
        for &c in cavity {
            for s in 0..4 {
                let n = self.cells[c.0 as usize].neighbors[s];
                if in_cavity[n as usize] {
                    continue;
                }
                let f = self.facet(c, s);
                let outside_slot = self.mirror_slot(CellHandle(n), c);
                // Order the facet so the new cell (f, p) is positively
                // oriented: apex-positive as seen from the cavity cell.
                boundary.push(Boundary { verts_in: f, outside: n, outside_slot });
            }
        }

        let mut new_cells: Vec<u32> = Vec::with_capacity(boundary.len());
        let mut edge_map: HashMap<(u32, u32), (u32, usize)> = HashMap::new();
        for b in &boundary {
            let id = self.cells.len() as u32;
            let f = b.verts_in;
            let (verts, p_slot) = if f.contains(&INFINITE_VERTEX) {
                // New infinite cell: keep the infinite vertex at slot 3.
                let fin: Vec<u32> = f.iter().copied().filter(|&x| x != INFINITE_VERTEX).collect();
                ([fin[0], fin[1], vid, INFINITE_VERTEX], 2usize)
            } else {
                ([f[0], f[1], f[2], vid], 3usize)
            };
            let mut neighbors = [NO_CELL; 4];
            neighbors[p_slot] = b.outside;
            self.cells.push(Cell { verts, neighbors, label: CellLabel::Unset, removed: false });
            self.cells[b.outside as usize].neighbors[b.outside_slot] = id;
            new_cells.push(id);
            // Glue sibling facets: each facet of the new cell other than
            // the base contains p; key it by its two other vertices.
            for s in 0..4 {
                if s == p_slot {
                    continue;
                }
                let fs = facet_verts(&self.cells[id as usize], s);
                let mut others: Vec<u32> = fs.iter().copied().filter(|&x| x != vid).collect();
                others.sort_unstable();
                let key = (others[0], others[1]);
                if let Some((oc, os)) = edge_map.remove(&key) {
                    self.cells[id as usize].neighbors[s] = oc;
                    self.cells[oc as usize].neighbors[os] = id;
                } else {
                    edge_map.insert(key, (id, s));
                }
            }
        }
        debug_assert!(edge_map.is_empty(), "cavity boundary must close up");

        // Fix orientation of the new cells. Finite cells must be positive;
        // infinite cells derive their orientation from the finite side, so
        // only finite ones need the check.
        for &id in &new_cells {
            let v = self.cells[id as usize].verts;
            if v[3] != INFINITE_VERTEX {
                let o = orient3d(self.pt(v[0]), self.pt(v[1]), self.pt(v[2]), self.pt(v[3]));
                debug_assert!(o != 0, "degenerate new cell");
                if o < 0 {
                    self.cells[id as usize].verts.swap(0, 1);
                    self.cells[id as usize].neighbors.swap(0, 1);
                }
            }
        }

        for &c in cavity {
            self.cells[c.0 as usize].removed = true;
        }
        for &id in &new_cells {
            for &v in &self.cells[id as usize].verts {
                if v != INFINITE_VERTEX {
                    self.incident_cell[v as usize] = id;
                }
            }
        }
    }

    /// Splits finite cell `c` at its centroid into four cells that inherit
    /// its label. This is a barycentric subdivision, not a Delaunay
    /// insertion: the Delaunay property is intentionally given up so the
    /// split stays local.
    pub fn centroid_split(&mut self, c: CellHandle) -> Result<[CellHandle; 4], DelaunayError> {
        if !self.is_live(c) {
            return Err(DelaunayError::InvalidHandle(c.0));
        }
        if self.is_infinite(c) {
            return Err(DelaunayError::InfiniteCell);
        }
        let cell = self.cells[c.0 as usize].clone();
        let centroid = Point3::from(
            (self.pt(cell.verts[0]).coords
                + self.pt(cell.verts[1]).coords
                + self.pt(cell.verts[2]).coords
                + self.pt(cell.verts[3]).coords)
                / 4.0,
        );
        let m = self.points.len() as u32;
        self.points.push(centroid);
        self.incident_cell.push(NO_CELL);

        let base = self.cells.len() as u32;
        let mut ids = [CellHandle(0); 4];
        for k in 0..4 {
            // Replace vertex k with the centroid; orientation is preserved
            // because the centroid is interior.
            let mut verts = cell.verts;
            verts[k] = m;
            let mut neighbors = [NO_CELL; 4];
            neighbors[k] = cell.neighbors[k];
            for j in 0..4 {
                if j != k {
                    neighbors[j] = base + j as u32;
                }
            }
            self.cells.push(Cell { verts, neighbors, label: cell.label, removed: false });
            ids[k] = CellHandle(base + k as u32);
        }
        for k in 0..4 {
            let outer = cell.neighbors[k];
            if outer != NO_CELL {
                let slot = self.mirror_slot(CellHandle(outer), c);
                self.cells[outer as usize].neighbors[slot] = base + k as u32;
            }
        }
        self.cells[c.0 as usize].removed = true;
        self.incident_cell[m as usize] = base;
        for k in 0..4 {
            // Cell k does not contain vertex k; point each original vertex
            // at a sub-cell that does contain it.
            let other = (k + 1) % 4;
            self.incident_cell[cell.verts[k] as usize] = base + other as u32;
        }
        self.delaunay_property = false;
        Ok(ids)
    }

    /// Live cells (infinite included) incident to `v`, sorted by handle.
    pub fn incident_cells(&self, v: VertexHandle) -> Result<Vec<CellHandle>, DelaunayError> {
        if v.0 as usize >= self.points.len() {
            return Err(DelaunayError::InvalidHandle(v.0));
        }
        let start = self.incident_cell[v.0 as usize];
        if start == NO_CELL {
            return Ok(Vec::new());
        }
        let mut seen = BTreeSet::new();
        seen.insert(start);
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            for s in 0..4 {
                let n = self.cells[c as usize].neighbors[s];
                if n == NO_CELL || seen.contains(&n) {
                    continue;
                }
                // Move only across facets that contain v.
                if self.cells[c as usize].verts[s] != v.0
                    && self.cells[n as usize].slot_of(v.0).is_some()
                {
                    seen.insert(n);
                    queue.push_back(n);
                }
            }
        }
        Ok(seen.into_iter().map(CellHandle).collect())
    }

    /// Lengths of all finite edges, each edge counted once, ordered by
    /// vertex-id pair.
    pub fn edge_lengths(&self) -> Vec<f64> {
        let mut edges: BTreeSet<(u32, u32)> = BTreeSet::new();
        for c in self.finite_cells() {
            let v = self.cells[c.0 as usize].verts;
            for i in 0..4 {
                for j in (i + 1)..4 {
                    edges.insert((v[i].min(v[j]), v[i].max(v[j])));
                }
            }
        }
        // Infinite cells contribute their finite (hull) edges too, but all
        // hull edges already belong to some finite cell.
        edges
            .into_iter()
            .map(|(a, b)| (self.pt(a) - self.pt(b)).norm())
            .collect()
    }

    /// ASCII dump of the live cells (vertex indices + label) for oracle
    /// cross-checking.
    pub fn dump_cells(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# cells {}", self.cell_handles().count());
        for c in self.cell_handles() {
            let cell = &self.cells[c.0 as usize];
            let label = match cell.label {
                CellLabel::Unset => "U",
                CellLabel::Free => "F",
                CellLabel::Matter => "M",
            };
            let vs: Vec<String> = cell
                .verts
                .iter()
                .map(|&v| if v == INFINITE_VERTEX { "inf".into() } else { v.to_string() })
                .collect();
            let _ = writeln!(out, "{} {} {}", c.0, vs.join(" "), label);
        }
        out
    }

    /// Structural audit: neighbor symmetry, facet sharing, orientation and
    /// incidence pointers. Returns a description of the first violation.
    pub fn validate(&self) -> Result<(), String> {
        let mut facet_count: HashMap<[u32; 3], u32> = HashMap::new();
        for c in self.cell_handles() {
            let cell = &self.cells[c.0 as usize];
            for s in 0..4 {
                let n = cell.neighbors[s];
                if n == NO_CELL {
                    return Err(format!("cell {} slot {s} has no neighbor", c.0));
                }
                if self.cells[n as usize].removed {
                    return Err(format!("cell {} slot {s} points at removed cell {n}", c.0));
                }
                let back = self.cells[n as usize].neighbors.iter().filter(|&&x| x == c.0).count();
                if back != 1 {
                    return Err(format!("asymmetric neighbors: {} <-> {n}", c.0));
                }
                let mirror = self.mirror_slot(CellHandle(n), c);
                let mut f1 = self.facet(c, s);
                let mut f2 = self.facet(CellHandle(n), mirror);
                f1.sort_unstable();
                f2.sort_unstable();
                if f1 != f2 {
                    return Err(format!("facet mismatch between {} and {n}", c.0));
                }
                if !f1.contains(&INFINITE_VERTEX) {
                    *facet_count.entry(f1).or_insert(0) += 1;
                }
            }
            if cell.verts[3] != INFINITE_VERTEX {
                if cell.verts.contains(&INFINITE_VERTEX) {
                    return Err(format!("cell {}: infinite vertex not at slot 3", c.0));
                }
                let v = cell.verts;
                if orient3d_exact(self.pt(v[0]), self.pt(v[1]), self.pt(v[2]), self.pt(v[3])) <= 0 {
                    return Err(format!("cell {} is not positively oriented", c.0));
                }
            }
        }
        for (f, count) in facet_count {
            // Each finite facet is seen once from each of its two cells.
            if count != 2 {
                return Err(format!("facet {f:?} shared by {count} != 2 cells"));
            }
        }
        for (v, &ic) in self.incident_cell.iter().enumerate() {
            if ic == NO_CELL {
                continue;
            }
            if self.cells[ic as usize].removed {
                return Err(format!("vertex {v} incident cell is removed"));
            }
            if self.cells[ic as usize].slot_of(v as u32).is_none() {
                return Err(format!("vertex {v} incident cell does not contain it"));
            }
        }
        Ok(())
    }

    /// Sum of finite cell volumes; equals the hull volume for a conforming
    /// complex.
    pub fn total_volume(&self) -> f64 {
        self.finite_cells()
            .map(|c| {
                let v = self.cells[c.0 as usize].verts;
                let a = self.pt(v[0]);
                (self.pt(v[1]) - a)
                    .cross(&(self.pt(v[2]) - a))
                    .dot(&(self.pt(v[3]) - a))
                    / 6.0
            })
            .sum()
    }

    /// Hull volume via the divergence theorem over the outward hull facets;
    /// independent of the interior cell structure.
    pub fn hull_volume(&self) -> f64 {
        let mut vol = 0.0;
        for c in self.cell_handles() {
            if !self.is_infinite(c) {
                continue;
            }
            let f = self.outward_hull_facet(c);
            let (a, b, d) = (self.pt(f[0]), self.pt(f[1]), self.pt(f[2]));
            vol += a.coords.dot(&b.coords.cross(&d.coords)) / 6.0;
        }
        vol
    }
}

pub(crate) fn facet_verts(cell: &Cell, s: usize) -> [u32; 3] {
    [cell.verts[OPP[s][0]], cell.verts[OPP[s][1]], cell.verts[OPP[s][2]]]
}

/// Exact collinearity test.
pub(crate) fn collinear(a: &Point3, b: &Point3, c: &Point3) -> bool {
    // (b - a) x (c - a) == 0, checked one component at a time with the
    // exact orientation predicate applied to 2D projections lifted to 3D.
    let cross = (b - a).cross(&(c - a));
    if cross.norm_squared() > 0.0 {
        // A nonzero floating cross product of exact differences can still
        // be spurious; confirm with exact arithmetic only when it is tiny.
        let scale = (b - a).norm_squared().max((c - a).norm_squared());
        if cross.norm_squared() > 1e-20 * scale * scale {
            return false;
        }
    }
    // Exact fallback: c is collinear with a,b iff it is coplanar with two
    // independent offsets of the line.
    let d = b - a;
    let (e1, e2) = orthogonal_pair(&d);
    let q1 = Point3::from(a.coords + e1);
    let q2 = Point3::from(a.coords + e2);
    orient3d_exact(a, b, &q1, c) == 0 && orient3d_exact(a, b, &q2, c) == 0
}

fn orthogonal_pair(d: &crate::geom::Vec3) -> (crate::geom::Vec3, crate::geom::Vec3) {
    let ax = d.x.abs();
    let ay = d.y.abs();
    let az = d.z.abs();
    let u = if ax <= ay && ax <= az {
        crate::geom::Vec3::new(1.0, 0.0, 0.0)
    } else if ay <= az {
        crate::geom::Vec3::new(0.0, 1.0, 0.0)
    } else {
        crate::geom::Vec3::new(0.0, 0.0, 1.0)
    };
    (u, d.cross(&u))
}

#[cfg(test)]
mod tests;
