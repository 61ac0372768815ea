//! Singular-vertex detection and preemptive fixing on the labeled
//! tetrahedral complex, plus boundary surface extraction.
//!
//! A boundary vertex is singular when its incident tetrahedra split into
//! three or more connected components across the free/matter labels
//! (connectivity through shared facets incident to the vertex; infinite
//! cells participate as free space). Fixing relabels or centroid-splits
//! every component except the largest, first for matter then for free,
//! over the three-pass schedule relabel/split/relabel. Whatever survives
//! is handled by a vertex-split fallback on the extracted mesh, which
//! duplicates each singular vertex once per surface fan.

mod surface;

pub use surface::{SurfaceMesh, NO_FACET};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::delaunay::{CellHandle, CellLabel, DelaunayError, Tetrahedralization, VertexHandle};

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("facet {0} references an out-of-range vertex")]
    BadIndex(usize),
    #[error("facet {0} is degenerate (zero area)")]
    DegenerateFacet(usize),
    #[error("cell {0} is unlabeled")]
    UnlabeledCell(u32),
    #[error(transparent)]
    Delaunay(#[from] DelaunayError),
}

fn is_free(tri: &Tetrahedralization, c: CellHandle) -> Result<bool, MeshError> {
    if tri.is_infinite(c) {
        return Ok(true);
    }
    match tri.label(c) {
        CellLabel::Free => Ok(true),
        CellLabel::Matter => Ok(false),
        CellLabel::Unset => Err(MeshError::UnlabeledCell(c.0)),
    }
}

/// Connected components of the star of `v`, split by label class.
/// Components are facet-connected within the star and sorted by ascending
/// (cardinality, min cell handle).
fn star_components(
    tri: &Tetrahedralization,
    v: VertexHandle,
) -> Result<(Vec<Vec<CellHandle>>, Vec<Vec<CellHandle>>), MeshError> {
    let star = tri.incident_cells(v)?;
    let index: HashMap<u32, usize> = star.iter().enumerate().map(|(i, c)| (c.0, i)).collect();
    let free: Vec<bool> = star.iter().map(|&c| is_free(tri, c)).collect::<Result<_, _>>()?;
    let mut comp = vec![usize::MAX; star.len()];
    let mut comps: Vec<(bool, Vec<CellHandle>)> = Vec::new();
    for i in 0..star.len() {
        if comp[i] != usize::MAX {
            continue;
        }
        let id = comps.len();
        comp[i] = id;
        let mut members = vec![star[i]];
        let mut stack = vec![i];
        while let Some(cur) = stack.pop() {
            let c = star[cur];
            let verts = tri.cell_vertices(c);
            for (slot, n) in tri.cell_neighbors(c).into_iter().enumerate() {
                // The shared facet contains v iff v is not the opposite
                // vertex of the slot.
                if verts[slot] == v.0 {
                    continue;
                }
                if let Some(&j) = index.get(&n.0) {
                    if comp[j] == usize::MAX && free[j] == free[cur] {
                        comp[j] = id;
                        members.push(n);
                        stack.push(j);
                    }
                }
            }
        }
        members.sort();
        comps.push((free[i], members));
    }
    let mut free_comps: Vec<Vec<CellHandle>> = Vec::new();
    let mut matter_comps: Vec<Vec<CellHandle>> = Vec::new();
    for (f, members) in comps {
        if f {
            free_comps.push(members);
        } else {
            matter_comps.push(members);
        }
    }
    let key = |c: &Vec<CellHandle>| (c.len(), std::cmp::Reverse(c[0]));
    free_comps.sort_by_key(key);
    matter_comps.sort_by_key(key);
    Ok((free_comps, matter_comps))
}

/// A vertex is singular iff its star splits into three or more connected
/// components across the two labels. Interior vertices (single class,
/// single component) are not singular.
pub fn is_singular(tri: &Tetrahedralization, v: VertexHandle) -> Result<bool, MeshError> {
    let (free, matter) = star_components(tri, v)?;
    Ok(free.len() + matter.len() > 2)
}

/// All singular vertices in ascending order.
pub fn collect_singular(tri: &Tetrahedralization) -> Result<Vec<VertexHandle>, MeshError> {
    let mut out = Vec::new();
    for v in 0..tri.n_vertices() as u32 {
        let v = VertexHandle(v);
        if is_singular(tri, v)? {
            out.push(v);
        }
    }
    Ok(out)
}

/// For each still-singular vertex of `list` (in ascending order): every
/// matter component except the largest is relabeled to free (or
/// centroid-split when `split` is set), then the same symmetrically for
/// the recomputed free components. Components tied on cardinality keep
/// the one with the lowest minimal cell handle. Infinite cells are never
/// relabeled or split.
pub fn singular_vertex_fixing(
    tri: &mut Tetrahedralization,
    list: &[VertexHandle],
    split: bool,
) -> Result<(), MeshError> {
    let mut order: Vec<VertexHandle> = list.to_vec();
    order.sort();
    order.dedup();
    for v in order {
        if !is_singular(tri, v)? {
            continue;
        }
        // Matter phase: drop all but the largest component.
        let (_, matter) = star_components(tri, v)?;
        if matter.len() > 1 {
            for comp in &matter[..matter.len() - 1] {
                for &c in comp {
                    if split {
                        tri.centroid_split(c)?;
                    } else {
                        tri.set_label(c, CellLabel::Free);
                    }
                }
            }
        }
        // Free phase, on the updated star.
        let (free, _) = star_components(tri, v)?;
        if free.len() > 1 {
            for comp in &free[..free.len() - 1] {
                for &c in comp {
                    if tri.is_infinite(c) {
                        continue;
                    }
                    if split {
                        tri.centroid_split(c)?;
                    } else {
                        tri.set_label(c, CellLabel::Matter);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Outcome of the three-pass cleanup schedule.
#[derive(Debug, Clone)]
pub struct CleanupReport {
    /// Singular vertices before any fixing.
    pub initial: Vec<VertexHandle>,
    /// Initial component counts (free, matter) per initial singular vertex.
    pub initial_components: Vec<(usize, usize)>,
    /// Singular-vertex counts after passes 1 (relabel), 2 (split),
    /// 3 (relabel).
    pub after_pass: [usize; 3],
    /// Vertices still singular after all three passes.
    pub remaining: Vec<VertexHandle>,
    /// Pass (1-3) in which each initial vertex stopped being singular;
    /// 0 if it is still singular at the end.
    pub pass_fixed: Vec<u8>,
}

impl CleanupReport {
    pub fn before_count(&self) -> usize {
        self.initial.len()
    }

    /// CSV rows: vertex id, free components, matter components, pass fixed.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("vertex,cc_free,cc_matter,pass_fixed\n");
        for (i, v) in self.initial.iter().enumerate() {
            let (f, m) = self.initial_components[i];
            let _ = writeln!(out, "{},{},{},{}", v.0, f, m, self.pass_fixed[i]);
        }
        out
    }
}

/// Three-pass singular-vertex cleanup: collect + fix(relabel), collect +
/// fix(split), collect + fix(relabel).
pub fn cleanup(tri: &mut Tetrahedralization) -> Result<CleanupReport, MeshError> {
    let initial = collect_singular(tri)?;
    let mut initial_components = Vec::with_capacity(initial.len());
    for &v in &initial {
        let (f, m) = star_components(tri, v)?;
        initial_components.push((f.len(), m.len()));
    }
    let mut pass_fixed = vec![0u8; initial.len()];
    let mut after_pass = [0usize; 3];

    let passes: [(bool, usize); 3] = [(false, 0), (true, 1), (false, 2)];
    let mut list = initial.clone();
    for (split, idx) in passes {
        singular_vertex_fixing(tri, &list, split)?;
        list = collect_singular(tri)?;
        after_pass[idx] = list.len();
        for (i, &v) in initial.iter().enumerate() {
            if pass_fixed[i] == 0 && !list.contains(&v) {
                pass_fixed[i] = idx as u8 + 1;
            }
        }
    }
    Ok(CleanupReport {
        initial,
        initial_components,
        after_pass,
        remaining: list,
        pass_fixed,
    })
}

/// Extracts the oriented boundary between matter and free cells.
///
/// One facet per matter/free cell pair sharing a face, normal pointing
/// from matter into free space. Edge adjacency is radial: the partner
/// across an edge is found by rotating around the edge through the free
/// side, which stays well defined on edges with four or more boundary
/// facets.
pub fn extract_surface(tri: &Tetrahedralization) -> Result<SurfaceMesh, MeshError> {
    // Gather boundary facets in deterministic order.
    let mut facet_of: HashMap<(u32, usize), u32> = HashMap::new();
    let mut raw_facets: Vec<(CellHandle, usize)> = Vec::new();
    for c in tri.finite_cells() {
        if is_free(tri, c)? {
            continue;
        }
        for (slot, n) in tri.cell_neighbors(c).into_iter().enumerate() {
            if is_free(tri, n)? {
                facet_of.insert((c.0, slot), raw_facets.len() as u32);
                raw_facets.push((c, slot));
            }
        }
    }

    // Compact vertex table, ordered by triangulation vertex id.
    let mut used: BTreeSet<u32> = BTreeSet::new();
    for &(c, slot) in &raw_facets {
        for v in tri.facet(c, slot) {
            used.insert(v);
        }
    }
    let vert_index: BTreeMap<u32, u32> =
        used.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
    let vertices: Vec<_> = used.iter().map(|&v| *tri.position(VertexHandle(v))).collect();
    let tet_vertex: Vec<_> = used.iter().map(|&v| Some(VertexHandle(v))).collect();

    let mut facets = Vec::with_capacity(raw_facets.len());
    let mut source_cell = Vec::with_capacity(raw_facets.len());
    for &(c, slot) in &raw_facets {
        let f = tri.facet(c, slot);
        // Apex-positive order has the normal pointing into the matter
        // cell; reverse it so the normal points matter -> free.
        let oriented = [f[0], f[2], f[1]];
        facets.push(oriented.map(|v| vert_index[&v]));
        source_cell.push(c);
    }

    // Radial adjacency.
    let mut edge_adj = vec![[NO_FACET; 3]; facets.len()];
    for (fi, &(c, slot)) in raw_facets.iter().enumerate() {
        let f = tri.facet(c, slot);
        let oriented = [f[0], f[2], f[1]];
        for k in 0..3 {
            let (u, v) = (oriented[k], oriented[(k + 1) % 3]);
            let (pc, pslot) = radial_partner(tri, c, slot, u, v)?;
            edge_adj[fi][k] = facet_of[&(pc.0, pslot)];
        }
    }

    Ok(SurfaceMesh { vertices, facets, source_cell, tet_vertex, edge_adj })
}

/// Rotates around edge (u, v) starting from boundary facet (matter cell
/// `m`, slot `s`) through the free side until the next boundary facet.
fn radial_partner(
    tri: &Tetrahedralization,
    m: CellHandle,
    s: usize,
    u: u32,
    v: u32,
) -> Result<(CellHandle, usize), MeshError> {
    let mut prev = m;
    let mut cur = tri.cell_neighbors(m)[s];
    loop {
        // The two facets of `cur` containing edge (u, v) are those whose
        // opposite vertex is neither u nor v; pick the one not shared with
        // `prev`.
        let verts = tri.cell_vertices(cur);
        let mut next_slot = None;
        for slot in 0..4 {
            if verts[slot] == u || verts[slot] == v {
                continue;
            }
            if tri.cell_neighbors(cur)[slot] == prev {
                continue;
            }
            let f = tri.facet(cur, slot);
            if f.contains(&u) && f.contains(&v) {
                next_slot = Some(slot);
                break;
            }
        }
        let slot = next_slot.expect("edge cycle must continue");
        let next = tri.cell_neighbors(cur)[slot];
        if !is_free(tri, next)? {
            // Interface facet seen from the matter side.
            let mirror = tri.mirror_slot(next, cur);
            return Ok((next, mirror));
        }
        prev = cur;
        cur = next;
    }
}

/// Mesh vertices whose incident facets do not form a single closed fan:
/// the literal 2-manifold test.
pub fn mesh_singular_vertices(mesh: &SurfaceMesh) -> Vec<u32> {
    let fans = mesh.vertex_fan_components();
    let vfacets = mesh.vertex_facets();
    let mut out = Vec::new();
    for (v, comps) in fans.iter().enumerate() {
        if vfacets[v].is_empty() {
            continue;
        }
        if comps.len() != 1 {
            out.push(v as u32);
            continue;
        }
        // A single closed fan also requires every incident edge to pair
        // exactly two of the incident facets: count edge uses at v.
        let mut edge_uses: HashMap<(u32, u32), usize> = HashMap::new();
        for &fi in &vfacets[v] {
            let tri = mesh.facets[fi as usize];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if a != v as u32 && b != v as u32 {
                    continue;
                }
                *edge_uses.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        if edge_uses.values().any(|&c| c != 2) {
            out.push(v as u32);
        }
    }
    out
}

pub fn is_manifold(mesh: &SurfaceMesh) -> bool {
    mesh_singular_vertices(mesh).is_empty()
}

/// Duplicates every remaining singular vertex once per surface fan via a
/// corner-explosion and weld along the edge adjacency. Output geometry is
/// unchanged (duplicates are co-located); the result passes the literal
/// manifold test whenever every facet edge has an adjacency partner (as
/// extraction guarantees).
pub fn vertex_split_fallback(mesh: &SurfaceMesh) -> SurfaceMesh {
    let nf = mesh.facets.len();
    // Union-find over facet corners (3 per facet).
    let mut parent: Vec<u32> = (0..(3 * nf) as u32).collect();
    fn find(parent: &mut Vec<u32>, x: u32) -> u32 {
        let mut r = x;
        while parent[r as usize] != r {
            r = parent[r as usize];
        }
        let mut cur = x;
        while parent[cur as usize] != r {
            let next = parent[cur as usize];
            parent[cur as usize] = r;
            cur = next;
        }
        r
    }
    let union = |parent: &mut Vec<u32>, a: u32, b: u32| {
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            parent[hi as usize] = lo;
        }
    };
    for fi in 0..nf {
        for k in 0..3 {
            let partner = mesh.edge_adj[fi][k];
            if partner == NO_FACET || (partner as usize) < fi {
                continue; // welded once, from the lower facet id
            }
            let g = partner as usize;
            let (a, b) = (mesh.facets[fi][k], mesh.facets[fi][(k + 1) % 3]);
            // Locate the same geometric edge in the partner facet.
            let mut matched = false;
            for m in 0..3 {
                let (c, d) = (mesh.facets[g][m], mesh.facets[g][(m + 1) % 3]);
                if (a, b) == (c, d) || (a, b) == (d, c) {
                    let corner = |f: usize, v: u32| -> u32 {
                        (3 * f + mesh.facets[f].iter().position(|&x| x == v).unwrap()) as u32
                    };
                    union(&mut parent, corner(fi, a), corner(g, a));
                    union(&mut parent, corner(fi, b), corner(g, b));
                    matched = true;
                    break;
                }
            }
            debug_assert!(matched, "adjacency must reference a shared edge");
        }
    }

    // Classes grouped per original vertex; the first class (lowest facet)
    // keeps the original index, extras are appended co-located.
    let mut class_of_vertex: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for fi in 0..nf {
        for k in 0..3 {
            let root = find(&mut parent, (3 * fi + k) as u32);
            let v = mesh.facets[fi][k];
            let classes = class_of_vertex.entry(v).or_default();
            if !classes.contains(&root) {
                classes.push(root);
            }
        }
    }
    let mut vertices = mesh.vertices.clone();
    let mut tet_vertex = mesh.tet_vertex.clone();
    if tet_vertex.is_empty() {
        tet_vertex = vec![None; vertices.len()];
    }
    let mut target_of_root: HashMap<u32, u32> = HashMap::new();
    for (&v, classes) in &class_of_vertex {
        for (i, &root) in classes.iter().enumerate() {
            if i == 0 {
                target_of_root.insert(root, v);
            } else {
                let nv = vertices.len() as u32;
                vertices.push(mesh.vertices[v as usize]);
                tet_vertex.push(None); // duplicates carry no visibility
                target_of_root.insert(root, nv);
            }
        }
    }
    let facets: Vec<[u32; 3]> = (0..nf)
        .map(|fi| {
            [0, 1, 2].map(|k| target_of_root[&find(&mut parent, (3 * fi + k) as u32)])
        })
        .collect();

    let mut out = SurfaceMesh {
        vertices,
        facets,
        source_cell: mesh.source_cell.clone(),
        tet_vertex,
        edge_adj: Vec::new(),
    };
    out.rebuild_plain_adjacency();
    out
}

#[cfg(test)]
mod tests;
