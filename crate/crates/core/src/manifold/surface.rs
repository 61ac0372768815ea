//! Indexed triangle surface mesh with per-facet edge adjacency.

use std::collections::{BTreeMap, HashMap};

use crate::delaunay::{CellHandle, VertexHandle};
use crate::geom::{Point3, Vec3};

use super::MeshError;

pub const NO_FACET: u32 = u32::MAX;

/// Triangle mesh of the matter/free boundary. Facets are oriented with the
/// normal pointing from matter into free space. `edge_adj[f][k]` is the
/// facet across the edge between corners `k` and `(k+1) % 3` of facet `f`
/// (radial adjacency when extracted from a labeled complex, plain
/// two-facet adjacency otherwise).
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub vertices: Vec<Point3>,
    pub facets: Vec<[u32; 3]>,
    /// Matter cell each facet came from; empty for meshes not produced by
    /// surface extraction.
    pub source_cell: Vec<CellHandle>,
    /// Triangulation vertex behind each mesh vertex; `None` for vertices
    /// introduced by fallback duplication (they carry no visibility).
    pub tet_vertex: Vec<Option<VertexHandle>>,
    pub edge_adj: Vec<[u32; 3]>,
}

impl SurfaceMesh {
    /// Mesh from raw arrays; adjacency is recomputed from shared edges
    /// (edges with more than two facets are left unpaired).
    pub fn from_parts(vertices: Vec<Point3>, facets: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        for (i, f) in facets.iter().enumerate() {
            for &v in f {
                if v as usize >= vertices.len() {
                    return Err(MeshError::BadIndex(i));
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::DegenerateFacet(i));
            }
            let (a, b, c) = (&vertices[f[0] as usize], &vertices[f[1] as usize], &vertices[f[2] as usize]);
            if (b - a).cross(&(c - a)).norm_squared() == 0.0 {
                return Err(MeshError::DegenerateFacet(i));
            }
        }
        let mut mesh = Self {
            vertices,
            facets,
            source_cell: Vec::new(),
            tet_vertex: Vec::new(),
            edge_adj: Vec::new(),
        };
        mesh.rebuild_plain_adjacency();
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    /// Pairs facets across edges shared by exactly two facets.
    pub fn rebuild_plain_adjacency(&mut self) {
        let mut by_edge: BTreeMap<(u32, u32), Vec<(u32, usize)>> = BTreeMap::new();
        for (fi, f) in self.facets.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                by_edge.entry((a.min(b), a.max(b))).or_default().push((fi as u32, k));
            }
        }
        self.edge_adj = vec![[NO_FACET; 3]; self.facets.len()];
        for (_, inc) in by_edge {
            if inc.len() == 2 {
                let (f0, k0) = inc[0];
                let (f1, k1) = inc[1];
                self.edge_adj[f0 as usize][k0] = f1;
                self.edge_adj[f1 as usize][k1] = f0;
            }
        }
    }

    /// Unit outward normal (matter side negative).
    pub fn facet_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.facets[f];
        let (pa, pb, pc) = (
            &self.vertices[a as usize],
            &self.vertices[b as usize],
            &self.vertices[c as usize],
        );
        (pb - pa).cross(&(pc - pa)).normalize()
    }

    pub fn facet_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.facets[f];
        let (pa, pb, pc) = (
            &self.vertices[a as usize],
            &self.vertices[b as usize],
            &self.vertices[c as usize],
        );
        0.5 * (pb - pa).cross(&(pc - pa)).norm()
    }

    pub fn facet_centroid(&self, f: usize) -> Point3 {
        let [a, b, c] = self.facets[f];
        Point3::from(
            (self.vertices[a as usize].coords
                + self.vertices[b as usize].coords
                + self.vertices[c as usize].coords)
                / 3.0,
        )
    }

    /// Facet lists per vertex, in facet order.
    pub fn vertex_facets(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (fi, f) in self.facets.iter().enumerate() {
            for &v in f {
                out[v as usize].push(fi as u32);
            }
        }
        out
    }

    /// 1-ring vertex neighborhoods (deduplicated, sorted).
    pub fn vertex_neighbors(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for f in &self.facets {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                out[a as usize].push(b);
                out[b as usize].push(a);
            }
        }
        for n in &mut out {
            n.sort_unstable();
            n.dedup();
        }
        out
    }

    /// Median edge length; 0 for an empty mesh.
    pub fn median_edge_length(&self) -> f64 {
        let mut lens: Vec<f64> = Vec::new();
        let mut seen: BTreeMap<(u32, u32), ()> = BTreeMap::new();
        for f in &self.facets {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                if seen.insert(key, ()).is_none() {
                    lens.push(
                        (self.vertices[a as usize] - self.vertices[b as usize]).norm(),
                    );
                }
            }
        }
        if lens.is_empty() {
            return 0.0;
        }
        lens.sort_by(f64::total_cmp);
        lens[lens.len() / 2]
    }

    /// Axis-aligned bounding box diagonal of the vertices.
    pub fn bbox_diagonal(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for p in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (hi - lo).norm()
    }

    /// Per-vertex fan components: facets around the vertex grouped by
    /// walking across its incident edges through `edge_adj`.
    pub fn vertex_fan_components(&self) -> Vec<Vec<Vec<u32>>> {
        let vfacets = self.vertex_facets();
        let mut result = Vec::with_capacity(self.vertices.len());
        for (v, facets) in vfacets.iter().enumerate() {
            let local: HashMap<u32, usize> =
                facets.iter().enumerate().map(|(i, &f)| (f, i)).collect();
            let mut comp = vec![usize::MAX; facets.len()];
            let mut comps: Vec<Vec<u32>> = Vec::new();
            for i in 0..facets.len() {
                if comp[i] != usize::MAX {
                    continue;
                }
                let id = comps.len();
                let mut stack = vec![i];
                comp[i] = id;
                let mut members = Vec::new();
                while let Some(cur) = stack.pop() {
                    let fi = facets[cur];
                    members.push(fi);
                    let tri = self.facets[fi as usize];
                    for k in 0..3 {
                        // Only edges incident to v connect the fan.
                        if tri[k] != v as u32 && tri[(k + 1) % 3] != v as u32 {
                            continue;
                        }
                        let partner = self.edge_adj[fi as usize][k];
                        if partner == NO_FACET {
                            continue;
                        }
                        if let Some(&j) = local.get(&partner) {
                            if comp[j] == usize::MAX {
                                comp[j] = id;
                                stack.push(j);
                            }
                        }
                    }
                }
                members.sort_unstable();
                comps.push(members);
            }
            result.push(comps);
        }
        result
    }
}
