//! Per-facet camera-pair assignment.
//!
//! Every surface facet gets the camera pair used for its refinement. The
//! candidate set pairs each camera with the two others sharing the most
//! reconstructed points; facet visibility is the multiset of cameras
//! seeing the facet's vertices; the assignment minimizes an MRF energy
//! with a visibility unary and a Potts smoothness pairwise, solved by
//! iterated conditional modes from a best-unary initialization.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::delaunay::Tetrahedralization;
use crate::geom::PointSample;
use crate::manifold::{SurfaceMesh, NO_FACET};

#[derive(Debug, Error, PartialEq)]
pub enum PairSelError {
    #[error("need at least 2 cameras, got {0}")]
    TooFewCameras(usize),
    #[error("candidate pair set is empty")]
    EmptyCandidates,
    #[error("facet visibility table has wrong length")]
    TableMismatch,
}

/// Unordered camera pair in canonical (i < j) form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairLabel {
    pub i: u32,
    pub j: u32,
}

impl PairLabel {
    pub fn new(a: u32, b: u32) -> Self {
        assert_ne!(a, b, "pair cameras must differ");
        Self { i: a.min(b), j: a.max(b) }
    }
}

/// Pruned pair set: each camera paired with its top-2 point-sharing
/// partners, symmetric pairs identified.
#[derive(Debug, Clone)]
pub struct PairCandidateSet {
    /// Sorted, deduplicated labels.
    pub pairs: Vec<PairLabel>,
    /// Cameras excluded because they share no point with any other.
    pub excluded: Vec<u32>,
}

impl PairCandidateSet {
    pub fn contains(&self, l: &PairLabel) -> bool {
        self.pairs.binary_search(l).is_ok()
    }

    pub fn index_of(&self, l: &PairLabel) -> Option<usize> {
        self.pairs.binary_search(l).ok()
    }
}

/// Each camera paired with the `k` others sharing the most reconstructed
/// points, ties broken by lower camera id. `build_candidates` uses k = 2.
pub fn build_candidates_k(
    samples: &[PointSample],
    n_cameras: usize,
    k: usize,
) -> Result<PairCandidateSet, PairSelError> {
    if n_cameras < 2 {
        return Err(PairSelError::TooFewCameras(n_cameras));
    }
    let mut shared = vec![0u32; n_cameras * n_cameras];
    for s in samples {
        for (ai, &a) in s.visibility.iter().enumerate() {
            for &b in &s.visibility[ai + 1..] {
                let (a, b) = (a as usize, b as usize);
                if a < n_cameras && b < n_cameras {
                    shared[a * n_cameras + b] += 1;
                    shared[b * n_cameras + a] += 1;
                }
            }
        }
    }
    let mut pairs: BTreeSet<PairLabel> = BTreeSet::new();
    let mut excluded = Vec::new();
    for i in 0..n_cameras {
        let mut partners: Vec<(u32, usize)> = (0..n_cameras)
            .filter(|&j| j != i && shared[i * n_cameras + j] > 0)
            .map(|j| (shared[i * n_cameras + j], j))
            .collect();
        if partners.is_empty() {
            excluded.push(i as u32);
            continue;
        }
        partners.sort_by_key(|&(count, j)| (std::cmp::Reverse(count), j));
        for &(_, j) in partners.iter().take(k) {
            pairs.insert(PairLabel::new(i as u32, j as u32));
        }
    }
    if pairs.is_empty() {
        return Err(PairSelError::EmptyCandidates);
    }
    Ok(PairCandidateSet { pairs: pairs.into_iter().collect(), excluded })
}

pub fn build_candidates(
    samples: &[PointSample],
    n_cameras: usize,
) -> Result<PairCandidateSet, PairSelError> {
    build_candidates_k(samples, n_cameras, 2)
}

/// Per-camera ordered top-`k` partner lists by shared-point count (the
/// classical N x K comparison set).
pub fn ordered_partners(
    samples: &[PointSample],
    n_cameras: usize,
    k: usize,
) -> Result<Vec<(u32, Vec<u32>)>, PairSelError> {
    if n_cameras < 2 {
        return Err(PairSelError::TooFewCameras(n_cameras));
    }
    let mut shared = vec![0u32; n_cameras * n_cameras];
    for s in samples {
        for (ai, &a) in s.visibility.iter().enumerate() {
            for &b in &s.visibility[ai + 1..] {
                let (a, b) = (a as usize, b as usize);
                if a < n_cameras && b < n_cameras {
                    shared[a * n_cameras + b] += 1;
                    shared[b * n_cameras + a] += 1;
                }
            }
        }
    }
    let mut out = Vec::new();
    for i in 0..n_cameras {
        let mut partners: Vec<(u32, usize)> = (0..n_cameras)
            .filter(|&j| j != i && shared[i * n_cameras + j] > 0)
            .map(|j| (shared[i * n_cameras + j], j))
            .collect();
        if partners.is_empty() {
            continue;
        }
        partners.sort_by_key(|&(count, j)| (std::cmp::Reverse(count), j));
        out.push((i as u32, partners.iter().take(k).map(|&(_, j)| j as u32).collect()));
    }
    if out.is_empty() {
        return Err(PairSelError::EmptyCandidates);
    }
    Ok(out)
}

/// Multiset of camera ids seeing a facet: the concatenation of its three
/// vertices' visibility sets, repetitions kept.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FacetVisibility {
    /// Sorted with repetitions.
    pub nu: Vec<u32>,
}

impl FacetVisibility {
    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    pub fn occurrences(&self, cam: u32) -> usize {
        self.nu.iter().filter(|&&c| c == cam).count()
    }
}

/// Per-facet visibility from per-mesh-vertex visibility sets.
pub fn facet_visibility(
    mesh: &SurfaceMesh,
    vertex_visibility: &[Vec<u32>],
) -> Vec<FacetVisibility> {
    mesh.facets
        .iter()
        .map(|f| {
            let mut nu = Vec::new();
            for &v in f {
                nu.extend_from_slice(&vertex_visibility[v as usize]);
            }
            nu.sort_unstable();
            FacetVisibility { nu }
        })
        .collect()
}

/// Transfers point-sample visibility to mesh vertices through the
/// triangulation (samples are triangulation vertices; vertices created by
/// splits or duplication inherit an empty set). Meshes without a stored
/// triangulation link (for example reloaded from PLY) fall back to
/// position matching against the triangulation vertices.
pub fn transfer_visibility(
    tri: &Tetrahedralization,
    samples: &[PointSample],
    mesh: &SurfaceMesh,
) -> Vec<Vec<u32>> {
    let mut by_tet_vertex: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        let v = tri.vertex_of_point(i);
        by_tet_vertex.entry(v.0).or_default().extend(s.visibility.iter().copied());
    }
    let lookup = |v: u32| -> Vec<u32> {
        by_tet_vertex.get(&v).map(|s| s.iter().copied().collect()).unwrap_or_default()
    };
    if mesh.tet_vertex.len() == mesh.n_vertices() {
        return mesh
            .tet_vertex
            .iter()
            .map(|tv| tv.map(|v| lookup(v.0)).unwrap_or_default())
            .collect();
    }
    // Position fallback: quantized grid over the triangulation vertices.
    let tol = 1e-9 * tri.bbox_diagonal().max(1e-300);
    let quant = |c: f64| (c / tol).round() as i64;
    let mut grid: HashMap<(i64, i64, i64), u32> = HashMap::new();
    for v in 0..tri.n_vertices() as u32 {
        let p = tri.position(crate::delaunay::VertexHandle(v));
        grid.insert((quant(p.x), quant(p.y), quant(p.z)), v);
    }
    mesh.vertices
        .iter()
        .map(|p| {
            grid.get(&(quant(p.x), quant(p.y), quant(p.z)))
                .map(|&v| lookup(v))
                .unwrap_or_default()
        })
        .collect()
}

/// Unary potential value for facets with no visibility at all.
pub const EMPTY_VISIBILITY_PHI: f64 = 5e8;

/// Off-candidate floor: half the smallest nonzero in-candidate ratio over
/// all facets, or 1e-3 when no facet has one. Strictly below every
/// nonzero in-candidate unary by construction.
pub fn unary_floor(facet_vis: &[FacetVisibility], candidates: &PairCandidateSet) -> f64 {
    let mut min_ratio = f64::INFINITY;
    for fv in facet_vis {
        if fv.is_empty() {
            continue;
        }
        for l in &candidates.pairs {
            let o = fv.occurrences(l.i) + fv.occurrences(l.j);
            let both = fv.occurrences(l.i) > 0 && fv.occurrences(l.j) > 0;
            if both && o > 0 {
                min_ratio = min_ratio.min(o as f64 / fv.len() as f64);
            }
        }
    }
    if min_ratio.is_finite() {
        0.5 * min_ratio
    } else {
        1e-3
    }
}

/// Unary potential phi for one facet and one label.
///
/// `O_f / |nu_f|` for in-candidate labels whose both cameras occur; the
/// floor for off-candidate labels and for in-candidate labels with a
/// missing camera (keeps -log finite); the large sentinel when the facet
/// has no visibility at all.
pub fn unary(
    fv: &FacetVisibility,
    l: &PairLabel,
    candidates: &PairCandidateSet,
    floor: f64,
) -> f64 {
    if fv.is_empty() {
        return EMPTY_VISIBILITY_PHI;
    }
    if !candidates.contains(l) {
        return floor;
    }
    let oi = fv.occurrences(l.i);
    let oj = fv.occurrences(l.j);
    if oi == 0 || oj == 0 {
        return floor;
    }
    (oi + oj) as f64 / fv.len() as f64
}

/// Potts pairwise potential. The default favors equal labels (0.9 equal /
/// 0.1 different) so that -log rewards smoothness; `paper_literal` keeps
/// the printed swapped assignment for ablation.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct PottsParams {
    pub psi_equal: f64,
    pub psi_different: f64,
}

impl Default for PottsParams {
    fn default() -> Self {
        Self { psi_equal: 0.9, psi_different: 0.1 }
    }
}

impl PottsParams {
    pub fn paper_literal() -> Self {
        Self { psi_equal: 0.1, psi_different: 0.9 }
    }
}

pub fn pairwise(la: &PairLabel, lb: &PairLabel, potts: &PottsParams) -> f64 {
    if la == lb {
        potts.psi_equal
    } else {
        potts.psi_different
    }
}

/// Dense unary table over facets x candidate labels.
#[derive(Debug, Clone)]
pub struct PhiTable {
    pub n_labels: usize,
    /// Facet-major phi values.
    pub values: Vec<f64>,
    pub floor: f64,
    /// Facets with empty visibility (unary is the constant sentinel).
    pub has_visibility: Vec<bool>,
}

impl PhiTable {
    pub fn build(facet_vis: &[FacetVisibility], candidates: &PairCandidateSet) -> Self {
        let floor = unary_floor(facet_vis, candidates);
        let n_labels = candidates.pairs.len();
        let mut values = Vec::with_capacity(facet_vis.len() * n_labels);
        for fv in facet_vis {
            for l in &candidates.pairs {
                let phi = unary(fv, l, candidates, floor);
                debug_assert!(phi > 0.0);
                values.push(phi);
            }
        }
        let has_visibility = facet_vis.iter().map(|fv| !fv.is_empty()).collect();
        Self { n_labels, values, floor, has_visibility }
    }

    #[inline]
    pub fn phi(&self, facet: usize, label: usize) -> f64 {
        self.values[facet * self.n_labels + label]
    }

    pub fn n_facets(&self) -> usize {
        if self.n_labels == 0 {
            0
        } else {
            self.values.len() / self.n_labels
        }
    }
}

/// Facet adjacency (edge-sharing pairs, each once) from the mesh.
pub fn facet_adjacency(mesh: &SurfaceMesh) -> Vec<Vec<u32>> {
    let mut pairs: BTreeSet<(u32, u32)> = BTreeSet::new();
    for (fi, adj) in mesh.edge_adj.iter().enumerate() {
        for &g in adj {
            if g != NO_FACET && g != fi as u32 {
                pairs.insert(((fi as u32).min(g), (fi as u32).max(g)));
            }
        }
    }
    let mut out = vec![Vec::new(); mesh.n_facets()];
    for (a, b) in pairs {
        out[a as usize].push(b);
        out[b as usize].push(a);
    }
    out
}

/// MRF solution: a total facet -> pair lookup table.
#[derive(Debug, Clone)]
pub struct PairAssignment {
    pub candidates: Vec<PairLabel>,
    /// Per-facet index into `candidates`.
    pub label_of: Vec<u32>,
    pub energy: f64,
    /// Energy after initialization and after each ICM sweep.
    pub trace: Vec<f64>,
    pub sweeps: usize,
    /// False for facets with empty visibility; they keep a label (the
    /// assignment is total) but carry no usable cameras for refinement.
    pub has_visibility: Vec<bool>,
}

impl PairAssignment {
    pub fn pair_of(&self, facet: usize) -> PairLabel {
        self.candidates[self.label_of[facet] as usize]
    }

    /// Facets assigned to `l`; empty when `l` is not a candidate.
    pub fn facets_for_pair(&self, l: &PairLabel) -> Vec<u32> {
        match self.candidates.binary_search(l) {
            Ok(idx) => self
                .label_of
                .iter()
                .enumerate()
                .filter(|&(_, &li)| li as usize == idx)
                .map(|(f, _)| f as u32)
                .collect(),
            Err(_) => Vec::new(),
        }
    }

    /// The full partition: every facet appears under exactly one label.
    pub fn groups(&self) -> Vec<(PairLabel, Vec<u32>)> {
        let mut out: Vec<(PairLabel, Vec<u32>)> =
            self.candidates.iter().map(|&l| (l, Vec::new())).collect();
        for (f, &li) in self.label_of.iter().enumerate() {
            out[li as usize].1.push(f as u32);
        }
        out.retain(|(_, fs)| !fs.is_empty());
        out
    }

    /// CSV export: facet index, camera i, camera j.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("facet,cam_i,cam_j\n");
        for f in 0..self.label_of.len() {
            let l = self.pair_of(f);
            let _ = writeln!(out, "{},{},{}", f, l.i, l.j);
        }
        out
    }

    /// CSV export of the per-sweep energy trace.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("sweep,energy\n");
        for (i, e) in self.trace.iter().enumerate() {
            let _ = writeln!(out, "{},{:.17e}", i, e);
        }
        out
    }
}

/// Full MRF energy of a labeling, recomputed from scratch.
pub fn mrf_energy(
    labels: &[u32],
    phi: &PhiTable,
    adjacency: &[Vec<u32>],
    potts: &PottsParams,
) -> f64 {
    let mut e = 0.0;
    for (f, &l) in labels.iter().enumerate() {
        e -= phi.phi(f, l as usize).ln();
    }
    for (f, neighbors) in adjacency.iter().enumerate() {
        for &g in neighbors {
            if (g as usize) > f {
                let la = labels[f] as usize;
                let lb = labels[g as usize] as usize;
                let psi = if la == lb { potts.psi_equal } else { potts.psi_different };
                e -= psi.ln();
            }
        }
    }
    e
}

const MAX_SWEEPS: usize = 50;

/// Iterated conditional modes from the best-unary initialization.
///
/// Initialization picks the best unary per facet (ties: lexicographically
/// smallest pair). Sweeps run in ascending facet order and accept only
/// strictly improving moves, so the energy is non-increasing and the
/// procedure is deterministic.
pub fn optimize(
    adjacency: &[Vec<u32>],
    phi: &PhiTable,
    candidates: &PairCandidateSet,
    potts: &PottsParams,
) -> Result<PairAssignment, PairSelError> {
    if candidates.pairs.is_empty() || phi.n_labels == 0 {
        return Err(PairSelError::EmptyCandidates);
    }
    let n_facets = phi.n_facets();
    if adjacency.len() != n_facets || phi.n_labels != candidates.pairs.len() {
        return Err(PairSelError::TableMismatch);
    }

    // Best-score initialization.
    let mut labels: Vec<u32> = (0..n_facets)
        .map(|f| {
            let mut best = 0usize;
            let mut best_phi = phi.phi(f, 0);
            for l in 1..phi.n_labels {
                let v = phi.phi(f, l);
                if v > best_phi {
                    best_phi = v;
                    best = l;
                }
            }
            best as u32
        })
        .collect();

    let log_equal = -potts.psi_equal.ln();
    let log_diff = -potts.psi_different.ln();
    let mut trace = vec![mrf_energy(&labels, phi, adjacency, potts)];
    let mut sweeps = 0;
    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        for f in 0..n_facets {
            let current = labels[f] as usize;
            let local = |l: usize| -> f64 {
                let mut c = -phi.phi(f, l).ln();
                for &g in &adjacency[f] {
                    c += if labels[g as usize] as usize == l { log_equal } else { log_diff };
                }
                c
            };
            let mut best = current;
            let mut best_cost = local(current);
            for l in 0..phi.n_labels {
                if l == current {
                    continue;
                }
                let c = local(l);
                if c < best_cost {
                    best_cost = c;
                    best = l;
                }
            }
            if best != current {
                labels[f] = best as u32;
                changed = true;
            }
        }
        sweeps += 1;
        trace.push(mrf_energy(&labels, phi, adjacency, potts));
        if !changed {
            break;
        }
    }

    let energy = *trace.last().unwrap();
    Ok(PairAssignment {
        candidates: candidates.pairs.clone(),
        label_of: labels,
        energy,
        trace,
        sweeps,
        has_visibility: phi.has_visibility.clone(),
    })
}

/// End-to-end assignment for a mesh extracted from a labeled complex.
pub fn assign_pairs(
    mesh: &SurfaceMesh,
    tri: &Tetrahedralization,
    samples: &[PointSample],
    n_cameras: usize,
    potts: &PottsParams,
) -> Result<PairAssignment, PairSelError> {
    let candidates = build_candidates(samples, n_cameras)?;
    let vertex_vis = transfer_visibility(tri, samples, mesh);
    let facet_vis = facet_visibility(mesh, &vertex_vis);
    let phi = PhiTable::build(&facet_vis, &candidates);
    let adjacency = facet_adjacency(mesh);
    optimize(&adjacency, &phi, &candidates, potts)
}
