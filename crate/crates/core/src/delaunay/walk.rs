//! Point location and segment walking through the tetrahedral complex.

use thiserror::Error;

use crate::geom::{orient3d, Point3, Vec3};

use super::{CellHandle, Tetrahedralization};

/// Outcome of point location. `OutsideHull` carries a witness infinite
/// cell whose hull facet strictly separates the query from the hull.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocateResult {
    Cell(CellHandle),
    OutsideHull(CellHandle),
}

#[derive(Debug, Error, PartialEq)]
pub enum WalkError {
    #[error("segment endpoints coincide")]
    DegenerateSegment,
    #[error("segment could not be resolved even after perturbation")]
    Unresolvable,
}

/// One facet crossing along a walked segment. `from`/`to` may be infinite
/// cells at hull entry and exit.
#[derive(Debug, Clone)]
pub struct RayCrossing {
    pub from: CellHandle,
    pub to: CellHandle,
    /// Vertex ids of the crossed facet.
    pub facet: [u32; 3],
    /// Parameter of the crossing on the (possibly perturbed) segment.
    pub t: f64,
    /// Crossing point in scene coordinates.
    pub point: Point3,
}

/// Ordered cells and facet crossings of a walked segment.
#[derive(Debug, Clone, Default)]
pub struct RayWalk {
    /// Finite cells whose interior the open segment crosses, in order.
    pub cells: Vec<CellHandle>,
    pub crossings: Vec<RayCrossing>,
    /// Segment start lies outside the hull (walk clipped at hull entry).
    pub clipped_start: bool,
    /// Segment end lies outside the hull (walk clipped at hull exit).
    pub clipped_end: bool,
    /// Perturbation magnitude applied to the segment end, if any.
    pub perturbation: Option<f64>,
}

// Fixed perturbation direction for segment ties (simulation-of-simplicity
// lite; see the module docs).
const TIE_DIR: [f64; 3] = [0.537667139546101, 0.358130819263731, 0.764830144642348];

struct Tie;

impl Tetrahedralization {
    /// Locates the cell containing `p`. When `p` lies on a shared facet or
    /// edge, the lowest-index containing cell is returned.
    pub fn locate(&self, p: &Point3) -> LocateResult {
        let hint = match self.finite_cells().next() {
            Some(c) => c,
            None => return LocateResult::OutsideHull(CellHandle(0)),
        };
        match self.locate_from(p, hint) {
            LocateResult::Cell(c) => LocateResult::Cell(self.containing_cells(p, c)[0]),
            out => out,
        }
    }

    pub(crate) fn locate_from(&self, p: &Point3, hint: CellHandle) -> LocateResult {
        let mut cur = if self.is_live(hint) && !self.is_infinite(hint) {
            hint
        } else {
            match self.finite_cells().next() {
                Some(c) => c,
                None => return LocateResult::OutsideHull(CellHandle(0)),
            }
        };
        let limit = 4 * self.cells.len() + 16;
        for _ in 0..limit {
            let mut moved = false;
            for s in 0..4 {
                let f = self.facet(cur, s);
                let sign = orient3d(self.pt(f[0]), self.pt(f[1]), self.pt(f[2]), p);
                if sign < 0 {
                    let n = CellHandle(self.cells[cur.0 as usize].neighbors[s]);
                    if self.is_infinite(n) {
                        return LocateResult::OutsideHull(n);
                    }
                    cur = n;
                    moved = true;
                    break;
                }
            }
            if !moved {
                return LocateResult::Cell(cur);
            }
        }
        // The walk can cycle once centroid splits break the Delaunay
        // property; fall back to a deterministic exhaustive scan.
        for c in self.finite_cells() {
            if self.contains_point(c, p) {
                return LocateResult::Cell(c);
            }
        }
        for c in self.cell_handles() {
            if self.is_infinite(c) {
                let f = self.outward_hull_facet(c);
                if orient3d(self.pt(f[0]), self.pt(f[1]), self.pt(f[2]), p) > 0 {
                    return LocateResult::OutsideHull(c);
                }
            }
        }
        LocateResult::OutsideHull(CellHandle(0))
    }

    /// Walks the open segment `from -> to`, reporting every finite cell
    /// whose interior it crosses and each crossed facet in order. Segments
    /// that start or end outside the hull are clipped with a flag. Exact
    /// ties (segment through an edge or vertex) are resolved by perturbing
    /// the segment end deterministically and re-walking.
    pub fn walk_ray(&self, from: &Point3, to: &Point3) -> Result<RayWalk, WalkError> {
        if from == to {
            return Err(WalkError::DegenerateSegment);
        }
        let dir = Vec3::new(TIE_DIR[0], TIE_DIR[1], TIE_DIR[2]);
        let base_eps = 1e-10 * self.bbox_diag;
        for attempt in 0..9 {
            let (to_eff, eps) = if attempt == 0 {
                (*to, None)
            } else {
                let e = base_eps * 8f64.powi(attempt - 1);
                (Point3::from(to.coords + dir * e), Some(e))
            };
            match self.walk_once(from, &to_eff) {
                Ok(mut walk) => {
                    walk.perturbation = eps;
                    return Ok(walk);
                }
                Err(Tie) => continue,
            }
        }
        Err(WalkError::Unresolvable)
    }

    fn walk_once(&self, from: &Point3, to: &Point3) -> Result<RayWalk, Tie> {
        let mut walk = RayWalk::default();
        let mut cur;
        let mut entry_slot: Option<usize> = None;
        match self.locate_from(from, self.finite_cells().next().unwrap_or(CellHandle(0))) {
            LocateResult::Cell(c) => {
                cur = c;
                walk.cells.push(cur);
            }
            LocateResult::OutsideHull(_) => {
                walk.clipped_start = true;
                // Hull entry: the first outward hull facet crossed by the
                // segment going inward.
                let mut best: Option<(f64, CellHandle, [u32; 3])> = None;
                for c in self.cell_handles() {
                    if !self.is_infinite(c) {
                        continue;
                    }
                    let f = self.outward_hull_facet(c);
                    match self.segment_pierces(from, to, &f) {
                        PipeResult::Through => {}
                        PipeResult::Miss => continue,
                        // The perturbed segment changes the pipe tests, so
                        // this tie is resolvable.
                        PipeResult::Grazing => return Err(Tie),
                    }
                    let (a, b, d) = (self.pt(f[0]), self.pt(f[1]), self.pt(f[2]));
                    let s_from = orient3d(a, b, d, from);
                    let s_to = orient3d(a, b, d, to);
                    // Entering the hull goes from the positive (outside)
                    // side to the negative side. A start exactly on the
                    // hull plane enters at t = 0.
                    let t = if s_from > 0 && s_to < 0 {
                        plane_param(a, b, d, from, to).ok_or(Tie)?
                    } else if s_from == 0 && s_to < 0 {
                        0.0
                    } else {
                        continue;
                    };
                    match best {
                        Some((bt, _, _)) if bt <= t => {}
                        _ => best = Some((t, c, f)),
                    }
                }
                let Some((t, inf_cell, f)) = best else {
                    // The segment never enters the hull.
                    walk.clipped_end = true;
                    return Ok(walk);
                };
                let fin = CellHandle(self.cells[inf_cell.0 as usize].neighbors[3]);
                walk.crossings.push(RayCrossing {
                    from: inf_cell,
                    to: fin,
                    facet: f,
                    t,
                    point: Point3::from(from.coords + (to - from) * t),
                });
                entry_slot = Some(self.mirror_slot(fin, inf_cell));
                cur = fin;
                walk.cells.push(cur);
            }
        }

        let limit = self.cells.len() + 2;
        for _ in 0..limit {
            let mut exit: Option<usize> = None;
            for s in 0..4 {
                if entry_slot == Some(s) {
                    continue;
                }
                let f = self.facet(cur, s);
                let (a, b, d) = (self.pt(f[0]), self.pt(f[1]), self.pt(f[2]));
                // Facet is apex-positive for the finite cell `cur`; an exit
                // requires `to` strictly beyond it.
                if orient3d(a, b, d, to) >= 0 {
                    continue;
                }
                match self.segment_pierces(from, to, &f) {
                    PipeResult::Through => {
                        exit = Some(s);
                        break;
                    }
                    PipeResult::Miss => continue,
                    PipeResult::Grazing => return Err(Tie),
                }
            }
            let Some(s) = exit else {
                return Ok(walk); // `to` lies in the closure of `cur`
            };
            let f = self.facet(cur, s);
            let (a, b, d) = (self.pt(f[0]), self.pt(f[1]), self.pt(f[2]));
            let t = plane_param(a, b, d, from, to).ok_or(Tie)?;
            let n = CellHandle(self.cells[cur.0 as usize].neighbors[s]);
            walk.crossings.push(RayCrossing {
                from: cur,
                to: n,
                facet: f,
                t,
                point: Point3::from(from.coords + (to - from) * t),
            });
            if self.is_infinite(n) {
                // Hull exit; a straight segment never re-enters a convex
                // hull.
                walk.clipped_end = true;
                return Ok(walk);
            }
            entry_slot = Some(self.mirror_slot(n, cur));
            cur = n;
            walk.cells.push(cur);
        }
        // Geometrically unreachable: t strictly increases per cell.
        Err(Tie)
    }

    fn segment_pierces(&self, from: &Point3, to: &Point3, f: &[u32; 3]) -> PipeResult {
        let (a, b, c) = (self.pt(f[0]), self.pt(f[1]), self.pt(f[2]));
        let u1 = orient3d(from, to, a, b);
        let u2 = orient3d(from, to, b, c);
        let u3 = orient3d(from, to, c, a);
        if u1 == 0 || u2 == 0 || u3 == 0 {
            return PipeResult::Grazing;
        }
        if u1 == u2 && u2 == u3 {
            PipeResult::Through
        } else {
            PipeResult::Miss
        }
    }
}

enum PipeResult {
    Through,
    Miss,
    Grazing,
}

fn plane_param(a: &Point3, b: &Point3, c: &Point3, from: &Point3, to: &Point3) -> Option<f64> {
    let n = (b - a).cross(&(c - a));
    let denom = n.dot(&(to - from));
    if denom == 0.0 {
        return None;
    }
    Some(n.dot(&(a - from)) / denom)
}
