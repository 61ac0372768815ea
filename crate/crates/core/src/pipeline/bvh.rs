//! Axis-aligned bounding-box tree over mesh triangles with closest-point
//! queries, used by the accuracy/completeness metrics.

use crate::geom::{Point3, Vec3};
use crate::manifold::SurfaceMesh;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Point3,
    hi: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            lo: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            hi: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Point3) {
        for k in 0..3 {
            self.lo[k] = self.lo[k].min(p[k]);
            self.hi[k] = self.hi[k].max(p[k]);
        }
    }

    fn merge(&mut self, other: &Aabb) {
        for k in 0..3 {
            self.lo[k] = self.lo[k].min(other.lo[k]);
            self.hi[k] = self.hi[k].max(other.hi[k]);
        }
    }

    fn dist_sq(&self, p: &Point3) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let c = p[k].clamp(self.lo[k], self.hi[k]);
            d += (p[k] - c) * (p[k] - c);
        }
        d
    }
}

#[derive(Debug)]
enum Node {
    Leaf { bbox: Aabb, tris: Vec<u32> },
    Inner { bbox: Aabb, left: u32, right: u32 },
}

/// Median-split AABB tree over triangles.
#[derive(Debug)]
pub struct TriBvh {
    nodes: Vec<Node>,
    verts: Vec<[Point3; 3]>,
    root: u32,
}

const LEAF_SIZE: usize = 4;

impl TriBvh {
    pub fn build(mesh: &SurfaceMesh) -> Self {
        let verts: Vec<[Point3; 3]> = mesh
            .facets
            .iter()
            .map(|f| {
                [
                    mesh.vertices[f[0] as usize],
                    mesh.vertices[f[1] as usize],
                    mesh.vertices[f[2] as usize],
                ]
            })
            .collect();
        let centroids: Vec<Point3> = verts
            .iter()
            .map(|t| Point3::from((t[0].coords + t[1].coords + t[2].coords) / 3.0))
            .collect();
        let mut nodes = Vec::new();
        let mut order: Vec<u32> = (0..verts.len() as u32).collect();
        let root = Self::build_node(&mut nodes, &verts, &centroids, &mut order);
        Self { nodes, verts, root }
    }

    fn tri_bbox(tri: &[Point3; 3]) -> Aabb {
        let mut b = Aabb::empty();
        for p in tri {
            b.grow(p);
        }
        b
    }

    fn build_node(
        nodes: &mut Vec<Node>,
        verts: &[[Point3; 3]],
        centroids: &[Point3],
        tris: &mut [u32],
    ) -> u32 {
        let mut bbox = Aabb::empty();
        for &t in tris.iter() {
            bbox.merge(&Self::tri_bbox(&verts[t as usize]));
        }
        if tris.len() <= LEAF_SIZE {
            nodes.push(Node::Leaf { bbox, tris: tris.to_vec() });
            return nodes.len() as u32 - 1;
        }
        // Longest axis of the centroid extent, median split.
        let mut cb = Aabb::empty();
        for &t in tris.iter() {
            cb.grow(&centroids[t as usize]);
        }
        let extent = cb.hi - cb.lo;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        tris.sort_by(|&a, &b| {
            centroids[a as usize][axis]
                .total_cmp(&centroids[b as usize][axis])
                .then(a.cmp(&b))
        });
        let mid = tris.len() / 2;
        let (lo, hi) = tris.split_at_mut(mid);
        let left = Self::build_node(nodes, verts, centroids, lo);
        let right = Self::build_node(nodes, verts, centroids, hi);
        nodes.push(Node::Inner { bbox, left, right });
        nodes.len() as u32 - 1
    }

    /// Closest point on the mesh surface and its distance.
    pub fn closest(&self, p: &Point3) -> (Point3, f64) {
        let mut best_sq = f64::INFINITY;
        let mut best_point = *p;
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            match &self.nodes[id as usize] {
                Node::Leaf { bbox, tris } => {
                    if bbox.dist_sq(p) >= best_sq {
                        continue;
                    }
                    for &t in tris {
                        let q = closest_point_on_triangle(&self.verts[t as usize], p);
                        let d = (q - p).norm_squared();
                        if d < best_sq {
                            best_sq = d;
                            best_point = q;
                        }
                    }
                }
                Node::Inner { bbox, left, right } => {
                    if bbox.dist_sq(p) >= best_sq {
                        continue;
                    }
                    // Visit the nearer child first.
                    let dl = match &self.nodes[*left as usize] {
                        Node::Leaf { bbox, .. } | Node::Inner { bbox, .. } => bbox.dist_sq(p),
                    };
                    let dr = match &self.nodes[*right as usize] {
                        Node::Leaf { bbox, .. } | Node::Inner { bbox, .. } => bbox.dist_sq(p),
                    };
                    if dl <= dr {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        (best_point, best_sq.sqrt())
    }

    pub fn distance(&self, p: &Point3) -> f64 {
        self.closest(p).1
    }
}

/// Closest point on a triangle (Voronoi-region case analysis).
pub fn closest_point_on_triangle(tri: &[Point3; 3], p: &Point3) -> Point3 {
    let (a, b, c) = (tri[0], tri[1], tri[2]);
    let ab: Vec3 = b - a;
    let ac: Vec3 = c - a;
    let ap: Vec3 = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp: Vec3 = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return Point3::from(a.coords + ab * v);
    }
    let cp: Vec3 = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return Point3::from(a.coords + ac * w);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return Point3::from(b.coords + (c - b) * w);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    Point3::from(a.coords + ab * v + ac * w)
}
