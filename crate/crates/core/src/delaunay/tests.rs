use super::*;
use crate::geom::insphere_exact;
use rand::Rng;

fn unit_tetra_points() -> Vec<Point3> {
    vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
    ]
}

fn random_points(n: usize, seed: u64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Brute-force empty-circumsphere oracle using the exact predicate only.
fn assert_delaunay_oracle(tri: &Tetrahedralization) {
    for c in tri.finite_cells() {
        let v = tri.cell_vertices(c);
        let pts: Vec<Point3> = v.iter().map(|&i| *tri.position(VertexHandle(i))).collect();
        for w in 0..tri.n_vertices() as u32 {
            if v.contains(&w) {
                continue;
            }
            let s = insphere_exact(&pts[0], &pts[1], &pts[2], &pts[3], tri.position(VertexHandle(w)))
                .unwrap();
            assert!(s <= 0, "vertex {w} strictly inside circumsphere of cell {}", c.0);
        }
    }
}

#[test]
fn four_points_one_tetrahedron() {
    let tri = Tetrahedralization::build(&unit_tetra_points()).unwrap();
    tri.validate().unwrap();
    assert_eq!(tri.n_finite_cells(), 1);
    assert_eq!(tri.cell_handles().count(), 5); // one finite + four infinite
}

#[test]
fn centroid_insertion_splits_into_four() {
    let mut pts = unit_tetra_points();
    pts.push(Point3::new(0.25, 0.25, 0.25));
    let tri = Tetrahedralization::build(&pts).unwrap();
    tri.validate().unwrap();
    assert_eq!(tri.n_finite_cells(), 4);
}

#[test]
fn rejects_too_few_or_coplanar() {
    assert!(matches!(
        Tetrahedralization::build(&unit_tetra_points()[..3]),
        Err(DelaunayError::TooFewPoints(_))
    ));
    let coplanar: Vec<Point3> = (0..10)
        .flat_map(|i| (0..3).map(move |j| Point3::new(i as f64, j as f64, 0.0)))
        .collect();
    assert!(matches!(Tetrahedralization::build(&coplanar), Err(DelaunayError::Coplanar)));
}

#[test]
fn duplicate_points_are_merged() {
    let mut pts = unit_tetra_points();
    pts.push(pts[2]);
    pts.push(Point3::new(0.0, 1.0, 1e-15)); // within merge tolerance of pts[2]
    let tri = Tetrahedralization::build(&pts).unwrap();
    assert_eq!(tri.n_vertices(), 4);
    assert_eq!(tri.vertex_of_point(4), tri.vertex_of_point(2));
    assert_eq!(tri.vertex_of_point(5), tri.vertex_of_point(2));
}

#[test]
fn random_builds_satisfy_empty_circumsphere_oracle() {
    for seed in 0..4 {
        let tri = Tetrahedralization::build_with_seed(&random_points(50, seed), seed).unwrap();
        tri.validate().unwrap();
        assert_delaunay_oracle(&tri);
        let vol = tri.total_volume();
        let hull = tri.hull_volume();
        assert!((vol - hull).abs() <= 1e-9 * hull.max(1.0), "volume {vol} vs hull {hull}");
    }
}

#[test]
fn cospherical_and_grid_inputs_build_valid_complexes() {
    // All eight cube corners lie on a common sphere; every insphere test
    // among them is an exact tie.
    let cube: Vec<Point3> = (0..8)
        .map(|i| Point3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    let tri = Tetrahedralization::build(&cube).unwrap();
    tri.validate().unwrap();
    assert_delaunay_oracle(&tri);
    assert!((tri.total_volume() - 1.0).abs() < 1e-12);

    // Regular 3x3x3 grid: heavily degenerate (collinear, coplanar,
    // cospherical subsets everywhere).
    let grid: Vec<Point3> = (0..27)
        .map(|i| Point3::new((i % 3) as f64, ((i / 3) % 3) as f64, (i / 9) as f64))
        .collect();
    let tri = Tetrahedralization::build(&grid).unwrap();
    tri.validate().unwrap();
    assert_delaunay_oracle(&tri);
    assert!((tri.total_volume() - 8.0).abs() < 1e-9);

    // Points on a sphere (the generic meshing input): near-ties everywhere.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sphere: Vec<Point3> = (0..120)
        .map(|_| {
            let v = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalize();
            Point3::from(v * 2.0)
        })
        .collect();
    let tri = Tetrahedralization::build(&sphere).unwrap();
    tri.validate().unwrap();
    assert_delaunay_oracle(&tri);
}

use crate::geom::Vec3;

#[test]
fn locate_finds_containing_cell() {
    let tri = Tetrahedralization::build(&random_points(50, 11)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut inside = 0;
    for _ in 0..100 {
        let p = Point3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        match tri.locate(&p) {
            LocateResult::Cell(c) => {
                inside += 1;
                assert!(tri.contains_point(c, &p), "orient3d containment oracle");
            }
            LocateResult::OutsideHull(_) => {
                // Confirm with the oracle: no finite cell contains p.
                for c in tri.finite_cells() {
                    assert!(!tri.contains_point(c, &p));
                }
            }
        }
    }
    assert!(inside > 20);
}

#[test]
fn locate_on_shared_facet_prefers_lowest_cell() {
    let tri = Tetrahedralization::build(&random_points(30, 3)).unwrap();
    // Take any interior finite facet and query its centroid.
    let c0 = tri.finite_cells().next().unwrap();
    let mut probe = None;
    for s in 0..4 {
        let n = tri.cell_neighbors(c0)[s];
        if !tri.is_infinite(n) {
            let f = tri.facet(c0, s);
            let p = Point3::from(
                (tri.position(VertexHandle(f[0])).coords
                    + tri.position(VertexHandle(f[1])).coords
                    + tri.position(VertexHandle(f[2])).coords)
                    / 3.0,
            );
            probe = Some((p, c0.min(n), c0.max(n)));
            break;
        }
    }
    let (p, lo, hi) = probe.expect("interior facet exists");
    match tri.locate(&p) {
        LocateResult::Cell(c) => {
            // The facet centroid is computed in floating point, so it may
            // fall strictly inside one of the two cells; it must be one of
            // them, and on an exact tie the lower handle.
            assert!(c == lo || c == hi);
            if tri.contains_point(lo, &p) && tri.contains_point(hi, &p) {
                assert_eq!(c, lo);
            }
        }
        LocateResult::OutsideHull(_) => panic!("probe must be inside"),
    }
    // A vertex position is contained by all its incident cells; locate
    // must return the lowest-index one.
    let v = VertexHandle(0);
    match tri.locate(tri.position(v)) {
        LocateResult::Cell(c) => {
            let inc = tri.incident_cells(v).unwrap();
            let finite_min = inc.iter().copied().find(|&c| !tri.is_infinite(c)).unwrap();
            assert_eq!(c, finite_min);
        }
        LocateResult::OutsideHull(_) => panic!("vertex is on the hull or inside"),
    }
}

#[test]
fn centroid_split_volumes_labels_and_adjacency() {
    let mut tri = Tetrahedralization::build(&unit_tetra_points()).unwrap();
    let c = tri.finite_cells().next().unwrap();
    tri.set_label(c, CellLabel::Matter);
    let before = tri.total_volume();
    let parts = tri.centroid_split(c).unwrap();
    tri.validate().unwrap();
    assert!(!tri.has_delaunay_property());
    let quarter = before / 4.0;
    for p in parts {
        assert_eq!(tri.label(p), CellLabel::Matter);
        let v = tri.cell_vertices(p);
        let a = tri.position(VertexHandle(v[0]));
        let vol = (tri.position(VertexHandle(v[1])) - a)
            .cross(&(tri.position(VertexHandle(v[2])) - a))
            .dot(&(tri.position(VertexHandle(v[3])) - a))
            / 6.0;
        assert!((vol - quarter).abs() < 1e-12, "equal sub-volumes");
    }
    assert!((tri.total_volume() - before).abs() < 1e-12);
    // Splitting an infinite cell is rejected.
    let inf = tri.cell_handles().find(|&c| tri.is_infinite(c)).unwrap();
    assert_eq!(tri.centroid_split(inf), Err(DelaunayError::InfiniteCell));
}

#[test]
fn repeated_splits_keep_complex_conforming() {
    let mut tri = Tetrahedralization::build(&random_points(40, 21)).unwrap();
    let hull = tri.hull_volume();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let finite: Vec<CellHandle> = tri.finite_cells().collect();
        let c = finite[rng.gen_range(0..finite.len())];
        tri.centroid_split(c).unwrap();
    }
    tri.validate().unwrap();
    assert!((tri.total_volume() - hull).abs() <= 1e-9 * hull);
}

#[test]
fn incident_cells_match_brute_force() {
    let mut tri = Tetrahedralization::build(&random_points(40, 2)).unwrap();
    for v in 0..tri.n_vertices() as u32 {
        let inc = tri.incident_cells(VertexHandle(v)).unwrap();
        let brute: Vec<CellHandle> = tri
            .cell_handles()
            .filter(|&c| tri.cell_vertices(c).contains(&v))
            .collect();
        assert_eq!(inc, brute, "vertex {v}");
    }
    // After a centroid split the new vertex is incident to the four parts.
    let c = tri.finite_cells().next().unwrap();
    let parts = tri.centroid_split(c).unwrap();
    let m = VertexHandle(tri.n_vertices() as u32 - 1);
    let mut expect: Vec<CellHandle> = parts.to_vec();
    expect.sort();
    assert_eq!(tri.incident_cells(m).unwrap(), expect);
    assert!(matches!(
        tri.incident_cells(VertexHandle(99_999)),
        Err(DelaunayError::InvalidHandle(_))
    ));
}

#[test]
fn single_tetra_incidence() {
    let tri = Tetrahedralization::build(&unit_tetra_points()).unwrap();
    let inc = tri.incident_cells(VertexHandle(0)).unwrap();
    let finite: Vec<CellHandle> = inc.iter().copied().filter(|&c| !tri.is_infinite(c)).collect();
    assert_eq!(finite.len(), 1);
}

#[test]
fn edge_lengths_unit_tetra() {
    let tri = Tetrahedralization::build(&unit_tetra_points()).unwrap();
    let mut lens = tri.edge_lengths();
    lens.sort_by(f64::total_cmp);
    assert_eq!(lens.len(), 6);
    assert_eq!(lens[0], 1.0);
    assert!((lens[5] - 2f64.sqrt()).abs() < 1e-15);
}

mod walking {
    use super::*;

    #[test]
    fn segment_inside_single_cell() {
        let tri = Tetrahedralization::build(&unit_tetra_points()).unwrap();
        let walk = tri
            .walk_ray(&Point3::new(0.1, 0.1, 0.1), &Point3::new(0.2, 0.2, 0.2))
            .unwrap();
        assert_eq!(walk.cells.len(), 1);
        assert!(walk.crossings.is_empty());
        assert!(!walk.clipped_start && !walk.clipped_end);
    }

    #[test]
    fn segment_between_adjacent_centroids() {
        let mut pts = unit_tetra_points();
        pts.push(Point3::new(0.6, 0.6, 0.6)); // beyond facet x+y+z=1
        let tri = Tetrahedralization::build(&pts).unwrap();
        tri.validate().unwrap();
        // Find two face-adjacent finite cells.
        let mut pair = None;
        'outer: for c in tri.finite_cells() {
            for s in 0..4 {
                let n = tri.cell_neighbors(c)[s];
                if !tri.is_infinite(n) {
                    pair = Some((c, n, tri.facet(c, s)));
                    break 'outer;
                }
            }
        }
        let (a, b, facet) = pair.expect("adjacent finite cells");
        let centroid = |c: CellHandle| {
            let v = tri.cell_vertices(c);
            Point3::from(
                v.iter().map(|&i| tri.position(VertexHandle(i)).coords).sum::<Vec3>() / 4.0,
            )
        };
        let walk = tri.walk_ray(&centroid(a), &centroid(b)).unwrap();
        assert_eq!(walk.cells, vec![a, b]);
        assert_eq!(walk.crossings.len(), 1);
        let mut got = walk.crossings[0].facet;
        let mut want = facet;
        got.sort_unstable();
        want.sort_unstable();
        assert_eq!(got, want);
    }

    /// Brute-force oracle: parametric clipping of the segment against each
    /// cell's four half-spaces gives the interval the segment spends inside
    /// that cell.
    fn oracle_cells(tri: &Tetrahedralization, from: &Point3, to: &Point3) -> Vec<CellHandle> {
        let mut hits: Vec<(f64, CellHandle)> = Vec::new();
        for c in tri.finite_cells() {
            let mut t0 = 0.0f64;
            let mut t1 = 1.0f64;
            for s in 0..4 {
                let f = tri.facet(c, s);
                let (a, b, d) = (
                    tri.position(VertexHandle(f[0])),
                    tri.position(VertexHandle(f[1])),
                    tri.position(VertexHandle(f[2])),
                );
                let n = (b - a).cross(&(d - a));
                let denom = n.dot(&(to - from));
                let num = n.dot(&(a - from));
                if denom.abs() < 1e-300 {
                    if n.dot(&(from - a)) < 0.0 {
                        t0 = 1.0;
                        t1 = 0.0;
                    }
                } else {
                    // Inside the cell means n.(x - a) >= 0 for the
                    // apex-positive facet normal n (pointing inward).
                    let t = num / denom;
                    if denom > 0.0 {
                        t0 = t0.max(t);
                    } else {
                        t1 = t1.min(t);
                    }
                }
            }
            if t1 - t0 > 1e-9 {
                hits.push((t0, c));
            }
        }
        hits.sort_by(|x, y| x.0.total_cmp(&y.0));
        hits.into_iter().map(|(_, c)| c).collect()
    }

    #[test]
    fn random_segments_match_intersection_oracle() {
        let tri = Tetrahedralization::build(&random_points(50, 13)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..60 {
            let p = Point3::new(
                rng.gen_range(-1.4..1.4),
                rng.gen_range(-1.4..1.4),
                rng.gen_range(-1.4..1.4),
            );
            let q = Point3::new(
                rng.gen_range(-1.4..1.4),
                rng.gen_range(-1.4..1.4),
                rng.gen_range(-1.4..1.4),
            );
            let walk = tri.walk_ray(&p, &q).unwrap();
            let oracle = oracle_cells(&tri, &p, &q);
            assert_eq!(walk.cells, oracle, "case {case}");
            // Face-connectivity: consecutive cells share the reported facet.
            let offset = usize::from(walk.clipped_start);
            for (i, pair) in walk.cells.windows(2).enumerate() {
                let crossing = &walk.crossings[i + offset];
                assert_eq!(crossing.from, pair[0]);
                assert_eq!(crossing.to, pair[1]);
            }
            // Duplicate-free cell list.
            let mut sorted = walk.cells.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), walk.cells.len());
        }
    }

    #[test]
    fn walk_through_vertex_is_perturbed_deterministically() {
        let mut pts = unit_tetra_points();
        pts.push(Point3::new(0.6, 0.6, 0.6));
        let tri = Tetrahedralization::build(&pts).unwrap();
        // Aim straight through vertex (0,0,0) from outside.
        let from = Point3::new(-0.5, -0.5, -0.5);
        let to = Point3::new(0.3, 0.3, 0.3);
        let w1 = tri.walk_ray(&from, &to).unwrap();
        let w2 = tri.walk_ray(&from, &to).unwrap();
        assert_eq!(w1.cells, w2.cells);
        assert!(w1.perturbation.is_some());
        assert!(w1.clipped_start);
        assert!(!w1.cells.is_empty());
    }

    #[test]
    fn degenerate_segment_rejected() {
        let tri = Tetrahedralization::build(&unit_tetra_points()).unwrap();
        let p = Point3::new(0.1, 0.1, 0.1);
        assert!(matches!(tri.walk_ray(&p, &p), Err(WalkError::DegenerateSegment)));
    }

    #[test]
    fn fully_outside_segment_is_flagged() {
        let tri = Tetrahedralization::build(&unit_tetra_points()).unwrap();
        let walk = tri
            .walk_ray(&Point3::new(5.0, 5.0, 5.0), &Point3::new(6.0, 5.0, 5.0))
            .unwrap();
        assert!(walk.cells.is_empty());
        assert!(walk.clipped_start && walk.clipped_end);
    }
}

#[test]
fn dump_cells_is_parseable() {
    let tri = Tetrahedralization::build(&unit_tetra_points()).unwrap();
    let dump = tri.dump_cells();
    assert!(dump.starts_with("# cells 5"));
    assert_eq!(dump.lines().count(), 6);
    assert!(dump.contains("inf"));
}
