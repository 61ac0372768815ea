use super::*;
use crate::geom::Point3;
use nalgebra::Matrix3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn camera_at(id: usize, center: Point3) -> Camera {
    // Orientation is irrelevant for ray accumulation; only the center is
    // used.
    Camera::new(id, Matrix3::identity(), Matrix3::identity(), center, 8, 8).unwrap()
}

/// Two tetrahedra sharing the facet z = 0.
fn two_cell_complex() -> Tetrahedralization {
    let pts = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.3, 0.3, 1.0),
        Point3::new(0.3, 0.3, -1.0),
    ];
    let tri = Tetrahedralization::build(&pts).unwrap();
    assert_eq!(tri.n_finite_cells(), 2);
    tri
}

#[test]
fn sigma_nearest_rank() {
    // {1,2,3,4} -> ceil(0.25*4) = 1st smallest = 1.
    let mut lens = vec![4.0, 2.0, 1.0, 3.0];
    lens.sort_by(f64::total_cmp);
    let rank = (0.25 * lens.len() as f64).ceil().max(1.0) as usize;
    assert_eq!(lens[rank - 1], 1.0);

    // All edges equal: sigma is that length. A regular tetra has six equal
    // edges of length 2*sqrt(2) with these vertices.
    let pts = vec![
        Point3::new(1.0, 1.0, 1.0),
        Point3::new(1.0, -1.0, -1.0),
        Point3::new(-1.0, 1.0, -1.0),
        Point3::new(-1.0, -1.0, 1.0),
    ];
    let tri = Tetrahedralization::build(&pts).unwrap();
    let lens = tri.edge_lengths();
    assert_eq!(lens.len(), 6);
    let edge = 8f64.sqrt();
    for l in &lens {
        assert!((l - edge).abs() < 1e-12);
    }
    let sigma = compute_sigma(&tri).unwrap();
    assert!((sigma - edge).abs() < 1e-12);
}

#[test]
fn facet_weight_limits() {
    let params = VisParams { sigma: 0.5, ..VisParams::default() };
    assert_eq!(params.facet_weight(0.0), 0.0);
    // Saturation towards alpha_vis.
    assert!((params.facet_weight(1e6) - params.alpha_vis).abs() < 1e-12);
    assert!(params.facet_weight(0.5) > 0.0);
    // The literal printed form degenerates to zero for positive d.
    let literal = VisParams { weight_form: WeightForm::PaperLiteral, sigma: 0.5, ..VisParams::default() };
    assert_eq!(literal.facet_weight(0.0), 0.0);
    assert_eq!(literal.facet_weight(1.0), 0.0);
}

#[test]
fn no_rays_all_matter_zero_cut() {
    let tri = two_cell_complex();
    let mut g = FlowGraph::for_tetrahedralization(&tri);
    let params = VisParams { sigma: compute_sigma(&tri).unwrap(), ..VisParams::default() };
    g.add_quality_prior(&tri, &params);
    let cut = g.min_cut();
    assert_eq!(cut.cut_value, 0.0);
    assert!(cut.source_side.iter().all(|&s| !s), "all cells matter");
    let mut tri = tri;
    g.apply_labels(&mut tri, &cut);
    for c in tri.finite_cells() {
        assert_eq!(tri.label(c), CellLabel::Matter);
    }
}

#[test]
fn single_ray_capacities_match_hand_built_graph() {
    let tri = two_cell_complex();
    let sigma = compute_sigma(&tri).unwrap();
    let params = VisParams { sigma, quality_weight: 0.0, ..VisParams::default() };

    // Camera above the complex, point at the shared-facet centroid region
    // inside the lower cell: the ray crosses the upper cell, crosses the
    // shared facet z = 0, then ends in the lower cell.
    let cam = camera_at(0, Point3::new(0.3, 0.3, 4.0));
    let target = Point3::new(0.3, 0.3, -0.2);
    let sample = PointSample::new(target, vec![0]).unwrap();

    let mut g = FlowGraph::for_tetrahedralization(&tri);
    g.accumulate_ray(&tri, &cam, &sample, &params).unwrap();

    // Identify the upper (z > 0) and lower cells.
    let cells: Vec<CellHandle> = tri.finite_cells().collect();
    let apex_z = |c: CellHandle| {
        tri.cell_vertices(c)
            .iter()
            .map(|&v| tri.position(crate::delaunay::VertexHandle(v)).z)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (upper, lower) = if apex_z(cells[0]) > apex_z(cells[1]) {
        (cells[0], cells[1])
    } else {
        (cells[1], cells[0])
    };
    let un = g.node_of_cell(upper).unwrap() as usize;
    let ln = g.node_of_cell(lower).unwrap() as usize;

    // Hand-built expectations: the camera sits outside the hull, so the
    // hull-entry crossing contributes a source link to the upper cell with
    // weight w(d_entry); the shared-facet crossing adds a directed arc
    // upper->lower with w(d_shared); the last finite cell (lower) gets the
    // sink link alpha_vis.
    // Entry point: the ray enters through facet (v1? ...) — the top facet of
    // the upper cell; by construction the segment is vertical through
    // (0.3, 0.3): entry where the facet planes cross that vertical line.
    // Rather than recompute planes by hand, use distances from the walk
    // geometry: entry at z = z_e on the segment, shared facet at z = 0.
    let walk = tri.walk_ray(&cam.center, &Point3::new(0.3, 0.3, -0.2 - 3.0 * sigma)).unwrap();
    assert_eq!(walk.cells, vec![upper, lower]);
    let entry = &walk.crossings[0];
    let shared = &walk.crossings[1];
    let d_entry = (entry.point - target).norm();
    let d_shared = (shared.point - target).norm();

    assert!((g.source[un] - params.facet_weight(d_entry)).abs() < 1e-12);
    assert_eq!(g.source[ln], 0.0);
    let arc = g.arcs.get(&(un as u32, ln as u32)).copied().unwrap_or(0.0);
    assert!((arc - params.facet_weight(d_shared)).abs() < 1e-12);
    assert!(!g.arcs.contains_key(&(ln as u32, un as u32)));
    assert_eq!(g.sink[ln], params.alpha_vis);
    assert_eq!(g.sink[un], 0.0);

    // A strong ray through the upper cell leaves it free and the lower
    // cell matter, verified against exhaustive enumeration of all four
    // labelings.
    let mut g2 = FlowGraph::for_tetrahedralization(&tri);
    let quality = VisParams { sigma, ..VisParams::default() };
    g2.accumulate_ray(&tri, &cam, &sample, &quality).unwrap();
    g2.add_quality_prior(&tri, &quality);
    let cut = g2.min_cut();
    let mut best = f64::INFINITY;
    let mut best_side = vec![false, false];
    for mask in 0..4u32 {
        let side = vec![mask & 1 != 0, mask & 2 != 0];
        let cap = g2.cut_capacity(&side);
        if cap < best {
            best = cap;
            best_side = side;
        }
    }
    assert!((cut.cut_value - best).abs() < 1e-9);
    assert_eq!(cut.source_side, best_side);
    assert!(cut.source_side[g2.node_of_cell(upper).unwrap() as usize], "carved cell is free");
    assert!(!cut.source_side[g2.node_of_cell(lower).unwrap() as usize], "cell behind the point is matter");
}

#[test]
fn ray_missing_hull_is_counted_not_applied() {
    let tri = two_cell_complex();
    let params = VisParams { sigma: compute_sigma(&tri).unwrap(), ..VisParams::default() };
    let cam = camera_at(0, Point3::new(50.0, 50.0, 50.0));
    let sample = PointSample::new(Point3::new(51.0, 50.0, 50.0), vec![0]).unwrap();
    let mut g = FlowGraph::for_tetrahedralization(&tri);
    g.accumulate_ray(&tri, &cam, &sample, &params).unwrap();
    assert_eq!(g.skipped_rays, 1);
    assert!(g.arcs.is_empty());
    assert!(g.source.iter().all(|&c| c == 0.0));
    assert!(g.sink.iter().all(|&c| c == 0.0));
}

#[test]
fn wrong_camera_rejected() {
    let tri = two_cell_complex();
    let params = VisParams { sigma: 1.0, ..VisParams::default() };
    let cam = camera_at(3, Point3::new(0.0, 0.0, 4.0));
    let sample = PointSample::new(Point3::new(0.3, 0.3, 0.5), vec![0, 1]).unwrap();
    let mut g = FlowGraph::for_tetrahedralization(&tri);
    assert_eq!(
        g.accumulate_ray(&tri, &cam, &sample, &params),
        Err(GraphCutError::CameraNotVisible(3))
    );
}

#[test]
fn quality_prior_adds_symmetric_capacity() {
    let tri = two_cell_complex();
    let params = VisParams { sigma: 1.0, quality_weight: 2.5, ..VisParams::default() };
    let mut g = FlowGraph::for_tetrahedralization(&tri);
    g.add_quality_prior(&tri, &params);
    assert_eq!(g.arcs.len(), 2);
    for (_, &cap) in &g.arcs {
        assert_eq!(cap, 2.5);
    }
    // Cut cost of any labeling grows by q * (number of boundary facets).
    let base = FlowGraph::for_tetrahedralization(&tri);
    for mask in 0..4u32 {
        let side = vec![mask & 1 != 0, mask & 2 != 0];
        let boundary = usize::from(side[0] != side[1]);
        assert!(
            (g.cut_capacity(&side) - base.cut_capacity(&side) - 2.5 * boundary as f64).abs()
                < 1e-12
        );
    }
}

/// Exhaustive minimum over all 2^n labelings; capacities are small dyadic
/// rationals so flow arithmetic is exact and equality is meaningful.
fn brute_force_min_cut(g: &FlowGraph) -> f64 {
    let n = g.n_nodes();
    let mut best = f64::INFINITY;
    for mask in 0..(1u32 << n) {
        let side: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
        best = best.min(g.cut_capacity(&side));
    }
    best
}

#[test]
fn random_graphs_match_exhaustive_enumeration_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..60 {
        let n = rng.gen_range(2..=10usize);
        let mut g = FlowGraph::new(n);
        for _ in 0..rng.gen_range(0..4 * n) {
            let u = rng.gen_range(0..n) as u32;
            let v = rng.gen_range(0..n) as u32;
            // Dyadic capacities: k / 16 with k in 0..64.
            g.add_arc(u, v, rng.gen_range(0..64) as f64 / 16.0);
        }
        for u in 0..n {
            if rng.gen_bool(0.5) {
                g.add_source_cap(u as u32, rng.gen_range(0..64) as f64 / 16.0);
            }
            if rng.gen_bool(0.5) {
                g.add_sink_cap(u as u32, rng.gen_range(0..64) as f64 / 16.0);
            }
        }
        let cut = g.min_cut();
        let brute = brute_force_min_cut(&g);
        assert_eq!(cut.cut_value, brute, "case {case}: exact equality on dyadic capacities");
        // The induced cut's capacity must equal the reported value.
        assert_eq!(g.cut_capacity(&cut.source_side), cut.cut_value, "case {case}");
    }
}

#[test]
fn min_cut_deterministic() {
    let tri = two_cell_complex();
    let sigma = compute_sigma(&tri).unwrap();
    let params = VisParams { sigma, ..VisParams::default() };
    let cam = camera_at(0, Point3::new(0.3, 0.3, 4.0));
    let sample = PointSample::new(Point3::new(0.3, 0.3, -0.2), vec![0]).unwrap();
    let build = || {
        let mut g = FlowGraph::for_tetrahedralization(&tri);
        g.accumulate_ray(&tri, &cam, &sample, &params).unwrap();
        g.add_quality_prior(&tri, &params);
        g
    };
    let a = build().min_cut();
    let b = build().min_cut();
    assert_eq!(a.source_side, b.source_side);
    assert_eq!(a.cut_value, b.cut_value);
    assert_eq!(build().dump(), build().dump());
}
