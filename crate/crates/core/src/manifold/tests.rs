use super::*;
use crate::geom::{orient3d, Point3, Vec3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Interior vertex star fixture: a center point surrounded by points on a
/// sphere, so the center's incident cells partition a neighborhood of it.
fn star_fixture(seed: u64) -> (Tetrahedralization, VertexHandle) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = vec![Point3::new(0.0, 0.0, 0.0)];
    for _ in 0..24 {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalize();
        pts.push(Point3::from(v));
    }
    let tri = Tetrahedralization::build(&pts).unwrap();
    let v = tri.vertex_of_point(0);
    (tri, v)
}

fn set_all(tri: &mut Tetrahedralization, label: CellLabel) {
    for c in tri.cell_handles().collect::<Vec<_>>() {
        if !tri.is_infinite(c) {
            tri.set_label(c, label);
        }
    }
}

/// Picks `k` pairwise non-adjacent (at v) cells from the star of v.
fn pick_isolated_cells(tri: &Tetrahedralization, v: VertexHandle, k: usize) -> Vec<CellHandle> {
    let star: Vec<CellHandle> = tri
        .incident_cells(v)
        .unwrap()
        .into_iter()
        .filter(|&c| !tri.is_infinite(c))
        .collect();
    let mut chosen: Vec<CellHandle> = Vec::new();
    'outer: for &c in &star {
        for &d in &chosen {
            let adjacent = tri.cell_neighbors(c).contains(&d);
            if adjacent {
                continue 'outer;
            }
        }
        chosen.push(c);
        if chosen.len() == k {
            break;
        }
    }
    assert_eq!(chosen.len(), k, "fixture needs {k} isolated cells");
    chosen
}

#[test]
fn interior_and_boundary_vertices_not_singular() {
    let (mut tri, v) = star_fixture(1);
    set_all(&mut tri, CellLabel::Matter);
    // All incident cells matter: single component.
    assert!(!is_singular(&tri, v).unwrap());
    set_all(&mut tri, CellLabel::Free);
    assert!(!is_singular(&tri, v).unwrap());
    // One matter component + one free component.
    let star = tri.incident_cells(v).unwrap();
    let c = star.iter().copied().find(|&c| !tri.is_infinite(c)).unwrap();
    tri.set_label(c, CellLabel::Matter);
    assert!(!is_singular(&tri, v).unwrap());
}

#[test]
fn three_matter_components_make_a_singular_vertex() {
    let (mut tri, v) = star_fixture(2);
    set_all(&mut tri, CellLabel::Free);
    for c in pick_isolated_cells(&tri, v, 3) {
        tri.set_label(c, CellLabel::Matter);
    }
    assert!(is_singular(&tri, v).unwrap());
    let (free, matter) = star_components(&tri, v).unwrap();
    assert_eq!(matter.len(), 3);
    assert!(free.len() >= 1);
}

#[test]
fn unlabeled_cells_are_rejected() {
    let (tri, v) = star_fixture(3);
    assert!(matches!(is_singular(&tri, v), Err(MeshError::UnlabeledCell(_))));
}

#[test]
fn fixing_relabels_minority_components() {
    let (mut tri, v) = star_fixture(4);
    set_all(&mut tri, CellLabel::Free);
    // Matter components of sizes {3, 1}: a facet-connected triple plus an
    // isolated cell.
    let star: Vec<CellHandle> = tri
        .incident_cells(v)
        .unwrap()
        .into_iter()
        .filter(|&c| !tri.is_infinite(c))
        .collect();
    // Grow a connected triple from the first star cell through facets at v.
    let mut triple = vec![star[0]];
    while triple.len() < 3 {
        let mut grown = false;
        for &c in &triple.clone() {
            let verts = tri.cell_vertices(c);
            for (slot, n) in tri.cell_neighbors(c).into_iter().enumerate() {
                if verts[slot] == v.0 || tri.is_infinite(n) || triple.contains(&n) {
                    continue;
                }
                if tri.cell_vertices(n).contains(&v.0) {
                    triple.push(n);
                    grown = true;
                    break;
                }
            }
            if grown {
                break;
            }
        }
        assert!(grown, "star too small for fixture");
    }
    let lone = star
        .iter()
        .copied()
        .find(|&c| {
            !triple.contains(&c)
                && triple.iter().all(|&d| !tri.cell_neighbors(c).contains(&d))
        })
        .expect("isolated cell exists");
    for &c in &triple {
        tri.set_label(c, CellLabel::Matter);
    }
    tri.set_label(lone, CellLabel::Matter);
    let (_, matter) = star_components(&tri, v).unwrap();
    let sizes: Vec<usize> = matter.iter().map(|m| m.len()).collect();
    assert_eq!(sizes, vec![1, 3], "ascending cardinality");
    assert!(is_singular(&tri, v).unwrap());

    singular_vertex_fixing(&mut tri, &[v], false).unwrap();
    // The singleton was relabeled to free, the triple kept.
    assert_eq!(tri.label(lone), CellLabel::Free);
    for &c in &triple {
        assert_eq!(tri.label(c), CellLabel::Matter);
    }
    assert!(!is_singular(&tri, v).unwrap());

    // Non-singular entries are untouched.
    let dump = tri.dump_cells();
    singular_vertex_fixing(&mut tri, &[v], false).unwrap();
    assert_eq!(tri.dump_cells(), dump);
}

#[test]
fn fixing_with_split_subdivides_minority_cells() {
    let (mut tri, v) = star_fixture(5);
    set_all(&mut tri, CellLabel::Free);
    let picked = pick_isolated_cells(&tri, v, 2);
    for &c in &picked {
        tri.set_label(c, CellLabel::Matter);
    }
    assert!(is_singular(&tri, v).unwrap());
    let cells_before = tri.n_finite_cells();
    singular_vertex_fixing(&mut tri, &[v], true).unwrap();
    tri.validate().unwrap();
    // One minority matter component (the smaller handle is kept on ties)
    // was split 1 -> 4: net +3 cells, labels inherited.
    assert_eq!(tri.n_finite_cells(), cells_before + 3);
    let matter_count = tri
        .finite_cells()
        .filter(|&c| tri.label(c) == CellLabel::Matter)
        .count();
    assert_eq!(matter_count, 1 + 4);
}

#[test]
fn fixing_never_increases_local_component_count() {
    for seed in 6..10 {
        let (mut tri, v) = star_fixture(seed);
        set_all(&mut tri, CellLabel::Free);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let star: Vec<CellHandle> = tri
            .incident_cells(v)
            .unwrap()
            .into_iter()
            .filter(|&c| !tri.is_infinite(c))
            .collect();
        for &c in &star {
            if rng.gen_bool(0.4) {
                tri.set_label(c, CellLabel::Matter);
            }
        }
        let (f0, m0) = star_components(&tri, v).unwrap();
        singular_vertex_fixing(&mut tri, &[v], false).unwrap();
        let (f1, m1) = star_components(&tri, v).unwrap();
        assert!(
            f1.len() + m1.len() <= f0.len() + m0.len(),
            "components must not increase at the processed vertex"
        );
    }
}

fn random_blob_labeling(tri: &mut Tetrahedralization, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blobs: Vec<(Point3, f64)> = (0..3)
        .map(|_| {
            (
                Point3::new(
                    rng.gen_range(-0.6..0.6),
                    rng.gen_range(-0.6..0.6),
                    rng.gen_range(-0.6..0.6),
                ),
                rng.gen_range(0.3..0.7),
            )
        })
        .collect();
    for c in tri.finite_cells().collect::<Vec<_>>() {
        let verts = tri.cell_vertices(c);
        let centroid = Point3::from(
            verts
                .iter()
                .map(|&v| tri.position(VertexHandle(v)).coords)
                .sum::<Vec3>()
                / 4.0,
        );
        let inside = blobs.iter().any(|(c0, r)| (centroid - c0).norm() < *r);
        let mut label = if inside { CellLabel::Matter } else { CellLabel::Free };
        if rng.gen_bool(0.03) {
            label = if label == CellLabel::Matter { CellLabel::Free } else { CellLabel::Matter };
        }
        tri.set_label(c, label);
    }
}

#[test]
fn cleanup_noop_on_clean_labelings() {
    let (mut tri, _) = star_fixture(11);
    set_all(&mut tri, CellLabel::Matter);
    let report = cleanup(&mut tri).unwrap();
    assert_eq!(report.before_count(), 0);
    assert_eq!(report.after_pass, [0, 0, 0]);
    assert!(report.remaining.is_empty());
}

#[test]
fn cleanup_fixes_isolated_singularity_in_first_pass() {
    let (mut tri, v) = star_fixture(12);
    set_all(&mut tri, CellLabel::Free);
    for c in pick_isolated_cells(&tri, v, 3) {
        tri.set_label(c, CellLabel::Matter);
    }
    assert!(is_singular(&tri, v).unwrap());
    let report = cleanup(&mut tri).unwrap();
    assert!(report.before_count() >= 1);
    assert_eq!(report.after_pass[0], 0, "relabel pass clears the pinch");
    assert!(report.remaining.is_empty());
    let csv = report.to_csv();
    assert!(csv.starts_with("vertex,cc_free,cc_matter,pass_fixed\n"));
    assert!(csv.lines().count() >= 2);
}

#[test]
fn cleanup_locality_leaves_far_cells_alone() {
    let points: Vec<Point3> = {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        (0..200)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect()
    };
    let mut tri = Tetrahedralization::build(&points).unwrap();
    random_blob_labeling(&mut tri, 13);
    let singular = collect_singular(&tri).unwrap();
    // Cells with no vertex on any singular vertex star must keep their
    // label and never be split.
    let protected: Vec<(CellHandle, CellLabel)> = tri
        .finite_cells()
        .filter(|&c| {
            tri.cell_vertices(c)
                .iter()
                .all(|&v| !singular.contains(&VertexHandle(v)))
        })
        .map(|c| (c, tri.label(c)))
        .collect();
    cleanup(&mut tri).unwrap();
    for (c, label) in protected {
        assert!(tri.is_live(c), "protected cell removed");
        assert_eq!(tri.label(c), label, "protected cell relabeled");
    }
}

#[test]
fn monte_carlo_cleanup_reduces_singular_vertices() {
    let points: Vec<Point3> = {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        (0..300)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect()
    };
    let base = Tetrahedralization::build(&points).unwrap();
    let mut rates = Vec::new();
    for trial in 0..40 {
        let mut tri = base.clone();
        random_blob_labeling(&mut tri, 1000 + trial);
        let report = cleanup(&mut tri).unwrap();
        let before = report.before_count();
        if before == 0 {
            continue;
        }
        let after = report.remaining.len();
        rates.push(1.0 - after as f64 / before as f64);
    }
    assert!(rates.len() >= 20, "harness must generate singular labelings");
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    assert!(mean >= 0.8, "mean singular-vertex reduction {mean:.3} < 0.8");
}

mod extraction {
    use super::*;

    #[test]
    fn one_matter_cell_in_free_universe() {
        let pts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.3, 0.3, 1.0),
            Point3::new(0.3, 0.3, -1.0),
        ];
        let mut tri = Tetrahedralization::build(&pts).unwrap();
        set_all(&mut tri, CellLabel::Free);
        let matter = tri.finite_cells().next().unwrap();
        tri.set_label(matter, CellLabel::Matter);
        let mesh = extract_surface(&tri).unwrap();
        assert_eq!(mesh.n_facets(), 4);
        assert_eq!(mesh.n_vertices(), 4);
        assert!(is_manifold(&mesh));
        // The matter cell's centroid lies on the negative side of every
        // oriented facet.
        let verts = tri.cell_vertices(matter);
        let centroid = Point3::from(
            verts
                .iter()
                .map(|&v| tri.position(VertexHandle(v)).coords)
                .sum::<Vec3>()
                / 4.0,
        );
        for fi in 0..mesh.n_facets() {
            let [a, b, c] = mesh.facets[fi];
            assert_eq!(
                orient3d(
                    &mesh.vertices[a as usize],
                    &mesh.vertices[b as usize],
                    &mesh.vertices[c as usize],
                    &centroid,
                ),
                -1
            );
            assert_eq!(mesh.source_cell[fi], matter);
        }
        // Orientation consistency: shared edges traversed in opposite
        // directions by their two facets.
        let mut directed: Vec<(u32, u32)> = Vec::new();
        for f in &mesh.facets {
            for k in 0..3 {
                directed.push((f[k], f[(k + 1) % 3]));
            }
        }
        for &(a, b) in &directed {
            assert!(directed.contains(&(b, a)));
            assert!(!directed.iter().filter(|&&e| e == (a, b)).nth(1).is_some());
        }
    }

    #[test]
    fn all_free_is_empty_and_unset_rejected() {
        let (mut tri, _) = star_fixture(31);
        set_all(&mut tri, CellLabel::Free);
        let mesh = extract_surface(&tri).unwrap();
        assert!(mesh.is_empty());
        let (tri2, _) = star_fixture(31);
        assert!(matches!(extract_surface(&tri2), Err(MeshError::UnlabeledCell(_))));
    }

    #[test]
    fn facet_count_matches_discordant_pair_scan() {
        let points: Vec<Point3> = {
            let mut rng = ChaCha8Rng::seed_from_u64(23);
            (0..150)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    )
                })
                .collect()
        };
        for trial in 0..5 {
            let mut tri = Tetrahedralization::build(&points).unwrap();
            random_blob_labeling(&mut tri, 300 + trial);
            let mesh = extract_surface(&tri).unwrap();
            let mut count = 0;
            for c in tri.finite_cells() {
                if tri.label(c) != CellLabel::Matter {
                    continue;
                }
                for n in tri.cell_neighbors(c) {
                    let free = tri.is_infinite(n) || tri.label(n) == CellLabel::Free;
                    if free {
                        count += 1;
                    }
                }
            }
            assert_eq!(mesh.n_facets(), count, "trial {trial}");
        }
    }
}

mod fallback {
    use super::*;

    fn closed_tetra_mesh() -> SurfaceMesh {
        let vertices = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let facets = vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [2, 0, 3]];
        SurfaceMesh::from_parts(vertices, facets).unwrap()
    }

    fn double_cone() -> SurfaceMesh {
        // Two closed cones sharing only their apex at the origin.
        let mut vertices = vec![Point3::new(0.0, 0.0, 0.0)];
        let mut facets = Vec::new();
        for (sign, tip_z) in [(1.0f64, 2.0), (-1.0, -2.0)] {
            let ring_base = vertices.len() as u32;
            for i in 0..4 {
                let a = std::f64::consts::TAU * i as f64 / 4.0;
                vertices.push(Point3::new(a.cos(), a.sin(), sign));
            }
            let tip = vertices.len() as u32;
            vertices.push(Point3::new(0.0, 0.0, tip_z));
            for i in 0..4u32 {
                let (b0, b1) = (ring_base + i, ring_base + (i + 1) % 4);
                if sign > 0.0 {
                    facets.push([0, b1, b0]);
                    facets.push([tip, b0, b1]);
                } else {
                    facets.push([0, b0, b1]);
                    facets.push([tip, b1, b0]);
                }
            }
        }
        SurfaceMesh::from_parts(vertices, facets).unwrap()
    }

    #[test]
    fn manifold_mesh_passes_through_unchanged() {
        let mesh = closed_tetra_mesh();
        assert!(is_manifold(&mesh));
        let out = vertex_split_fallback(&mesh);
        assert_eq!(out.vertices, mesh.vertices);
        assert_eq!(out.facets, mesh.facets);
    }

    #[test]
    fn pinched_apex_is_duplicated() {
        let mesh = double_cone();
        assert_eq!(mesh_singular_vertices(&mesh), vec![0]);
        let out = vertex_split_fallback(&mesh);
        assert_eq!(out.n_vertices(), mesh.n_vertices() + 1);
        assert!(is_manifold(&out));
        // Duplicates are co-located: geometry unchanged.
        let last = out.vertices[out.n_vertices() - 1];
        assert_eq!(last, mesh.vertices[0]);
        assert_eq!(out.n_facets(), mesh.n_facets());
        // Visibility: the duplicate carries none.
        assert_eq!(out.tet_vertex[out.n_vertices() - 1], None);
    }

    #[test]
    fn stuck_labelings_end_manifold_after_fallback() {
        let points: Vec<Point3> = {
            let mut rng = ChaCha8Rng::seed_from_u64(37);
            (0..200)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    )
                })
                .collect()
        };
        for trial in 0..10 {
            let mut tri = Tetrahedralization::build(&points).unwrap();
            random_blob_labeling(&mut tri, 500 + trial);
            cleanup(&mut tri).unwrap();
            let mesh = extract_surface(&tri).unwrap();
            let fixed = vertex_split_fallback(&mesh);
            assert!(is_manifold(&fixed), "trial {trial}");
            assert_eq!(fixed.n_facets(), mesh.n_facets());
        }
    }
}
