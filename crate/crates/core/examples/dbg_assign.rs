use mvsmesh::geom::{CameraRig, Image, PointSample};
use mvsmesh::pairsel::*;
use mvsmesh::pipeline::{camera_ring, icosphere, render_shape_image, Shape, ValueNoise};
use mvsmesh::render::{rasterize, NO_FACET};

fn main() {
    let shape = Shape::Sphere { radius: 1.0 };
    let tex = ValueNoise::new(7);
    let cams = camera_ring(&shape, 8, 256);
    let images: Vec<Image> = cams.iter().map(|c| render_shape_image(&shape, &tex, c)).collect();
    let rig = CameraRig::new(cams, images).unwrap();
    let gt = icosphere(1.0, 3);
    let vertex_vis: Vec<Vec<u32>> = gt.vertices.iter().map(|p| {
        rig.cameras.iter().filter(|cam| {
            let d = p - cam.center;
            shape.hit(&cam.center, &d, 1e-9).map(|t| (t - 1.0).abs() < 1e-6).unwrap_or(false)
        }).map(|cam| cam.id as u32).collect()
    }).collect();
    let samples: Vec<PointSample> = gt.vertices.iter().zip(&vertex_vis)
        .filter(|(_, v)| !v.is_empty())
        .map(|(p, v)| PointSample::new(*p, v.clone()).unwrap()).collect();
    let candidates = build_candidates(&samples, rig.len()).unwrap();
    let fv = facet_visibility(&gt, &vertex_vis);
    let phi = PhiTable::build(&fv, &candidates);
    let adjacency = facet_adjacency(&gt);
    let assignment = optimize(&adjacency, &phi, &candidates, &PottsParams::default()).unwrap();

    // Rasterize every camera once; facet -> cameras that actually see it.
    let depth: Vec<_> = rig.cameras.iter().map(|c| rasterize(c, &gt)).collect();
    let mut seen_by = vec![vec![false; rig.len()]; gt.n_facets()];
    for (ci, d) in depth.iter().enumerate() {
        for &f in &d.facet {
            if f != NO_FACET {
                seen_by[f as usize][ci] = true;
            }
        }
    }
    let mut bad_assign = 0; // assigned pair's reference camera never sees the facet
    let mut unrescuable = 0; // no candidate pair's reference sees it either
    let mut best_ok = 0;
    for f in 0..gt.n_facets() {
        let l = assignment.pair_of(f);
        let ref_ok = seen_by[f][l.i as usize];
        if !ref_ok {
            bad_assign += 1;
            let rescuable = candidates.pairs.iter().any(|p| seen_by[f][p.i as usize]);
            if !rescuable { unrescuable += 1; } else { best_ok += 1; }
        }
    }
    println!("facets {}; assigned-pair reference blind for {bad_assign} (rescuable {best_ok}, unrescuable {unrescuable})", gt.n_facets());
    // How many of the blind-assigned facets have the assigned pair's cams absent from nu_f?
    let mut floor_assigned = 0;
    for f in 0..gt.n_facets() {
        let l = assignment.pair_of(f);
        let oi = fv[f].occurrences(l.i);
        let oj = fv[f].occurrences(l.j);
        if oi == 0 || oj == 0 { floor_assigned += 1; }
    }
    println!("facets whose assigned pair has a camera absent from nu_f: {floor_assigned}");
}
