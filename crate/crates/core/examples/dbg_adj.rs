use mvsmesh::geom::*;
use mvsmesh::pipeline::{camera_ring, icosphere, render_shape_image, Shape, ValueNoise};
use mvsmesh::render::*;

fn main() {
    let shape = Shape::Sphere { radius: 1.0 };
    let tex = ValueNoise::new(7);
    let cams = camera_ring(&shape, 8, 256);
    let images: Vec<_> = cams.iter().map(|c| render_shape_image(&shape, &tex, c)).collect();
    let rig = CameraRig::new(cams, images).unwrap();
    let mesh = icosphere(1.0, 3);
    let d0 = rasterize(&rig.cameras[0], &mesh);
    let d1 = rasterize(&rig.cameras[1], &mesh);
    let tol = 1e-3 * mesh.bbox_diagonal();
    let re = reproject(&rig.cameras[0], &rig.cameras[1], &rig.images[1], &d0, &d1, tol);
    let occl = occlusion_mask(&d0, 10.0);
    let mut re2 = re.clone();
    for i in 0..re2.mask.len() { if occl[i] { re2.mask[i] = false; } }
    let adj = zncc_adjoint(&rig.images[0], &re2, 5);
    let mut top: Vec<(f64, usize)> = adj.iter().enumerate().map(|(i, &a)| (a.abs(), i)).collect();
    top.sort_by(|a, b| b.0.total_cmp(&a.0));
    println!("top |G| values:");
    for &(mag, idx) in top.iter().take(8) {
        let (x, y) = (idx % 256, idx / 256);
        // local 5x5 window stds of I and R around this pixel
        let mut wi = Vec::new(); let mut wr = Vec::new();
        for dy in 0..5usize { for dx in 0..5usize {
            let (sx, sy) = (x + dx - 2, y + dy - 2);
            wi.push(rig.images[0].get(sx, sy));
            wr.push(re2.image.get(sx, sy));
        }}
        let stats = |w: &[f64]| {
            let m = w.iter().sum::<f64>() / w.len() as f64;
            (w.iter().map(|v| (v - m)*(v - m)).sum::<f64>() / w.len() as f64).sqrt()
        };
        println!("  |G|={mag:9.1} at ({x},{y})  std_I={:.2e} std_R={:.2e} masked={} graz_depth={:.3}",
            stats(&wi), stats(&wr), !re2.mask[idx], d0.depth[idx]);
    }
    let mags: Vec<f64> = adj.iter().map(|a| a.abs()).filter(|&a| a > 0.0).collect();
    let mut m = mags.clone(); m.sort_by(f64::total_cmp);
    println!("nonzero |G| count {} p50 {:.3} p99 {:.3}", m.len(), m[m.len()/2], m[(m.len()-1)*99/100]);
}
