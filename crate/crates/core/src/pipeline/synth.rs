//! Synthetic desk-scale scenes: an analytic shape with a procedural
//! high-frequency texture, cameras on a ring or hemisphere facing it,
//! ray-traced images, and surface point samples with occlusion-tested
//! per-camera visibility.
//!
//! The renderer here intersects rays with the analytic shape directly and
//! shares no code with the mesh rasterizer used by refinement.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geom::{Camera, CameraRig, Image, PixelCoord, Point3, PointSample, Vec3};
use crate::manifold::SurfaceMesh;

use super::PipelineError;

/// Analytic ground-truth shapes.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Shape {
    /// Unit-style sphere at the origin.
    Sphere { radius: f64 },
    /// Axis-aligned cube at the origin.
    Cube { half: f64 },
    /// Heightfield z = amp sin(freq x) cos(freq y) over [-half, half]^2.
    WavyPlane { half: f64, amp: f64, freq: f64 },
}

impl Shape {
    pub fn parse(name: &str) -> Result<Self, PipelineError> {
        match name {
            "sphere" => Ok(Shape::Sphere { radius: 1.0 }),
            "cube" => Ok(Shape::Cube { half: 0.8 }),
            "wavy-plane" | "wavy_plane" | "wavy" => {
                Ok(Shape::WavyPlane { half: 1.2, amp: 0.18, freq: 2.4 })
            }
            other => Err(PipelineError::UnknownShape(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Sphere { .. } => "sphere",
            Shape::Cube { .. } => "cube",
            Shape::WavyPlane { .. } => "wavy-plane",
        }
    }

    /// Characteristic radius, for camera placement.
    pub fn extent(&self) -> f64 {
        match *self {
            Shape::Sphere { radius } => radius,
            Shape::Cube { half } => half * 3f64.sqrt(),
            Shape::WavyPlane { half, amp, .. } => (half * half * 2.0).sqrt() + amp,
        }
    }

    /// First ray intersection parameter `t > t_min` (scene units along the
    /// unnormalized direction are fine because callers compare against
    /// distances computed with the same direction scaling).
    pub fn hit(&self, origin: &Point3, dir: &Vec3, t_min: f64) -> Option<f64> {
        match *self {
            Shape::Sphere { radius } => {
                let oc = origin.coords;
                let a = dir.norm_squared();
                let b = 2.0 * oc.dot(dir);
                let c = oc.norm_squared() - radius * radius;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                    if t > t_min {
                        return Some(t);
                    }
                }
                None
            }
            Shape::Cube { half } => {
                let mut t0 = t_min;
                let mut t1 = f64::INFINITY;
                for k in 0..3 {
                    if dir[k] == 0.0 {
                        if origin[k].abs() > half {
                            return None;
                        }
                        continue;
                    }
                    let inv = 1.0 / dir[k];
                    let (mut a, mut b) = ((-half - origin[k]) * inv, (half - origin[k]) * inv);
                    if a > b {
                        std::mem::swap(&mut a, &mut b);
                    }
                    t0 = t0.max(a);
                    t1 = t1.min(b);
                    if t0 > t1 {
                        return None;
                    }
                }
                // Entry if we started outside, else the exit face.
                if t0 > t_min {
                    Some(t0)
                } else if t1 > t_min {
                    Some(t1)
                } else {
                    None
                }
            }
            Shape::WavyPlane { half, amp, freq } => {
                // March then bisect g(t) = z(t) - h(x(t), y(t)).
                let height = |p: Point3| amp * (freq * p.x).sin() * (freq * p.y).cos();
                let g = |t: f64| {
                    let p = Point3::from(origin.coords + dir * t);
                    p.z - height(p)
                };
                let speed = dir.norm();
                if speed == 0.0 {
                    return None;
                }
                let step = 0.02 * 1.0f64.min(amp.max(0.05)) / speed * 10.0;
                let t_max = (2.0 * self.extent() + (origin.coords.norm())) / speed * 2.0 + 1.0;
                let mut t_prev = t_min.max(1e-12);
                let mut g_prev = g(t_prev);
                let mut t = t_prev + step;
                while t < t_max {
                    let gt = g(t);
                    if g_prev == 0.0 {
                        return inside_patch(origin, dir, t_prev, half).then_some(t_prev);
                    }
                    if g_prev.signum() != gt.signum() {
                        // Bisection refine.
                        let (mut lo, mut hi) = (t_prev, t);
                        let mut glo = g_prev;
                        for _ in 0..60 {
                            let mid = 0.5 * (lo + hi);
                            let gm = g(mid);
                            if gm == 0.0 {
                                lo = mid;
                                break;
                            }
                            if glo.signum() == gm.signum() {
                                lo = mid;
                                glo = gm;
                            } else {
                                hi = mid;
                            }
                        }
                        let t_hit = 0.5 * (lo + hi);
                        return inside_patch(origin, dir, t_hit, half).then_some(t_hit);
                    }
                    t_prev = t;
                    g_prev = gt;
                    t += step;
                }
                None
            }
        }
    }

    /// Unsigned distance from `p` to the surface. Exact for sphere and
    /// cube; for the heightfield this is the vertical residual, adequate
    /// for sampling checks (metrics use mesh ground truth via the BVH).
    pub fn distance(&self, p: &Point3) -> f64 {
        match *self {
            Shape::Sphere { radius } => (p.coords.norm() - radius).abs(),
            Shape::Cube { half } => {
                let q = Vec3::new(p.x.abs() - half, p.y.abs() - half, p.z.abs() - half);
                let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
                let inside = q.x.max(q.y).max(q.z).min(0.0);
                (outside + inside).abs()
            }
            Shape::WavyPlane { amp, freq, .. } => {
                (p.z - amp * (freq * p.x).sin() * (freq * p.y).cos()).abs()
            }
        }
    }

    /// Uniform-ish surface sample (exact for sphere and cube; area-biased
    /// by slope for the heightfield, documented as adequate at desk scale).
    pub fn sample_surface(&self, rng: &mut ChaCha8Rng) -> Point3 {
        match *self {
            Shape::Sphere { radius } => loop {
                let v = Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                let n = v.norm();
                if n > 1e-6 && n <= 1.0 {
                    return Point3::from(v / n * radius);
                }
            },
            Shape::Cube { half } => {
                let face = rng.gen_range(0..6usize);
                let a = rng.gen_range(-half..half);
                let b = rng.gen_range(-half..half);
                let (axis, sign) = (face / 2, if face % 2 == 0 { half } else { -half });
                match axis {
                    0 => Point3::new(sign, a, b),
                    1 => Point3::new(a, sign, b),
                    _ => Point3::new(a, b, sign),
                }
            }
            Shape::WavyPlane { half, amp, freq } => {
                let x = rng.gen_range(-half..half);
                let y = rng.gen_range(-half..half);
                Point3::new(x, y, amp * (freq * x).sin() * (freq * y).cos())
            }
        }
    }

    /// Dense triangle mesh of the shape, used as metric ground truth.
    pub fn ground_truth_mesh(&self, resolution: usize) -> SurfaceMesh {
        match *self {
            Shape::Sphere { radius } => icosphere(radius, resolution.max(3)),
            Shape::Cube { half } => cube_mesh(half, resolution.max(8)),
            Shape::WavyPlane { half, amp, freq } => {
                let n = resolution.max(8);
                let mut vertices = Vec::new();
                for j in 0..=n {
                    for i in 0..=n {
                        let x = -half + 2.0 * half * i as f64 / n as f64;
                        let y = -half + 2.0 * half * j as f64 / n as f64;
                        vertices.push(Point3::new(
                            x,
                            y,
                            amp * (freq * x).sin() * (freq * y).cos(),
                        ));
                    }
                }
                let mut facets = Vec::new();
                let at = |i: usize, j: usize| (j * (n + 1) + i) as u32;
                for j in 0..n {
                    for i in 0..n {
                        facets.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
                        facets.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
                    }
                }
                SurfaceMesh::from_parts(vertices, facets).expect("grid mesh")
            }
        }
    }
}

fn inside_patch(origin: &Point3, dir: &Vec3, t: f64, half: f64) -> bool {
    let p = Point3::from(origin.coords + dir * t);
    p.x.abs() <= half && p.y.abs() <= half
}

/// Subdivided icosahedron with vertices normalized onto the sphere.
pub fn icosphere(radius: f64, subdivisions: usize) -> SurfaceMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut facets: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: std::collections::HashMap<(u32, u32), u32> =
            std::collections::HashMap::new();
        let mut next = Vec::with_capacity(facets.len() * 4);
        for f in &facets {
            let mut mid = [0u32; 3];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[k] = *midpoint.entry(key).or_insert_with(|| {
                    let m = (vertices[a as usize] + vertices[b as usize]).normalize();
                    vertices.push(m);
                    vertices.len() as u32 - 1
                });
            }
            next.push([f[0], mid[0], mid[2]]);
            next.push([f[1], mid[1], mid[0]]);
            next.push([f[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        facets = next;
    }
    let vertices: Vec<Point3> = vertices.into_iter().map(|v| Point3::from(v * radius)).collect();
    SurfaceMesh::from_parts(vertices, facets).expect("icosphere")
}

fn cube_mesh(half: f64, per_side: usize) -> SurfaceMesh {
    let n = per_side;
    let mut vertices: Vec<Point3> = Vec::new();
    let mut facets: Vec<[u32; 3]> = Vec::new();
    let mut index: std::collections::HashMap<(i64, i64, i64), u32> =
        std::collections::HashMap::new();
    let quant = |v: f64| (v * 1e9).round() as i64;
    let mut vertex = |vertices: &mut Vec<Point3>, p: Point3| -> u32 {
        *index.entry((quant(p.x), quant(p.y), quant(p.z))).or_insert_with(|| {
            vertices.push(p);
            vertices.len() as u32 - 1
        })
    };
    // axis u/v per face, outward orientation per sign.
    for (axis, sign) in [(0, 1.0f64), (0, -1.0), (1, 1.0), (1, -1.0), (2, 1.0), (2, -1.0)] {
        let (ua, va) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let mk = |i: usize, j: usize, vertices: &mut Vec<Point3>, index_fn: &mut dyn FnMut(&mut Vec<Point3>, Point3) -> u32| {
            let u = -half + 2.0 * half * i as f64 / n as f64;
            let v = -half + 2.0 * half * j as f64 / n as f64;
            let mut p = [0.0; 3];
            p[axis] = half * sign;
            p[ua] = u;
            p[va] = v;
            index_fn(vertices, Point3::new(p[0], p[1], p[2]))
        };
        for j in 0..n {
            for i in 0..n {
                let a = mk(i, j, &mut vertices, &mut vertex);
                let b = mk(i + 1, j, &mut vertices, &mut vertex);
                let c = mk(i + 1, j + 1, &mut vertices, &mut vertex);
                let d = mk(i, j + 1, &mut vertices, &mut vertex);
                // Outward winding depends on the face orientation; exact
                // winding is irrelevant for distance queries.
                if sign > 0.0 {
                    facets.push([a, b, c]);
                    facets.push([a, c, d]);
                } else {
                    facets.push([a, c, b]);
                    facets.push([a, d, c]);
                }
            }
        }
    }
    SurfaceMesh::from_parts(vertices, facets).expect("cube mesh")
}

/// Seeded 3D value noise: trilinear interpolation of hashed lattice
/// values, several octaves, range clamped to [0.05, 0.95]. High-frequency
/// octaves guarantee nonzero 5x5 window variance nearly everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ValueNoise {
    seed: u64,
}

impl ValueNoise {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn lattice(&self, x: i64, y: i64, z: i64, octave: u64) -> f64 {
        let mut h = self
            .seed
            .wrapping_mul(0x9e3779b97f4a7c15)
            .wrapping_add((x as u64).wrapping_mul(0xbf58476d1ce4e5b9))
            .wrapping_add((y as u64).wrapping_mul(0x94d049bb133111eb))
            .wrapping_add((z as u64).wrapping_mul(0xd6e8feb86659fd93))
            .wrapping_add(octave.wrapping_mul(0xff51afd7ed558ccd));
        // splitmix64 finalizer
        h ^= h >> 30;
        h = h.wrapping_mul(0xbf58476d1ce4e5b9);
        h ^= h >> 27;
        h = h.wrapping_mul(0x94d049bb133111eb);
        h ^= h >> 31;
        (h >> 11) as f64 / (1u64 << 53) as f64
    }

    fn octave(&self, p: &Point3, freq: f64, oct: u64) -> f64 {
        let q = p.coords * freq;
        let base = q.map(|c| c.floor());
        let frac = q - base;
        let (ix, iy, iz) = (base.x as i64, base.y as i64, base.z as i64);
        let mut v = 0.0;
        for dz in 0..2i64 {
            for dy in 0..2i64 {
                for dx in 0..2i64 {
                    let w = (if dx == 0 { 1.0 - frac.x } else { frac.x })
                        * (if dy == 0 { 1.0 - frac.y } else { frac.y })
                        * (if dz == 0 { 1.0 - frac.z } else { frac.z });
                    v += w * self.lattice(ix + dx, iy + dy, iz + dz, oct);
                }
            }
        }
        v
    }

    /// Texture value at a 3D point, in [0.05, 0.95].
    pub fn sample(&self, p: &Point3) -> f64 {
        let mut total = 0.0;
        let mut amp = 0.5;
        let mut freq = 4.0;
        let mut norm = 0.0;
        for oct in 0..5u64 {
            total += amp * self.octave(p, freq, oct);
            norm += amp;
            amp *= 0.62;
            freq *= 2.0;
        }
        (0.08 + 0.84 * (total / norm)).clamp(0.05, 0.95)
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub shape: Shape,
    pub n_cameras: usize,
    pub image_size: usize,
    pub n_points: usize,
    pub texture_seed: u64,
    pub rng_seed: u64,
    /// Gaussian position noise applied to stored sample positions.
    pub noise_sigma: f64,
    /// Fraction of samples replaced by box outliers with bogus visibility.
    pub outlier_fraction: f64,
    /// Probability of keeping each visibility ray (at least one survives).
    pub visibility_keep: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            shape: Shape::Sphere { radius: 1.0 },
            n_cameras: 8,
            image_size: 256,
            n_points: 600,
            texture_seed: 7,
            rng_seed: 1,
            noise_sigma: 0.0,
            outlier_fraction: 0.0,
            visibility_keep: 1.0,
        }
    }
}

/// Scene bundle: rig, samples and the analytic ground truth.
#[derive(Debug, Clone)]
pub struct SceneBundle {
    pub rig: CameraRig,
    pub samples: Vec<PointSample>,
    pub ground_truth: Option<Shape>,
    /// Ground-truth mesh for metric queries (dense version of the shape).
    pub ground_truth_mesh: Option<SurfaceMesh>,
}

/// Occlusion-tested visibility of a surface point from a camera.
fn visible(shape: &Shape, cam: &Camera, p: &Point3) -> bool {
    let Some((px, _)) = cam.project(p).in_front() else {
        return false;
    };
    if px.u < 0.0
        || px.v < 0.0
        || px.u >= cam.width as f64
        || px.v >= cam.height as f64
    {
        return false;
    }
    let dir = p - cam.center;
    match shape.hit(&cam.center, &dir, 1e-9) {
        // dir reaches p at t = 1; the first hit must be p itself.
        Some(t) => (t - 1.0).abs() <= 1e-6,
        None => false,
    }
}

/// Cameras on a ring (hemisphere tilt alternating) facing the origin.
pub fn camera_ring(shape: &Shape, n_cameras: usize, image_size: usize) -> Vec<Camera> {
    let r = 3.2 * shape.extent();
    let up = Vec3::new(0.0, 0.0, 1.0);
    let wavy = matches!(shape, Shape::WavyPlane { .. });
    (0..n_cameras)
        .map(|i| {
            let angle = std::f64::consts::TAU * i as f64 / n_cameras as f64;
            let elevation = if wavy {
                // Stay above the heightfield.
                0.9 + 0.25 * ((i % 2) as f64)
            } else {
                // Alternate low and steep views so the poles are covered.
                match i % 6 {
                    0 => 0.2,
                    1 => -0.55,
                    2 => 0.75,
                    3 => -0.2,
                    4 => 0.55,
                    _ => -0.75,
                }
            };
            let center = Point3::new(
                r * angle.cos() * (1.0 - elevation * elevation / 2.0).max(0.3),
                r * angle.sin() * (1.0 - elevation * elevation / 2.0).max(0.3),
                r * elevation,
            );
            Camera::look_at(
                i,
                center,
                Point3::origin(),
                up,
                image_size as f64,
                image_size,
                image_size,
            )
            .expect("ring camera")
        })
        .collect()
}

/// Ray-traced image of the textured shape (0.5 background).
pub fn render_shape_image(shape: &Shape, noise: &ValueNoise, cam: &Camera) -> Image {
    Image::from_fn(cam.width, cam.height, |x, y| {
        let dir = cam.pixel_ray(PixelCoord::new(x as f64 + 0.5, y as f64 + 0.5));
        match shape.hit(&cam.center, &dir, 1e-9) {
            Some(t) => noise.sample(&Point3::from(cam.center.coords + dir * t)),
            None => 0.5,
        }
    })
}

/// Generates the full synthetic scene bundle.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SceneBundle, PipelineError> {
    if cfg.n_cameras < 2 {
        return Err(PipelineError::TooFewCameras(cfg.n_cameras));
    }
    let shape = cfg.shape;
    let noise = ValueNoise::new(cfg.texture_seed);
    let cameras = camera_ring(&shape, cfg.n_cameras, cfg.image_size);
    let images: Vec<Image> =
        cameras.iter().map(|c| render_shape_image(&shape, &noise, c)).collect();
    let rig = CameraRig::new(cameras, images).map_err(PipelineError::Geom)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut samples = Vec::with_capacity(cfg.n_points);
    let extent = shape.extent();
    while samples.len() < cfg.n_points {
        let is_outlier = rng.gen_bool(cfg.outlier_fraction.clamp(0.0, 1.0));
        if is_outlier {
            let p = Point3::new(
                rng.gen_range(-1.3 * extent..1.3 * extent),
                rng.gen_range(-1.3 * extent..1.3 * extent),
                rng.gen_range(-1.3 * extent..1.3 * extent),
            );
            let n_vis = rng.gen_range(1..=3.min(cfg.n_cameras));
            let vis: Vec<u32> =
                (0..n_vis).map(|_| rng.gen_range(0..cfg.n_cameras as u32)).collect();
            if let Ok(s) = PointSample::new(p, vis) {
                samples.push(s);
            }
            continue;
        }
        let p = shape.sample_surface(&mut rng);
        let mut vis: Vec<u32> = rig
            .cameras
            .iter()
            .filter(|cam| visible(&shape, cam, &p))
            .map(|cam| cam.id as u32)
            .collect();
        if vis.is_empty() {
            continue;
        }
        if cfg.visibility_keep < 1.0 {
            let kept: Vec<u32> = vis
                .iter()
                .copied()
                .filter(|_| rng.gen_bool(cfg.visibility_keep.clamp(0.0, 1.0)))
                .collect();
            vis = if kept.is_empty() { vec![vis[0]] } else { kept };
        }
        let stored = if cfg.noise_sigma > 0.0 {
            // Box-Muller Gaussian noise.
            let gauss = |rng: &mut ChaCha8Rng| {
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            };
            Point3::new(
                p.x + cfg.noise_sigma * gauss(&mut rng),
                p.y + cfg.noise_sigma * gauss(&mut rng),
                p.z + cfg.noise_sigma * gauss(&mut rng),
            )
        } else {
            p
        };
        samples.push(PointSample::new(stored, vis).map_err(PipelineError::Geom)?);
    }

    let gt_mesh = shape.ground_truth_mesh(match shape {
        Shape::Sphere { .. } => 4,
        _ => 48,
    });
    Ok(SceneBundle {
        rig,
        samples,
        ground_truth: Some(shape),
        ground_truth_mesh: Some(gt_mesh),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_samples_lie_on_the_sphere() {
        let cfg = SynthConfig { n_points: 120, image_size: 64, ..SynthConfig::default() };
        let bundle = generate_synthetic(&cfg).unwrap();
        for s in &bundle.samples {
            assert!((s.position.coords.norm() - 1.0).abs() < 1e-9);
            assert!(!s.visibility.is_empty());
        }
        assert_eq!(bundle.rig.len(), 8);
    }

    #[test]
    fn far_side_samples_exclude_front_cameras() {
        let cfg = SynthConfig { n_points: 200, image_size: 64, ..SynthConfig::default() };
        let bundle = generate_synthetic(&cfg).unwrap();
        let mut checked = 0;
        for s in &bundle.samples {
            for cam in &bundle.rig.cameras {
                let to_sample = s.position - cam.center;
                let facing = s.position.coords.dot(&to_sample);
                // Sample on the far hemisphere as seen from this camera:
                // its outward normal points away, so the camera must not
                // be in the visibility set.
                if facing > 0.7 * to_sample.norm() {
                    assert!(
                        !s.visibility.contains(&(cam.id as u32)),
                        "occluded sample visible from camera {}",
                        cam.id
                    );
                    checked += 1;
                }
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn images_match_independent_raytrace_oracle() {
        // The oracle re-traces with bisection on the implicit function
        // instead of the closed-form quadratic.
        let shape = Shape::Sphere { radius: 1.0 };
        let noise = ValueNoise::new(5);
        let cam = camera_ring(&shape, 4, 48).remove(0);
        let img = render_shape_image(&shape, &noise, &cam);
        let mut worst = 0.0f64;
        for y in 0..48 {
            for x in 0..48 {
                let dir = cam.pixel_ray(PixelCoord::new(x as f64 + 0.5, y as f64 + 0.5));
                let f = |t: f64| (cam.center.coords + dir * t).norm() - 1.0;
                // Bracket the first root along the ray.
                let mut t0 = 0.0;
                let mut hit = None;
                let step = 0.01;
                let mut t = step;
                while t < 10.0 {
                    if f(t0).signum() != f(t).signum() {
                        let (mut lo, mut hi) = (t0, t);
                        for _ in 0..90 {
                            let mid = 0.5 * (lo + hi);
                            if f(lo).signum() == f(mid).signum() {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        hit = Some(0.5 * (lo + hi));
                        break;
                    }
                    t0 = t;
                    t += step;
                }
                let expected = match hit {
                    Some(t) => noise.sample(&Point3::from(cam.center.coords + dir * t)),
                    None => 0.5,
                };
                worst = worst.max((img.get(x, y) - expected).abs());
            }
        }
        assert!(worst < 1e-6, "worst pixel diff {worst}");
    }

    #[test]
    fn wavy_plane_and_cube_hits() {
        let wavy = Shape::WavyPlane { half: 1.2, amp: 0.18, freq: 2.4 };
        let origin = Point3::new(0.3, -0.2, 2.0);
        let dir = Vec3::new(0.0, 0.0, -1.0);
        let t = wavy.hit(&origin, &dir, 1e-9).expect("vertical ray hits the plane");
        let p = Point3::from(origin.coords + dir * t);
        assert!(wavy.distance(&p) < 1e-9);

        let cube = Shape::Cube { half: 0.8 };
        let t = cube.hit(&Point3::new(3.0, 0.1, 0.2), &Vec3::new(-1.0, 0.0, 0.0), 1e-9).unwrap();
        assert!((t - 2.2).abs() < 1e-12);
        assert!(cube.hit(&Point3::new(3.0, 2.0, 0.0), &Vec3::new(-1.0, 0.0, 0.0), 1e-9).is_none());
        assert!((cube.distance(&Point3::new(0.9, 0.0, 0.0)) - 0.1).abs() < 1e-12);
        assert!((cube.distance(&Point3::new(0.0, 0.0, 0.0)) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn value_noise_has_local_variance() {
        let noise = ValueNoise::new(11);
        // 5x5 patches at image scale must almost always carry variance.
        let mut flat = 0;
        let trials = 60;
        for k in 0..trials {
            let base = Point3::new(0.3 * k as f64, -0.1 * k as f64, 0.05 * k as f64);
            let mut vals = Vec::new();
            for i in 0..5 {
                for j in 0..5 {
                    vals.push(noise.sample(&Point3::new(
                        base.x + i as f64 * 0.012,
                        base.y + j as f64 * 0.012,
                        base.z,
                    )));
                }
            }
            let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
            let var: f64 =
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
            if var.sqrt() < 1e-6 {
                flat += 1;
            }
        }
        assert_eq!(flat, 0, "{flat}/{trials} flat patches");
    }

    #[test]
    fn unknown_shape_rejected() {
        assert!(Shape::parse("torus").is_err());
        assert_eq!(Shape::parse("sphere").unwrap(), Shape::Sphere { radius: 1.0 });
    }
}
