//! Software rasterization services for refinement: depth maps, mesh-
//! mediated reprojection, ZNCC error maps and their adjoint, occlusion
//! masks and image gradients.
//!
//! Conventions, pinned so oracles can match coverage bit for bit: pixel
//! centers sample at (x + 0.5, y + 0.5); screen v grows downward; edge
//! ownership follows the top-left rule; depth is interpolated
//! perspective-correct (linear in 1/z); z-ties keep the lower facet id.
//! Facets with any vertex at or behind the camera plane are skipped.

mod zncc;

pub use zncc::{zncc_adjoint, zncc_adjoint_with_centers, zncc_error, zncc_window_err, zncc_window_grad_b, ErrorMap};

use crate::geom::{Camera, Image, PixelCoord};
use crate::manifold::SurfaceMesh;

pub const NO_FACET: u32 = u32::MAX;

/// Per-pixel nearest-surface depth and facet id.
#[derive(Debug, Clone)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    /// Positive depth where defined, +inf where empty.
    pub depth: Vec<f64>,
    /// Facet id where defined, `NO_FACET` where empty.
    pub facet: Vec<u32>,
}

impl DepthMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            depth: vec![f64::INFINITY; width * height],
            facet: vec![NO_FACET; width * height],
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn is_defined(&self, x: usize, y: usize) -> bool {
        self.facet[self.idx(x, y)] != NO_FACET
    }

    pub fn coverage(&self) -> usize {
        self.facet.iter().filter(|&&f| f != NO_FACET).count()
    }
}

#[derive(Debug, Clone, Copy)]
struct ScreenVertex {
    u: f64,
    v: f64,
    inv_z: f64,
}

#[inline]
fn edge(ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64) -> f64 {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

/// Top-left ownership for an edge from (ax, ay) to (bx, by) of a triangle
/// with positive screen area (v downward): top edges are horizontal going
/// left, left edges go upward in image coordinates.
#[inline]
fn is_top_left(ax: f64, ay: f64, bx: f64, by: f64) -> bool {
    let dy = by - ay;
    let dx = bx - ax;
    (dy == 0.0 && dx < 0.0) || dy < 0.0
}

/// Per-pixel nearest-facet depth and facet ids via z-buffering with
/// perspective-correct interpolation.
pub fn rasterize(cam: &Camera, mesh: &SurfaceMesh) -> DepthMap {
    let mut map = DepthMap::empty(cam.width, cam.height);
    let projected: Vec<Option<ScreenVertex>> = mesh
        .vertices
        .iter()
        .map(|p| {
            cam.project(p)
                .in_front()
                .map(|(px, z)| ScreenVertex { u: px.u, v: px.v, inv_z: 1.0 / z })
        })
        .collect();

    for (fi, f) in mesh.facets.iter().enumerate() {
        let (Some(a), Some(b), Some(c)) = (
            projected[f[0] as usize],
            projected[f[1] as usize],
            projected[f[2] as usize],
        ) else {
            continue;
        };
        rasterize_triangle(&mut map, fi as u32, a, b, c);
    }
    map
}

fn rasterize_triangle(map: &mut DepthMap, fi: u32, a: ScreenVertex, b: ScreenVertex, c: ScreenVertex) {
    let area = edge(a.u, a.v, b.u, b.v, c.u, c.v);
    if area == 0.0 {
        return;
    }
    // Normalize to positive screen area so the edge tests face inward.
    let (a, b, c, area) = if area < 0.0 { (a, c, b, -area) } else { (a, b, c, area) };

    let min_u = a.u.min(b.u).min(c.u);
    let max_u = a.u.max(b.u).max(c.u);
    let min_v = a.v.min(b.v).min(c.v);
    let max_v = a.v.max(b.v).max(c.v);
    // Pixel centers x + 0.5 within [min_u, max_u].
    let x0 = ((min_u - 0.5).ceil().max(0.0)) as usize;
    let x1 = ((max_u - 0.5).floor()).min(map.width as f64 - 1.0);
    let y0 = ((min_v - 0.5).ceil().max(0.0)) as usize;
    let y1 = ((max_v - 0.5).floor()).min(map.height as f64 - 1.0);
    if x1 < 0.0 || y1 < 0.0 {
        return;
    }
    let (x1, y1) = (x1 as usize, y1 as usize);

    let tl0 = is_top_left(b.u, b.v, c.u, c.v);
    let tl1 = is_top_left(c.u, c.v, a.u, a.v);
    let tl2 = is_top_left(a.u, a.v, b.u, b.v);

    for y in y0..=y1 {
        let py = y as f64 + 0.5;
        for x in x0..=x1 {
            let px = x as f64 + 0.5;
            let e0 = edge(b.u, b.v, c.u, c.v, px, py);
            let e1 = edge(c.u, c.v, a.u, a.v, px, py);
            let e2 = edge(a.u, a.v, b.u, b.v, px, py);
            let inside = (e0 > 0.0 || (e0 == 0.0 && tl0))
                && (e1 > 0.0 || (e1 == 0.0 && tl1))
                && (e2 > 0.0 || (e2 == 0.0 && tl2));
            if !inside {
                continue;
            }
            let l0 = e0 / area;
            let l1 = e1 / area;
            let l2 = e2 / area;
            let inv_z = l0 * a.inv_z + l1 * b.inv_z + l2 * c.inv_z;
            if inv_z <= 0.0 {
                continue;
            }
            let z = 1.0 / inv_z;
            let idx = map.idx(x, y);
            if z < map.depth[idx] {
                map.depth[idx] = z;
                map.facet[idx] = fi;
            }
        }
    }
}

/// Reprojection of camera j's image into camera i through the surface,
/// with its validity mask.
#[derive(Debug, Clone)]
pub struct ReprojectedImage {
    pub image: Image,
    pub mask: Vec<bool>,
}

impl ReprojectedImage {
    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// For each covered pixel of camera i: backproject through `depth_i`,
/// project into camera j, depth-test against `depth_j` (tolerance
/// `depth_tol`), and sample `img_j` bilinearly.
pub fn reproject(
    cam_i: &Camera,
    cam_j: &Camera,
    img_j: &Image,
    depth_i: &DepthMap,
    depth_j: &DepthMap,
    depth_tol: f64,
) -> ReprojectedImage {
    let (w, h) = (depth_i.width, depth_i.height);
    let mut values = vec![0.0; w * h];
    let mut mask = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let idx = depth_i.idx(x, y);
            if depth_i.facet[idx] == NO_FACET {
                continue;
            }
            let center = PixelCoord::new(x as f64 + 0.5, y as f64 + 0.5);
            let p = match cam_i.backproject(center, depth_i.depth[idx]) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let Some((px_j, z_j)) = cam_j.project(&p).in_front() else {
                continue;
            };
            let Some(reference) = sample_depth(depth_j, px_j.u, px_j.v) else {
                continue;
            };
            if z_j > reference + depth_tol {
                continue; // occluded in camera j
            }
            let Some(v) = img_j.bilinear(px_j.u, px_j.v) else {
                continue;
            };
            values[idx] = v;
            mask[idx] = true;
        }
    }
    ReprojectedImage { image: Image::new(w, h, values).expect("sized"), mask }
}

/// Depth reference for the occlusion test at continuous coordinates:
/// bilinear where the four surrounding texels are covered (tracks the
/// within-pixel surface slope), otherwise the farthest covered neighbor
/// (permissive near silhouettes where interpolation is undefined).
fn sample_depth(depth: &DepthMap, u: f64, v: f64) -> Option<f64> {
    let (w, h) = (depth.width, depth.height);
    if w < 2 || h < 2 {
        return None;
    }
    let gx = u - 0.5;
    let gy = v - 0.5;
    if gx < -0.5 || gy < -0.5 || gx > w as f64 - 0.5 || gy > h as f64 - 0.5 {
        return None;
    }
    let x0 = (gx.floor().max(0.0) as usize).min(w - 2);
    let y0 = (gy.floor().max(0.0) as usize).min(h - 2);
    let fx = (gx - x0 as f64).clamp(0.0, 1.0);
    let fy = (gy - y0 as f64).clamp(0.0, 1.0);
    let texels = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1, y0, fx * (1.0 - fy)),
        (x0, y0 + 1, (1.0 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ];
    if texels.iter().all(|&(x, y, _)| depth.is_defined(x, y)) {
        Some(texels.iter().map(|&(x, y, wgt)| depth.depth[depth.idx(x, y)] * wgt).sum())
    } else {
        texels
            .iter()
            .filter(|&&(x, y, _)| depth.is_defined(x, y))
            .map(|&(x, y, _)| depth.depth[depth.idx(x, y)])
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))))
    }
}

/// Masks pixels within one pixel of a depth discontinuity whose forward
/// difference exceeds `threshold_mult` times the median depth-gradient
/// magnitude of the map. Covered pixels bordering uncovered ones (the
/// outer silhouette) count as discontinuities: those observations are
/// grazing and photometrically unreliable.
pub fn occlusion_mask(depth: &DepthMap, threshold_mult: f64) -> Vec<bool> {
    let (w, h) = (depth.width, depth.height);
    let mut grads: Vec<f64> = Vec::new();
    let mut jump = vec![false; w * h];
    let mut diffs: Vec<(usize, usize, f64)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !depth.is_defined(x, y) {
                continue;
            }
            let d = depth.depth[depth.idx(x, y)];
            for (nx, ny) in [(x + 1, y), (x, y + 1)] {
                if nx >= w || ny >= h {
                    continue;
                }
                if depth.is_defined(nx, ny) {
                    let g = (depth.depth[depth.idx(nx, ny)] - d).abs();
                    grads.push(g);
                    diffs.push((depth.idx(x, y), depth.idx(nx, ny), g));
                } else {
                    jump[depth.idx(x, y)] = true;
                }
            }
            // Silhouette also when the left/top neighbor is uncovered.
            if (x > 0 && !depth.is_defined(x - 1, y)) || (y > 0 && !depth.is_defined(x, y - 1)) {
                jump[depth.idx(x, y)] = true;
            }
        }
    }
    if !grads.is_empty() {
        grads.sort_by(f64::total_cmp);
        let median = grads[grads.len() / 2];
        // Absolute floor keeps float noise on constant-depth regions from
        // reading as discontinuities.
        let mut depths: Vec<f64> =
            depth.depth.iter().copied().filter(|d| d.is_finite()).collect();
        depths.sort_by(f64::total_cmp);
        let depth_scale = depths.get(depths.len() / 2).copied().unwrap_or(1.0);
        let threshold = (threshold_mult * median).max(1e-9 * depth_scale);
        for (a, b, g) in diffs {
            if g > threshold {
                jump[a] = true;
                jump[b] = true;
            }
        }
    }
    // Dilate by one pixel.
    let mut mask = jump.clone();
    for y in 0..h {
        for x in 0..w {
            if !jump[y * w + x] {
                continue;
            }
            for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    mask[ny as usize * w + nx as usize] = true;
                }
            }
        }
    }
    mask
}

/// Central-difference image gradient with replicated borders; one
/// (du, dv) pair per pixel.
pub fn image_gradient(img: &Image) -> Vec<(f64, f64)> {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let ym = y.saturating_sub(1);
            let yp = (y + 1).min(h - 1);
            let du = (img.get(xp, y) - img.get(xm, y)) / 2.0;
            let dv = (img.get(x, yp) - img.get(x, ym)) / 2.0;
            out.push((du, dv));
        }
    }
    out
}

/// Bilinear sample of a per-pixel gradient field at continuous image
/// coordinates (pixel centers at x + 0.5).
pub fn sample_gradient(grad: &[(f64, f64)], w: usize, h: usize, u: f64, v: f64) -> Option<(f64, f64)> {
    if w < 2 || h < 2 {
        return None;
    }
    let gx = u - 0.5;
    let gy = v - 0.5;
    if gx < 0.0 || gy < 0.0 || gx > (w - 1) as f64 || gy > (h - 1) as f64 {
        return None;
    }
    let x0 = (gx.floor() as usize).min(w - 2);
    let y0 = (gy.floor() as usize).min(h - 2);
    let fx = gx - x0 as f64;
    let fy = gy - y0 as f64;
    let at = |x: usize, y: usize| grad[y * w + x];
    let lerp = |a: (f64, f64), b: (f64, f64), t: f64| {
        (a.0 * (1.0 - t) + b.0 * t, a.1 * (1.0 - t) + b.1 * t)
    };
    let top = lerp(at(x0, y0), at(x0 + 1, y0), fx);
    let bot = lerp(at(x0, y0 + 1), at(x0 + 1, y0 + 1), fx);
    Some(lerp(top, bot, fy))
}
