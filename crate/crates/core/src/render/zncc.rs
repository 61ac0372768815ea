//! Negative ZNCC error over square windows, and its derivative with
//! respect to the reprojected image.

use crate::geom::Image;

use super::ReprojectedImage;

pub const STD_GUARD: f64 = 1e-6;

/// Per-pixel photometric error: the negative ZNCC of the window around
/// each pixel where the window is fully valid. Values lie in [-1, 1].
#[derive(Debug, Clone)]
pub struct ErrorMap {
    pub width: usize,
    pub height: usize,
    pub err: Vec<f64>,
    pub valid: Vec<bool>,
}

impl ErrorMap {
    /// Sum of the error over valid pixels (the discrete photometric
    /// integral, one pixel = one unit of area).
    pub fn total(&self) -> f64 {
        self.err
            .iter()
            .zip(&self.valid)
            .filter(|&(_, &v)| v)
            .map(|(e, _)| e)
            .sum()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

struct WindowStats {
    mean_a: f64,
    mean_b: f64,
    // Vector norms of the centered windows.
    norm_a: f64,
    norm_b: f64,
    // Centered cross product sum.
    cross: f64,
}

fn window_stats(a: &[f64], b: &[f64]) -> WindowStats {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    let mut sab = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        saa += dx * dx;
        sbb += dy * dy;
        sab += dx * dy;
    }
    WindowStats { mean_a, mean_b, norm_a: saa.sqrt(), norm_b: sbb.sqrt(), cross: sab }
}

fn window_std_ok(stats: &WindowStats, n: f64) -> bool {
    // std = norm / sqrt(n); guard both images against flat windows.
    stats.norm_a / n.sqrt() >= STD_GUARD && stats.norm_b / n.sqrt() >= STD_GUARD
}

/// Negative ZNCC of two equal-size windows; 0 when either window is flat.
pub fn zncc_window_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let stats = window_stats(a, b);
    if !window_std_ok(&stats, a.len() as f64) {
        return 0.0;
    }
    (-stats.cross / (stats.norm_a * stats.norm_b)).clamp(-1.0, 1.0)
}

/// Derivative of [`zncc_window_err`] with respect to each entry of `b`.
pub fn zncc_window_grad_b(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    let stats = window_stats(a, b);
    if !window_std_ok(&stats, a.len() as f64) {
        return vec![0.0; b.len()];
    }
    let z = stats.cross / (stats.norm_a * stats.norm_b);
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let da = x - stats.mean_a;
            let db = y - stats.mean_b;
            // d(-Z)/dB(q) = -(A~(q) / (|A~||B~|) - Z B~(q) / |B~|^2)
            -(da / (stats.norm_a * stats.norm_b) - z * db / (stats.norm_b * stats.norm_b))
        })
        .collect()
}

/// Negative ZNCC of the `window` x `window` neighborhood around each pixel
/// whose window is fully inside the frame and fully reprojection-valid.
pub fn zncc_error(i: &Image, r: &ReprojectedImage, window: usize) -> ErrorMap {
    assert_eq!(i.width(), r.image.width());
    assert_eq!(i.height(), r.image.height());
    assert!(window % 2 == 1 && window >= 3);
    let (w, h) = (i.width(), i.height());
    let half = window / 2;
    let mut err = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    let mut wa = vec![0.0; window * window];
    let mut wb = vec![0.0; window * window];
    for y in half..h.saturating_sub(half) {
        for x in half..w.saturating_sub(half) {
            let mut ok = true;
            let mut k = 0;
            'gather: for dy in 0..window {
                for dx in 0..window {
                    let (sx, sy) = (x + dx - half, y + dy - half);
                    if !r.mask[sy * w + sx] {
                        ok = false;
                        break 'gather;
                    }
                    wa[k] = i.get(sx, sy);
                    wb[k] = r.image.get(sx, sy);
                    k += 1;
                }
            }
            if !ok {
                continue;
            }
            err[y * w + x] = zncc_window_err(&wa, &wb);
            valid[y * w + x] = true;
        }
    }
    ErrorMap { width: w, height: h, err, valid }
}

/// Adjoint of the summed window errors: `out[q]` is the derivative of
/// `zncc_error(i, r, window).total()` with respect to the reprojected
/// value at pixel q, accumulated over every valid window containing q.
pub fn zncc_adjoint(i: &Image, r: &ReprojectedImage, window: usize) -> Vec<f64> {
    zncc_adjoint_with_centers(i, r, window, None)
}

/// Like [`zncc_adjoint`], restricted to windows whose center pixel is
/// selected (`centers[idx]`); `None` selects every valid window.
pub fn zncc_adjoint_with_centers(
    i: &Image,
    r: &ReprojectedImage,
    window: usize,
    centers: Option<&[bool]>,
) -> Vec<f64> {
    assert!(window % 2 == 1 && window >= 3);
    let (w, h) = (i.width(), i.height());
    let half = window / 2;
    let mut out = vec![0.0; w * h];
    let mut wa = vec![0.0; window * window];
    let mut wb = vec![0.0; window * window];
    for y in half..h.saturating_sub(half) {
        for x in half..w.saturating_sub(half) {
            if let Some(c) = centers {
                if !c[y * w + x] {
                    continue;
                }
            }
            let mut ok = true;
            let mut k = 0;
            'gather: for dy in 0..window {
                for dx in 0..window {
                    let (sx, sy) = (x + dx - half, y + dy - half);
                    if !r.mask[sy * w + sx] {
                        ok = false;
                        break 'gather;
                    }
                    wa[k] = i.get(sx, sy);
                    wb[k] = r.image.get(sx, sy);
                    k += 1;
                }
            }
            if !ok {
                continue;
            }
            let grad = zncc_window_grad_b(&wa, &wb);
            let mut k = 0;
            for dy in 0..window {
                for dx in 0..window {
                    let (sx, sy) = (x + dx - half, y + dy - half);
                    out[sy * w + sx] += grad[k];
                    k += 1;
                }
            }
        }
    }
    out
}
