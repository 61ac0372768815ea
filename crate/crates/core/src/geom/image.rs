use super::GeomError;

/// Single-channel image with row-major intensities in [0, 1].
///
/// Continuous sample coordinates put pixel centers at (x + 0.5, y + 0.5).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, GeomError> {
        if values.len() != width * height {
            return Err(GeomError::ImageSize);
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        Ok(Self { width, height, values })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, values: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.values[y * self.width + x] = v;
    }

    /// Bilinear sample at continuous coordinates; `None` outside the region
    /// where all four neighboring pixel centers exist.
    pub fn bilinear(&self, u: f64, v: f64) -> Option<f64> {
        if self.width < 2 || self.height < 2 {
            return None;
        }
        let gx = u - 0.5;
        let gy = v - 0.5;
        if gx < 0.0 || gy < 0.0 || gx > (self.width - 1) as f64 || gy > (self.height - 1) as f64 {
            return None;
        }
        // Snap the far edge onto the last interior cell so u = width - 0.5
        // (the last pixel center) is still sampleable.
        let x0 = (gx.floor() as usize).min(self.width - 2);
        let y0 = (gy.floor() as usize).min(self.height - 2);
        let (x1, y1) = (x0 + 1, y0 + 1);
        let fx = gx - x0 as f64;
        let fy = gy - y0 as f64;
        let a = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let b = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        Some(a * (1.0 - fy) + b * fy)
    }

    /// Exact partial derivatives of the bilinear interpolant at (u, v):
    /// the factor a sampled value actually changes by when the sample
    /// coordinate moves.
    pub fn bilinear_derivative(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        if self.width < 2 || self.height < 2 {
            return None;
        }
        let gx = u - 0.5;
        let gy = v - 0.5;
        if gx < 0.0 || gy < 0.0 || gx > (self.width - 1) as f64 || gy > (self.height - 1) as f64 {
            return None;
        }
        let x0 = (gx.floor() as usize).min(self.width - 2);
        let y0 = (gy.floor() as usize).min(self.height - 2);
        let (x1, y1) = (x0 + 1, y0 + 1);
        let fx = gx - x0 as f64;
        let fy = gy - y0 as f64;
        let (v00, v10) = (self.get(x0, y0), self.get(x1, y0));
        let (v01, v11) = (self.get(x0, y1), self.get(x1, y1));
        let du = (v10 - v00) * (1.0 - fy) + (v11 - v01) * fy;
        let dv = (v01 - v00) * (1.0 - fx) + (v11 - v10) * fx;
        Some((du, dv))
    }

    /// Nearest-pixel sample, mainly for debugging determinism.
    pub fn nearest(&self, u: f64, v: f64) -> Option<f64> {
        let x = u.floor();
        let y = v.floor();
        if x < 0.0 || y < 0.0 || x as usize >= self.width || y as usize >= self.height {
            return None;
        }
        Some(self.get(x as usize, y as usize))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_mismatch_rejected() {
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn bilinear_at_centers_and_midpoints() {
        let img = Image::from_fn(2, 2, |x, y| (y * 2 + x) as f64);
        // Pixel centers reproduce stored values.
        assert_eq!(img.bilinear(0.5, 0.5), Some(0.0));
        assert_eq!(img.bilinear(1.5, 1.5), Some(3.0));
        // Center of the quad averages all four.
        assert_eq!(img.bilinear(1.0, 1.0), Some(1.5));
        // Outside the interpolable region.
        assert_eq!(img.bilinear(0.4, 0.5), None);
        assert_eq!(img.bilinear(1.6, 0.5), None);
    }
}
