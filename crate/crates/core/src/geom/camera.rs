use nalgebra::{Matrix3, Vector3};

use super::{GeomError, Point3};

/// Sub-pixel image coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Result of projecting a 3D point into a camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    /// Pixel coordinate and positive depth (z in the camera frame).
    InFront(PixelCoord, f64),
    /// The point lies at or behind the camera plane.
    BehindCamera,
}

impl Projection {
    pub fn in_front(&self) -> Option<(PixelCoord, f64)> {
        match *self {
            Projection::InFront(px, z) => Some((px, z)),
            Projection::BehindCamera => None,
        }
    }
}

/// Pinhole camera: upper-triangular intrinsics, world-to-camera rotation,
/// optical center in world coordinates and image size in pixels.
///
/// Inputs are assumed pre-undistorted; there is no lens model.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub id: usize,
    pub intrinsics: Matrix3<f64>,
    pub rotation: Matrix3<f64>,
    pub center: Point3,
    pub width: usize,
    pub height: usize,
}

const ROTATION_TOL: f64 = 1e-9;

impl Camera {
    pub fn new(
        id: usize,
        intrinsics: Matrix3<f64>,
        rotation: Matrix3<f64>,
        center: Point3,
        width: usize,
        height: usize,
    ) -> Result<Self, GeomError> {
        if intrinsics[(0, 0)] <= 0.0 || intrinsics[(1, 1)] <= 0.0 {
            return Err(GeomError::InvalidFocal);
        }
        let rtr = rotation.transpose() * rotation;
        let dev = (rtr - Matrix3::identity()).abs().max();
        if dev > ROTATION_TOL || (rotation.determinant() - 1.0).abs() > ROTATION_TOL {
            return Err(GeomError::InvalidRotation);
        }
        if !center.coords.iter().all(|c| c.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        Ok(Self { id, intrinsics, rotation, center, width, height })
    }

    /// Camera at `center` looking at `target`, image v axis aligned against
    /// `up`, square pixels with focal length `focal` and the principal
    /// point at the image center.
    pub fn look_at(
        id: usize,
        center: Point3,
        target: Point3,
        up: Vector3<f64>,
        focal: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GeomError> {
        let forward = target - center;
        if forward.norm() == 0.0 {
            return Err(GeomError::NonFinite);
        }
        let z = forward.normalize();
        let mut x = z.cross(&up);
        if x.norm() < 1e-12 {
            // Forward parallel to up: fall back to an arbitrary lateral.
            x = z.cross(&Vector3::new(1.0, 0.0, 0.0));
            if x.norm() < 1e-12 {
                x = z.cross(&Vector3::new(0.0, 1.0, 0.0));
            }
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let k = Matrix3::new(
            focal,
            0.0,
            width as f64 / 2.0,
            0.0,
            focal,
            height as f64 / 2.0,
            0.0,
            0.0,
            1.0,
        );
        Self::new(id, k, rotation, center, width, height)
    }

    /// World point to camera-frame coordinates.
    pub fn to_camera_frame(&self, p: &Point3) -> Vector3<f64> {
        self.rotation * (p - self.center)
    }

    /// Projects `p`; depth is the z-coordinate in the camera frame.
    pub fn project(&self, p: &Point3) -> Projection {
        let m = self.to_camera_frame(p);
        if m.z <= 0.0 {
            return Projection::BehindCamera;
        }
        let h = self.intrinsics * m;
        Projection::InFront(PixelCoord::new(h.x / h.z, h.y / h.z), m.z)
    }

    /// Inverse of [`Camera::project`] for positive depth.
    pub fn backproject(&self, px: PixelCoord, depth: f64) -> Result<Point3, GeomError> {
        if depth <= 0.0 {
            return Err(GeomError::NonPositiveDepth(depth));
        }
        // Closed-form inverse of the upper-triangular intrinsics.
        let k = &self.intrinsics;
        let (fx, s, cx) = (k[(0, 0)], k[(0, 1)], k[(0, 2)]);
        let (fy, cy) = (k[(1, 1)], k[(1, 2)]);
        let y = (px.v - cy) / fy;
        let x = (px.u - cx - s * y) / fx;
        let m = Vector3::new(x * depth, y * depth, depth);
        Ok(Point3::from(self.rotation.transpose() * m + self.center.coords))
    }

    /// Ray direction in world coordinates through a pixel (unnormalized).
    pub fn pixel_ray(&self, px: PixelCoord) -> Vector3<f64> {
        let k = &self.intrinsics;
        let (fx, s, cx) = (k[(0, 0)], k[(0, 1)], k[(0, 2)]);
        let (fy, cy) = (k[(1, 1)], k[(1, 2)]);
        let y = (px.v - cy) / fy;
        let x = (px.u - cx - s * y) / fx;
        self.rotation.transpose() * Vector3::new(x, y, 1.0)
    }

    /// Jacobian of the projected pixel with respect to the world point,
    /// valid where the point is in front of the camera.
    pub fn projection_jacobian(&self, p: &Point3) -> Option<nalgebra::Matrix2x3<f64>> {
        let m = self.to_camera_frame(p);
        if m.z <= 0.0 {
            return None;
        }
        let k = &self.intrinsics;
        let (fx, s) = (k[(0, 0)], k[(0, 1)]);
        let fy = k[(1, 1)];
        let inv_z = 1.0 / m.z;
        let du = nalgebra::RowVector3::new(
            fx * inv_z,
            s * inv_z,
            -(fx * m.x + s * m.y) * inv_z * inv_z,
        );
        let dv = nalgebra::RowVector3::new(0.0, fy * inv_z, -fy * m.y * inv_z * inv_z);
        let d_pix_d_m = nalgebra::Matrix2x3::from_rows(&[du, dv]);
        Some(d_pix_d_m * self.rotation)
    }
}
