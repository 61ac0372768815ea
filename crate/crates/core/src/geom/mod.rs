//! Shared geometric types, exact predicates, projection math and
//! barycentric utilities.
//!
//! All types are immutable value types after construction; the operations
//! are pure functions and safe to call concurrently.

mod camera;
mod image;
mod predicates;

pub use camera::{Camera, PixelCoord, Projection};
pub use image::Image;
pub use predicates::{insphere, insphere_exact, orient3d, orient3d_exact, orient3d_fast};

use nalgebra::{Point3 as NaPoint3, Vector3};
use thiserror::Error;

/// 3D point in scene units.
pub type Point3 = NaPoint3<f64>;
/// 3D vector in scene units.
pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("rotation matrix is not orthonormal with determinant +1")]
    InvalidRotation,
    #[error("focal lengths must be positive")]
    InvalidFocal,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("degenerate tetrahedron (coplanar vertices)")]
    DegenerateTetrahedron,
    #[error("degenerate facet (zero area)")]
    DegenerateFacet,
    #[error("image dimensions do not match value count")]
    ImageSize,
    #[error("visibility set must be non-empty")]
    EmptyVisibility,
    #[error("camera id {0} out of range")]
    BadCameraId(usize),
}

/// Calibrated cameras with their grayscale images; camera `i` sits at
/// index `i`.
#[derive(Debug, Clone)]
pub struct CameraRig {
    pub cameras: Vec<Camera>,
    pub images: Vec<Image>,
}

impl CameraRig {
    pub fn new(cameras: Vec<Camera>, images: Vec<Image>) -> Result<Self, GeomError> {
        if cameras.len() != images.len() {
            return Err(GeomError::ImageSize);
        }
        for (i, cam) in cameras.iter().enumerate() {
            if cam.id != i {
                return Err(GeomError::BadCameraId(cam.id));
            }
            if images[i].width() != cam.width || images[i].height() != cam.height {
                return Err(GeomError::ImageSize);
            }
        }
        Ok(Self { cameras, images })
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }
}

/// Reconstructed 3D point with the set of camera indices that observed it.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSample {
    pub position: Point3,
    /// Sorted, deduplicated camera ids.
    pub visibility: Vec<u32>,
}

impl PointSample {
    pub fn new(position: Point3, mut visibility: Vec<u32>) -> Result<Self, GeomError> {
        if !position.coords.iter().all(|c| c.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        visibility.sort_unstable();
        visibility.dedup();
        if visibility.is_empty() {
            return Err(GeomError::EmptyVisibility);
        }
        Ok(Self { position, visibility })
    }
}

/// Barycentric coordinates of `x` with respect to a triangle.
///
/// `x` is assumed to lie on the facet plane (off-plane points are projected
/// along the facet normal). Weights sum to 1 and reconstruct `x` affinely.
pub fn barycentric(facet: (&Point3, &Point3, &Point3), x: &Point3) -> Result<[f64; 3], GeomError> {
    let (v0, v1, v2) = facet;
    let n = (v1 - v0).cross(&(v2 - v0));
    let area2 = n.norm_squared();
    if area2 == 0.0 {
        return Err(GeomError::DegenerateFacet);
    }
    let w0 = (v1 - x).cross(&(v2 - x)).dot(&n) / area2;
    let w1 = (v2 - x).cross(&(v0 - x)).dot(&n) / area2;
    let w2 = 1.0 - w0 - w1;
    Ok([w0, w1, w2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn barycentric_vertex_case() {
        let v0 = Point3::new(0.0, 0.0, 0.0);
        let v1 = Point3::new(1.0, 0.0, 0.0);
        let v2 = Point3::new(0.0, 1.0, 0.0);
        let w = barycentric((&v0, &v1, &v2), &v0).unwrap();
        assert_eq!(w, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn barycentric_centroid_symmetry() {
        let v0 = Point3::new(0.0, 0.0, 1.0);
        let v1 = Point3::new(2.0, 0.0, 1.0);
        let v2 = Point3::new(0.0, 2.0, 1.0);
        let c = Point3::from((v0.coords + v1.coords + v2.coords) / 3.0);
        let w = barycentric((&v0, &v1, &v2), &c).unwrap();
        for wi in w {
            assert_relative_eq!(wi, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn barycentric_rejects_degenerate() {
        let v0 = Point3::new(0.0, 0.0, 0.0);
        let v1 = Point3::new(1.0, 1.0, 1.0);
        let v2 = Point3::new(2.0, 2.0, 2.0);
        assert_eq!(
            barycentric((&v0, &v1, &v2), &v0),
            Err(GeomError::DegenerateFacet)
        );
    }

    proptest! {
        // Affine reconstruction oracle: w0*v0 + w1*v1 + w2*v2 == x for
        // interior points, and interior weights stay within [0,1].
        #[test]
        fn barycentric_reconstructs_interior_points(
            a in 0.0f64..1.0, b in 0.0f64..1.0,
            vx in -5.0f64..5.0, vy in -5.0f64..5.0, vz in -5.0f64..5.0,
        ) {
            let v0 = Point3::new(vx, vy, vz);
            let v1 = Point3::new(vx + 3.0, vy + 0.5, vz);
            let v2 = Point3::new(vx - 0.5, vy + 2.0, vz + 1.0);
            // Fold (a,b) into the unit triangle.
            let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
            let x = Point3::from(
                v0.coords * (1.0 - a - b) + v1.coords * a + v2.coords * b,
            );
            let w = barycentric((&v0, &v1, &v2), &x).unwrap();
            prop_assert!((w[0] + w[1] + w[2] - 1.0).abs() < 1e-9);
            let rec = v0.coords * w[0] + v1.coords * w[1] + v2.coords * w[2];
            prop_assert!((rec - x.coords).norm() < 1e-9);
            for wi in w {
                prop_assert!((-1e-9..=1.0 + 1e-9).contains(&wi));
            }
        }
    }
}
