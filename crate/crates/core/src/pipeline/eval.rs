//! Accuracy/completeness evaluation: distance distributions between the
//! reconstructed mesh and the ground truth, sampled uniformly by area.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geom::Point3;
use crate::manifold::SurfaceMesh;

use super::bvh::TriBvh;
use super::synth::Shape;
use super::PipelineError;

/// Ground-truth reference for distance queries.
pub enum GtRef<'a> {
    /// Analytic shape (exact distances for sphere and cube).
    Shape(&'a Shape),
    /// Triangle mesh queried through a BVH.
    Mesh(&'a SurfaceMesh),
}

/// Distance distributions in scene units.
#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize)]
pub struct AccComp {
    pub mean_accuracy: f64,
    pub median_accuracy: f64,
    pub mean_completeness: f64,
    pub median_completeness: f64,
}

/// Uniform-by-area point sampler over a mesh.
pub struct AreaSampler<'a> {
    mesh: &'a SurfaceMesh,
    cumulative: Vec<f64>,
}

impl<'a> AreaSampler<'a> {
    pub fn new(mesh: &'a SurfaceMesh) -> Result<Self, PipelineError> {
        if mesh.is_empty() {
            return Err(PipelineError::EmptyMesh);
        }
        let mut cumulative = Vec::with_capacity(mesh.n_facets());
        let mut total = 0.0;
        for f in 0..mesh.n_facets() {
            total += mesh.facet_area(f);
            cumulative.push(total);
        }
        if total <= 0.0 {
            return Err(PipelineError::EmptyMesh);
        }
        Ok(Self { mesh, cumulative })
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Point3 {
        let total = *self.cumulative.last().unwrap();
        let target = rng.gen_range(0.0..total);
        let f = self.cumulative.partition_point(|&c| c < target).min(self.mesh.n_facets() - 1);
        let [a, b, c] = self.mesh.facets[f];
        let (pa, pb, pc) = (
            self.mesh.vertices[a as usize].coords,
            self.mesh.vertices[b as usize].coords,
            self.mesh.vertices[c as usize].coords,
        );
        // sqrt trick for uniform barycentric sampling.
        let r1: f64 = rng.gen_range(0.0..1.0);
        let r2: f64 = rng.gen_range(0.0..1.0);
        let s = r1.sqrt();
        let (u, v) = (1.0 - s, r2 * s);
        Point3::from(pa * u + pb * v + pc * (1.0 - u - v))
    }
}

fn summarize(mut d: Vec<f64>) -> (f64, f64) {
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    d.sort_by(f64::total_cmp);
    (mean, d[d.len() / 2])
}

/// Accuracy: distances from points sampled on `result` to the ground
/// truth. Completeness: distances from points sampled on the ground truth
/// to `result`.
pub fn accuracy_completeness(
    result: &SurfaceMesh,
    gt: GtRef<'_>,
    n_samples: usize,
    seed: u64,
) -> Result<AccComp, PipelineError> {
    if result.is_empty() {
        return Err(PipelineError::EmptyMesh);
    }
    let n = n_samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let result_sampler = AreaSampler::new(result)?;

    let gt_bvh = match &gt {
        GtRef::Mesh(m) => Some(TriBvh::build(m)),
        GtRef::Shape(_) => None,
    };
    let gt_distance = |p: &Point3| -> f64 {
        match &gt {
            GtRef::Shape(s) => s.distance(p),
            GtRef::Mesh(_) => gt_bvh.as_ref().unwrap().distance(p),
        }
    };
    let acc: Vec<f64> =
        (0..n).map(|_| gt_distance(&result_sampler.sample(&mut rng))).collect();

    let result_bvh = TriBvh::build(result);
    let comp: Vec<f64> = match &gt {
        GtRef::Shape(s) => (0..n)
            .map(|_| result_bvh.distance(&s.sample_surface(&mut rng)))
            .collect(),
        GtRef::Mesh(m) => {
            let sampler = AreaSampler::new(m)?;
            (0..n).map(|_| result_bvh.distance(&sampler.sample(&mut rng))).collect()
        }
    };

    let (mean_accuracy, median_accuracy) = summarize(acc);
    let (mean_completeness, median_completeness) = summarize(comp);
    Ok(AccComp { mean_accuracy, median_accuracy, mean_completeness, median_completeness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::synth::icosphere;

    #[test]
    fn identical_meshes_have_zero_distance() {
        let mesh = icosphere(1.0, 2);
        let out =
            accuracy_completeness(&mesh, GtRef::Mesh(&mesh), 500, 3).unwrap();
        assert!(out.mean_accuracy <= 1e-9);
        assert!(out.mean_completeness <= 1e-9);
        assert!(out.median_accuracy <= 1e-9);
    }

    #[test]
    fn translation_bounds_mean_accuracy() {
        let mesh = icosphere(1.0, 2);
        let mut moved = mesh.clone();
        let t = crate::geom::Vec3::new(0.05, -0.02, 0.01);
        for p in &mut moved.vertices {
            *p += t;
        }
        let out = accuracy_completeness(&moved, GtRef::Mesh(&mesh), 600, 4).unwrap();
        assert!(out.mean_accuracy > 0.0);
        assert!(out.mean_accuracy <= t.norm() + 1e-9);
    }

    #[test]
    fn sphere_radius_gap_measures_point_one() {
        let result = icosphere(1.0, 4);
        let gt = Shape::Sphere { radius: 1.1 };
        let out = accuracy_completeness(&result, GtRef::Shape(&gt), 4000, 5).unwrap();
        assert!(
            (out.mean_accuracy - 0.1).abs() <= 0.002,
            "mean accuracy {} should be 0.1 within 2%",
            out.mean_accuracy
        );
    }

    #[test]
    fn empty_mesh_rejected() {
        let empty = SurfaceMesh::from_parts(vec![], vec![]).unwrap();
        assert!(matches!(
            accuracy_completeness(&empty, GtRef::Mesh(&icosphere(1.0, 1)), 10, 1),
            Err(PipelineError::EmptyMesh)
        ));
    }
}
