//! End-to-end orchestration: Delaunay, graph cut, singular-vertex
//! cleanup, surface extraction, fallback splitting, camera-pair
//! assignment, refinement, and metrics.
//!
//! Runs are deterministic for a fixed configuration (seeded RNG, ordered
//! reductions), independent of the worker count; metric CSV output
//! contains only deterministic quantities, wall-clock timings live in the
//! run manifest.

pub mod bvh;
mod eval;
pub mod io;
mod synth;

pub use eval::{accuracy_completeness, AccComp, AreaSampler, GtRef};
pub use synth::{
    camera_ring, generate_synthetic, icosphere, render_shape_image, SceneBundle, Shape,
    SynthConfig, ValueNoise,
};

use std::fmt::Write as _;
use std::time::Instant;

use thiserror::Error;

use crate::delaunay::{DelaunayError, Tetrahedralization};
use crate::geom::GeomError;
use crate::graphcut::{compute_sigma, FlowGraph, GraphCutError, VisParams};
use crate::manifold::{
    cleanup, collect_singular, extract_surface, is_manifold, mesh_singular_vertices,
    vertex_split_fallback, CleanupReport, MeshError, SurfaceMesh,
};
use crate::pairsel::{assign_pairs, ordered_partners, PairAssignment, PairSelError, PottsParams};
use crate::refine::{
    classic_subsets, facetwise_subsets, refine_loop, PairMode, RefineConfig, RefineError,
    RenderStats,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("unknown shape '{0}'")]
    UnknownShape(String),
    #[error("need at least 2 cameras, got {0}")]
    TooFewCameras(usize),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("delaunay stage: {0}")]
    Delaunay(#[from] DelaunayError),
    #[error("graph-cut stage: {0}")]
    GraphCut(#[from] GraphCutError),
    #[error("manifold stage: {0}")]
    Mesh(#[from] MeshError),
    #[error("pair-selection stage: {0}")]
    PairSel(#[from] PairSelError),
    #[error("refinement stage: {0}")]
    Refine(#[from] RefineError),
    #[error(transparent)]
    Io(#[from] io::IoError),
    #[error("manifold gate failed: {0} singular vertices after fallback")]
    ManifoldGate(usize),
    #[error("mesh is empty")]
    EmptyMesh,
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Full run configuration; serialized into the run manifest.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub vis: VisParams,
    pub potts: PottsParams,
    pub refine: RefineConfig,
    pub cleanup_enabled: bool,
    pub refine_enabled: bool,
    /// Sample count for accuracy/completeness.
    pub eval_samples: usize,
    /// Rayon worker count; 0 = library default. Results do not depend on
    /// it.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            vis: VisParams::default(),
            potts: PottsParams::default(),
            refine: RefineConfig::default(),
            cleanup_enabled: true,
            refine_enabled: true,
            eval_samples: 4000,
            workers: 0,
        }
    }
}

/// Deterministic run metrics (wall-clock lives in `timings`).
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct Metrics {
    pub accuracy: Option<AccComp>,
    pub singular_before_fixing: usize,
    pub singular_after_fixing: usize,
    pub singular_after_fallback: usize,
    pub mesh_vertices: usize,
    pub mesh_facets: usize,
    pub skipped_rays: u32,
    pub cut_value: f64,
    pub render: RenderStats,
    pub icm_energy: Option<f64>,
    pub icm_sweeps: Option<usize>,
}

impl Metrics {
    /// Deterministic key/value CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k},{v}");
        };
        if let Some(acc) = &self.accuracy {
            kv("mean_accuracy", format!("{:.17e}", acc.mean_accuracy));
            kv("median_accuracy", format!("{:.17e}", acc.median_accuracy));
            kv("mean_completeness", format!("{:.17e}", acc.mean_completeness));
            kv("median_completeness", format!("{:.17e}", acc.median_completeness));
        }
        kv("singular_before_fixing", self.singular_before_fixing.to_string());
        kv("singular_after_fixing", self.singular_after_fixing.to_string());
        kv("singular_after_fallback", self.singular_after_fallback.to_string());
        kv("mesh_vertices", self.mesh_vertices.to_string());
        kv("mesh_facets", self.mesh_facets.to_string());
        kv("skipped_rays", self.skipped_rays.to_string());
        kv("cut_value", format!("{:.17e}", self.cut_value));
        kv("facet_renders", self.render.facet_renders.to_string());
        kv("pair_renders", self.render.pair_renders.to_string());
        kv("grazing_skipped", self.render.grazing_skipped.to_string());
        if let Some(e) = self.icm_energy {
            kv("icm_energy", format!("{e:.17e}"));
        }
        if let Some(s) = self.icm_sweeps {
            kv("icm_sweeps", s.to_string());
        }
        out
    }
}

/// Everything a pipeline run produces.
#[derive(Debug)]
pub struct PipelineOutput {
    pub mesh: SurfaceMesh,
    pub metrics: Metrics,
    pub assignment: Option<PairAssignment>,
    pub cleanup_report: Option<CleanupReport>,
    pub energy_trace: Vec<f64>,
    /// Stage name and seconds; informational, excluded from deterministic
    /// outputs.
    pub timings: Vec<(&'static str, f64)>,
    /// Resolved sigma (25th percentile of triangulation edges).
    pub sigma: f64,
}

impl PipelineOutput {
    /// Run manifest: resolved configuration plus run facts.
    pub fn manifest(&self, cfg: &RunConfig) -> String {
        let timings: Vec<serde_json::Value> = self
            .timings
            .iter()
            .map(|(name, secs)| serde_json::json!({ "stage": name, "seconds": secs }))
            .collect();
        let doc = serde_json::json!({
            "config": cfg,
            "resolved_sigma": self.sigma,
            "metrics": self.metrics,
            "timings": timings,
        });
        serde_json::to_string_pretty(&doc).expect("manifest serialization")
    }
}

/// Meshing only: Delaunay + graph cut + optional cleanup + extraction +
/// fallback split. Hard-gates on the literal manifold test.
pub fn mesh_scene(
    bundle: &SceneBundle,
    cfg: &RunConfig,
) -> Result<(SurfaceMesh, Tetrahedralization, Metrics, Option<CleanupReport>, Vec<(&'static str, f64)>, f64), PipelineError>
{
    let mut metrics = Metrics::default();
    let mut timings = Vec::new();

    let t0 = Instant::now();
    let points: Vec<_> = bundle.samples.iter().map(|s| s.position).collect();
    let mut tri = Tetrahedralization::build_with_seed(&points, cfg.seed)?;
    timings.push(("delaunay", t0.elapsed().as_secs_f64()));

    let t0 = Instant::now();
    let sigma = compute_sigma(&tri)?;
    let params = VisParams { sigma, ..cfg.vis.clone() };
    let mut graph = FlowGraph::for_tetrahedralization(&tri);
    for (i, sample) in bundle.samples.iter().enumerate() {
        let _ = i;
        for &cam in &sample.visibility {
            if (cam as usize) < bundle.rig.len() {
                graph.accumulate_ray(&tri, &bundle.rig.cameras[cam as usize], sample, &params)?;
            }
        }
    }
    graph.add_quality_prior(&tri, &params);
    let cut = graph.min_cut();
    graph.apply_labels(&mut tri, &cut);
    metrics.cut_value = cut.cut_value;
    metrics.skipped_rays = graph.skipped_rays;
    timings.push(("graph_cut", t0.elapsed().as_secs_f64()));

    let t0 = Instant::now();
    let report = if cfg.cleanup_enabled {
        let report = cleanup(&mut tri)?;
        metrics.singular_before_fixing = report.before_count();
        metrics.singular_after_fixing = report.remaining.len();
        Some(report)
    } else {
        let singular = collect_singular(&tri)?;
        metrics.singular_before_fixing = singular.len();
        metrics.singular_after_fixing = singular.len();
        None
    };
    timings.push(("cleanup", t0.elapsed().as_secs_f64()));

    let t0 = Instant::now();
    let raw = extract_surface(&tri)?;
    let mesh = vertex_split_fallback(&raw);
    let still_singular = mesh_singular_vertices(&mesh);
    metrics.singular_after_fallback = still_singular.len();
    metrics.mesh_vertices = mesh.n_vertices();
    metrics.mesh_facets = mesh.n_facets();
    timings.push(("extract", t0.elapsed().as_secs_f64()));
    if !is_manifold(&mesh) {
        return Err(PipelineError::ManifoldGate(still_singular.len()));
    }
    Ok((mesh, tri, metrics, report, timings, sigma))
}

/// Full pipeline: meshing, pair assignment, refinement and metrics.
pub fn run_pipeline(bundle: &SceneBundle, cfg: &RunConfig) -> Result<PipelineOutput, PipelineError> {
    let run = || -> Result<PipelineOutput, PipelineError> {
        let (mut mesh, tri, mut metrics, cleanup_report, mut timings, sigma) =
            mesh_scene(bundle, cfg)?;
        if mesh.is_empty() {
            return Err(PipelineError::EmptyMesh);
        }

        let mut assignment = None;
        let mut energy_trace = Vec::new();
        if cfg.refine_enabled && bundle.rig.len() >= 2 {
            let t0 = Instant::now();
            let assigned =
                assign_pairs(&mesh, &tri, &bundle.samples, bundle.rig.len(), &cfg.potts)?;
            metrics.icm_energy = Some(assigned.energy);
            metrics.icm_sweeps = Some(assigned.sweeps);
            timings.push(("pair_selection", t0.elapsed().as_secs_f64()));

            if cfg.refine.iterations > 0 {
                let t0 = Instant::now();
                let subsets = match cfg.refine.mode {
                    PairMode::Facetwise => facetwise_subsets(&assigned, &mesh, &bundle.rig),
                    PairMode::Classic => {
                        let partners = ordered_partners(
                            &bundle.samples,
                            bundle.rig.len(),
                            cfg.refine.classic_k,
                        )?;
                        classic_subsets(&partners, mesh.n_facets())
                    }
                };
                let (refined, trace) = refine_loop(&mesh, &bundle.rig, &subsets, &cfg.refine)?;
                mesh = refined;
                metrics.render = trace.stats;
                energy_trace = trace.energies;
                timings.push(("refine", t0.elapsed().as_secs_f64()));
            }
            assignment = Some(assigned);
        }

        if let Some(gt_mesh) = &bundle.ground_truth_mesh {
            let t0 = Instant::now();
            metrics.accuracy = Some(accuracy_completeness(
                &mesh,
                GtRef::Mesh(gt_mesh),
                cfg.eval_samples,
                cfg.seed,
            )?);
            timings.push(("evaluate", t0.elapsed().as_secs_f64()));
        }

        Ok(PipelineOutput {
            mesh,
            metrics,
            assignment,
            cleanup_report,
            energy_trace,
            timings,
            sigma,
        })
    };

    if cfg.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| PipelineError::ThreadPool(e.to_string()))?;
        pool.install(run)
    } else {
        run()
    }
}

/// Energy trace CSV (iteration, photometric energy).
pub fn energy_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,energy\n");
    for (i, e) in trace.iter().enumerate() {
        let _ = writeln!(out, "{i},{e:.17e}");
    }
    out
}
