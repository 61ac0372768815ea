//! Command-line driver: synthetic scenes, meshing, pair assignment,
//! refinement, evaluation, the full pipeline and validity audits.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mvsmesh::delaunay::Tetrahedralization;
use mvsmesh::graphcut::{compute_sigma, FlowGraph, VisParams, WeightForm};
use mvsmesh::manifold::{is_manifold, mesh_singular_vertices, SurfaceMesh};
use mvsmesh::pairsel::{assign_pairs, PottsParams};
use mvsmesh::pipeline::io::{
    load_ply, load_points_bin, load_scene, save_pfm, save_ply, save_scene, PlyFormat,
};
use mvsmesh::pipeline::{
    accuracy_completeness, energy_trace_csv, generate_synthetic, mesh_scene, run_pipeline,
    GtRef, Metrics, RunConfig, Shape, SynthConfig,
};
use mvsmesh::refine::{
    classic_subsets, facetwise_subsets, refine_loop, PairMode, RefineConfig,
};
use mvsmesh::render::rasterize;

#[derive(Parser)]
#[command(name = "mvsmesh", about = "Surface reconstruction and facetwise refinement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene bundle (cameras, images, points, ground truth).
    Synth(SynthArgs),
    /// Delaunay + graph cut + singular-vertex fixing + surface extraction.
    Mesh(MeshArgs),
    /// Per-facet camera-pair assignment (MRF).
    Pairs(PairsArgs),
    /// Variational refinement of a mesh.
    Refine(RefineArgs),
    /// Accuracy/completeness evaluation against ground truth.
    Eval(EvalArgs),
    /// All stages end to end.
    Pipeline(PipelineArgs),
    /// Manifoldness and structural audits; exit code 0 only when all pass.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Sphere,
    Cube,
    WavyPlane,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "sphere")]
    shape: ShapeArg,
    #[arg(long, default_value_t = 8)]
    cameras: usize,
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = 600)]
    points: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 7)]
    texture_seed: u64,
    /// Gaussian position noise in scene units.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Fraction of samples replaced by outliers.
    #[arg(long, default_value_t = 0.0)]
    outliers: f64,
    /// Probability of keeping each visibility ray.
    #[arg(long, default_value_t = 1.0)]
    keep: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct VisArgs {
    #[arg(long, default_value_t = 32.0)]
    alpha_vis: f64,
    #[arg(long, default_value_t = 1.0)]
    quality: f64,
    #[arg(long, default_value_t = 3.0)]
    sink_mult: f64,
    /// Use the literal printed weight form (ablation).
    #[arg(long)]
    paper_weight_form: bool,
}

impl VisArgs {
    fn params(&self) -> VisParams {
        VisParams {
            alpha_vis: self.alpha_vis,
            sigma: 0.0,
            sink_offset_mult: self.sink_mult,
            quality_weight: self.quality,
            weight_form: if self.paper_weight_form {
                WeightForm::PaperLiteral
            } else {
                WeightForm::Gaussian
            },
        }
    }
}

#[derive(Args)]
struct MeshArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    vis: VisArgs,
    /// Skip the preemptive singular-vertex cleanup.
    #[arg(long)]
    no_cleanup: bool,
    /// Write the mesh as ASCII PLY instead of binary.
    #[arg(long)]
    ascii: bool,
    /// Singular-vertex report CSV.
    #[arg(long)]
    singular_report: Option<PathBuf>,
    /// ASCII dump of the labeled cell complex.
    #[arg(long)]
    dump_cells: Option<PathBuf>,
    /// ASCII dump of the flow graph.
    #[arg(long)]
    dump_graph: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct PairsArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Energy trace CSV (per ICM sweep).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Use the literal printed Potts orientation (ablation).
    #[arg(long)]
    potts_literal: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Facetwise,
    Classic,
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    iterations: usize,
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    #[arg(long, default_value_t = 0.3)]
    smooth: f64,
    #[arg(long, value_enum, default_value = "facetwise")]
    mode: ModeArg,
    #[arg(long, default_value_t = 2)]
    classic_k: usize,
    /// Per-iteration photometric energy CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Dump the evolving mesh as PLY every k iterations.
    #[arg(long)]
    dump_every: Option<usize>,
    #[arg(long)]
    potts_literal: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Ground-truth mesh PLY.
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = 4000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Metrics CSV output (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    vis: VisArgs,
    #[arg(long)]
    no_cleanup: bool,
    #[arg(long)]
    no_refine: bool,
    #[arg(long, default_value_t = 30)]
    iterations: usize,
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    #[arg(long, default_value_t = 0.3)]
    smooth: f64,
    #[arg(long, value_enum, default_value = "facetwise")]
    mode: ModeArg,
    #[arg(long, default_value_t = 2)]
    classic_k: usize,
    #[arg(long)]
    potts_literal: bool,
    #[arg(long, default_value_t = 4000)]
    eval_samples: usize,
    /// Worker threads (0 = library default); results do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Also save per-camera depth maps of the final mesh as PFM.
    #[arg(long)]
    depth_maps: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Mesh to audit (manifoldness, orientation consistency).
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Point table; builds a triangulation and audits its structure and
    /// the empty-circumsphere property.
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    std::process::exit(code);
}

fn shape_of(arg: ShapeArg) -> Shape {
    match arg {
        ShapeArg::Sphere => Shape::parse("sphere").unwrap(),
        ShapeArg::Cube => Shape::parse("cube").unwrap(),
        ShapeArg::WavyPlane => Shape::parse("wavy-plane").unwrap(),
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Synth(a) => {
            let cfg = SynthConfig {
                shape: shape_of(a.shape),
                n_cameras: a.cameras,
                image_size: a.size,
                n_points: a.points,
                texture_seed: a.texture_seed,
                rng_seed: a.seed,
                noise_sigma: a.noise,
                outlier_fraction: a.outliers,
                visibility_keep: a.keep,
            };
            let bundle = generate_synthetic(&cfg)?;
            save_scene(&bundle, &a.out)?;
            println!(
                "scene: {} cameras, {} samples -> {}",
                bundle.rig.len(),
                bundle.samples.len(),
                a.out.display()
            );
            Ok(0)
        }
        Command::Mesh(a) => {
            let bundle = load_scene(&a.scene)?;
            let cfg = RunConfig {
                seed: a.seed,
                vis: a.vis.params(),
                cleanup_enabled: !a.no_cleanup,
                refine_enabled: false,
                ..RunConfig::default()
            };
            let (mesh, tri, metrics, report, timings, sigma) = mesh_scene(&bundle, &cfg)?;
            let format = if a.ascii { PlyFormat::Ascii } else { PlyFormat::BinaryLittleEndian };
            save_ply(&mesh, &a.out, format)?;
            if let Some(path) = &a.singular_report {
                if let Some(report) = &report {
                    std::fs::write(path, report.to_csv())?;
                }
            }
            if let Some(path) = &a.dump_cells {
                std::fs::write(path, tri.dump_cells())?;
            }
            if let Some(path) = &a.dump_graph {
                // Rebuild the (pre-cut) flow graph for the dump.
                let params = VisParams { sigma: compute_sigma(&tri)?, ..cfg.vis.clone() };
                let mut graph = FlowGraph::for_tetrahedralization(&tri);
                for sample in &bundle.samples {
                    for &cam in &sample.visibility {
                        if (cam as usize) < bundle.rig.len() {
                            graph.accumulate_ray(
                                &tri,
                                &bundle.rig.cameras[cam as usize],
                                sample,
                                &params,
                            )?;
                        }
                    }
                }
                graph.add_quality_prior(&tri, &params);
                std::fs::write(path, graph.dump())?;
            }
            if let Some(path) = &a.manifest {
                let doc = serde_json::json!({
                    "config": cfg,
                    "resolved_sigma": sigma,
                    "metrics": metrics,
                    "timings": timings.iter()
                        .map(|(n, s)| serde_json::json!({"stage": n, "seconds": s}))
                        .collect::<Vec<_>>(),
                });
                std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
            }
            println!(
                "mesh: {} vertices, {} facets; singular {} -> {} -> {} (fallback)",
                mesh.n_vertices(),
                mesh.n_facets(),
                metrics.singular_before_fixing,
                metrics.singular_after_fixing,
                metrics.singular_after_fallback,
            );
            Ok(0)
        }
        Command::Pairs(a) => {
            let bundle = load_scene(&a.scene)?;
            let mesh = load_ply(&a.mesh)?;
            let points: Vec<_> = bundle.samples.iter().map(|s| s.position).collect();
            let tri = Tetrahedralization::build_with_seed(&points, a.seed)?;
            let potts =
                if a.potts_literal { PottsParams::paper_literal() } else { PottsParams::default() };
            let assignment = assign_pairs(&mesh, &tri, &bundle.samples, bundle.rig.len(), &potts)?;
            std::fs::write(&a.out, assignment.to_csv())?;
            if let Some(path) = &a.trace {
                std::fs::write(path, assignment.trace_csv())?;
            }
            println!(
                "pairs: {} labels over {} facets, energy {:.6}, {} sweeps",
                assignment.candidates.len(),
                assignment.label_of.len(),
                assignment.energy,
                assignment.sweeps
            );
            Ok(0)
        }
        Command::Refine(a) => {
            let bundle = load_scene(&a.scene)?;
            let mesh = load_ply(&a.mesh)?;
            let cfg = RefineConfig {
                iterations: a.iterations,
                step_size: a.step,
                smooth_weight: a.smooth,
                mode: match a.mode {
                    ModeArg::Facetwise => PairMode::Facetwise,
                    ModeArg::Classic => PairMode::Classic,
                },
                classic_k: a.classic_k,
                ..RefineConfig::default()
            };
            let points: Vec<_> = bundle.samples.iter().map(|s| s.position).collect();
            let tri = Tetrahedralization::build_with_seed(&points, a.seed)?;
            let potts =
                if a.potts_literal { PottsParams::paper_literal() } else { PottsParams::default() };
            let subsets = match cfg.mode {
                PairMode::Facetwise => {
                    let assignment =
                        assign_pairs(&mesh, &tri, &bundle.samples, bundle.rig.len(), &potts)?;
                    facetwise_subsets(&assignment)
                }
                PairMode::Classic => {
                    let candidates = mvsmesh::pairsel::build_candidates_k(
                        &bundle.samples,
                        bundle.rig.len(),
                        cfg.classic_k,
                    )?;
                    classic_subsets(&candidates, mesh.n_facets())
                }
            };
            let (refined, trace) = match a.dump_every {
                None => refine_loop(&mesh, &bundle.rig, &subsets, &cfg)?,
                Some(k) if k == 0 => refine_loop(&mesh, &bundle.rig, &subsets, &cfg)?,
                Some(k) => {
                    // Chunked loop so intermediate meshes can be dumped.
                    let mut current = mesh.clone();
                    let mut energies = Vec::new();
                    let mut stats = mvsmesh::refine::RenderStats::default();
                    let mut done = 0;
                    while done < cfg.iterations {
                        let chunk = k.min(cfg.iterations - done);
                        let step_cfg = RefineConfig { iterations: chunk, ..cfg.clone() };
                        let (m, t) = refine_loop(&current, &bundle.rig, &subsets, &step_cfg)?;
                        current = m;
                        energies.extend(t.energies);
                        stats.facet_renders += t.stats.facet_renders;
                        stats.pair_renders += t.stats.pair_renders;
                        stats.grazing_skipped += t.stats.grazing_skipped;
                        done += chunk;
                        let dump = a.out.with_extension(format!("iter{done}.ply"));
                        save_ply(&current, &dump, PlyFormat::BinaryLittleEndian)?;
                    }
                    (current, mvsmesh::refine::RefineTrace { energies, stats })
                }
            };
            save_ply(&refined, &a.out, PlyFormat::BinaryLittleEndian)?;
            if let Some(path) = &a.trace {
                std::fs::write(path, energy_trace_csv(&trace.energies))?;
            }
            println!(
                "refined {} iterations; facet renders {}, energy {:?} -> {:?}",
                a.iterations,
                trace.stats.facet_renders,
                trace.energies.first(),
                trace.energies.last()
            );
            Ok(0)
        }
        Command::Eval(a) => {
            let mesh = load_ply(&a.mesh)?;
            let gt = load_ply(&a.gt)?;
            let acc = accuracy_completeness(&mesh, GtRef::Mesh(&gt), a.samples, a.seed)?;
            let metrics = Metrics { accuracy: Some(acc), ..Metrics::default() };
            let csv = metrics.to_csv();
            match &a.out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            println!(
                "accuracy mean {:.6} median {:.6}; completeness mean {:.6} median {:.6}",
                acc.mean_accuracy, acc.median_accuracy, acc.mean_completeness, acc.median_completeness
            );
            Ok(0)
        }
        Command::Pipeline(a) => {
            let bundle = load_scene(&a.scene)?;
            let cfg = RunConfig {
                seed: a.seed,
                vis: a.vis.params(),
                potts: if a.potts_literal {
                    PottsParams::paper_literal()
                } else {
                    PottsParams::default()
                },
                refine: RefineConfig {
                    iterations: a.iterations,
                    step_size: a.step,
                    smooth_weight: a.smooth,
                    mode: match a.mode {
                        ModeArg::Facetwise => PairMode::Facetwise,
                        ModeArg::Classic => PairMode::Classic,
                    },
                    classic_k: a.classic_k,
                    ..RefineConfig::default()
                },
                cleanup_enabled: !a.no_cleanup,
                refine_enabled: !a.no_refine,
                eval_samples: a.eval_samples,
                workers: a.workers,
            };
            std::fs::create_dir_all(&a.out)?;
            let out = run_pipeline(&bundle, &cfg)?;
            save_ply(&out.mesh, &a.out.join("mesh.ply"), PlyFormat::BinaryLittleEndian)?;
            std::fs::write(a.out.join("metrics.csv"), out.metrics.to_csv())?;
            if !out.energy_trace.is_empty() {
                std::fs::write(a.out.join("energy.csv"), energy_trace_csv(&out.energy_trace))?;
            }
            if let Some(assignment) = &out.assignment {
                std::fs::write(a.out.join("pairs.csv"), assignment.to_csv())?;
            }
            if let Some(report) = &out.cleanup_report {
                std::fs::write(a.out.join("singular.csv"), report.to_csv())?;
            }
            if a.depth_maps {
                for cam in &bundle.rig.cameras {
                    let depth = rasterize(cam, &out.mesh);
                    save_pfm(&depth, &a.out.join(format!("depth_{:03}.pfm", cam.id)))?;
                }
            }
            let manifest = out.manifest(&cfg);
            let manifest_path =
                a.manifest.clone().unwrap_or_else(|| a.out.join("manifest.json"));
            std::fs::write(manifest_path, manifest)?;
            // The pipeline itself hard-gates on manifoldness; re-assert for
            // the exit code contract.
            if !is_manifold(&out.mesh) {
                bail!("output mesh failed the manifold validator");
            }
            println!(
                "pipeline done: {} vertices, {} facets -> {}",
                out.mesh.n_vertices(),
                out.mesh.n_facets(),
                a.out.display()
            );
            Ok(0)
        }
        Command::Validate(a) => {
            let mut failures = 0;
            if a.mesh.is_none() && a.points.is_none() {
                bail!("validate requires --mesh and/or --points");
            }
            if let Some(path) = &a.mesh {
                let mesh = load_ply(path)?;
                let singular = mesh_singular_vertices(&mesh);
                if singular.is_empty() {
                    println!("mesh manifold: PASS ({} vertices)", mesh.n_vertices());
                } else {
                    println!("mesh manifold: FAIL ({} singular vertices)", singular.len());
                    failures += 1;
                }
                match orientation_consistent(&mesh) {
                    true => println!("mesh orientation: PASS"),
                    false => {
                        println!("mesh orientation: FAIL (mismatched edge directions)");
                        failures += 1;
                    }
                }
            }
            if let Some(path) = &a.points {
                let samples = load_points_bin(path)?;
                let points: Vec<_> = samples.iter().map(|s| s.position).collect();
                let tri = Tetrahedralization::build_with_seed(&points, a.seed)
                    .context("triangulation build")?;
                match tri.validate() {
                    Ok(()) => println!("triangulation structure: PASS ({} cells)", tri.n_finite_cells()),
                    Err(e) => {
                        println!("triangulation structure: FAIL ({e})");
                        failures += 1;
                    }
                }
                match delaunay_audit(&tri) {
                    0 => println!("delaunay property: PASS"),
                    n => {
                        println!("delaunay property: FAIL ({n} violations)");
                        failures += 1;
                    }
                }
            }
            Ok(if failures == 0 { 0 } else { 2 })
        }
    }
}

/// Adjacent facets must traverse their shared edge in opposite directions.
fn orientation_consistent(mesh: &SurfaceMesh) -> bool {
    let mut directed = std::collections::HashMap::new();
    for f in &mesh.facets {
        for k in 0..3 {
            let e = (f[k], f[(k + 1) % 3]);
            *directed.entry(e).or_insert(0u32) += 1;
        }
    }
    directed.iter().all(|(&(a, b), &count)| {
        count == 1 && directed.get(&(b, a)).copied().unwrap_or(0) == 1
    })
}

/// Brute-force empty-circumsphere count over all finite cells.
fn delaunay_audit(tri: &Tetrahedralization) -> usize {
    use mvsmesh::delaunay::VertexHandle;
    use mvsmesh::geom::insphere_exact;
    let mut violations = 0;
    for c in tri.finite_cells() {
        let v = tri.cell_vertices(c);
        let pts: Vec<_> = v.iter().map(|&i| *tri.position(VertexHandle(i))).collect();
        for w in 0..tri.n_vertices() as u32 {
            if v.contains(&w) {
                continue;
            }
            if insphere_exact(&pts[0], &pts[1], &pts[2], &pts[3], tri.position(VertexHandle(w)))
                .map(|s| s > 0)
                .unwrap_or(false)
            {
                violations += 1;
            }
        }
    }
    violations
}
