//! Surface reconstruction and refinement for multi-view stereo.
//!
//! The crate turns a visibility-annotated 3D point cloud plus calibrated
//! images into a 2-manifold triangle mesh and then refines it facetwise:
//!
//! - [`geom`]: shared geometric types and exact orientation/in-sphere
//!   predicates,
//! - [`delaunay`]: incremental 3D Delaunay tetrahedralization with ray
//!   walking and centroid splits,
//! - [`graphcut`]: visibility rays to an s-t flow network over tetrahedra,
//!   minimum cut to a free-space/matter labeling,
//! - [`manifold`]: preemptive singular-vertex fixing on the labeled
//!   complex and boundary surface extraction,
//! - [`pairsel`]: per-facet camera-pair assignment by MRF labeling,
//! - [`render`]: software rasterization, reprojection and ZNCC error maps,
//! - [`refine`]: variational photometric gradient descent with umbrella
//!   smoothing,
//! - [`pipeline`]: synthetic scenes, file IO, metrics and orchestration.

pub mod delaunay;
pub mod geom;
pub mod graphcut;
pub mod manifold;
pub mod pairsel;
pub mod pipeline;
pub mod refine;
pub mod render;
