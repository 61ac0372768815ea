//! File formats: PLY meshes, camera and point/visibility tables, PFM
//! depth maps, PNM and PNG images, CSV metric dumps.
//!
//! Binary formats round-trip losslessly; ASCII floats are written with 17
//! significant digits so they re-read bit-exact. Malformed inputs produce
//! position-annotated errors.

mod cameras;
mod pfm;
mod ply;
mod png;
mod pnm;
mod points;
mod scene;

pub use cameras::{load_cameras, load_colmap_cameras, save_cameras};
pub use pfm::{load_pfm, save_pfm};
pub use ply::{load_ply, save_ply, PlyFormat};
pub use png::{load_png, save_png};
pub use pnm::{load_pnm, save_pgm, save_pgm_ascii};
pub use points::{load_points_ascii, load_points_bin, save_points_ascii, save_points_bin};
pub use scene::{load_scene, save_scene};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: offset {offset}: {msg}")]
    Binary { path: String, offset: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

impl IoError {
    pub(crate) fn parse(path: &str, line: usize, msg: impl Into<String>) -> Self {
        Self::Parse { path: path.to_string(), line, msg: msg.into() }
    }

    pub(crate) fn binary(path: &str, offset: usize, msg: impl Into<String>) -> Self {
        Self::Binary { path: path.to_string(), offset, msg: msg.into() }
    }
}

/// f64 formatting that round-trips exactly through parsing.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}
