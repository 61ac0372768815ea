//! Camera table: one camera per line, `#` comments.
//!
//! Fields: id, 9 intrinsic entries (row-major), 9 rotation entries
//! (row-major, world-to-camera), 3 center entries, width, height.
//! A COLMAP-text convenience reader maps `cameras.txt`/`images.txt`
//! (PINHOLE and SIMPLE_PINHOLE models) onto the same type.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::Matrix3;

use crate::geom::{Camera, Point3};

use super::{fmt_f64, IoError};

pub fn save_cameras(cams: &[Camera], path: &Path) -> Result<(), IoError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# id k[9] r[9] center[3] width height")?;
    for cam in cams {
        let mut fields = vec![cam.id.to_string()];
        for r in 0..3 {
            for c in 0..3 {
                fields.push(fmt_f64(cam.intrinsics[(r, c)]));
            }
        }
        for r in 0..3 {
            for c in 0..3 {
                fields.push(fmt_f64(cam.rotation[(r, c)]));
            }
        }
        for k in 0..3 {
            fields.push(fmt_f64(cam.center[k]));
        }
        fields.push(cam.width.to_string());
        fields.push(cam.height.to_string());
        writeln!(out, "{}", fields.join(" "))?;
    }
    Ok(())
}

pub fn load_cameras(path: &Path) -> Result<Vec<Camera>, IoError> {
    let pathstr = path.display().to_string();
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut cams = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 24 {
            return Err(IoError::parse(
                &pathstr,
                lineno,
                format!("expected 24 fields, got {}", fields.len()),
            ));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|e| IoError::parse(&pathstr, lineno, format!("bad id: {e}")))?;
        let mut vals = [0.0f64; 21];
        for (k, f) in fields[1..22].iter().enumerate() {
            vals[k] = f
                .parse()
                .map_err(|e| IoError::parse(&pathstr, lineno, format!("field {}: {e}", k + 1)))?;
        }
        let width: usize = fields[22]
            .parse()
            .map_err(|e| IoError::parse(&pathstr, lineno, format!("bad width: {e}")))?;
        let height: usize = fields[23]
            .parse()
            .map_err(|e| IoError::parse(&pathstr, lineno, format!("bad height: {e}")))?;
        let k = Matrix3::from_row_slice(&vals[0..9]);
        let r = Matrix3::from_row_slice(&vals[9..18]);
        let center = Point3::new(vals[18], vals[19], vals[20]);
        let cam = Camera::new(id, k, r, center, width, height)
            .map_err(|e| IoError::parse(&pathstr, lineno, format!("invalid camera: {e}")))?;
        cams.push(cam);
    }
    Ok(cams)
}

/// COLMAP text-model import: `cameras.txt` (intrinsics) plus `images.txt`
/// (poses). Returns cameras with sequential ids in image-id order together
/// with the image file names. Only PINHOLE and SIMPLE_PINHOLE models are
/// mapped; COLMAP stores `x_cam = R x_world + t`, so the center is
/// `-R^T t`.
pub fn load_colmap_cameras(
    cameras_txt: &Path,
    images_txt: &Path,
) -> Result<Vec<(Camera, String)>, IoError> {
    let campath = cameras_txt.display().to_string();
    let mut intrinsics: std::collections::BTreeMap<u64, (Matrix3<f64>, usize, usize)> =
        std::collections::BTreeMap::new();
    let reader = BufReader::new(std::fs::File::open(cameras_txt)?);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = trimmed.split_whitespace().collect();
        if f.len() < 5 {
            return Err(IoError::parse(&campath, lineno, "short camera line"));
        }
        let cam_id: u64 = f[0]
            .parse()
            .map_err(|e| IoError::parse(&campath, lineno, format!("bad camera id: {e}")))?;
        let width: usize = f[2]
            .parse()
            .map_err(|e| IoError::parse(&campath, lineno, format!("bad width: {e}")))?;
        let height: usize = f[3]
            .parse()
            .map_err(|e| IoError::parse(&campath, lineno, format!("bad height: {e}")))?;
        let params: Result<Vec<f64>, _> = f[4..].iter().map(|s| s.parse::<f64>()).collect();
        let params = params
            .map_err(|e| IoError::parse(&campath, lineno, format!("bad parameter: {e}")))?;
        let (fx, fy, cx, cy) = match (f[1], params.len()) {
            ("PINHOLE", 4) => (params[0], params[1], params[2], params[3]),
            ("SIMPLE_PINHOLE", 3) => (params[0], params[0], params[1], params[2]),
            (model, n) => {
                return Err(IoError::parse(
                    &campath,
                    lineno,
                    format!("unsupported model {model} with {n} parameters"),
                ))
            }
        };
        let k = Matrix3::new(fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0);
        intrinsics.insert(cam_id, (k, width, height));
    }

    let imgpath = images_txt.display().to_string();
    let reader = BufReader::new(std::fs::File::open(images_txt)?);
    let mut rows: Vec<(u64, Camera, String)> = Vec::new();
    let mut expect_points_line = false;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.starts_with('#') {
            continue;
        }
        if expect_points_line {
            expect_points_line = false; // 2D observation row (possibly empty), ignored
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let f: Vec<&str> = trimmed.split_whitespace().collect();
        if f.len() < 10 {
            return Err(IoError::parse(&imgpath, lineno, "short image line"));
        }
        let image_id: u64 = f[0]
            .parse()
            .map_err(|e| IoError::parse(&imgpath, lineno, format!("bad image id: {e}")))?;
        let mut q = [0.0f64; 7];
        for k in 0..7 {
            q[k] = f[k + 1]
                .parse()
                .map_err(|e| IoError::parse(&imgpath, lineno, format!("bad pose: {e}")))?;
        }
        let cam_ref: u64 = f[8]
            .parse()
            .map_err(|e| IoError::parse(&imgpath, lineno, format!("bad camera ref: {e}")))?;
        let name = f[9].to_string();
        let (k, width, height) = intrinsics
            .get(&cam_ref)
            .ok_or_else(|| IoError::parse(&imgpath, lineno, format!("unknown camera {cam_ref}")))?;
        let quat = nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]);
        let rot = nalgebra::UnitQuaternion::from_quaternion(quat).to_rotation_matrix();
        let r = *rot.matrix();
        let t = nalgebra::Vector3::new(q[4], q[5], q[6]);
        let center = Point3::from(-(r.transpose() * t));
        let cam = Camera::new(0, *k, r, center, *width, *height)
            .map_err(|e| IoError::parse(&imgpath, lineno, format!("invalid camera: {e}")))?;
        rows.push((image_id, cam, name));
        expect_points_line = true;
    }
    rows.sort_by_key(|(id, _, _)| *id);
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, (_, mut cam, name))| {
            cam.id = i;
            (cam, name)
        })
        .collect())
}
