//! Scene-bundle directory layout: `cameras.txt`, `images/cam_NNN.pgm`,
//! `points.bin`, optional `gt.ply` and `meta.json` (analytic shape).

use std::path::Path;

use crate::geom::CameraRig;
use crate::pipeline::{SceneBundle, Shape};

use super::{
    load_cameras, load_pnm, load_points_bin, save_cameras, save_pgm, save_points_bin, IoError,
};

pub fn save_scene(bundle: &SceneBundle, dir: &Path) -> Result<(), IoError> {
    std::fs::create_dir_all(dir.join("images"))?;
    save_cameras(&bundle.rig.cameras, &dir.join("cameras.txt"))?;
    for (i, img) in bundle.rig.images.iter().enumerate() {
        save_pgm(img, &dir.join("images").join(format!("cam_{i:03}.pgm")))?;
    }
    save_points_bin(&bundle.samples, &dir.join("points.bin"))?;
    if let Some(gt) = &bundle.ground_truth_mesh {
        super::save_ply(gt, &dir.join("gt.ply"), super::PlyFormat::BinaryLittleEndian)?;
    }
    let meta = serde_json::json!({ "shape": bundle.ground_truth });
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta).unwrap())?;
    Ok(())
}

pub fn load_scene(dir: &Path) -> Result<SceneBundle, IoError> {
    let cameras = load_cameras(&dir.join("cameras.txt"))?;
    let mut images = Vec::with_capacity(cameras.len());
    for i in 0..cameras.len() {
        let pgm = dir.join("images").join(format!("cam_{i:03}.pgm"));
        let png = dir.join("images").join(format!("cam_{i:03}.png"));
        let img = if pgm.exists() {
            load_pnm(&pgm)?
        } else if png.exists() {
            super::load_png(&png)?
        } else {
            return Err(IoError::Invalid(format!(
                "missing image for camera {i} under {}",
                dir.join("images").display()
            )));
        };
        images.push(img);
    }
    let rig = CameraRig::new(cameras, images)
        .map_err(|e| IoError::Invalid(format!("inconsistent rig: {e}")))?;
    let samples = load_points_bin(&dir.join("points.bin"))?;
    let gt_path = dir.join("gt.ply");
    let ground_truth_mesh =
        if gt_path.exists() { Some(super::load_ply(&gt_path)?) } else { None };
    let meta_path = dir.join("meta.json");
    let ground_truth: Option<Shape> = if meta_path.exists() {
        let text = std::fs::read_to_string(&meta_path)?;
        let v: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| IoError::Invalid(format!("{}: {e}", meta_path.display())))?;
        serde_json::from_value(v["shape"].clone()).unwrap_or(None)
    } else {
        None
    };
    Ok(SceneBundle { rig, samples, ground_truth, ground_truth_mesh })
}
