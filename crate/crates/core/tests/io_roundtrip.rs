//! File-format round trips and malformed-input diagnostics.

use mvsmesh::geom::{Camera, Image, Point3, PointSample};
use mvsmesh::manifold::SurfaceMesh;
use mvsmesh::pipeline::io::*;
use mvsmesh::render::{rasterize, DepthMap};
use nalgebra::Matrix3;
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_mesh(seed: u64, n: usize) -> SurfaceMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vertices = Vec::new();
    let mut facets = Vec::new();
    for i in 0..n as u32 {
        for _ in 0..3 {
            vertices.push(Point3::new(
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
            ));
        }
        facets.push([3 * i, 3 * i + 1, 3 * i + 2]);
    }
    SurfaceMesh::from_parts(vertices, facets).unwrap()
}

#[test]
fn ply_binary_roundtrip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = random_mesh(1, 25);
    let path = dir.path().join("m.ply");
    save_ply(&mesh, &path, PlyFormat::BinaryLittleEndian).unwrap();
    let loaded = load_ply(&path).unwrap();
    assert_eq!(mesh.vertices, loaded.vertices, "bitwise vertex equality");
    assert_eq!(mesh.facets, loaded.facets);
    // Second save produces identical bytes (determinism).
    let path2 = dir.path().join("m2.ply");
    save_ply(&loaded, &path2, PlyFormat::BinaryLittleEndian).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
}

#[test]
fn ply_ascii_roundtrip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = random_mesh(2, 10);
    let path = dir.path().join("m.ply");
    save_ply(&mesh, &path, PlyFormat::Ascii).unwrap();
    let loaded = load_ply(&path).unwrap();
    assert_eq!(mesh.vertices, loaded.vertices, "17 significant digits round-trip f64");
    assert_eq!(mesh.facets, loaded.facets);
}

#[test]
fn camera_roundtrip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut cams = Vec::new();
    for i in 0..4 {
        let angle = 0.3 + i as f64;
        cams.push(
            Camera::look_at(
                i,
                Point3::new(3.0 * angle.cos(), 3.0 * angle.sin(), 0.7),
                Point3::origin(),
                nalgebra::Vector3::new(0.0, 0.0, 1.0),
                123.456,
                640,
                480,
            )
            .unwrap(),
        );
    }
    let path = dir.path().join("cams.txt");
    save_cameras(&cams, &path).unwrap();
    let loaded = load_cameras(&path).unwrap();
    assert_eq!(cams.len(), loaded.len());
    for (a, b) in cams.iter().zip(&loaded) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.intrinsics, b.intrinsics, "exact matrix round-trip");
        assert_eq!(a.rotation, b.rotation);
        assert_eq!(a.center, b.center);
        assert_eq!((a.width, a.height), (b.width, b.height));
    }
}

#[test]
fn points_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<PointSample> = (0..200)
        .map(|_| {
            let n = rng.gen_range(1..=5usize);
            let vis: Vec<u32> = (0..n).map(|_| rng.gen_range(0..300u32)).collect();
            PointSample::new(
                Point3::new(
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                ),
                vis,
            )
            .unwrap()
        })
        .collect();
    let bin = dir.path().join("pts.bin");
    save_points_bin(&samples, &bin).unwrap();
    assert_eq!(load_points_bin(&bin).unwrap(), samples);
    let txt = dir.path().join("pts.txt");
    save_points_ascii(&samples, &txt).unwrap();
    assert_eq!(load_points_ascii(&txt).unwrap(), samples);
}

#[test]
fn pfm_depth_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let cam = Camera::look_at(
        0,
        Point3::new(0.0, -3.0, 0.0),
        Point3::origin(),
        nalgebra::Vector3::new(0.0, 0.0, 1.0),
        24.0,
        32,
        24,
    )
    .unwrap();
    let mesh = random_mesh(4, 12);
    let depth = rasterize(&cam, &mesh);
    let path = dir.path().join("d.pfm");
    save_pfm(&depth, &path).unwrap();
    let loaded: DepthMap = load_pfm(&path).unwrap();
    assert_eq!((loaded.width, loaded.height), (depth.width, depth.height));
    for (a, b) in depth.depth.iter().zip(&loaded.depth) {
        if a.is_finite() {
            assert!((*a as f32 as f64 - b).abs() == 0.0, "f32-exact");
        } else {
            assert!(!b.is_finite());
        }
    }
}

#[test]
fn image_formats_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // Pre-quantized values survive 16-bit formats exactly.
    let img = Image::from_fn(17, 11, |_, _| {
        (rng.gen_range(0..=65535u32) as f64) / 65535.0
    });
    let pgm = dir.path().join("i.pgm");
    save_pgm(&img, &pgm).unwrap();
    let back = load_pnm(&pgm).unwrap();
    for (a, b) in img.values().iter().zip(back.values()) {
        assert!((a - b).abs() < 1e-12);
    }
    let pgma = dir.path().join("i.asc.pgm");
    save_pgm_ascii(&img, &pgma).unwrap();
    let back = load_pnm(&pgma).unwrap();
    for (a, b) in img.values().iter().zip(back.values()) {
        assert!((a - b).abs() < 1e-12);
    }
    let png = dir.path().join("i.png");
    save_png(&img, &png).unwrap();
    let back = load_png(&png).unwrap();
    for (a, b) in img.values().iter().zip(back.values()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn ppm_color_loads_as_luminance_average() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.ppm");
    // A 2x1 P3 image: red and mid-gray.
    std::fs::write(&path, "P3\n2 1\n255\n255 0 0 128 128 128\n").unwrap();
    let img = load_pnm(&path).unwrap();
    assert!((img.get(0, 0) - 255.0 / (3.0 * 255.0)).abs() < 1e-12);
    assert!((img.get(1, 0) - 128.0 / 255.0).abs() < 1e-12);
}

#[test]
fn colmap_adapter_maps_poses() {
    let dir = tempfile::tempdir().unwrap();
    let cams = dir.path().join("cameras.txt");
    let imgs = dir.path().join("images.txt");
    std::fs::write(
        &cams,
        "# Camera list\n1 PINHOLE 640 480 500.0 510.0 320.0 240.0\n2 SIMPLE_PINHOLE 320 240 300.0 160.0 120.0\n",
    )
    .unwrap();
    // Identity rotation, translation (1, 2, 3): center = -R^T t = (-1,-2,-3).
    std::fs::write(
        &imgs,
        "# Image list\n5 1.0 0.0 0.0 0.0 1.0 2.0 3.0 1 a.png\n\n7 1.0 0.0 0.0 0.0 0.0 0.0 1.0 2 b.png\n\n",
    )
    .unwrap();
    let loaded = load_colmap_cameras(&cams, &imgs).unwrap();
    assert_eq!(loaded.len(), 2);
    let (cam_a, name_a) = &loaded[0];
    assert_eq!(name_a, "a.png");
    assert_eq!(cam_a.id, 0);
    assert_eq!(cam_a.intrinsics[(0, 0)], 500.0);
    assert_eq!(cam_a.intrinsics[(1, 1)], 510.0);
    assert_eq!(cam_a.center, Point3::new(-1.0, -2.0, -3.0));
    let (cam_b, _) = &loaded[1];
    assert_eq!(cam_b.intrinsics[(0, 0)], 300.0);
    assert_eq!(cam_b.center, Point3::new(0.0, 0.0, -1.0));
}

#[test]
fn malformed_corpus_rejected_with_positions() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(&str, &str)> = vec![
        ("notply.ply", "plx\nformat ascii 1.0\nend_header\n"),
        ("badformat.ply", "ply\nformat binary_big_endian 1.0\nend_header\n"),
        (
            "badvertex.ply",
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\nelement face 0\nproperty list uchar uint vertex_indices\nend_header\n1.0 oops 3.0\n",
        ),
        (
            "missingrow.ply",
            "ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\nproperty double y\nproperty double z\nelement face 0\nproperty list uchar uint vertex_indices\nend_header\n0 0 0\n",
        ),
        (
            "quad.ply",
            "ply\nformat ascii 1.0\nelement vertex 4\nproperty double x\nproperty double y\nproperty double z\nelement face 1\nproperty list uchar uint vertex_indices\nend_header\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n",
        ),
    ];
    for (name, contents) in cases {
        let path = dir.path().join(name);
        std::fs::write(&path, contents).unwrap();
        let err = load_ply(&path).expect_err(name);
        let msg = format!("{err}");
        assert!(
            msg.contains(name) && msg.contains(':'),
            "{name}: diagnostic must cite the file and position, got: {msg}"
        );
    }

    // Truncated binary PLY: byte-offset diagnostics.
    let path = dir.path().join("trunc.ply");
    let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty double x\nproperty double y\nproperty double z\nelement face 0\nproperty list uchar uint vertex_indices\nend_header\n".to_vec();
    bytes.extend_from_slice(&1.0f64.to_le_bytes());
    std::fs::write(&path, bytes).unwrap();
    let msg = format!("{}", load_ply(&path).unwrap_err());
    assert!(msg.contains("offset"), "binary diagnostics carry offsets: {msg}");

    // Camera table with a bad field count.
    let path = dir.path().join("cams.txt");
    std::fs::write(&path, "# ok\n0 1 2 3\n").unwrap();
    let msg = format!("{}", load_cameras(&path).unwrap_err());
    assert!(msg.contains(":2:"), "line number cited: {msg}");

    // Points ASCII with inconsistent count.
    let path = dir.path().join("pts.txt");
    std::fs::write(&path, "0 0 0 2 1\n").unwrap();
    let msg = format!("{}", load_points_ascii(&path).unwrap_err());
    assert!(msg.contains(":1:"), "line number cited: {msg}");

    // Points binary with a truncated varint list.
    let path = dir.path().join("pts.bin");
    let mut bytes = 1u64.to_le_bytes().to_vec();
    bytes.extend_from_slice(&0.0f64.to_le_bytes());
    bytes.extend_from_slice(&0.0f64.to_le_bytes());
    bytes.extend_from_slice(&0.0f64.to_le_bytes());
    bytes.push(0x83); // continuation bit set, nothing follows
    std::fs::write(&path, bytes).unwrap();
    let msg = format!("{}", load_points_bin(&path).unwrap_err());
    assert!(msg.contains("offset"), "offset cited: {msg}");

    // PFM with a bad scale.
    let path = dir.path().join("bad.pfm");
    std::fs::write(&path, "Pf\n2 2\n1.0\n0000000000000000").unwrap();
    assert!(load_pfm(&path).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    // Meshes of any size round-trip losslessly through binary PLY.
    #[test]
    fn ply_binary_roundtrip_property(seed in 0u64..1000, n in 1usize..40) {
        let dir = tempfile::tempdir().unwrap();
        let mesh = random_mesh(seed, n);
        let path = dir.path().join("m.ply");
        save_ply(&mesh, &path, PlyFormat::BinaryLittleEndian).unwrap();
        let loaded = load_ply(&path).unwrap();
        prop_assert_eq!(mesh.vertices, loaded.vertices);
        prop_assert_eq!(mesh.facets, loaded.facets);
    }
}
