//! PLY mesh reader/writer (ascii and binary little-endian, double or
//! float vertex coordinates, uchar/int face counts).

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::geom::Point3;
use crate::manifold::SurfaceMesh;

use super::{fmt_f64, IoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

pub fn save_ply(mesh: &SurfaceMesh, path: &Path, format: PlyFormat) -> Result<(), IoError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let fmt_line = match format {
        PlyFormat::Ascii => "format ascii 1.0",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0",
    };
    write!(
        out,
        "ply\n{fmt_line}\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar uint vertex_indices\nend_header\n",
        mesh.n_vertices(),
        mesh.n_facets()
    )?;
    match format {
        PlyFormat::Ascii => {
            for v in &mesh.vertices {
                writeln!(out, "{} {} {}", fmt_f64(v.x), fmt_f64(v.y), fmt_f64(v.z))?;
            }
            for f in &mesh.facets {
                writeln!(out, "3 {} {} {}", f[0], f[1], f[2])?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for v in &mesh.vertices {
                for c in [v.x, v.y, v.z] {
                    out.write_all(&c.to_le_bytes())?;
                }
            }
            for f in &mesh.facets {
                out.write_all(&[3u8])?;
                for &i in f {
                    out.write_all(&i.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum IndexType {
    U8,
    I32,
    U32,
}

struct Header {
    format: PlyFormat,
    n_vertices: usize,
    n_faces: usize,
    coord_type: Scalar,
    count_type: IndexType,
    index_type: IndexType,
    header_lines: usize,
}

fn parse_header(path: &str, reader: &mut impl BufRead) -> Result<Header, IoError> {
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end() != "ply" {
        return Err(IoError::parse(path, 1, "missing 'ply' magic"));
    }
    let mut format = None;
    let mut n_vertices = None;
    let mut n_faces = None;
    let mut coord_props: Vec<(String, Scalar)> = Vec::new();
    let mut count_type = IndexType::U8;
    let mut index_type = IndexType::U32;
    let mut current: Option<&'static str> = None;
    let mut lines = 1usize;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(IoError::parse(path, lines + 1, "unexpected end of header"));
        }
        lines += 1;
        let trimmed = line.trim_end();
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        match tokens.first().copied() {
            Some("comment") | Some("obj_info") => {}
            Some("format") => {
                format = match tokens.get(1).copied() {
                    Some("ascii") => Some(PlyFormat::Ascii),
                    Some("binary_little_endian") => Some(PlyFormat::BinaryLittleEndian),
                    other => {
                        return Err(IoError::parse(
                            path,
                            lines,
                            format!("unsupported format {other:?}"),
                        ))
                    }
                };
            }
            Some("element") => match (tokens.get(1).copied(), tokens.get(2)) {
                (Some("vertex"), Some(n)) => {
                    n_vertices = Some(n.parse().map_err(|_| {
                        IoError::parse(path, lines, "bad vertex count")
                    })?);
                    current = Some("vertex");
                }
                (Some("face"), Some(n)) => {
                    n_faces = Some(
                        n.parse().map_err(|_| IoError::parse(path, lines, "bad face count"))?,
                    );
                    current = Some("face");
                }
                _ => return Err(IoError::parse(path, lines, "unsupported element")),
            },
            Some("property") => match current {
                Some("vertex") => {
                    let ty = match tokens.get(1).copied() {
                        Some("double") | Some("float64") => Scalar::F64,
                        Some("float") | Some("float32") => Scalar::F32,
                        other => {
                            return Err(IoError::parse(
                                path,
                                lines,
                                format!("unsupported vertex property type {other:?}"),
                            ))
                        }
                    };
                    let name = tokens
                        .get(2)
                        .ok_or_else(|| IoError::parse(path, lines, "property missing name"))?;
                    coord_props.push((name.to_string(), ty));
                }
                Some("face") => {
                    if tokens.get(1).copied() != Some("list") {
                        return Err(IoError::parse(path, lines, "face property must be a list"));
                    }
                    count_type = parse_index(path, lines, tokens.get(2).copied())?;
                    index_type = parse_index(path, lines, tokens.get(3).copied())?;
                }
                _ => return Err(IoError::parse(path, lines, "property outside element")),
            },
            Some("end_header") => break,
            other => {
                return Err(IoError::parse(path, lines, format!("unexpected token {other:?}")))
            }
        }
    }
    let names: Vec<&str> = coord_props.iter().map(|(n, _)| n.as_str()).collect();
    if names != ["x", "y", "z"] {
        return Err(IoError::parse(
            path,
            lines,
            format!("vertex properties must be x y z, got {names:?}"),
        ));
    }
    let coord_type = coord_props[0].1;
    if coord_props.iter().any(|(_, t)| *t != coord_type) {
        return Err(IoError::parse(path, lines, "mixed coordinate types"));
    }
    Ok(Header {
        format: format.ok_or_else(|| IoError::parse(path, lines, "missing format line"))?,
        n_vertices: n_vertices.ok_or_else(|| IoError::parse(path, lines, "missing vertex element"))?,
        n_faces: n_faces.unwrap_or(0),
        coord_type,
        count_type,
        index_type,
        header_lines: lines,
    })
}

fn parse_index(path: &str, line: usize, token: Option<&str>) -> Result<IndexType, IoError> {
    match token {
        Some("uchar") | Some("uint8") => Ok(IndexType::U8),
        Some("int") | Some("int32") => Ok(IndexType::I32),
        Some("uint") | Some("uint32") => Ok(IndexType::U32),
        other => Err(IoError::parse(path, line, format!("unsupported index type {other:?}"))),
    }
}

pub fn load_ply(path: &Path) -> Result<SurfaceMesh, IoError> {
    let pathstr = path.display().to_string();
    let file = std::fs::File::open(path)?;
    let mut reader = BufReader::new(file);
    let header = parse_header(&pathstr, &mut reader)?;

    let mut vertices = Vec::with_capacity(header.n_vertices);
    let mut facets = Vec::with_capacity(header.n_faces);
    match header.format {
        PlyFormat::Ascii => {
            let mut lineno = header.header_lines;
            let mut line = String::new();
            for i in 0..header.n_vertices {
                line.clear();
                if reader.read_line(&mut line)? == 0 {
                    return Err(IoError::parse(&pathstr, lineno + 1, "missing vertex row"));
                }
                lineno += 1;
                let vals: Result<Vec<f64>, _> =
                    line.split_whitespace().map(str::parse::<f64>).collect();
                let vals = vals.map_err(|e| {
                    IoError::parse(&pathstr, lineno, format!("vertex {i}: {e}"))
                })?;
                if vals.len() != 3 {
                    return Err(IoError::parse(
                        &pathstr,
                        lineno,
                        format!("vertex {i}: expected 3 coordinates, got {}", vals.len()),
                    ));
                }
                vertices.push(Point3::new(vals[0], vals[1], vals[2]));
            }
            for i in 0..header.n_faces {
                line.clear();
                if reader.read_line(&mut line)? == 0 {
                    return Err(IoError::parse(&pathstr, lineno + 1, "missing face row"));
                }
                lineno += 1;
                let vals: Result<Vec<i64>, _> =
                    line.split_whitespace().map(str::parse::<i64>).collect();
                let vals =
                    vals.map_err(|e| IoError::parse(&pathstr, lineno, format!("face {i}: {e}")))?;
                if vals.len() != 4 || vals[0] != 3 {
                    return Err(IoError::parse(
                        &pathstr,
                        lineno,
                        format!("face {i}: only triangles are supported"),
                    ));
                }
                let mut f = [0u32; 3];
                for k in 0..3 {
                    f[k] = u32::try_from(vals[k + 1]).map_err(|_| {
                        IoError::parse(&pathstr, lineno, format!("face {i}: negative index"))
                    })?;
                }
                facets.push(f);
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let mut offset = 0usize;
            let mut buf = Vec::new();
            reader.read_to_end(&mut buf)?;
            let coord_size = match header.coord_type {
                Scalar::F32 => 4,
                Scalar::F64 => 8,
            };
            for _ in 0..header.n_vertices {
                let mut c = [0.0f64; 3];
                for coord in &mut c {
                    let raw = take_bytes(&buf, &mut offset, coord_size, &pathstr, "vertex")?;
                    *coord = match header.coord_type {
                        Scalar::F64 => f64::from_le_bytes(raw.try_into().unwrap()),
                        Scalar::F32 => f32::from_le_bytes(raw[..4].try_into().unwrap()) as f64,
                    };
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            for i in 0..header.n_faces {
                let count = read_index(&buf, &mut offset, header.count_type, &pathstr)?;
                if count != 3 {
                    return Err(IoError::binary(
                        &pathstr,
                        offset,
                        format!("face {i}: only triangles are supported, got {count} vertices"),
                    ));
                }
                let mut f = [0u32; 3];
                for slot in &mut f {
                    let v = read_index(&buf, &mut offset, header.index_type, &pathstr)?;
                    *slot = u32::try_from(v).map_err(|_| {
                        IoError::binary(&pathstr, offset, format!("face {i}: negative index"))
                    })?;
                }
                facets.push(f);
            }
            if offset != buf.len() {
                return Err(IoError::binary(&pathstr, offset, "trailing bytes after face data"));
            }
        }
    }
    SurfaceMesh::from_parts(vertices, facets)
        .map_err(|e| IoError::Invalid(format!("{}: {e}", pathstr)))
}

fn take_bytes(
    buf: &[u8],
    offset: &mut usize,
    n: usize,
    path: &str,
    what: &str,
) -> Result<[u8; 8], IoError> {
    if *offset + n > buf.len() {
        return Err(IoError::binary(path, *offset, format!("unexpected end of data reading {what}")));
    }
    let mut out = [0u8; 8];
    out[..n].copy_from_slice(&buf[*offset..*offset + n]);
    *offset += n;
    Ok(out)
}

fn read_index(
    buf: &[u8],
    offset: &mut usize,
    t: IndexType,
    path: &str,
) -> Result<i64, IoError> {
    let size = match t {
        IndexType::U8 => 1,
        IndexType::I32 | IndexType::U32 => 4,
    };
    let raw = take_bytes(buf, offset, size, path, "face index")?;
    Ok(match t {
        IndexType::U8 => raw[0] as i64,
        IndexType::I32 => i32::from_le_bytes(raw[..4].try_into().unwrap()) as i64,
        IndexType::U32 => u32::from_le_bytes(raw[..4].try_into().unwrap()) as i64,
    })
}
