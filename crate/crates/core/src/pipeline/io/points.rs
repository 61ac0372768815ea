//! Point-with-visibility tables.
//!
//! Binary: u64 LE point count, then per point 3 little-endian f64
//! coordinates and an LEB128-varint-prefixed list of varint camera ids.
//! The ASCII mirror has one `x y z n id...` row per point with `#`
//! comments.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::geom::{Point3, PointSample};

use super::{fmt_f64, IoError};

fn write_varint(out: &mut impl Write, mut v: u64) -> std::io::Result<()> {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            return out.write_all(&[byte]);
        }
        out.write_all(&[byte | 0x80])?;
    }
}

fn read_varint(buf: &[u8], offset: &mut usize, path: &str) -> Result<u64, IoError> {
    let mut v = 0u64;
    let mut shift = 0u32;
    loop {
        let byte = *buf
            .get(*offset)
            .ok_or_else(|| IoError::binary(path, *offset, "unexpected end in varint"))?;
        *offset += 1;
        if shift >= 64 {
            return Err(IoError::binary(path, *offset, "varint overflow"));
        }
        v |= ((byte & 0x7f) as u64) << shift;
        if byte & 0x80 == 0 {
            return Ok(v);
        }
        shift += 7;
    }
}

pub fn save_points_bin(samples: &[PointSample], path: &Path) -> Result<(), IoError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(&(samples.len() as u64).to_le_bytes())?;
    for s in samples {
        for c in [s.position.x, s.position.y, s.position.z] {
            out.write_all(&c.to_le_bytes())?;
        }
        write_varint(&mut out, s.visibility.len() as u64)?;
        for &id in &s.visibility {
            write_varint(&mut out, id as u64)?;
        }
    }
    Ok(())
}

pub fn load_points_bin(path: &Path) -> Result<Vec<PointSample>, IoError> {
    let pathstr = path.display().to_string();
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut offset = 0usize;
    if buf.len() < 8 {
        return Err(IoError::binary(&pathstr, 0, "missing point count"));
    }
    let count = u64::from_le_bytes(buf[0..8].try_into().unwrap()) as usize;
    offset += 8;
    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        if offset + 24 > buf.len() {
            return Err(IoError::binary(&pathstr, offset, format!("point {i}: truncated coordinates")));
        }
        let mut c = [0.0f64; 3];
        for coord in &mut c {
            *coord = f64::from_le_bytes(buf[offset..offset + 8].try_into().unwrap());
            offset += 8;
        }
        let n = read_varint(&buf, &mut offset, &pathstr)? as usize;
        if n > 1 << 20 {
            return Err(IoError::binary(&pathstr, offset, format!("point {i}: absurd visibility count {n}")));
        }
        let mut vis = Vec::with_capacity(n);
        for _ in 0..n {
            let id = read_varint(&buf, &mut offset, &pathstr)?;
            vis.push(u32::try_from(id).map_err(|_| {
                IoError::binary(&pathstr, offset, format!("point {i}: camera id overflow"))
            })?);
        }
        let sample = PointSample::new(Point3::new(c[0], c[1], c[2]), vis).map_err(|e| {
            IoError::binary(&pathstr, offset, format!("point {i}: {e}"))
        })?;
        samples.push(sample);
    }
    if offset != buf.len() {
        return Err(IoError::binary(&pathstr, offset, "trailing bytes after points"));
    }
    Ok(samples)
}

pub fn save_points_ascii(samples: &[PointSample], path: &Path) -> Result<(), IoError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# x y z n cam_ids...")?;
    for s in samples {
        let mut fields = vec![
            fmt_f64(s.position.x),
            fmt_f64(s.position.y),
            fmt_f64(s.position.z),
            s.visibility.len().to_string(),
        ];
        fields.extend(s.visibility.iter().map(|id| id.to_string()));
        writeln!(out, "{}", fields.join(" "))?;
    }
    Ok(())
}

pub fn load_points_ascii(path: &Path) -> Result<Vec<PointSample>, IoError> {
    let pathstr = path.display().to_string();
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut samples = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 4 {
            return Err(IoError::parse(&pathstr, lineno, "expected x y z n ids..."));
        }
        let mut c = [0.0f64; 3];
        for k in 0..3 {
            c[k] = fields[k]
                .parse()
                .map_err(|e| IoError::parse(&pathstr, lineno, format!("coordinate: {e}")))?;
        }
        let n: usize = fields[3]
            .parse()
            .map_err(|e| IoError::parse(&pathstr, lineno, format!("count: {e}")))?;
        if fields.len() != 4 + n {
            return Err(IoError::parse(
                &pathstr,
                lineno,
                format!("expected {n} camera ids, got {}", fields.len() - 4),
            ));
        }
        let vis: Result<Vec<u32>, _> = fields[4..].iter().map(|s| s.parse::<u32>()).collect();
        let vis =
            vis.map_err(|e| IoError::parse(&pathstr, lineno, format!("camera id: {e}")))?;
        samples.push(
            PointSample::new(Point3::new(c[0], c[1], c[2]), vis)
                .map_err(|e| IoError::parse(&pathstr, lineno, format!("{e}")))?,
        );
    }
    Ok(samples)
}
