//! PFM (portable float map) for depth maps: grayscale `Pf`, rows stored
//! bottom-to-top, little-endian (negative scale). Empty pixels are +inf.

use std::io::{Read, Write};
use std::path::Path;

use crate::render::{DepthMap, NO_FACET};

use super::IoError;

pub fn save_pfm(map: &DepthMap, path: &Path) -> Result<(), IoError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "Pf\n{} {}\n-1.0\n", map.width, map.height)?;
    for y in (0..map.height).rev() {
        for x in 0..map.width {
            let v = map.depth[y * map.width + x] as f32;
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_pfm(path: &Path) -> Result<DepthMap, IoError> {
    let pathstr = path.display().to_string();
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    // Header: three whitespace-separated tokens.
    let mut offset = 0usize;
    let magic = header_token(&buf, &mut offset, &pathstr, "magic")?;
    if magic != "Pf" {
        return Err(IoError::binary(&pathstr, 0, format!("expected Pf, got {magic}")));
    }
    let width: usize = header_token(&buf, &mut offset, &pathstr, "width")?
        .parse()
        .map_err(|e| IoError::binary(&pathstr, offset, format!("width: {e}")))?;
    let height: usize = header_token(&buf, &mut offset, &pathstr, "height")?
        .parse()
        .map_err(|e| IoError::binary(&pathstr, offset, format!("height: {e}")))?;
    let scale: f64 = header_token(&buf, &mut offset, &pathstr, "scale")?
        .parse()
        .map_err(|e| IoError::binary(&pathstr, offset, format!("scale: {e}")))?;
    if scale >= 0.0 {
        return Err(IoError::binary(&pathstr, offset, "big-endian PFM not supported"));
    }
    offset += 1; // single whitespace after the scale
    let need = width * height * 4;
    if buf.len() < offset + need {
        return Err(IoError::binary(&pathstr, buf.len(), "truncated pixel data"));
    }
    let mut map = DepthMap::empty(width, height);
    for y in 0..height {
        let row = height - 1 - y;
        for x in 0..width {
            let at = offset + (y * width + x) * 4;
            let v = f32::from_le_bytes(buf[at..at + 4].try_into().unwrap()) as f64;
            let idx = row * width + x;
            map.depth[idx] = v;
            map.facet[idx] = if v.is_finite() { 0 } else { NO_FACET };
        }
    }
    Ok(map)
}

fn header_token(
    buf: &[u8],
    offset: &mut usize,
    path: &str,
    what: &str,
) -> Result<String, IoError> {
    while *offset < buf.len() && buf[*offset].is_ascii_whitespace() {
        *offset += 1;
    }
    let start = *offset;
    while *offset < buf.len() && !buf[*offset].is_ascii_whitespace() {
        *offset += 1;
    }
    if start == *offset {
        return Err(IoError::binary(path, *offset, format!("missing {what}")));
    }
    Ok(String::from_utf8_lossy(&buf[start..*offset]).into_owned())
}
