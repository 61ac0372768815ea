//! PGM/PPM images. Intensities are stored as 16-bit grayscale (P5/P2,
//! maxval 65535); color PPM inputs load by luminance average.

use std::io::{Read, Write};
use std::path::Path;

use crate::geom::Image;

use super::IoError;

pub fn save_pgm(img: &Image, path: &Path) -> Result<(), IoError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "P5\n{} {}\n65535\n", img.width(), img.height())?;
    for v in img.values() {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.write_all(&q.to_be_bytes())?; // PNM 16-bit samples are big-endian
    }
    Ok(())
}

pub fn save_pgm_ascii(img: &Image, path: &Path) -> Result<(), IoError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "P2\n{} {}\n65535", img.width(), img.height())?;
    for row in img.values().chunks(img.width()) {
        let line: Vec<String> = row
            .iter()
            .map(|v| ((v.clamp(0.0, 1.0) * 65535.0).round() as u16).to_string())
            .collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

struct Tokenizer<'a> {
    buf: &'a [u8],
    offset: usize,
    path: &'a str,
}

impl<'a> Tokenizer<'a> {
    fn token(&mut self, what: &str) -> Result<String, IoError> {
        loop {
            while self.offset < self.buf.len() && self.buf[self.offset].is_ascii_whitespace() {
                self.offset += 1;
            }
            if self.offset < self.buf.len() && self.buf[self.offset] == b'#' {
                while self.offset < self.buf.len() && self.buf[self.offset] != b'\n' {
                    self.offset += 1;
                }
                continue;
            }
            break;
        }
        let start = self.offset;
        while self.offset < self.buf.len() && !self.buf[self.offset].is_ascii_whitespace() {
            self.offset += 1;
        }
        if start == self.offset {
            return Err(IoError::binary(self.path, self.offset, format!("missing {what}")));
        }
        Ok(String::from_utf8_lossy(&self.buf[start..self.offset]).into_owned())
    }

    fn number(&mut self, what: &str) -> Result<usize, IoError> {
        let t = self.token(what)?;
        t.parse().map_err(|e| {
            IoError::binary(self.path, self.offset, format!("{what}: {e}"))
        })
    }
}

/// Loads P2/P5 grayscale or P3/P6 color (luminance-averaged) images.
pub fn load_pnm(path: &Path) -> Result<Image, IoError> {
    let pathstr = path.display().to_string();
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut tok = Tokenizer { buf: &buf, offset: 0, path: &pathstr };
    let magic = tok.token("magic")?;
    let channels = match magic.as_str() {
        "P2" | "P5" => 1usize,
        "P3" | "P6" => 3usize,
        other => return Err(IoError::binary(&pathstr, 0, format!("unsupported magic {other}"))),
    };
    let width = tok.number("width")?;
    let height = tok.number("height")?;
    let maxval = tok.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(IoError::binary(&pathstr, tok.offset, format!("bad maxval {maxval}")));
    }
    let n = width * height * channels;
    let mut raw = Vec::with_capacity(n);
    match magic.as_str() {
        "P2" | "P3" => {
            for i in 0..n {
                let v = tok.number("sample")?;
                if v > maxval {
                    return Err(IoError::binary(
                        &pathstr,
                        tok.offset,
                        format!("sample {i} = {v} exceeds maxval"),
                    ));
                }
                raw.push(v as f64);
            }
        }
        _ => {
            let mut offset = tok.offset + 1; // single whitespace after maxval
            let bytes_per = if maxval > 255 { 2 } else { 1 };
            if buf.len() < offset + n * bytes_per {
                return Err(IoError::binary(&pathstr, buf.len(), "truncated pixel data"));
            }
            for _ in 0..n {
                let v = if bytes_per == 2 {
                    u16::from_be_bytes(buf[offset..offset + 2].try_into().unwrap()) as f64
                } else {
                    buf[offset] as f64
                };
                offset += bytes_per;
                raw.push(v);
            }
        }
    }
    let scale = 1.0 / maxval as f64;
    let values: Vec<f64> = if channels == 1 {
        raw.iter().map(|v| v * scale).collect()
    } else {
        raw.chunks(3).map(|rgb| (rgb[0] + rgb[1] + rgb[2]) / 3.0 * scale).collect()
    };
    Image::new(width, height, values).map_err(|e| IoError::Invalid(format!("{pathstr}: {e}")))
}
