//! 16-bit grayscale PNG image IO; color inputs load by luminance average.

use std::path::Path;

use crate::geom::Image;

use super::IoError;

pub fn save_png(img: &Image, path: &Path) -> Result<(), IoError> {
    let mut out = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(
        img.width() as u32,
        img.height() as u32,
    );
    for (x, y, px) in out.enumerate_pixels_mut() {
        let v = img.get(x as usize, y as usize).clamp(0.0, 1.0);
        *px = image::Luma([(v * 65535.0).round() as u16]);
    }
    out.save(path).map_err(|e| IoError::Invalid(format!("{}: {e}", path.display())))
}

pub fn load_png(path: &Path) -> Result<Image, IoError> {
    let dynimg = image::open(path)
        .map_err(|e| IoError::Invalid(format!("{}: {e}", path.display())))?;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    let values: Vec<f64> = match dynimg {
        image::DynamicImage::ImageLuma8(g) => {
            g.pixels().map(|p| p.0[0] as f64 / 255.0).collect()
        }
        image::DynamicImage::ImageLuma16(g) => {
            g.pixels().map(|p| p.0[0] as f64 / 65535.0).collect()
        }
        // Color inputs: plain channel average.
        other => other
            .into_rgb16()
            .pixels()
            .map(|p| (p.0[0] as f64 + p.0[1] as f64 + p.0[2] as f64) / (3.0 * 65535.0))
            .collect(),
    };
    Image::new(w, h, values).map_err(|e| IoError::Invalid(format!("{}: {e}", path.display())))
}
