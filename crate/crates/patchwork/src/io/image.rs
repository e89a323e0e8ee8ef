//! PNG/JPEG decoding and encoding plus deterministic area resampling.
//!
//! Images are `(3, H, W)` f64 arrays in [-1, 1]. 8-bit values map affinely:
//! 0 -> -1.0, 255 -> 1.0.

use crate::ensure;
use crate::error::{Error, Result};
use ndarray::Array3;
use std::path::Path;

pub type Image = Array3<f64>;

pub fn load_image(path: &Path) -> Result<Image> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let color = img.color();
    if color != image::ColorType::Rgb8 && color != image::ColorType::Rgba8 {
        eprintln!(
            "warning: {} is {:?}, converting to RGB",
            path.display(),
            color
        );
    }
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    let mut out = Array3::<f64>::zeros((3, h as usize, w as usize));
    for (x, y, p) in rgb.enumerate_pixels() {
        for c in 0..3 {
            out[[c, y as usize, x as usize]] = 2.0 * (p[c] as f64 / 255.0) - 1.0;
        }
    }
    Ok(out)
}

/// Write as 8-bit RGB; values are clamped to [-1, 1] first. The format
/// follows the file extension (PNG in every pipeline default).
pub fn save_image(path: &Path, img: &Image) -> Result<()> {
    let (c, h, w) = img.dim();
    ensure!(c == 3, "save_image expects 3 channels, got {c}");
    let mut buf = image::RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let px = [0, 1, 2].map(|ci| {
                let v = img[[ci, y, x]].clamp(-1.0, 1.0);
                ((v + 1.0) * 0.5 * 255.0).round() as u8
            });
            buf.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    buf.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn to_unit_range(img: &Image) -> Image {
    img.mapv(|v| (v + 1.0) * 0.5)
}

/// Per-axis fractional box-filter weights: output cell `o` averages the
/// input interval [o*scale, (o+1)*scale), normalized so constants survive.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    let mut out = Vec::with_capacity(dst);
    for o in 0..dst {
        let start = o as f64 * scale;
        let end = (o as f64 + 1.0) * scale;
        let lo = start.floor() as usize;
        let hi = (end.ceil() as usize).min(src);
        let mut cell = Vec::new();
        let mut total = 0.0;
        for i in lo..hi.max(lo + 1).min(src) {
            let overlap = (end.min((i + 1) as f64) - start.max(i as f64)).max(0.0);
            if overlap > 0.0 {
                cell.push((i, overlap));
                total += overlap;
            }
        }
        if cell.is_empty() {
            cell.push((lo.min(src - 1), 1.0));
            total = 1.0;
        }
        for (_, w) in cell.iter_mut() {
            *w /= total;
        }
        out.push(cell);
    }
    out
}

/// Anti-aliased resize by fractional area averaging, separable over rows and
/// columns. Same-size targets return the input unchanged.
pub fn resize_area(img: &Image, target: (usize, usize)) -> Result<Image> {
    let (c, h, w) = img.dim();
    let (th, tw) = target;
    ensure!(th >= 1 && tw >= 1, "resize target must be positive");
    if th == h && tw == w {
        return Ok(img.clone());
    }
    let wy = area_weights(h, th);
    let wx = area_weights(w, tw);
    let mut rows = Array3::<f64>::zeros((c, th, w));
    for ci in 0..c {
        for (o, cell) in wy.iter().enumerate() {
            for x in 0..w {
                let mut acc = 0.0;
                for &(i, wgt) in cell {
                    acc += wgt * img[[ci, i, x]];
                }
                rows[[ci, o, x]] = acc;
            }
        }
    }
    let mut out = Array3::<f64>::zeros((c, th, tw));
    for ci in 0..c {
        for y in 0..th {
            for (o, cell) in wx.iter().enumerate() {
                let mut acc = 0.0;
                for &(i, wgt) in cell {
                    acc += wgt * rows[[ci, y, i]];
                }
                out[[ci, y, o]] = acc;
            }
        }
    }
    Ok(out)
}
