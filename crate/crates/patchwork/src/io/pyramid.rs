//! Multi-resolution schedule and pyramid construction.
//!
//! Level 0 is the coarsest scale and level T the source resolution. The
//! finest scale anchors the schedule: `H_t = round(H_T * rho^(T - t))`, with
//! T the largest integer keeping `min(H_T, W_T) * rho^T >= min_size`.

use crate::ensure;
use crate::error::Result;
use crate::io::image::{resize_area, Image};

#[derive(Debug, Clone)]
pub struct ImagePyramid {
    /// Coarse to fine; `levels[T]` equals the source image.
    pub levels: Vec<Image>,
    pub scale_factor: f64,
    pub min_size: usize,
}

impl ImagePyramid {
    pub fn t_max(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, t: usize) -> &Image {
        &self.levels[t]
    }
}

/// Level sizes, coarse to fine.
pub fn schedule(
    h: usize,
    w: usize,
    rho: f64,
    min_size: usize,
) -> Result<Vec<(usize, usize)>> {
    ensure!(rho > 0.0 && rho < 1.0, "scale factor must lie in (0, 1), got {rho}");
    ensure!(min_size >= 8, "min_size must be at least 8, got {min_size}");
    ensure!(
        h.min(w) >= min_size,
        "image {h}x{w} is smaller than min_size {min_size}"
    );
    let base = h.min(w) as f64;
    let mut t = 0usize;
    while base * rho.powi(t as i32 + 1) >= min_size as f64 {
        t += 1;
    }
    let mut sizes = Vec::with_capacity(t + 1);
    for level in 0..=t {
        let f = rho.powi((t - level) as i32);
        sizes.push((
            (h as f64 * f).round() as usize,
            (w as f64 * f).round() as usize,
        ));
    }
    Ok(sizes)
}

/// Render the image at every level of its schedule with area averaging.
/// The finest level is the source image itself.
pub fn build_pyramid(x: &Image, rho: f64, min_size: usize) -> Result<ImagePyramid> {
    let (_, h, w) = x.dim();
    let sizes = schedule(h, w, rho, min_size)?;
    let mut levels = Vec::with_capacity(sizes.len());
    for &(th, tw) in &sizes {
        levels.push(resize_area(x, (th, tw))?);
    }
    Ok(ImagePyramid {
        levels,
        scale_factor: rho,
        min_size,
    })
}

/// Render an arbitrary image onto an existing schedule (side images follow
/// the training images' schedule so shapes line up at every scale).
pub fn pyramid_on_schedule(x: &Image, sizes: &[(usize, usize)]) -> Result<Vec<Image>> {
    let mut levels = Vec::with_capacity(sizes.len());
    for &(th, tw) in sizes {
        levels.push(resize_area(x, (th, tw))?);
    }
    Ok(levels)
}
