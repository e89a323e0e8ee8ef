//! Quantitative evaluation: the pixelwise-diversity measure over a sample
//! batch plus the reconstruction metrics (PSNR, SSIM) the acceptance tests
//! rely on.

use crate::ensure;
use crate::error::Result;
use crate::generators::to_batch;
use crate::io::image::Image;
use crate::losses::ssim_mean;
use crate::tensor::Var;

/// A uniform-shape batch of images in [0, 1].
pub struct SampleBatch {
    pub images: Vec<Image>,
}

impl SampleBatch {
    pub fn new(images: Vec<Image>) -> Result<Self> {
        ensure!(images.len() >= 2, "diversity needs at least two images");
        let dim = images[0].dim();
        ensure!(
            images.iter().all(|i| i.dim() == dim),
            "diversity needs uniform image shapes"
        );
        Ok(SampleBatch { images })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StdKind {
    /// Divide by n (the default reading of "standard deviation over the
    /// generated images").
    Population,
    /// Divide by n - 1.
    Sample,
}

/// Per pixel location and channel, the standard deviation across the batch;
/// then the mean over all locations and channels.
pub fn diversity(batch: &SampleBatch) -> f64 {
    diversity_kind(batch, StdKind::Population)
}

pub fn diversity_kind(batch: &SampleBatch, kind: StdKind) -> f64 {
    let n = batch.len() as f64;
    let denom = match kind {
        StdKind::Population => n,
        StdKind::Sample => n - 1.0,
    };
    let dim = batch.images[0].dim();
    let cells = dim.0 * dim.1 * dim.2;
    let mut total = 0.0;
    for c in 0..dim.0 {
        for y in 0..dim.1 {
            for x in 0..dim.2 {
                // center on the first sample so identical batches come out
                // exactly zero (variance is shift-invariant)
                let base = batch.images[0][[c, y, x]];
                let mut mean = 0.0;
                for img in &batch.images {
                    mean += img[[c, y, x]] - base;
                }
                mean /= n;
                let mut var = 0.0;
                for img in &batch.images {
                    let d = img[[c, y, x]] - base - mean;
                    var += d * d;
                }
                total += (var / denom).sqrt();
            }
        }
    }
    total / cells as f64
}

/// Peak signal-to-noise ratio of images in [0, 1]; an exact match is
/// reported as a sentinel rather than an infinite dB value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Exact,
    Db(f64),
}

impl std::fmt::Display for Psnr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Psnr::Exact => write!(f, "exact"),
            Psnr::Db(v) => write!(f, "{v:.3} dB"),
        }
    }
}

impl Psnr {
    /// dB value for comparisons, treating an exact match as +infinity.
    pub fn db(&self) -> f64 {
        match self {
            Psnr::Exact => f64::INFINITY,
            Psnr::Db(v) => *v,
        }
    }
}

pub fn psnr(a: &Image, b: &Image) -> Result<Psnr> {
    ensure!(a.dim() == b.dim(), "psnr: shape mismatch");
    let mut mse = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        mse += d * d;
    }
    mse /= a.len() as f64;
    if mse == 0.0 {
        Ok(Psnr::Exact)
    } else {
        Ok(Psnr::Db(10.0 * (1.0 / mse).log10()))
    }
}

/// Mean SSIM in [-1, 1] for images in [-1, 1]; shares the Gaussian-window
/// kernel with the SSIM loss, so `ssim_metric = 1 - ssim_loss`.
pub fn ssim_metric(a: &Image, b: &Image) -> Result<f64> {
    ensure!(a.dim() == b.dim(), "ssim: shape mismatch");
    let av = Var::constant(to_batch(a));
    let bv = Var::constant(to_batch(b));
    Ok(ssim_mean(&av, &bv)?.item())
}
