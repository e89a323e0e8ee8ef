//! Learnable codebook with positional-coordinate augmentation,
//! nearest-neighbor quantization, the straight-through gradient contract and
//! the VQ objective.
//!
//! Codes live in an augmented space: `d_aug = n_z + 2 * lambda_pos`, where the
//! trailing slots hold the cell's normalized (i', j') coordinates repeated
//! `lambda_pos` times. Nearest-neighbor search runs over the full augmented
//! vector, so codebook entries carry their preferred locations.

use crate::ensure;
use crate::error::Result;
use crate::nn::uniform_init;
use crate::tensor::ops::{add, mean_all, mul_scalar, sq, sub};
use crate::tensor::{Arr, Var};
use ndarray::{Array2, Array3, Array4, Axis};
use rand::Rng;

/// An h x w grid of real vectors, stored channels-first: `(channels, h, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid {
    pub data: Array3<f64>,
}

impl LatentGrid {
    pub fn new(data: Array3<f64>) -> Self {
        LatentGrid { data }
    }

    pub fn channels(&self) -> usize {
        self.data.dim().0
    }

    pub fn spatial(&self) -> (usize, usize) {
        let (_, h, w) = self.data.dim();
        (h, w)
    }
}

/// An h x w grid of codebook indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexGrid {
    pub data: Array2<usize>,
}

impl IndexGrid {
    pub fn new(data: Array2<usize>) -> Self {
        IndexGrid { data }
    }

    pub fn spatial(&self) -> (usize, usize) {
        self.data.dim()
    }
}

/// K learnable embedding vectors in the augmented dimension. The entries are
/// a parameter leaf so they train through the VQ objective and persist in
/// checkpoints under a stable name.
pub struct Codebook {
    pub entries: Var,
    pub n_z: usize,
    pub lambda_pos: usize,
}

impl Codebook {
    /// Content slots start uniform in [-1/K, 1/K]; positional slots uniform in
    /// [-1, 1] to cover the coordinate range.
    pub fn init(rng: &mut impl Rng, k: usize, n_z: usize, lambda_pos: usize) -> Result<Self> {
        ensure!(k >= 1, "codebook needs at least one entry, got K={k}");
        ensure!(n_z >= 1, "code dimension must be positive, got n_z={n_z}");
        ensure!(
            lambda_pos >= 1,
            "positional replication count must be >= 1, got {lambda_pos}"
        );
        let d_aug = n_z + 2 * lambda_pos;
        let mut entries = Array2::<f64>::zeros((k, d_aug));
        let bound = 1.0 / k as f64;
        for mut row in entries.rows_mut() {
            let content = uniform_init(rng, &[n_z], -bound, bound);
            let pos = uniform_init(rng, &[2 * lambda_pos], -1.0, 1.0);
            for (i, v) in content.iter().enumerate() {
                row[i] = *v;
            }
            for (i, v) in pos.iter().enumerate() {
                row[n_z + i] = *v;
            }
        }
        Ok(Codebook {
            entries: Var::leaf(entries.into_dyn()),
            n_z,
            lambda_pos,
        })
    }

    pub fn from_entries(entries: Array2<f64>, n_z: usize, lambda_pos: usize) -> Result<Self> {
        ensure!(entries.nrows() >= 1, "codebook needs at least one entry");
        ensure!(
            entries.ncols() == n_z + 2 * lambda_pos,
            "codebook entry dimension {} does not match n_z={n_z} + 2*lambda_pos={}",
            entries.ncols(),
            2 * lambda_pos
        );
        ensure!(
            entries.iter().all(|v| v.is_finite()),
            "codebook entries must be finite"
        );
        Ok(Codebook {
            entries: Var::leaf(entries.into_dyn()),
            n_z,
            lambda_pos,
        })
    }

    pub fn k(&self) -> usize {
        self.entries.shape()[0]
    }

    pub fn d_aug(&self) -> usize {
        self.n_z + 2 * self.lambda_pos
    }

    pub fn entries_arr(&self) -> Array2<f64> {
        self.entries
            .value()
            .into_dimensionality()
            .expect("codebook is 2-d")
    }

    /// Bit-level tag of the entry values; a trained prior records the tag of
    /// the codebook it was trained against.
    pub fn version_tag(&self) -> u64 {
        let v = self.entries.value();
        let mut h: u64 = 0xcbf29ce484222325;
        crate::util::hash_f64s(&mut h, v.as_slice().expect("contiguous codebook"));
        h
    }
}

/// Normalized cell coordinates, one (i', j') pair repeated `lambda_pos` times
/// per cell: i' = 2i/(w-1) - 1 over columns, j' = 2j/(h-1) - 1 over rows.
/// Degenerate single-row or single-column grids use the center value 0.
pub fn positional_encode(h: usize, w: usize, lambda_pos: usize) -> Result<LatentGrid> {
    ensure!(h >= 1 && w >= 1, "grid dimensions must be positive, got {h}x{w}");
    ensure!(lambda_pos >= 1, "lambda_pos must be >= 1, got {lambda_pos}");
    let mut data = Array3::<f64>::zeros((2 * lambda_pos, h, w));
    for row in 0..h {
        let j_prime = if h == 1 {
            0.0
        } else {
            2.0 * row as f64 / (h as f64 - 1.0) - 1.0
        };
        for col in 0..w {
            let i_prime = if w == 1 {
                0.0
            } else {
                2.0 * col as f64 / (w as f64 - 1.0) - 1.0
            };
            for m in 0..lambda_pos {
                data[[2 * m, row, col]] = i_prime;
                data[[2 * m + 1, row, col]] = j_prime;
            }
        }
    }
    Ok(LatentGrid::new(data))
}

/// Per-cell concatenation: content slots first, positional slots last.
pub fn augment(content: &LatentGrid, pos: &LatentGrid) -> Result<LatentGrid> {
    ensure!(
        content.spatial() == pos.spatial(),
        "augment: spatial shapes differ ({:?} vs {:?})",
        content.spatial(),
        pos.spatial()
    );
    ensure!(
        pos.channels() >= 2 && pos.channels() % 2 == 0,
        "augment: positional grid must carry at least one (i', j') pair"
    );
    let stacked = ndarray::concatenate(Axis(0), &[content.data.view(), pos.data.view()])
        .expect("augment concat");
    Ok(LatentGrid::new(stacked))
}

fn nearest_entry(cell: &[f64], entries: &Array2<f64>) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (k, row) in entries.rows().into_iter().enumerate() {
        let mut d = 0.0;
        for (a, b) in cell.iter().zip(row.iter()) {
            let diff = a - b;
            d += diff * diff;
        }
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

/// Snap every cell to its closest codebook entry (squared Euclidean distance
/// over the full augmented vector; ties break to the lowest index). The
/// returned grid holds the exact selected entries.
pub fn quantize(z: &LatentGrid, cb: &Codebook) -> Result<(IndexGrid, LatentGrid)> {
    ensure!(
        z.channels() == cb.d_aug(),
        "quantize: grid dimension {} does not match codebook dimension {}",
        z.channels(),
        cb.d_aug()
    );
    let entries = cb.entries_arr();
    let (c, h, w) = z.data.dim();
    let mut idx = Array2::<usize>::zeros((h, w));
    let mut out = Array3::<f64>::zeros((c, h, w));
    let mut cell = vec![0.0; c];
    for row in 0..h {
        for col in 0..w {
            for ci in 0..c {
                cell[ci] = z.data[[ci, row, col]];
            }
            let k = nearest_entry(&cell, &entries);
            idx[[row, col]] = k;
            for ci in 0..c {
                out[[ci, row, col]] = entries[[k, ci]];
            }
        }
    }
    Ok((IndexGrid::new(idx), LatentGrid::new(out)))
}

/// Batched index extraction for training: (N, d_aug, h, w) -> (N, h, w).
pub fn quantize_batch(z: &Array4<f64>, cb: &Codebook) -> Result<Array3<usize>> {
    let (n, c, h, w) = z.dim();
    ensure!(
        c == cb.d_aug(),
        "quantize: grid dimension {c} does not match codebook dimension {}",
        cb.d_aug()
    );
    let entries = cb.entries_arr();
    let mut idx = Array3::<usize>::zeros((n, h, w));
    let mut cell = vec![0.0; c];
    for ni in 0..n {
        for row in 0..h {
            for col in 0..w {
                for ci in 0..c {
                    cell[ci] = z[[ni, ci, row, col]];
                }
                idx[[ni, row, col]] = nearest_entry(&cell, &entries);
            }
        }
    }
    Ok(idx)
}

/// Forward takes the quantized values; the gradient of any downstream scalar
/// with respect to `z` equals its gradient with respect to the output.
pub fn straight_through(z: &Var, z_q: &Arr) -> Result<Var> {
    ensure!(
        z.shape() == z_q.shape().to_vec(),
        "straight_through: shape mismatch ({:?} vs {:?})",
        z.shape(),
        z_q.shape()
    );
    Ok(crate::tensor::ops::straight_through(z, z_q))
}

/// The three-term VQ objective with mean reduction per term:
/// `||x0 - xhat||^2 + ||sg(z_e) - z_q||^2 + beta * ||z_e - sg(z_q)||^2`.
pub fn vq_loss(x0: &Var, xhat: &Var, z_e: &Var, z_q: &Var, beta: f64) -> Result<Var> {
    ensure!(x0.shape() == xhat.shape(), "vq_loss: image shape mismatch");
    ensure!(z_e.shape() == z_q.shape(), "vq_loss: latent shape mismatch");
    ensure!(beta >= 0.0, "vq_loss: beta must be non-negative");
    let rec = mean_all(&sq(&sub(x0, xhat)));
    let codebook_term = mean_all(&sq(&sub(&z_e.detach(), z_q)));
    let commit = mul_scalar(&mean_all(&sq(&sub(z_e, &z_q.detach()))), beta);
    Ok(add(&add(&rec, &codebook_term), &commit))
}
