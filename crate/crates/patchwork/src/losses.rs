//! Training objectives: WGAN-GP adversarial, generator-only side adversarial,
//! SSIM, spatial continuity, reconstruction, and the per-scale composites.
//!
//! Expectations over a critic's output are means over the patch map and the
//! batch. The gradient penalty takes each sample's gradient of its own mean
//! score, so a critic must expose that gradient as a differentiable graph
//! (see [`Critic::input_grad`]); finite-difference oracles in the test suite
//! pin this down.

use crate::ensure;
use crate::error::Result;
use crate::tensor::conv::{conv2d, replicate_pad};
use crate::tensor::ops::{
    add, add_scalar, div, mean_all, mul, mul_scalar, neg, reshape, sq, sqrt, sub, sum_per_sample,
};
use crate::tensor::{Arr, Var};
use ndarray::Array4;

/// A patch critic: unbounded per-patch scores, one channel, same spatial
/// shape as the input.
pub trait Critic {
    fn score_map(&self, x: &Var) -> Var;

    /// For each sample n, the gradient of `mean(score_map(x)[n])` with respect
    /// to `x[n]`, expressed with forward ops so a penalty on the gradient norm
    /// can itself be differentiated. Shape equals the input's.
    fn input_grad(&self, x: &Var) -> Var;
}

/// Per-batch interpolation state for the gradient penalty.
pub struct GradPenaltyContext {
    pub real: Arr,
    pub fake: Arr,
    pub eps: Vec<f64>,
    pub lambda_gp: f64,
}

impl GradPenaltyContext {
    pub fn new(real: Arr, fake: Arr, eps: Vec<f64>, lambda_gp: f64) -> Result<Self> {
        ensure!(
            real.shape() == fake.shape(),
            "gradient penalty: real/fake shape mismatch"
        );
        ensure!(real.ndim() == 4, "gradient penalty expects (N,C,H,W)");
        ensure!(
            eps.len() == real.shape()[0],
            "gradient penalty: one epsilon per sample"
        );
        ensure!(
            eps.iter().all(|e| (0.0..=1.0).contains(e)),
            "gradient penalty: epsilon must lie in [0, 1]"
        );
        ensure!(lambda_gp >= 0.0, "lambda_gp must be non-negative");
        Ok(GradPenaltyContext {
            real,
            fake,
            eps,
            lambda_gp,
        })
    }

    /// x_bar = eps * real + (1 - eps) * fake, per sample.
    pub fn interpolates(&self) -> Arr {
        let mut out = self.fake.clone();
        for (n, mut sample) in out.outer_iter_mut().enumerate() {
            let e = self.eps[n];
            let real = self.real.index_axis(ndarray::Axis(0), n);
            sample.zip_mut_with(&real, |f, &r| *f = e * r + (1.0 - e) * *f);
        }
        out
    }
}

/// Critic objective: `-E[D(real)] + E[D(fake)] + lambda * E[(||grad|| - 1)^2]`.
/// Real and fake enter as constants; only critic parameters receive gradient.
pub fn adv_critic_loss(
    critic: &impl Critic,
    real: &Arr,
    fake: &Arr,
    lambda_gp: f64,
    eps: &[f64],
) -> Result<Var> {
    let ctx = GradPenaltyContext::new(real.clone(), fake.clone(), eps.to_vec(), lambda_gp)?;
    let x_bar = Var::constant(ctx.interpolates());
    let score_real = mean_all(&critic.score_map(&Var::constant(real.clone())));
    let score_fake = mean_all(&critic.score_map(&Var::constant(fake.clone())));
    let grad = critic.input_grad(&x_bar);
    let norm = sqrt(&sum_per_sample(&sq(&grad)));
    let penalty = mean_all(&sq(&add_scalar(&norm, -1.0)));
    Ok(add(
        &add(&neg(&score_real), &score_fake),
        &mul_scalar(&penalty, lambda_gp),
    ))
}

/// Generator objective against a frozen critic: `-E[D(fake)]`.
pub fn adv_generator_loss(critic: &impl Critic, fake: &Var) -> Var {
    neg(&mean_all(&critic.score_map(fake)))
}

/// Side-dataset adversarial term, applied to the generator only. The critic
/// never trains on side-derived images: it is frozen here, and
/// [`adv_critic_loss`] takes no side input in the training loop.
pub fn adv_ref_loss(critic: &impl Critic, side_fake: &Var) -> Var {
    adv_generator_loss(critic, side_fake)
}

// ----------------------------------------------------------------------- ssim

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn gaussian_window() -> Arr {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut g1 = [0.0; SSIM_WINDOW];
    let mut sum = 0.0;
    for (i, v) in g1.iter_mut().enumerate() {
        let x = i as f64 - half;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in g1.iter_mut() {
        *v /= sum;
    }
    let mut w = Array4::<f64>::zeros((1, 1, SSIM_WINDOW, SSIM_WINDOW));
    for i in 0..SSIM_WINDOW {
        for j in 0..SSIM_WINDOW {
            w[[0, 0, i, j]] = g1[i] * g1[j];
        }
    }
    w.into_dyn()
}

/// Gaussian-window blur treating channels as batch entries; replicate padding
/// keeps constants exactly constant.
fn blur(x: &Var, window: &Var) -> Var {
    let shape = x.shape();
    let (n, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
    let flat = reshape(x, &[n * c, 1, h, w]);
    let padded = replicate_pad(&flat, SSIM_WINDOW / 2);
    let out = conv2d(&padded, window, None, 1, 0);
    reshape(&out, &[n, c, h, w])
}

/// Mean SSIM over the map, channels averaged; inputs in [-1, 1] are remapped
/// to [0, 1] so L = 1.
pub fn ssim_mean(a: &Var, b: &Var) -> Result<Var> {
    ensure!(a.shape() == b.shape(), "ssim: shape mismatch");
    ensure!(a.shape().len() == 4, "ssim expects (N,C,H,W)");
    let window = Var::constant(gaussian_window());
    let u1 = add_scalar(&mul_scalar(a, 0.5), 0.5);
    let u2 = add_scalar(&mul_scalar(b, 0.5), 0.5);
    let mu1 = blur(&u1, &window);
    let mu2 = blur(&u2, &window);
    let mu1_sq = sq(&mu1);
    let mu2_sq = sq(&mu2);
    let mu12 = mul(&mu1, &mu2);
    let sigma1 = sub(&blur(&sq(&u1), &window), &mu1_sq);
    let sigma2 = sub(&blur(&sq(&u2), &window), &mu2_sq);
    let sigma12 = sub(&blur(&mul(&u1, &u2), &window), &mu12);
    let num = mul(
        &add_scalar(&mul_scalar(&mu12, 2.0), SSIM_C1),
        &add_scalar(&mul_scalar(&sigma12, 2.0), SSIM_C2),
    );
    let den = mul(
        &add_scalar(&add(&mu1_sq, &mu2_sq), SSIM_C1),
        &add_scalar(&add(&sigma1, &sigma2), SSIM_C2),
    );
    Ok(mean_all(&div(&num, &den)))
}

/// `1 - mean SSIM`; zero exactly for identical inputs.
pub fn ssim_loss(a: &Var, b: &Var) -> Result<Var> {
    let m = ssim_mean(a, b)?;
    Ok(add_scalar(&neg(&m), 1.0))
}

// ----------------------------------------------------------- continuity loss

/// Fused adjacent-difference penalty. Accumulating in the written loop order
/// keeps the value reproducible against a plain double-loop evaluation.
struct ContinuityOp;

impl crate::tensor::Op for ContinuityOp {
    fn backward(&self, node: &crate::tensor::Node, g: &Arr, grads: &mut crate::tensor::Grads) {
        let p = &node.parents()[0];
        if !p.needs_grad() {
            return;
        }
        let gs = g[[]];
        let pv = p.value();
        let nd = pv.ndim();
        let (h, w) = (pv.shape()[nd - 2], pv.shape()[nd - 1]);
        let lead: usize = pv.shape()[..nd - 2].iter().product();
        let m3 = pv
            .view()
            .into_shape_with_order((lead, h, w))
            .expect("contiguous grid");
        let mut gx = ndarray::Array3::<f64>::zeros((lead, h, w));
        for l in 0..lead {
            for j in 0..h - 1 {
                for i in 0..w - 1 {
                    let s1 = (m3[[l, j, i + 1]] - m3[[l, j, i]]).signum_or_zero();
                    gx[[l, j, i + 1]] += gs * s1;
                    gx[[l, j, i]] -= gs * s1;
                    let s2 = (m3[[l, j + 1, i]] - m3[[l, j, i]]).signum_or_zero();
                    gx[[l, j + 1, i]] += gs * s2;
                    gx[[l, j, i]] -= gs * s2;
                }
            }
        }
        let gx = gx
            .into_shape_with_order(pv.raw_dim())
            .expect("reshape back");
        grads.accum(p, gx);
    }
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self == 0.0 {
            0.0
        } else {
            self.signum()
        }
    }
}

/// L1 penalty on adjacent-cell differences of a latent grid, with the
/// summation bounds running over the (W-1) x (H-1) top-left subgrid:
/// horizontal differences skip the last row, vertical differences skip the
/// last column. Channels and any leading axes are summed.
pub fn continuity_loss(m: &Var) -> Result<Var> {
    let shape = m.shape();
    ensure!(
        shape.len() >= 2,
        "continuity: need at least a 2-d grid, got {:?}",
        shape
    );
    let nd = shape.len();
    let (h, w) = (shape[nd - 2], shape[nd - 1]);
    ensure!(
        h >= 2 && w >= 2,
        "continuity: grid must be at least 2x2, got {h}x{w}"
    );
    let v = m.value();
    let lead: usize = shape[..nd - 2].iter().product();
    let m3 = v
        .view()
        .into_shape_with_order((lead, h, w))
        .expect("contiguous grid");
    let mut total = 0.0;
    for l in 0..lead {
        for j in 0..h - 1 {
            for i in 0..w - 1 {
                total += (m3[[l, j, i + 1]] - m3[[l, j, i]]).abs();
                total += (m3[[l, j + 1, i]] - m3[[l, j, i]]).abs();
            }
        }
    }
    Ok(Var::from_op(
        ndarray::arr0(total).into_dyn(),
        vec![m.clone()],
        Box::new(ContinuityOp),
    ))
}

/// Mean squared error.
pub fn reconstruction_loss(x: &Var, xhat: &Var) -> Result<Var> {
    ensure!(x.shape() == xhat.shape(), "reconstruction: shape mismatch");
    Ok(mean_all(&sq(&sub(x, xhat))))
}

// ------------------------------------------------------------------ weights

/// Per-term weights of the composite objectives; the printed objectives are
/// unweighted sums, so everything defaults to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub adv: f64,
    pub adv_ref: f64,
    pub ssim: f64,
    pub rec: f64,
    pub vq: f64,
    pub cont: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            adv: 1.0,
            adv_ref: 1.0,
            ssim: 1.0,
            rec: 1.0,
            vq: 1.0,
            cont: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.adv, self.adv_ref, self.ssim, self.rec, self.vq, self.cont];
        ensure!(
            all.iter().all(|w| w.is_finite() && *w >= 0.0),
            "loss weights must be finite and non-negative"
        );
        Ok(())
    }
}

/// Scale-0 generator objective: adversarial + VQ + side adversarial + SSIM +
/// continuity (the continuity component is the caller-computed sum over both
/// the training and the side encoding).
pub fn scale_0_loss(
    adv: &Var,
    vq: &Var,
    adv_ref: &Var,
    ssim: &Var,
    continuity: &Var,
    w: &LossWeights,
) -> Var {
    let mut total = mul_scalar(adv, w.adv);
    total = add(&total, &mul_scalar(vq, w.vq));
    total = add(&total, &mul_scalar(adv_ref, w.adv_ref));
    total = add(&total, &mul_scalar(ssim, w.ssim));
    add(&total, &mul_scalar(continuity, w.cont))
}

/// Residual-scale generator objective: adversarial + side adversarial + SSIM
/// + reconstruction.
pub fn scale_t_loss(adv: &Var, adv_ref: &Var, ssim: &Var, rec: &Var, w: &LossWeights) -> Var {
    let mut total = mul_scalar(adv, w.adv);
    total = add(&total, &mul_scalar(adv_ref, w.adv_ref));
    total = add(&total, &mul_scalar(ssim, w.ssim));
    add(&total, &mul_scalar(rec, w.rec))
}
