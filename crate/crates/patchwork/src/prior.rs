//! Autoregressive prior over index grids: a masked-convolution stack in
//! raster-scan order (row-major, top-left first). Logits at a position depend
//! only on strictly earlier tokens; the first layer masks its center (type A),
//! later spatial layers keep it (type B), and the 1x1 head layers are
//! per-position. The final head layer is zero-initialized, so an untrained
//! prior is exactly uniform and its NLL is ln K.

use crate::ensure;
use crate::error::{Error, Result};
use crate::generators::PyramidModel;
use crate::io::image::Image;
use crate::nn::{Adam, Conv2d};
use crate::quantizer::IndexGrid;
use crate::tensor::conv::conv2d;
use crate::tensor::ops::{log_softmax_channels, mul, neg, relu, sum_all};
use crate::tensor::{Arr, Var};
use ndarray::{Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Boolean grid over tokens; `true` marks an observed position that
/// conditional completion must preserve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenMask {
    pub data: Array2<bool>,
}

impl TokenMask {
    pub fn all_unobserved(h: usize, w: usize) -> Self {
        TokenMask {
            data: Array2::from_elem((h, w), false),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorConfig {
    pub k: usize,
    pub hidden: usize,
    /// 3x3 B-masked layers after the first A-masked layer.
    pub layers: usize,
    /// Kernel size of the A-masked first layer (odd). 15 covers the whole
    /// prefix of an 8x8 grid directly.
    pub first_kernel: usize,
    /// Disabled only by the negative-control fixture in tests.
    pub masked: bool,
}

impl PriorConfig {
    pub fn new(k: usize, hidden: usize, layers: usize, first_kernel: usize) -> Self {
        PriorConfig {
            k,
            hidden,
            layers,
            first_kernel,
            masked: true,
        }
    }

    /// A deliberately unmasked network; `causality_check` must reject it.
    pub fn unmasked_fixture(k: usize, hidden: usize) -> Self {
        PriorConfig {
            k,
            hidden,
            layers: 2,
            first_kernel: 3,
            masked: false,
        }
    }
}

enum MaskType {
    /// Excludes the center: the first layer never sees the token it predicts.
    A,
    /// Includes the center (which by then holds only past information).
    B,
}

struct MaskedConv {
    conv: Conv2d,
    mask: Option<Var>,
}

impl MaskedConv {
    fn new(
        rng: &mut impl Rng,
        c_in: usize,
        c_out: usize,
        k: usize,
        ty: MaskType,
        masked: bool,
        std: f64,
    ) -> Self {
        let conv = Conv2d::new(rng, c_in, c_out, k, 1, k / 2, std);
        if !masked {
            return MaskedConv { conv, mask: None };
        }
        let center = k / 2;
        let mut mask = Array4::<f64>::zeros((c_out, c_in, k, k));
        for ki in 0..k {
            for kj in 0..k {
                let allowed = ki < center
                    || (ki == center
                        && (kj < center || (matches!(ty, MaskType::B) && kj == center)));
                if allowed {
                    mask.slice_mut(ndarray::s![.., .., ki, kj]).fill(1.0);
                }
            }
        }
        // keep masked weight entries at zero so fingerprints are stable
        let masked_w = &conv.weight.value() * &mask.clone().into_dyn();
        conv.weight.set_value(masked_w);
        MaskedConv {
            conv,
            mask: Some(Var::constant(mask.into_dyn())),
        }
    }

    fn forward(&self, x: &Var) -> Var {
        match &self.mask {
            Some(m) => {
                let w = mul(&self.conv.weight, m);
                conv2d(x, &w, Some(&self.conv.bias), 1, self.conv.pad)
            }
            None => self.conv.forward(x),
        }
    }
}

/// PixelCNN-style masked-convolution prior over K-way token grids.
pub struct MaskedConvPrior {
    pub cfg: PriorConfig,
    stack: Vec<MaskedConv>,
    head: Vec<Conv2d>,
    /// Version tag of the codebook this prior was trained against.
    pub codebook_tag: u64,
}

impl MaskedConvPrior {
    pub fn new(cfg: PriorConfig, rng: &mut impl Rng) -> Result<Self> {
        ensure!(cfg.k >= 1, "prior needs a positive token count");
        ensure!(
            cfg.first_kernel % 2 == 1 && cfg.first_kernel >= 3,
            "first kernel must be odd and >= 3"
        );
        let std = 0.05;
        let mut stack = Vec::new();
        stack.push(MaskedConv::new(
            rng,
            cfg.k,
            cfg.hidden,
            cfg.first_kernel,
            MaskType::A,
            cfg.masked,
            std,
        ));
        for _ in 0..cfg.layers {
            stack.push(MaskedConv::new(
                rng,
                cfg.hidden,
                cfg.hidden,
                3,
                MaskType::B,
                cfg.masked,
                std,
            ));
        }
        let head = vec![
            Conv2d::new(rng, cfg.hidden, cfg.hidden, 1, 1, 0, std),
            Conv2d::zeros(cfg.hidden, cfg.k, 1, 1, 0),
        ];
        Ok(MaskedConvPrior {
            cfg,
            stack,
            head,
            codebook_tag: 0,
        })
    }

    fn one_hot(&self, grids: &[&IndexGrid]) -> Arr {
        let (h, w) = grids[0].spatial();
        let mut out = Array4::<f64>::zeros((grids.len(), self.cfg.k, h, w));
        for (n, g) in grids.iter().enumerate() {
            for row in 0..h {
                for col in 0..w {
                    out[[n, g.data[[row, col]], row, col]] = 1.0;
                }
            }
        }
        out.into_dyn()
    }

    fn logits_graph(&self, one_hot: &Var) -> Var {
        let mut h = one_hot.clone();
        for layer in &self.stack {
            h = relu(&layer.forward(&h));
        }
        h = relu(&self.head[0].forward(&h));
        self.head[1].forward(&h)
    }

    /// Per-position, per-token logits for a batch of grids: (N, K, h, w).
    pub fn logits(&self, grids: &[&IndexGrid]) -> Result<Arr> {
        ensure!(!grids.is_empty(), "prior forward needs at least one grid");
        let shape = grids[0].spatial();
        ensure!(
            grids.iter().all(|g| g.spatial() == shape),
            "prior forward needs uniform grid shapes"
        );
        ensure!(
            grids
                .iter()
                .all(|g| g.data.iter().all(|&i| i < self.cfg.k)),
            "grid references tokens outside 0..{}",
            self.cfg.k
        );
        let oh = Var::constant(self.one_hot(grids));
        Ok(self.logits_graph(&oh).value())
    }

    /// Mean negative log-likelihood in nats per token.
    pub fn nll(&self, grids: &[&IndexGrid]) -> Result<f64> {
        Ok(self.nll_graph(grids)?.item())
    }

    fn nll_graph(&self, grids: &[&IndexGrid]) -> Result<Var> {
        ensure!(!grids.is_empty(), "nll needs at least one grid");
        let targets = Var::constant(self.one_hot(grids));
        let oh = targets.detach();
        let logp = log_softmax_channels(&self.logits_graph(&oh));
        let picked = mul(&logp, &targets);
        let (h, w) = grids[0].spatial();
        let count = (grids.len() * h * w) as f64;
        Ok(neg(&crate::tensor::ops::mul_scalar(
            &sum_all(&picked),
            1.0 / count,
        )))
    }

    pub fn named_params(&self) -> Vec<(String, Var)> {
        let mut out = Vec::new();
        for (i, l) in self.stack.iter().enumerate() {
            out.push((format!("prior.stack{i}.weight"), l.conv.weight.clone()));
            out.push((format!("prior.stack{i}.bias"), l.conv.bias.clone()));
        }
        for (i, l) in self.head.iter().enumerate() {
            out.push((format!("prior.head{i}.weight"), l.weight.clone()));
            out.push((format!("prior.head{i}.bias"), l.bias.clone()));
        }
        out
    }

    pub fn params(&self) -> Vec<Var> {
        self.named_params().into_iter().map(|(_, v)| v).collect()
    }

    pub fn fingerprint(&self) -> u64 {
        crate::nn::param_fingerprint(&self.named_params())
    }
}

/// Represent side-dataset images as grids of codebook indices through the
/// trained scale-0 encoder and quantizer. Deterministic.
pub fn encode_side_dataset(model: &PyramidModel, side: &[Image]) -> Result<Vec<IndexGrid>> {
    ensure!(!side.is_empty(), "side dataset is empty");
    let entries = model.codebook.entries.value();
    if !entries.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidState(
            "codebook entries are not finite; train scale 0 first".into(),
        ));
    }
    side.iter().map(|s| model.encode_indices(s)).collect()
}

/// Maximize token log-likelihood with Adam over full-batch epochs; returns
/// the final NLL in nats per token.
pub fn train_prior(
    prior: &mut MaskedConvPrior,
    grids: &[IndexGrid],
    epochs: usize,
    lr: f64,
) -> Result<f64> {
    ensure!(!grids.is_empty(), "prior training needs at least one grid");
    let refs: Vec<&IndexGrid> = grids.iter().collect();
    let params = prior.params();
    let mut opt = Adam::new(lr, 0.9, 0.999);
    let mut last = prior.nll(&refs)?;
    for _ in 0..epochs {
        let loss = prior.nll_graph(&refs)?;
        last = loss.item();
        ensure!(last.is_finite(), "prior training diverged (non-finite NLL)");
        let grads = loss.backward();
        opt.step(&params, &grads);
    }
    if epochs > 0 {
        last = prior.nll(&refs)?;
    }
    Ok(last)
}

/// Token selection rule during decoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    /// Softmax with the given temperature (> 0).
    Temperature(f64),
    /// The temperature -> 0 limit; ties break to the lowest index.
    Argmax,
}

impl Sampling {
    fn validate(&self) -> Result<()> {
        if let Sampling::Temperature(t) = self {
            ensure!(*t > 0.0, "temperature must be positive, got {t}");
        }
        Ok(())
    }
}

fn draw(logits: &[f64], sampling: Sampling, rng: &mut ChaCha8Rng) -> usize {
    match sampling {
        Sampling::Argmax => {
            let mut best = 0;
            for (i, v) in logits.iter().enumerate() {
                if *v > logits[best] {
                    best = i;
                }
            }
            best
        }
        Sampling::Temperature(tau) => {
            let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = logits.iter().map(|l| ((l - mx) / tau).exp()).collect();
            let total: f64 = weights.iter().sum();
            let u: f64 = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            for (i, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    return i;
                }
            }
            weights.len() - 1
        }
    }
}

/// Ancestral sampling over a fresh grid.
pub fn sample(
    prior: &MaskedConvPrior,
    shape: (usize, usize),
    sampling: Sampling,
    seed: u64,
) -> Result<IndexGrid> {
    ensure!(shape.0 >= 1 && shape.1 >= 1, "sample shape must be positive");
    let grid = IndexGrid::new(Array2::zeros(shape));
    let mask = TokenMask::all_unobserved(shape.0, shape.1);
    conditional_fill(prior, &grid, &mask, sampling, seed)
}

/// Raster-order completion: observed positions pass through bit-equal,
/// unobserved positions are drawn conditioned on everything already fixed.
pub fn conditional_fill(
    prior: &MaskedConvPrior,
    grid: &IndexGrid,
    mask: &TokenMask,
    sampling: Sampling,
    seed: u64,
) -> Result<IndexGrid> {
    sampling.validate()?;
    let (h, w) = grid.spatial();
    ensure!(
        mask.data.dim() == (h, w),
        "mask shape {:?} does not match grid {:?}",
        mask.data.dim(),
        (h, w)
    );
    ensure!(
        grid.data.iter().all(|&i| i < prior.cfg.k),
        "grid references tokens outside 0..{}",
        prior.cfg.k
    );
    let mut out = grid.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for row in 0..h {
        for col in 0..w {
            if mask.data[[row, col]] {
                continue;
            }
            let logits = prior.logits(&[&out])?;
            let lane: Vec<f64> = (0..prior.cfg.k).map(|k| logits[[0, k, row, col]]).collect();
            out.data[[row, col]] = draw(&lane, sampling, &mut rng);
        }
    }
    Ok(out)
}

/// True iff logits at `position` (raster order) are unchanged, within 1e-6,
/// under every possible perturbation of every later token.
pub fn causality_check(prior: &MaskedConvPrior, grid: &IndexGrid, position: usize) -> Result<bool> {
    let (h, w) = grid.spatial();
    ensure!(position < h * w, "position {position} outside grid");
    let (pr, pc) = (position / w, position % w);
    let base = prior.logits(&[grid])?;
    let mut work = grid.clone();
    for q in position + 1..h * w {
        let (qr, qc) = (q / w, q % w);
        let orig = work.data[[qr, qc]];
        for delta in 1..prior.cfg.k {
            work.data[[qr, qc]] = (orig + delta) % prior.cfg.k;
            let perturbed = prior.logits(&[&work])?;
            for k in 0..prior.cfg.k {
                if (perturbed[[0, k, pr, pc]] - base[[0, k, pr, pc]]).abs() > 1e-6 {
                    return Ok(false);
                }
            }
        }
        work.data[[qr, qc]] = orig;
    }
    Ok(true)
}
