//! The scale-0 encoder/decoder pair and the residual fully convolutional
//! generator/critic pairs for the finer scales.
//!
//! Everything is fully convolutional. The encoder downsamples by 4 (two
//! stride-2 stages), so a scale-0 image of H x W yields a ceil(H/4) x
//! ceil(W/4) code grid. The decoder upsamples back to an explicit target so
//! odd scale-0 resolutions reconstruct at exactly their own size. Residual
//! generators start at the identity: their output layer is zero-initialized.

use crate::ensure;
use crate::error::Result;
use crate::io::config::TrainConfig;
use crate::io::image::Image;
use crate::losses::Critic;
use crate::nn::Conv2d;
use crate::quantizer::{
    augment, positional_encode, quantize, quantize_batch, Codebook, IndexGrid, LatentGrid,
};
use crate::tensor::conv::{conv2d_input_grad, resize_bilinear, resize_bilinear_arr};
use crate::tensor::ops::{add, concat, leaky_relu, leaky_relu_mask, tanh};
use crate::tensor::{Arr, Var};
use ndarray::{Array2, Array3, Array4, Axis, IxDyn};
use rand::Rng;

const LRELU_SLOPE: f64 = 0.2;
const INIT_STD: f64 = 0.02;
/// Two stride-2 stages in the encoder.
pub const ENCODER_FACTOR: usize = 4;
/// Five stacked 3x3 convolutions at the residual scales.
pub const RECEPTIVE_FIELD: usize = 11;

/// Resolution and architecture bookkeeping for one scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaleSpec {
    pub t: usize,
    pub height: usize,
    pub width: usize,
    pub receptive_field: usize,
    pub channels: usize,
}

pub(crate) fn to_batch(img: &Image) -> Arr {
    let (c, h, w) = img.dim();
    img.clone()
        .into_shape_with_order(IxDyn(&[1, c, h, w]))
        .expect("batch reshape")
}

pub(crate) fn from_batch(batch: &Arr) -> Image {
    let s = batch.shape().to_vec();
    batch
        .clone()
        .into_shape_with_order((s[1], s[2], s[3]))
        .expect("unbatch reshape")
}

/// Corner-aligned bilinear upsampling; same-size targets are the identity.
pub fn upsample(x: &Image, target: (usize, usize)) -> Result<Image> {
    let (_, h, w) = x.dim();
    ensure!(
        target.0 >= h && target.1 >= w,
        "upsample target {target:?} smaller than source {h}x{w}"
    );
    let b = to_batch(x);
    let out = resize_bilinear_arr(
        &b.view().into_dimensionality().expect("4-d"),
        target.0,
        target.1,
    );
    Ok(from_batch(&out.into_dyn()))
}

// ------------------------------------------------------------------ encoder

pub struct Encoder {
    convs: Vec<Conv2d>,
}

impl Encoder {
    fn new(rng: &mut impl Rng, n_z: usize, channels: usize) -> Self {
        let c = channels;
        Encoder {
            convs: vec![
                Conv2d::new(rng, 3, c, 3, 1, 1, INIT_STD),
                Conv2d::new(rng, c, c, 3, 2, 1, INIT_STD),
                Conv2d::new(rng, c, c, 3, 2, 1, INIT_STD),
                Conv2d::new(rng, c, n_z, 3, 1, 1, INIT_STD),
            ],
        }
    }

    /// (N, 3, H, W) -> (N, n_z, ceil(H/4), ceil(W/4)).
    pub fn forward(&self, x: &Var) -> Var {
        let mut h = x.clone();
        for (i, conv) in self.convs.iter().enumerate() {
            h = conv.forward(&h);
            if i + 1 < self.convs.len() {
                h = leaky_relu(&h, LRELU_SLOPE);
            }
        }
        h
    }

    pub fn latent_shape(h: usize, w: usize) -> (usize, usize) {
        (h.div_ceil(ENCODER_FACTOR), w.div_ceil(ENCODER_FACTOR))
    }

    fn params(&self) -> Vec<Var> {
        self.convs.iter().flat_map(|c| c.params()).collect()
    }
}

// ------------------------------------------------------------------ decoder

pub struct Decoder {
    convs: Vec<Conv2d>,
}

impl Decoder {
    fn new(rng: &mut impl Rng, d_aug: usize, channels: usize) -> Self {
        let c = channels;
        Decoder {
            convs: vec![
                Conv2d::new(rng, d_aug, c, 3, 1, 1, INIT_STD),
                Conv2d::new(rng, c, c, 3, 1, 1, INIT_STD),
                Conv2d::new(rng, c, c, 3, 1, 1, INIT_STD),
                Conv2d::new(rng, c, 3, 3, 1, 1, INIT_STD),
            ],
        }
    }

    /// Decode a quantized grid to an image of exactly `target` pixels,
    /// upsampling in two bilinear stages; ends in tanh.
    pub fn forward(&self, z_q: &Var, target: (usize, usize)) -> Var {
        let (th, tw) = target;
        let mid = (th.div_ceil(2).max(1), tw.div_ceil(2).max(1));
        let mut h = leaky_relu(&self.convs[0].forward(z_q), LRELU_SLOPE);
        h = resize_bilinear(&h, mid);
        h = leaky_relu(&self.convs[1].forward(&h), LRELU_SLOPE);
        h = resize_bilinear(&h, (th, tw));
        h = leaky_relu(&self.convs[2].forward(&h), LRELU_SLOPE);
        tanh(&self.convs[3].forward(&h))
    }

    fn params(&self) -> Vec<Var> {
        self.convs.iter().flat_map(|c| c.params()).collect()
    }
}

// -------------------------------------------------------------- residual gen

pub struct ResidualGenerator {
    convs: Vec<Conv2d>,
}

impl ResidualGenerator {
    fn new(rng: &mut impl Rng, channels: usize) -> Self {
        let c = channels;
        ResidualGenerator {
            convs: vec![
                Conv2d::new(rng, 3, c, 3, 1, 1, INIT_STD),
                Conv2d::new(rng, c, c, 3, 1, 1, INIT_STD),
                Conv2d::new(rng, c, c, 3, 1, 1, INIT_STD),
                Conv2d::new(rng, c, c, 3, 1, 1, INIT_STD),
                // zero output layer: the scale starts as the exact upsample
                Conv2d::zeros(c, 3, 3, 1, 1),
            ],
        }
    }

    /// The detail signal added on top of the upsampled base.
    pub fn forward(&self, upsampled: &Var) -> Var {
        let mut h = upsampled.clone();
        for (i, conv) in self.convs.iter().enumerate() {
            h = conv.forward(&h);
            if i + 1 < self.convs.len() {
                h = leaky_relu(&h, LRELU_SLOPE);
            }
        }
        h
    }

    pub fn params(&self) -> Vec<Var> {
        self.convs.iter().flat_map(|c| c.params()).collect()
    }
}

// ------------------------------------------------------------------- critic

/// Markovian patch critic: five same-padding 3x3 convolutions producing an
/// unbounded single-channel score map of the input's spatial shape.
pub struct PatchCritic {
    convs: Vec<Conv2d>,
}

impl PatchCritic {
    pub fn new(rng: &mut impl Rng, channels: usize) -> Self {
        let c = channels;
        PatchCritic {
            convs: vec![
                Conv2d::new(rng, 3, c, 3, 1, 1, INIT_STD),
                Conv2d::new(rng, c, c, 3, 1, 1, INIT_STD),
                Conv2d::new(rng, c, c, 3, 1, 1, INIT_STD),
                Conv2d::new(rng, c, c, 3, 1, 1, INIT_STD),
                Conv2d::new(rng, c, 1, 3, 1, 1, INIT_STD),
            ],
        }
    }

    pub fn params(&self) -> Vec<Var> {
        self.convs.iter().flat_map(|c| c.params()).collect()
    }

    pub fn set_trainable(&self, trainable: bool) {
        for p in self.params() {
            p.set_trainable(trainable);
        }
    }
}

impl Critic for PatchCritic {
    fn score_map(&self, x: &Var) -> Var {
        let mut h = x.clone();
        for (i, conv) in self.convs.iter().enumerate() {
            h = conv.forward(&h);
            if i + 1 < self.convs.len() {
                h = leaky_relu(&h, LRELU_SLOPE);
            }
        }
        h
    }

    /// Per-sample gradient of the mean score, built from forward ops: replay
    /// the layers, then run the vector-Jacobian chain backwards with
    /// `conv2d_input_grad` and the activation masks. Differentiating this
    /// graph with respect to the weights is what trains the penalty.
    fn input_grad(&self, x: &Var) -> Var {
        let shape = x.shape();
        let (n, h, w) = (shape[0], shape[2], shape[3]);
        let mut pre = Vec::new();
        let mut act = x.clone();
        for (i, conv) in self.convs.iter().enumerate() {
            let z = conv.forward(&act);
            if i + 1 < self.convs.len() {
                act = leaky_relu(&z, LRELU_SLOPE);
                pre.push(z);
            }
        }
        // d(mean over the map)/d(map cell) = 1 / (H * W), per sample
        let seed = Arr::from_elem(IxDyn(&[n, 1, h, w]), 1.0 / (h * w) as f64);
        let mut g = Var::constant(seed);
        for (i, conv) in self.convs.iter().enumerate().rev() {
            g = conv2d_input_grad(&g, &conv.weight, conv.stride, conv.pad, (h, w));
            if i > 0 {
                g = crate::tensor::ops::mul(&g, &leaky_relu_mask(&pre[i - 1], LRELU_SLOPE));
            }
        }
        g
    }
}

// ------------------------------------------------------------ pyramid model

pub struct Scale0Output {
    pub xhat: Image,
    pub z_e: LatentGrid,
    pub z_q: LatentGrid,
    pub idx: IndexGrid,
}

/// Graph form of the scale-0 pass, used by the trainer.
pub struct Scale0Graph {
    pub xhat: Var,
    /// Augmented encoder output (content + positional slots).
    pub z_e: Var,
    /// Gathered codebook rows (the exact quantized values).
    pub z_q: Var,
    /// Raw encoder output before augmentation (continuity loss target).
    pub encoded: Var,
    pub idx: Array3<usize>,
}

pub struct PyramidModel {
    pub encoder: Encoder,
    pub decoder: Decoder,
    pub codebook: Codebook,
    pub critic0: PatchCritic,
    /// Residual generators for scales 1..=T.
    pub residual_gens: Vec<ResidualGenerator>,
    /// Critics for scales 1..=T.
    pub critics_t: Vec<PatchCritic>,
    pub specs: Vec<ScaleSpec>,
    pub latent_hw: (usize, usize),
}

impl PyramidModel {
    /// Build all scales from the schedule (coarse to fine sizes).
    pub fn new(cfg: &TrainConfig, sizes: &[(usize, usize)], rng: &mut impl Rng) -> Result<Self> {
        ensure!(!sizes.is_empty(), "pyramid needs at least one scale");
        for pair in sizes.windows(2) {
            ensure!(
                pair[0].0 < pair[1].0 && pair[0].1 < pair[1].1,
                "scale sizes must strictly increase, got {:?}",
                sizes
            );
        }
        let codebook = Codebook::init(rng, cfg.k, cfg.n_z, cfg.lambda_pos)?;
        let encoder = Encoder::new(rng, cfg.n_z, cfg.channels);
        let decoder = Decoder::new(rng, codebook.d_aug(), cfg.channels);
        let critic0 = PatchCritic::new(rng, cfg.channels_d);
        let t_max = sizes.len() - 1;
        let mut residual_gens = Vec::new();
        let mut critics_t = Vec::new();
        for _ in 1..=t_max {
            residual_gens.push(ResidualGenerator::new(rng, cfg.channels));
            critics_t.push(PatchCritic::new(rng, cfg.channels_d));
        }
        let specs = sizes
            .iter()
            .enumerate()
            .map(|(t, &(h, w))| ScaleSpec {
                t,
                height: h,
                width: w,
                receptive_field: RECEPTIVE_FIELD,
                channels: cfg.channels,
            })
            .collect();
        let latent_hw = Encoder::latent_shape(sizes[0].0, sizes[0].1);
        Ok(PyramidModel {
            encoder,
            decoder,
            codebook,
            critic0,
            residual_gens,
            critics_t,
            specs,
            latent_hw,
        })
    }

    pub fn t_max(&self) -> usize {
        self.specs.len() - 1
    }

    pub fn scale0_size(&self) -> (usize, usize) {
        (self.specs[0].height, self.specs[0].width)
    }

    fn check_resolution(&self, img: &Image, t: usize) -> Result<()> {
        let (c, h, w) = img.dim();
        ensure!(c == 3, "expected a 3-channel image, got {c} channels");
        ensure!(
            h == self.specs[t].height && w == self.specs[t].width,
            "image {h}x{w} does not match scale-{t} resolution {}x{}",
            self.specs[t].height,
            self.specs[t].width
        );
        Ok(())
    }

    /// Raw encoder output for a scale-0 image (no positional slots).
    pub fn encode(&self, x: &Image) -> Result<LatentGrid> {
        self.check_resolution(x, 0)?;
        let out = self.encoder.forward(&Var::constant(to_batch(x)));
        Ok(LatentGrid::new(from_batch(&out.value())))
    }

    /// Encode, augment, quantize: the discrete representation of an image.
    pub fn encode_indices(&self, x: &Image) -> Result<IndexGrid> {
        Ok(self.scale0_forward(x)?.idx)
    }

    /// The conditioned scale-0 pass: encode, augment with coordinates,
    /// quantize, decode at the input's own resolution.
    pub fn scale0_forward(&self, x0: &Image) -> Result<Scale0Output> {
        self.check_resolution(x0, 0)?;
        let encoded = self.encode(x0)?;
        let (h, w) = encoded.spatial();
        let pos = positional_encode(h, w, self.codebook.lambda_pos)?;
        let z_e = augment(&encoded, &pos)?;
        let (idx, z_q) = quantize(&z_e, &self.codebook)?;
        let xhat = self.decode_from_indices(&idx)?;
        Ok(Scale0Output { xhat, z_e, z_q, idx })
    }

    /// Decode a grid of codebook indices to a scale-0 image. Grids matching
    /// the trained latent shape render at the trained scale-0 resolution;
    /// other shapes render at `ENCODER_FACTOR` times the grid size.
    pub fn decode_from_indices(&self, idx: &IndexGrid) -> Result<Image> {
        let k = self.codebook.k();
        ensure!(
            idx.data.iter().all(|&i| i < k),
            "index grid references entries outside the codebook (K = {k})"
        );
        let (h, w) = idx.spatial();
        let target = if (h, w) == self.latent_hw {
            self.scale0_size()
        } else {
            (h * ENCODER_FACTOR, w * ENCODER_FACTOR)
        };
        let batched = idx.data.clone().insert_axis(Axis(0));
        let z_q = crate::tensor::ops::gather_rows(&self.codebook.entries, &batched);
        let out = self.decoder.forward(&z_q, target);
        Ok(from_batch(&out.value()))
    }

    /// One residual refinement step: upsample the previous scale and add the
    /// learned detail signal.
    pub fn residual_forward(&self, x_prev: &Image, t: usize) -> Result<Image> {
        ensure!(
            (1..=self.t_max()).contains(&t),
            "scale index {t} outside 1..={}",
            self.t_max()
        );
        self.check_resolution(x_prev, t - 1)?;
        let target = (self.specs[t].height, self.specs[t].width);
        let up = upsample(x_prev, target)?;
        let detail = self.residual_gens[t - 1].forward(&Var::constant(to_batch(&up)));
        Ok(up + &from_batch(&detail.value()))
    }

    /// Patch score map at scale t; spatial shape equals the input's.
    pub fn discriminate(&self, x: &Image, t: usize) -> Result<Array2<f64>> {
        ensure!(t <= self.t_max(), "scale index {t} outside 0..={}", self.t_max());
        self.check_resolution(x, t)?;
        let critic = if t == 0 {
            &self.critic0
        } else {
            &self.critics_t[t - 1]
        };
        let map = critic.score_map(&Var::constant(to_batch(x)));
        let v = map.value();
        let (h, w) = (v.shape()[2], v.shape()[3]);
        Ok(v.into_shape_with_order((h, w)).expect("map reshape"))
    }

    fn refine_to_top(&self, mut x: Image) -> Image {
        for t in 1..=self.t_max() {
            x = self.residual_forward(&x, t).expect("chain resolution");
        }
        x.mapv(|v| v.clamp(-1.0, 1.0))
    }

    /// Scale-0 pass followed by every residual scale; output in [-1, 1].
    pub fn full_forward(&self, x0: &Image) -> Result<Image> {
        let s0 = self.scale0_forward(x0)?;
        Ok(self.refine_to_top(s0.xhat))
    }

    /// Decode indices, then refine through every residual scale.
    pub fn full_forward_from_indices(&self, idx: &IndexGrid) -> Result<Image> {
        let x0 = self.decode_from_indices(idx)?;
        Ok(self.refine_to_top(x0))
    }

    /// Scale-0 graph over a training batch (N, 3, H, W).
    pub fn scale0_graph(&self, x0: &Var) -> Result<Scale0Graph> {
        let shape = x0.shape();
        ensure!(
            shape.len() == 4 && shape[1] == 3,
            "scale0_graph expects (N, 3, H, W)"
        );
        ensure!(
            shape[2] == self.specs[0].height && shape[3] == self.specs[0].width,
            "batch {}x{} does not match scale-0 resolution {}x{}",
            shape[2],
            shape[3],
            self.specs[0].height,
            self.specs[0].width
        );
        let n = shape[0];
        let encoded = self.encoder.forward(x0);
        let (h, w) = (encoded.shape()[2], encoded.shape()[3]);
        let pos = positional_encode(h, w, self.codebook.lambda_pos)?;
        let mut pos_b = Array4::<f64>::zeros((n, 2 * self.codebook.lambda_pos, h, w));
        for mut sample in pos_b.outer_iter_mut() {
            sample.assign(&pos.data);
        }
        let z_e = concat(1, &[&encoded, &Var::constant(pos_b.into_dyn())]);
        let idx = quantize_batch(
            &z_e.value().into_dimensionality().expect("4-d latent"),
            &self.codebook,
        )?;
        let z_q = crate::tensor::ops::gather_rows(&self.codebook.entries, &idx);
        let st = crate::quantizer::straight_through(&z_e, &z_q.value())?;
        let xhat = self.decoder.forward(&st, (shape[2], shape[3]));
        Ok(Scale0Graph {
            xhat,
            z_e,
            z_q,
            encoded,
            idx,
        })
    }

    /// Residual-scale graph: constant upsampled base plus the trainable
    /// detail head.
    pub fn residual_graph(&self, upsampled_base: &Arr, t: usize) -> Result<Var> {
        ensure!(
            (1..=self.t_max()).contains(&t),
            "scale index {t} outside 1..={}",
            self.t_max()
        );
        let base = Var::constant(upsampled_base.clone());
        let detail = self.residual_gens[t - 1].forward(&base);
        Ok(add(&base, &detail))
    }

    pub fn scale0_gen_params(&self) -> Vec<Var> {
        let mut p = self.encoder.params();
        p.extend(self.decoder.params());
        p.push(self.codebook.entries.clone());
        p
    }

    /// Named parameters in a stable order (checkpoint layout and
    /// fingerprints).
    pub fn named_params(&self) -> Vec<(String, Var)> {
        let mut out = Vec::new();
        let push = |out: &mut Vec<(String, Var)>, prefix: &str, convs: &[Conv2d]| {
            for (i, c) in convs.iter().enumerate() {
                out.push((format!("{prefix}.conv{i}.weight"), c.weight.clone()));
                out.push((format!("{prefix}.conv{i}.bias"), c.bias.clone()));
            }
        };
        push(&mut out, "scale0.encoder", &self.encoder.convs);
        push(&mut out, "scale0.decoder", &self.decoder.convs);
        out.push(("codebook.entries".into(), self.codebook.entries.clone()));
        push(&mut out, "scale0.critic", &self.critic0.convs);
        for (i, g) in self.residual_gens.iter().enumerate() {
            push(&mut out, &format!("scale{}.gen", i + 1), &g.convs);
        }
        for (i, d) in self.critics_t.iter().enumerate() {
            push(&mut out, &format!("scale{}.critic", i + 1), &d.convs);
        }
        out
    }

    pub fn fingerprint(&self) -> u64 {
        crate::nn::param_fingerprint(&self.named_params())
    }
}
