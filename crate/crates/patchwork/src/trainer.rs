//! Progressive training: scale 0 learns the encoder, codebook, decoder and
//! critic with the VQ, adversarial, side-structure and continuity terms;
//! scales 1..=T train one residual generator/critic pair at a time on top of
//! frozen lower scales; the prior trains last against the frozen codebook.
//!
//! Determinism: every stage owns a ChaCha stream derived from the config seed
//! and the stage index, so interrupting after a completed stage and resuming
//! reproduces the uninterrupted run bit for bit.

use crate::ensure;
use crate::error::{Error, Result};
use crate::generators::{upsample, PyramidModel};
use crate::io::checkpoint::Checkpoint;
use crate::io::config::TrainConfig;
use crate::io::image::{resize_area, Image};
use crate::io::pyramid::{pyramid_on_schedule, schedule};
use crate::losses::{
    adv_critic_loss, adv_generator_loss, adv_ref_loss, continuity_loss, reconstruction_loss,
    scale_0_loss, scale_t_loss, ssim_loss, Critic,
};
use crate::nn::Adam;
use crate::prior::{encode_side_dataset, train_prior, MaskedConvPrior, PriorConfig};
use crate::quantizer::vq_loss;
use crate::tensor::ops::{add, mean_all, mul_scalar};
use crate::tensor::{Arr, Var};
use crate::util::derive_seed;
use ndarray::{Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::{Path, PathBuf};

const INIT_STREAM: u64 = 0x11;
const SCALE_STREAM_BASE: u64 = 1000;
const PRIOR_STREAM: u64 = 0x9191;

/// Where a critic input came from; the training invariant is that `Side`
/// never appears as a real input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    Training,
    Side,
}

#[derive(Debug, Clone)]
pub struct CriticBatchRecord {
    pub scale: usize,
    pub step: u64,
    pub real: DataSource,
    pub fakes: Vec<DataSource>,
}

/// Append-only training log: one delimited text line per step, plus an
/// in-memory record of everything the critics were fed.
pub struct RunLog {
    path: Option<PathBuf>,
    pub critic_inputs: Vec<CriticBatchRecord>,
}

impl RunLog {
    pub fn new(path: Option<&Path>) -> RunLog {
        RunLog {
            path: path.map(|p| p.to_path_buf()),
            critic_inputs: Vec::new(),
        }
    }

    pub fn record_step(&mut self, stage: &str, step: u64, fields: &[(&str, f64)]) -> Result<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let mut line = format!("{stage}\t{step}");
        for (name, value) in fields {
            line.push_str(&format!("\t{name}={value:.6}"));
        }
        line.push('\n');
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
        f.write_all(line.as_bytes()).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })
    }

    fn record_critic(&mut self, rec: CriticBatchRecord) {
        self.critic_inputs.push(rec);
    }
}

/// In-memory state of a running stage (parameters live in the model).
pub struct TrainState {
    pub scale: usize,
    pub step: u64,
    pub rng: ChaCha8Rng,
}

fn stack_images(images: &[Image]) -> Arr {
    let (c, h, w) = images[0].dim();
    let mut out = Array4::<f64>::zeros((images.len(), c, h, w));
    for (i, img) in images.iter().enumerate() {
        out.index_axis_mut(Axis(0), i).assign(img);
    }
    out.into_dyn()
}

fn check_finite(loss: f64, scale: usize, step: u64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { scale, step })
    }
}

fn lr_schedule(opt: &mut Adam, base_lr: f64, step: usize, total: usize, halve_at: f64) {
    let cutoff = (total as f64 * halve_at) as usize;
    opt.lr = if total > 0 && step >= cutoff && cutoff > 0 {
        base_lr * 0.5
    } else {
        base_lr
    };
}

/// Train the scale-0 components. The critic sees training images as real and
/// their reconstructions as fake; side images drive the generator-only
/// adversarial, SSIM and continuity terms.
pub fn train_scale0(
    cfg: &TrainConfig,
    model: &PyramidModel,
    train0: &[Image],
    side0: &[Image],
    seed: u64,
    log: &mut RunLog,
) -> Result<()> {
    ensure!(train0.len() >= 2, "need at least two training images");
    ensure!(!side0.is_empty(), "need at least one side image");
    let n = train0.len();
    let x0 = stack_images(train0);
    let x0_const = Var::constant(x0.clone());

    let params_g = model.scale0_gen_params();
    let params_d = model.critic0.params();
    let mut adam_g = Adam::new(cfg.lr_g, cfg.adam_beta1, cfg.adam_beta2);
    let mut adam_d = Adam::new(cfg.lr_d, cfg.adam_beta1, cfg.adam_beta2);
    let mut state = TrainState {
        scale: 0,
        step: 0,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };

    for step in 0..cfg.steps_per_scale {
        state.step = step as u64;
        lr_schedule(&mut adam_g, cfg.lr_g, step, cfg.steps_per_scale, cfg.lr_halve_at);
        lr_schedule(&mut adam_d, cfg.lr_d, step, cfg.steps_per_scale, cfg.lr_halve_at);
        let side_idx = state.rng.gen_range(0..side0.len());
        let side = Var::constant(stack_images(&side0[side_idx..=side_idx]));

        // the generator is fixed across the inner critic steps, so its fakes
        // are computed once
        let fake = model.scale0_graph(&x0_const)?.xhat.value();
        let side_fake = if cfg.feed_side_fakes_to_critic {
            Some(model.scale0_graph(&side)?.xhat.value())
        } else {
            None
        };
        let mut critic_loss = 0.0;
        for _ in 0..cfg.critic_steps_per_gen_step {
            let eps: Vec<f64> = (0..n).map(|_| state.rng.gen()).collect();
            let mut loss_d = adv_critic_loss(&model.critic0, &x0, &fake, cfg.lambda_gp, &eps)?;
            let mut fakes = vec![DataSource::Training; n];
            if let Some(sf) = &side_fake {
                loss_d = add(
                    &loss_d,
                    &mean_all(&model.critic0.score_map(&Var::constant(sf.clone()))),
                );
                fakes.push(DataSource::Side);
            }
            critic_loss = loss_d.item();
            check_finite(critic_loss, 0, state.step)?;
            let grads = loss_d.backward();
            adam_d.step(&params_d, &grads);
            log.record_critic(CriticBatchRecord {
                scale: 0,
                step: state.step,
                real: DataSource::Training,
                fakes,
            });
        }

        model.critic0.set_trainable(false);
        let g = model.scale0_graph(&x0_const)?;
        let adv = adv_generator_loss(&model.critic0, &g.xhat);
        let vq = vq_loss(&x0_const, &g.xhat, &g.z_e, &g.z_q, cfg.beta)?;
        let s = model.scale0_graph(&side)?;
        let adv_ref = adv_ref_loss(&model.critic0, &s.xhat);
        let ssim = ssim_loss(&side, &s.xhat)?;
        // continuity on the raw encoder outputs: mean per training image plus
        // the side image's own term
        let cont = add(
            &mul_scalar(&continuity_loss(&g.encoded)?, 1.0 / n as f64),
            &continuity_loss(&s.encoded)?,
        );
        let total = scale_0_loss(&adv, &vq, &adv_ref, &ssim, &cont, &cfg.weights);
        let total_v = total.item();
        check_finite(total_v, 0, state.step)?;
        let grads = total.backward();
        adam_g.step(&params_g, &grads);
        model.critic0.set_trainable(true);

        log.record_step(
            "scale0",
            state.step,
            &[
                ("total", total_v),
                ("adv", adv.item()),
                ("vq", vq.item()),
                ("adv_ref", adv_ref.item()),
                ("ssim", ssim.item()),
                ("cont", cont.item()),
                ("critic", critic_loss),
            ],
        )?;
    }
    Ok(())
}

/// The frozen chain output for a scale-0 image, refined up to `t_end`
/// (unclamped, matching the training composition).
fn chain_to(model: &PyramidModel, x0: &Image, t_end: usize) -> Result<Image> {
    let mut x = model.scale0_forward(x0)?.xhat;
    for t in 1..=t_end {
        x = model.residual_forward(&x, t)?;
    }
    Ok(x)
}

/// Train G_t and D_t with every lower scale frozen. Reals are the training
/// images at scale t; fakes are the frozen chain plus the residual head;
/// reconstruction anchors each conditioned pass to its own training image.
pub fn train_scale_t(
    cfg: &TrainConfig,
    model: &PyramidModel,
    t: usize,
    train_pyramids: &[Vec<Image>],
    side_pyramids: &[Vec<Image>],
    seed: u64,
    log: &mut RunLog,
) -> Result<()> {
    ensure!(
        (1..=model.t_max()).contains(&t),
        "scale index {t} outside 1..={}",
        model.t_max()
    );
    let n = train_pyramids.len();
    ensure!(n >= 2, "need at least two training images");
    ensure!(!side_pyramids.is_empty(), "need at least one side image");
    let target = (model.specs[t].height, model.specs[t].width);

    // precompute the frozen bases once: the chain below t never changes here
    let mut train_bases = Vec::with_capacity(n);
    for pyr in train_pyramids {
        let base = chain_to(model, &pyr[0], t - 1)?;
        train_bases.push(upsample(&base, target)?);
    }
    let reals: Vec<Image> = train_pyramids.iter().map(|p| p[t].clone()).collect();
    let reals_arr = stack_images(&reals);
    let bases_arr = stack_images(&train_bases);
    let mut side_bases = Vec::with_capacity(side_pyramids.len());
    for pyr in side_pyramids {
        let base = chain_to(model, &pyr[0], t - 1)?;
        side_bases.push(stack_images(&[upsample(&base, target)?]));
    }

    let gen = &model.residual_gens[t - 1];
    let critic = &model.critics_t[t - 1];
    let params_g = gen.params();
    let params_d = critic.params();
    let mut adam_g = Adam::new(cfg.lr_g, cfg.adam_beta1, cfg.adam_beta2);
    let mut adam_d = Adam::new(cfg.lr_d, cfg.adam_beta1, cfg.adam_beta2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for step in 0..cfg.steps_per_scale {
        lr_schedule(&mut adam_g, cfg.lr_g, step, cfg.steps_per_scale, cfg.lr_halve_at);
        lr_schedule(&mut adam_d, cfg.lr_d, step, cfg.steps_per_scale, cfg.lr_halve_at);
        let side_idx = rng.gen_range(0..side_pyramids.len());

        let fake = model.residual_graph(&bases_arr, t)?.value();
        let mut critic_loss = 0.0;
        for _ in 0..cfg.critic_steps_per_gen_step {
            let eps: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let loss_d = adv_critic_loss(critic, &reals_arr, &fake, cfg.lambda_gp, &eps)?;
            critic_loss = loss_d.item();
            check_finite(critic_loss, t, step as u64)?;
            let grads = loss_d.backward();
            adam_d.step(&params_d, &grads);
            log.record_critic(CriticBatchRecord {
                scale: t,
                step: step as u64,
                real: DataSource::Training,
                fakes: vec![DataSource::Training; n],
            });
        }

        critic.set_trainable(false);
        let xhat = model.residual_graph(&bases_arr, t)?;
        let adv = adv_generator_loss(critic, &xhat);
        let rec = reconstruction_loss(&Var::constant(reals_arr.clone()), &xhat)?;
        let shat = model.residual_graph(&side_bases[side_idx], t)?;
        let adv_ref = adv_ref_loss(critic, &shat);
        let side_t = Var::constant(stack_images(&[side_pyramids[side_idx][t].clone()]));
        let ssim = ssim_loss(&side_t, &shat)?;
        let total = scale_t_loss(&adv, &adv_ref, &ssim, &rec, &cfg.weights);
        let total_v = total.item();
        check_finite(total_v, t, step as u64)?;
        let grads = total.backward();
        adam_g.step(&params_g, &grads);
        critic.set_trainable(true);

        log.record_step(
            &format!("scale{t}"),
            step as u64,
            &[
                ("total", total_v),
                ("adv", adv.item()),
                ("adv_ref", adv_ref.item()),
                ("ssim", ssim.item()),
                ("rec", rec.item()),
                ("critic", critic_loss),
            ],
        )?;
    }
    Ok(())
}

/// The full pipeline: build pyramids, train every scale in order, then the
/// prior; checkpoint after each completed stage. `resume` continues from the
/// last completed stage of an earlier run with the same config and data.
pub fn train_all(
    cfg: &TrainConfig,
    train_images: &[Image],
    side_images: &[Image],
    ckpt_path: Option<&Path>,
    resume: Option<Checkpoint>,
    log: &mut RunLog,
) -> Result<Checkpoint> {
    cfg.validate()?;
    ensure!(
        train_images.len() >= 2,
        "need at least two training images, got {}",
        train_images.len()
    );
    ensure!(!side_images.is_empty(), "need at least one side image");

    // the first training image anchors the schedule; everything else is
    // resized onto it
    let (_, h, w) = train_images[0].dim();
    let mut sizes = schedule(h, w, cfg.scale_factor, cfg.min_size)?;
    if cfg.t_max > 0 && sizes.len() > cfg.t_max + 1 {
        sizes = sizes.split_off(sizes.len() - cfg.t_max - 1);
    }
    let source = *sizes.last().unwrap();

    let mut train_pyramids = Vec::with_capacity(train_images.len());
    for img in train_images {
        let at_source = resize_area(img, source)?;
        train_pyramids.push(pyramid_on_schedule(&at_source, &sizes)?);
    }
    let mut side_pyramids = Vec::with_capacity(side_images.len());
    for img in side_images {
        let at_source = resize_area(img, source)?;
        side_pyramids.push(pyramid_on_schedule(&at_source, &sizes)?);
    }

    let mut ckpt = match resume {
        Some(ckpt) => {
            ensure!(
                ckpt.sizes == sizes,
                "resume checkpoint was trained on a different schedule"
            );
            ckpt
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, INIT_STREAM));
            let model = PyramidModel::new(cfg, &sizes, &mut rng)?;
            Checkpoint {
                config: cfg.clone(),
                sizes: sizes.clone(),
                trained_scales: 0,
                prior_trained: false,
                model,
                prior: None,
            }
        }
    };

    let t_max = ckpt.model.t_max();
    let train0: Vec<Image> = train_pyramids.iter().map(|p| p[0].clone()).collect();
    let side0: Vec<Image> = side_pyramids.iter().map(|p| p[0].clone()).collect();

    for t in ckpt.trained_scales..=t_max {
        let stage_seed = derive_seed(cfg.seed, SCALE_STREAM_BASE + t as u64);
        if t == 0 {
            train_scale0(cfg, &ckpt.model, &train0, &side0, stage_seed, log)?;
        } else {
            train_scale_t(
                cfg,
                &ckpt.model,
                t,
                &train_pyramids,
                &side_pyramids,
                stage_seed,
                log,
            )?;
        }
        ckpt.trained_scales = t + 1;
        if let Some(path) = ckpt_path {
            ckpt.save(path)?;
        }
    }

    if !ckpt.prior_trained {
        let grids = encode_side_dataset(&ckpt.model, &side0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, PRIOR_STREAM));
        let mut prior = MaskedConvPrior::new(
            PriorConfig::new(cfg.k, cfg.prior_hidden, cfg.prior_layers, cfg.prior_first_kernel),
            &mut rng,
        )?;
        let nll = train_prior(&mut prior, &grids, cfg.prior_epochs, cfg.prior_lr)?;
        prior.codebook_tag = ckpt.model.codebook.version_tag();
        log.record_step("prior", cfg.prior_epochs as u64, &[("nll", nll)])?;
        ckpt.prior = Some(prior);
        ckpt.prior_trained = true;
        if let Some(path) = ckpt_path {
            ckpt.save(path)?;
        }
    }

    Ok(ckpt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn tiny_cfg(steps: usize) -> TrainConfig {
        TrainConfig {
            seed: 7,
            min_size: 8,
            k: 6,
            n_z: 3,
            lambda_pos: 1,
            channels: 4,
            channels_d: 4,
            steps_per_scale: steps,
            critic_steps_per_gen_step: 2,
            prior_hidden: 6,
            prior_layers: 1,
            prior_first_kernel: 3,
            prior_epochs: 2,
            ..TrainConfig::default()
        }
    }

    fn synthetic_images(count: usize, h: usize, w: usize, phase: f64) -> Vec<Image> {
        (0..count)
            .map(|i| {
                Array3::from_shape_fn((3, h, w), |(c, y, x)| {
                    ((x as f64 * 0.7 + y as f64 * 0.3 + c as f64 + i as f64 + phase) * 0.37).sin()
                        * 0.8
                })
            })
            .collect()
    }

    #[test]
    fn zero_steps_change_nothing() {
        let cfg = tiny_cfg(0);
        let train = synthetic_images(2, 16, 16, 0.0);
        let side = synthetic_images(1, 16, 16, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, INIT_STREAM));
        let sizes = schedule(16, 16, cfg.scale_factor, cfg.min_size).unwrap();
        let model = PyramidModel::new(&cfg, &sizes, &mut rng).unwrap();
        let before = model.fingerprint();
        let train0: Vec<Image> = train
            .iter()
            .map(|i| pyramid_on_schedule(i, &sizes).unwrap()[0].clone())
            .collect();
        let side0: Vec<Image> = side
            .iter()
            .map(|i| pyramid_on_schedule(i, &sizes).unwrap()[0].clone())
            .collect();
        let mut log = RunLog::new(None);
        train_scale0(&cfg, &model, &train0, &side0, 1, &mut log).unwrap();
        assert_eq!(model.fingerprint(), before);
    }

    #[test]
    fn scale0_training_is_seed_deterministic() {
        let cfg = tiny_cfg(3);
        let train = synthetic_images(2, 16, 16, 0.0);
        let side = synthetic_images(2, 16, 16, 5.0);
        let mut prints = Vec::new();
        for _ in 0..2 {
            let mut log = RunLog::new(None);
            let ckpt = train_all(&cfg, &train, &side, None, None, &mut log).unwrap();
            prints.push(ckpt.fingerprint());
        }
        assert_eq!(prints[0], prints[1]);
    }

    #[test]
    fn lower_scales_frozen_while_training_above() {
        let cfg = tiny_cfg(2);
        // 15px coarsest from 20px source with rho 0.75: two scales
        let train = synthetic_images(2, 20, 20, 0.0);
        let side = synthetic_images(1, 20, 20, 3.0);
        let sizes = schedule(20, 20, cfg.scale_factor, cfg.min_size).unwrap();
        assert!(sizes.len() >= 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = PyramidModel::new(&cfg, &sizes, &mut rng).unwrap();
        let scale0_names: Vec<(String, Var)> = model
            .named_params()
            .into_iter()
            .filter(|(n, _)| n.starts_with("scale0") || n.starts_with("codebook"))
            .collect();
        let before = crate::nn::param_fingerprint(&scale0_names);
        let train_pyrs: Vec<Vec<Image>> = train
            .iter()
            .map(|i| pyramid_on_schedule(i, &sizes).unwrap())
            .collect();
        let side_pyrs: Vec<Vec<Image>> = side
            .iter()
            .map(|i| pyramid_on_schedule(i, &sizes).unwrap())
            .collect();
        let mut log = RunLog::new(None);
        train_scale_t(&cfg, &model, 1, &train_pyrs, &side_pyrs, 2, &mut log).unwrap();
        assert_eq!(crate::nn::param_fingerprint(&scale0_names), before);
    }

    #[test]
    fn critics_never_see_side_images_as_real() {
        let cfg = tiny_cfg(2);
        let train = synthetic_images(2, 16, 16, 0.0);
        let side = synthetic_images(3, 16, 16, 4.0);
        let mut log = RunLog::new(None);
        train_all(&cfg, &train, &side, None, None, &mut log).unwrap();
        assert!(!log.critic_inputs.is_empty());
        for rec in &log.critic_inputs {
            assert_eq!(rec.real, DataSource::Training);
            // default config: no side-derived fakes either
            assert!(rec.fakes.iter().all(|f| *f == DataSource::Training));
        }
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let cfg = tiny_cfg(2);
        let train = synthetic_images(2, 16, 16, 0.0);
        let side = synthetic_images(1, 16, 16, 2.0);
        let sizes = schedule(16, 16, cfg.scale_factor, cfg.min_size).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let model = PyramidModel::new(&cfg, &sizes, &mut rng).unwrap();
        let w = model.scale0_gen_params()[0].clone();
        let mut v = w.value();
        v.as_slice_mut().unwrap()[0] = f64::NAN;
        w.set_value(v);
        let train0: Vec<Image> = train
            .iter()
            .map(|i| pyramid_on_schedule(i, &sizes).unwrap()[0].clone())
            .collect();
        let side0: Vec<Image> = side
            .iter()
            .map(|i| pyramid_on_schedule(i, &sizes).unwrap()[0].clone())
            .collect();
        let mut log = RunLog::new(None);
        match train_scale0(&cfg, &model, &train0, &side0, 1, &mut log) {
            Err(Error::Diverged { scale: 0, .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn run_log_lines_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.log");
        let cfg = tiny_cfg(2);
        let train = synthetic_images(2, 16, 16, 0.0);
        let side = synthetic_images(1, 16, 16, 2.0);
        let mut log = RunLog::new(Some(&path));
        train_all(&cfg, &train, &side, None, None, &mut log).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines.len() >= 2);
        assert!(lines[0].starts_with("scale0\t0\ttotal="));
        assert!(text.contains("prior\t"));
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.ckpt");
        let cfg = tiny_cfg(2);
        let train = synthetic_images(2, 20, 20, 0.0);
        let side = synthetic_images(2, 20, 20, 3.0);

        let mut log = RunLog::new(None);
        let full = train_all(&cfg, &train, &side, None, None, &mut log).unwrap();

        // interrupted: train scale 0 only, checkpoint, reload, continue
        let partial_cfg = cfg.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, INIT_STREAM));
        let sizes = schedule(20, 20, cfg.scale_factor, cfg.min_size).unwrap();
        let model = PyramidModel::new(&partial_cfg, &sizes, &mut rng).unwrap();
        let mut ckpt = Checkpoint {
            config: partial_cfg.clone(),
            sizes: sizes.clone(),
            trained_scales: 0,
            prior_trained: false,
            model,
            prior: None,
        };
        let train0: Vec<Image> = train
            .iter()
            .map(|i| pyramid_on_schedule(i, &sizes).unwrap()[0].clone())
            .collect();
        let side0: Vec<Image> = side
            .iter()
            .map(|i| pyramid_on_schedule(i, &sizes).unwrap()[0].clone())
            .collect();
        train_scale0(
            &cfg,
            &ckpt.model,
            &train0,
            &side0,
            derive_seed(cfg.seed, SCALE_STREAM_BASE),
            &mut RunLog::new(None),
        )
        .unwrap();
        ckpt.trained_scales = 1;
        ckpt.save(&path).unwrap();

        let reloaded = Checkpoint::load(&path).unwrap();
        let resumed = train_all(
            &cfg,
            &train,
            &side,
            None,
            Some(reloaded),
            &mut RunLog::new(None),
        )
        .unwrap();
        assert_eq!(resumed.fingerprint(), full.fingerprint());
    }
}
