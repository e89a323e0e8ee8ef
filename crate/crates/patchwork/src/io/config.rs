//! Training configuration: every hyperparameter the pipeline needs, with a
//! flat `key=value` text format. CLI flags override file values.

use crate::ensure;
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    /// Per-scale resolution ratio in (0, 1).
    pub scale_factor: f64,
    /// Coarsest allowed min dimension in pixels.
    pub min_size: usize,
    /// Cap on the finest scale index; 0 means "derive from the schedule".
    pub t_max: usize,
    /// Codebook entries.
    pub k: usize,
    /// Content code dimension.
    pub n_z: usize,
    /// Replication count of the (i', j') coordinate pair.
    pub lambda_pos: usize,
    /// Gradient penalty weight.
    pub lambda_gp: f64,
    /// Commitment weight in the VQ objective.
    pub beta: f64,
    pub steps_per_scale: usize,
    pub critic_steps_per_gen_step: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Fraction of steps after which learning rates halve.
    pub lr_halve_at: f64,
    pub weights: LossWeights,
    /// Generator/encoder/decoder channel width.
    pub channels: usize,
    /// Critic channel width.
    pub channels_d: usize,
    pub prior_hidden: usize,
    /// Number of 3x3 B-masked layers after the first A-masked layer.
    pub prior_layers: usize,
    /// Kernel size of the A-masked first layer; sized so desk-scale grids
    /// see their whole prefix.
    pub prior_first_kernel: usize,
    pub prior_epochs: usize,
    pub prior_lr: f64,
    pub temperature: f64,
    pub side_dataset_path: String,
    /// Open knob: also feed side-derived fakes to the critic. Off by default;
    /// the critic then sees side data in no form at all.
    pub feed_side_fakes_to_critic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            scale_factor: 0.75,
            min_size: 32,
            t_max: 0,
            k: 128,
            n_z: 16,
            lambda_pos: 2,
            lambda_gp: 10.0,
            beta: 0.25,
            steps_per_scale: 2000,
            critic_steps_per_gen_step: 3,
            lr_g: 5e-4,
            lr_d: 5e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            lr_halve_at: 0.8,
            weights: LossWeights::default(),
            channels: 32,
            channels_d: 32,
            prior_hidden: 64,
            prior_layers: 5,
            prior_first_kernel: 15,
            prior_epochs: 300,
            prior_lr: 1e-3,
            temperature: 1.0,
            side_dataset_path: String::new(),
            feed_side_fakes_to_critic: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.scale_factor > 0.0 && self.scale_factor < 1.0,
            "scale_factor must lie in (0, 1)"
        );
        ensure!(self.min_size >= 8, "min_size must be at least 8");
        ensure!(self.k >= 1 && self.n_z >= 1, "k and n_z must be positive");
        ensure!(self.lambda_pos >= 1, "lambda_pos must be >= 1");
        ensure!(self.lambda_gp >= 0.0, "lambda_gp must be non-negative");
        ensure!(self.beta >= 0.0, "beta must be non-negative");
        ensure!(
            self.critic_steps_per_gen_step >= 1,
            "critic_steps_per_gen_step must be >= 1"
        );
        ensure!(
            self.lr_g > 0.0 && self.lr_d > 0.0 && self.prior_lr > 0.0,
            "learning rates must be positive"
        );
        ensure!(
            (0.0..=1.0).contains(&self.lr_halve_at),
            "lr_halve_at must lie in [0, 1]"
        );
        ensure!(
            self.channels >= 1 && self.channels_d >= 1,
            "channel widths must be positive"
        );
        ensure!(
            self.prior_hidden >= 1 && self.prior_first_kernel % 2 == 1,
            "prior_hidden must be positive and prior_first_kernel odd"
        );
        ensure!(self.temperature > 0.0, "temperature must be positive");
        self.weights.validate()
    }

    pub fn from_file(path: &Path) -> Result<TrainConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = TrainConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value for {key}: {value:?}")))
        }
        match key {
            "seed" => self.seed = parse(key, value)?,
            "scale_factor" => self.scale_factor = parse(key, value)?,
            "min_size" => self.min_size = parse(key, value)?,
            "t_max" => self.t_max = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "n_z" => self.n_z = parse(key, value)?,
            "lambda_pos" => self.lambda_pos = parse(key, value)?,
            "lambda_gp" => self.lambda_gp = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "steps_per_scale" => self.steps_per_scale = parse(key, value)?,
            "critic_steps_per_gen_step" => self.critic_steps_per_gen_step = parse(key, value)?,
            "lr_g" => self.lr_g = parse(key, value)?,
            "lr_d" => self.lr_d = parse(key, value)?,
            "adam_beta1" => self.adam_beta1 = parse(key, value)?,
            "adam_beta2" => self.adam_beta2 = parse(key, value)?,
            "lr_halve_at" => self.lr_halve_at = parse(key, value)?,
            "w_adv" => self.weights.adv = parse(key, value)?,
            "w_adv_ref" => self.weights.adv_ref = parse(key, value)?,
            "w_ssim" => self.weights.ssim = parse(key, value)?,
            "w_rec" => self.weights.rec = parse(key, value)?,
            "w_vq" => self.weights.vq = parse(key, value)?,
            "w_cont" => self.weights.cont = parse(key, value)?,
            "channels" => self.channels = parse(key, value)?,
            "channels_d" => self.channels_d = parse(key, value)?,
            "prior_hidden" => self.prior_hidden = parse(key, value)?,
            "prior_layers" => self.prior_layers = parse(key, value)?,
            "prior_first_kernel" => self.prior_first_kernel = parse(key, value)?,
            "prior_epochs" => self.prior_epochs = parse(key, value)?,
            "prior_lr" => self.prior_lr = parse(key, value)?,
            "temperature" => self.temperature = parse(key, value)?,
            "side_dataset_path" => self.side_dataset_path = value.to_string(),
            "feed_side_fakes_to_critic" => {
                self.feed_side_fakes_to_critic = parse(key, value)?
            }
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// `key=value` lines covering every field, in a stable order.
    pub fn to_text(&self) -> String {
        let w = &self.weights;
        format!(
            "seed={}\nscale_factor={}\nmin_size={}\nt_max={}\nk={}\nn_z={}\nlambda_pos={}\n\
             lambda_gp={}\nbeta={}\nsteps_per_scale={}\ncritic_steps_per_gen_step={}\n\
             lr_g={}\nlr_d={}\nadam_beta1={}\nadam_beta2={}\nlr_halve_at={}\n\
             w_adv={}\nw_adv_ref={}\nw_ssim={}\nw_rec={}\nw_vq={}\nw_cont={}\n\
             channels={}\nchannels_d={}\nprior_hidden={}\nprior_layers={}\n\
             prior_first_kernel={}\nprior_epochs={}\nprior_lr={}\ntemperature={}\n\
             side_dataset_path={}\nfeed_side_fakes_to_critic={}\n",
            self.seed,
            self.scale_factor,
            self.min_size,
            self.t_max,
            self.k,
            self.n_z,
            self.lambda_pos,
            self.lambda_gp,
            self.beta,
            self.steps_per_scale,
            self.critic_steps_per_gen_step,
            self.lr_g,
            self.lr_d,
            self.adam_beta1,
            self.adam_beta2,
            self.lr_halve_at,
            w.adv,
            w.adv_ref,
            w.ssim,
            w.rec,
            w.vq,
            w.cont,
            self.channels,
            self.channels_d,
            self.prior_hidden,
            self.prior_layers,
            self.prior_first_kernel,
            self.prior_epochs,
            self.prior_lr,
            self.temperature,
            self.side_dataset_path,
            self.feed_side_fakes_to_critic,
        )
    }
}
