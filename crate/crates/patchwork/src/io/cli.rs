//! Subcommand CLI: `train`, `sample`, `render`, `inpaint`, `eval-diversity`,
//! `reconstruct`. Usage errors exit 2 with usage text; runtime failures exit
//! 1 with a one-line diagnostic.

use crate::error::{Error, Result};
use crate::io::checkpoint::Checkpoint;
use crate::io::config::TrainConfig;
use crate::io::image::{load_image, save_image, to_unit_range, Image};
use crate::manipulate::{generate_unconditional, inpaint, render_conditional};
use crate::metrics::{diversity_kind, psnr, SampleBatch, StdKind};
use crate::prior::{MaskedConvPrior, Sampling};
use crate::trainer::{train_all, RunLog};
use clap::{Parser, Subcommand};
use ndarray::Array2;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "patchwork",
    version,
    about = "Patch-vocabulary image generation from a handful of training images"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a directory of images, checkpointing after every stage
    Train {
        /// Directory of training images (two or more)
        #[arg(long)]
        train_dir: PathBuf,
        /// Directory of side images; falls back to side_dataset_path from
        /// the config file
        #[arg(long)]
        side_dir: Option<PathBuf>,
        /// Checkpoint output path
        #[arg(long)]
        out: PathBuf,
        /// key=value config file
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override single config keys, e.g. --set steps_per_scale=500
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Override the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// Run log path (default: checkpoint path with .log)
        #[arg(long)]
        log: Option<PathBuf>,
        /// Continue from an existing checkpoint at --out
        #[arg(long)]
        resume: bool,
    },
    /// Generate images unconditionally from the trained prior
    Sample {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Softmax temperature (default: the trained config's value)
        #[arg(long)]
        temperature: Option<f64>,
        /// Greedy decoding instead of sampling
        #[arg(long)]
        argmax: bool,
        /// Number of images; more than one numbers the output files
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Re-render an image through the full pipeline (editing, harmonization)
    Render {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fill a masked region with prior-sampled content
    Inpaint {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Mask image: pixels brighter than mid-gray are filled in
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        argmax: bool,
    },
    /// Mean pixelwise standard deviation over a batch of images
    #[command(name = "eval-diversity")]
    EvalDiversity {
        /// Directory of images to measure
        #[arg(long, conflicts_with = "ckpt")]
        dir: Option<PathBuf>,
        /// Generate the batch from a checkpoint instead
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        temperature: Option<f64>,
        /// n-1 normalization instead of population std
        #[arg(long)]
        sample_std: bool,
    },
    /// Scale-0 reconstruction of an input image, reporting PSNR
    Reconstruct {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parse and execute; returns the process exit code.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn read_dir_images(dir: &Path) -> Result<Vec<Image>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no PNG/JPEG images in {}",
            dir.display()
        )));
    }
    paths.iter().map(|p| load_image(p)).collect()
}

fn sampling_for(cfg: &TrainConfig, temperature: Option<f64>, argmax: bool) -> Sampling {
    if argmax {
        Sampling::Argmax
    } else {
        Sampling::Temperature(temperature.unwrap_or(cfg.temperature))
    }
}

fn require_prior(ckpt: &Checkpoint) -> Result<&MaskedConvPrior> {
    ckpt.prior.as_ref().ok_or_else(|| {
        Error::InvalidState("checkpoint has no trained prior; rerun training".into())
    })
}

fn load_mask(path: &Path) -> Result<Array2<bool>> {
    let img = load_image(path)?;
    let (_, h, w) = img.dim();
    Ok(Array2::from_shape_fn((h, w), |(y, x)| {
        (img[[0, y, x]] + img[[1, y, x]] + img[[2, y, x]]) / 3.0 > 0.0
    }))
}

fn numbered(out: &Path, i: usize, count: usize) -> PathBuf {
    if count == 1 {
        return out.to_path_buf();
    }
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("sample");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("png");
    out.with_file_name(format!("{stem}-{i:03}.{ext}"))
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train {
            train_dir,
            side_dir,
            out,
            config,
            set,
            seed,
            log,
            resume,
        } => {
            let mut cfg = match config {
                Some(path) => TrainConfig::from_file(&path)?,
                None => TrainConfig::default(),
            };
            for kv in &set {
                let (k, v) = kv.split_once('=').ok_or_else(|| {
                    Error::Config(format!("--set expects KEY=VALUE, got {kv:?}"))
                })?;
                cfg.set(k.trim(), v.trim())?;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let side_dir = match side_dir {
                Some(d) => d,
                None if !cfg.side_dataset_path.is_empty() => {
                    PathBuf::from(&cfg.side_dataset_path)
                }
                None => {
                    return Err(Error::InvalidArgument(
                        "no side dataset: pass --side-dir or set side_dataset_path".into(),
                    ))
                }
            };
            cfg.side_dataset_path = side_dir.display().to_string();
            let train_images = read_dir_images(&train_dir)?;
            let side_images = read_dir_images(&side_dir)?;
            let resume_ckpt = if resume && out.exists() {
                Some(Checkpoint::load(&out)?)
            } else {
                None
            };
            let log_path = log.unwrap_or_else(|| out.with_extension("log"));
            let mut run_log = RunLog::new(Some(&log_path));
            let ckpt = train_all(
                &cfg,
                &train_images,
                &side_images,
                Some(&out),
                resume_ckpt,
                &mut run_log,
            )?;
            println!(
                "trained {} scales + prior -> {} (params {:016x})",
                ckpt.trained_scales,
                out.display(),
                ckpt.fingerprint()
            );
            Ok(())
        }
        Command::Sample {
            ckpt,
            out,
            seed,
            temperature,
            argmax,
            count,
        } => {
            let ckpt = Checkpoint::load(&ckpt)?;
            let prior = require_prior(&ckpt)?;
            let sampling = sampling_for(&ckpt.config, temperature, argmax);
            for i in 0..count {
                let img = generate_unconditional(&ckpt.model, prior, sampling, seed + i as u64)?;
                let path = numbered(&out, i, count);
                save_image(&path, &img)?;
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Render { ckpt, input, out } => {
            let ckpt = Checkpoint::load(&ckpt)?;
            let img = load_image(&input)?;
            let rendered = render_conditional(&ckpt.model, &img)?;
            save_image(&out, &rendered)?;
            println!("{}", out.display());
            Ok(())
        }
        Command::Inpaint {
            ckpt,
            input,
            mask,
            out,
            seed,
            temperature,
            argmax,
        } => {
            let ckpt = Checkpoint::load(&ckpt)?;
            let prior = require_prior(&ckpt)?;
            let img = load_image(&input)?;
            let (_, h, w) = img.dim();
            let mask_full = load_mask(&mask)?;
            // bring the mask to the input's resolution if it differs
            let mask_hw = if mask_full.dim() == (h, w) {
                mask_full
            } else {
                return Err(Error::InvalidArgument(format!(
                    "mask {:?} does not match input {}x{}",
                    mask_full.dim(),
                    h,
                    w
                )));
            };
            // inpainting happens at the scale-0 working resolution
            let target = ckpt.model.scale0_size();
            let img0 = crate::io::image::resize_area(&img, target)?;
            let mask0 = downscale_bool_mask(&mask_hw, target);
            let sampling = sampling_for(&ckpt.config, temperature, argmax);
            let result = inpaint(&ckpt.model, prior, &img0, &mask0, sampling, seed)?;
            save_image(&out, &result)?;
            println!("{}", out.display());
            Ok(())
        }
        Command::EvalDiversity {
            dir,
            ckpt,
            count,
            seed,
            temperature,
            sample_std,
        } => {
            let images: Vec<Image> = match (dir, ckpt) {
                (Some(dir), None) => read_dir_images(&dir)?
                    .iter()
                    .map(to_unit_range)
                    .collect(),
                (None, Some(path)) => {
                    let ckpt = Checkpoint::load(&path)?;
                    let prior = require_prior(&ckpt)?;
                    let sampling = sampling_for(&ckpt.config, temperature, false);
                    let mut out = Vec::with_capacity(count);
                    for i in 0..count {
                        let img = generate_unconditional(
                            &ckpt.model,
                            prior,
                            sampling,
                            seed + i as u64,
                        )?;
                        out.push(to_unit_range(&img));
                    }
                    out
                }
                _ => {
                    return Err(Error::InvalidArgument(
                        "eval-diversity needs exactly one of --dir or --ckpt".into(),
                    ))
                }
            };
            let batch = SampleBatch::new(images)?;
            let kind = if sample_std {
                StdKind::Sample
            } else {
                StdKind::Population
            };
            println!("{:.6}", diversity_kind(&batch, kind));
            Ok(())
        }
        Command::Reconstruct { ckpt, input, out } => {
            let ckpt = Checkpoint::load(&ckpt)?;
            let img = load_image(&input)?;
            let target = ckpt.model.scale0_size();
            let img0 = crate::io::image::resize_area(&img, target)?;
            let rec = ckpt.model.scale0_forward(&img0)?;
            save_image(&out, &rec.xhat)?;
            let quality = psnr(&to_unit_range(&img0), &to_unit_range(&rec.xhat))?;
            println!("psnr: {quality}");
            println!("{}", out.display());
            Ok(())
        }
    }
}

/// Any-masked-pixel rule while changing resolutions: a target pixel is masked
/// iff its source cell contains a masked pixel.
fn downscale_bool_mask(mask: &Array2<bool>, target: (usize, usize)) -> Array2<bool> {
    let (sh, sw) = mask.dim();
    let (th, tw) = target;
    if (sh, sw) == (th, tw) {
        return mask.clone();
    }
    Array2::from_shape_fn((th, tw), |(y, x)| {
        let y0 = y * sh / th;
        let y1 = ((y + 1) * sh).div_ceil(th).min(sh);
        let x0 = x * sw / tw;
        let x1 = ((x + 1) * sw).div_ceil(tw).min(sw);
        (y0..y1).any(|yy| (x0..x1).any(|xx| mask[[yy, xx]]))
    })
}
