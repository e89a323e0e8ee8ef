//! Train a small two-scale model on synthetic images and save a checkpoint.
//!
//!     cargo run --release --example train_tiny
//!
//! The checkpoint lands in a temp directory; the other examples reuse the
//! same synthetic data, so they can load what this one writes.

use ndarray::Array3;
use patchwork::io::config::TrainConfig;
use patchwork::io::image::Image;
use patchwork::trainer::{train_all, RunLog};

/// Piecewise-smooth test card: ramps, a disc and stripes, varying by index.
fn synthetic_photo(index: usize, h: usize, w: usize) -> Image {
    Array3::from_shape_fn((3, h, w), |(c, y, x)| {
        let fy = y as f64 / (h - 1) as f64;
        let fx = x as f64 / (w - 1) as f64;
        let i = index as f64;
        let ramp = 0.8 * (fx - 0.5) + 0.5 * (fy - 0.5) * if index % 2 == 0 { 1.0 } else { -1.0 };
        let r2 = (fy - 0.3 - 0.15 * i.sin()).powi(2) + (fx - 0.6 + 0.2 * (i * 0.7).cos()).powi(2);
        let disc = if r2 < 0.05 + 0.01 * i { 0.7 } else { -0.1 };
        let bar = if (fy * (3.0 + i)).fract() < 0.25 { 0.3 } else { 0.0 };
        (ramp * 0.6 + disc * 0.5 + bar + 0.2 * (c as f64 - 1.0)).clamp(-0.95, 0.95)
    })
}

fn main() -> patchwork::Result<()> {
    let out_dir = std::env::temp_dir().join("patchwork-examples");
    std::fs::create_dir_all(&out_dir).expect("create output dir");
    let ckpt_path = out_dir.join("tiny.ckpt");
    let log_path = out_dir.join("tiny.log");

    let cfg = TrainConfig {
        seed: 3,
        k: 32,
        n_z: 8,
        lambda_pos: 1,
        channels: 16,
        channels_d: 12,
        steps_per_scale: 120,
        prior_hidden: 32,
        prior_layers: 2,
        prior_first_kernel: 9,
        prior_epochs: 80,
        ..TrainConfig::default()
    };

    // 43 px sources give two scales (32 and 43 px) at the default factor
    let train: Vec<Image> = (0..3).map(|i| synthetic_photo(i, 43, 43)).collect();
    let side: Vec<Image> = (10..16).map(|i| synthetic_photo(i, 43, 43)).collect();

    println!("training 2 scales + prior on {} images...", train.len());
    let mut log = RunLog::new(Some(&log_path));
    let ckpt = train_all(&cfg, &train, &side, Some(&ckpt_path), None, &mut log)?;

    println!("checkpoint: {}", ckpt_path.display());
    println!("run log:    {}", log_path.display());
    println!("scales:     {:?}", ckpt.sizes);
    println!("params:     {:016x}", ckpt.fingerprint());
    Ok(())
}
