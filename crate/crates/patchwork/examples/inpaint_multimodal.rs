//! Multi-modal inpainting: occlude the top half of an image, complete the
//! masked tokens with the prior under different seeds, and write each
//! completion.
//!
//!     cargo run --release --example train_tiny        # once
//!     cargo run --release --example inpaint_multimodal

use ndarray::{Array2, Array3};
use patchwork::io::checkpoint::Checkpoint;
use patchwork::io::image::{save_image, Image};
use patchwork::manipulate::{inpaint, inpaint_grid};
use patchwork::prior::Sampling;

fn main() -> patchwork::Result<()> {
    let out_dir = std::env::temp_dir().join("patchwork-examples");
    let ckpt_path = out_dir.join("tiny.ckpt");
    if !ckpt_path.exists() {
        eprintln!("no checkpoint at {}; run the train_tiny example first", ckpt_path.display());
        std::process::exit(1);
    }
    let ckpt = Checkpoint::load(&ckpt_path)?;
    let prior = ckpt.prior.as_ref().expect("trained prior");
    let (h, w) = ckpt.model.scale0_size();

    // an input with a hard edge, occluded across the top half
    let input: Image = Array3::from_shape_fn((3, h, w), |(c, y, x)| {
        let v = if x > w / 2 { 0.6 } else { -0.6 };
        v + 0.05 * ((y + c) as f64)
    })
    .mapv(|v| v.clamp(-0.95, 0.95));
    let mask = Array2::from_shape_fn((h, w), |(y, _)| y < h / 2);

    let mut grids = Vec::new();
    for seed in 0..3u64 {
        let img = inpaint(&ckpt.model, prior, &input, &mask, Sampling::Temperature(1.0), seed)?;
        let path = out_dir.join(format!("inpaint-{seed}.png"));
        save_image(&path, &img)?;
        let (_, filled, _) = inpaint_grid(
            &ckpt.model,
            prior,
            &input,
            &mask,
            Sampling::Temperature(1.0),
            seed,
        )?;
        grids.push(filled);
        println!("{}", path.display());
    }
    let distinct = grids
        .iter()
        .enumerate()
        .filter(|(i, g)| grids[..*i].iter().all(|o| &o != g))
        .count();
    println!("{distinct} distinct completions out of {}", grids.len());
    Ok(())
}
