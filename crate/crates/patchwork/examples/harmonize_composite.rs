//! Harmonization: paste a foreign patch into a training-like image and
//! re-render the composite through the full pipeline. The pasted content
//! gets re-expressed with the learned patch vocabulary; no extra training.
//!
//!     cargo run --release --example train_tiny        # once
//!     cargo run --release --example harmonize_composite

use ndarray::Array3;
use patchwork::io::checkpoint::Checkpoint;
use patchwork::io::image::{save_image, Image};
use patchwork::manipulate::render_conditional;

fn main() -> patchwork::Result<()> {
    let out_dir = std::env::temp_dir().join("patchwork-examples");
    let ckpt_path = out_dir.join("tiny.ckpt");
    if !ckpt_path.exists() {
        eprintln!("no checkpoint at {}; run the train_tiny example first", ckpt_path.display());
        std::process::exit(1);
    }
    let ckpt = Checkpoint::load(&ckpt_path)?;
    let (h, w) = ckpt.model.scale0_size();

    // smooth background with a crude pasted square in the middle
    let mut composite: Image = Array3::from_shape_fn((3, h, w), |(_, y, x)| {
        0.8 * (x as f64 / w as f64) - 0.4 + 0.2 * (y as f64 / h as f64)
    });
    for y in h / 3..2 * h / 3 {
        for x in w / 3..2 * w / 3 {
            composite[[0, y, x]] = 0.9;
            composite[[1, y, x]] = -0.7;
            composite[[2, y, x]] = -0.7;
        }
    }
    let before = out_dir.join("composite-before.png");
    save_image(&before, &composite)?;

    let harmonized = render_conditional(&ckpt.model, &composite)?;
    let after = out_dir.join("composite-harmonized.png");
    save_image(&after, &harmonized)?;

    println!("{}", before.display());
    println!("{}", after.display());
    Ok(())
}
