//! Generate a batch of unconditional samples and report the mean pixelwise
//! standard deviation across them (the diversity measure).
//!
//!     cargo run --release --example train_tiny        # once
//!     cargo run --release --example diversity_report

use patchwork::io::checkpoint::Checkpoint;
use patchwork::io::image::to_unit_range;
use patchwork::manipulate::generate_unconditional;
use patchwork::metrics::{diversity, SampleBatch};
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

    let n = 16;
    println!("sampling {n} images...");
    let mut batch = Vec::with_capacity(n);
    for seed in 0..n as u64 {
        let img = generate_unconditional(&ckpt.model, prior, Sampling::Temperature(1.0), seed)?;
        batch.push(to_unit_range(&img));
    }
    let d = diversity(&SampleBatch::new(batch)?);
    println!("diversity over {n} samples: {d:.4}");
    Ok(())
}
