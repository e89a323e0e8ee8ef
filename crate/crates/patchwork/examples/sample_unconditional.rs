//! Unconditional generation: sample code grids from the prior and render
//! them through the decoder and the residual scales.
//!
//!     cargo run --release --example train_tiny        # once, to produce the checkpoint
//!     cargo run --release --example sample_unconditional

use patchwork::io::checkpoint::Checkpoint;
use patchwork::io::image::save_image;
use patchwork::manipulate::generate_unconditional;
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

    for seed in 0..4u64 {
        let img = generate_unconditional(&ckpt.model, prior, Sampling::Temperature(1.0), seed)?;
        let path = out_dir.join(format!("sample-{seed}.png"));
        save_image(&path, &img)?;
        println!("{}", path.display());
    }

    // the same seed renders the same image
    let a = generate_unconditional(&ckpt.model, prior, Sampling::Temperature(1.0), 0)?;
    let b = generate_unconditional(&ckpt.model, prior, Sampling::Temperature(1.0), 0)?;
    assert_eq!(a, b);
    println!("seed 0 reproduced bit-exactly");
    Ok(())
}
