//! User-facing pipelines over a trained model: unconditional sampling,
//! conditional re-rendering (which also covers editing and harmonization, no
//! retraining involved), and multi-modal inpainting through the discrete
//! latent space.

use crate::ensure;
use crate::error::{Error, Result};
use crate::generators::PyramidModel;
use crate::io::image::{resize_area, Image};
use crate::prior::{conditional_fill, sample, MaskedConvPrior, Sampling, TokenMask};
use crate::quantizer::IndexGrid;
use ndarray::Array2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Unconditional,
    Conditional,
    Edit,
    Harmonize,
    Inpaint,
}

/// A single generation/manipulation request; the CLI builds these.
pub struct ManipulationRequest {
    pub mode: Mode,
    pub input: Option<Image>,
    /// Pixel mask at image resolution; `true` marks occluded pixels.
    pub pixel_mask: Option<Array2<bool>>,
    pub sampling: Sampling,
    pub seed: u64,
}

impl ManipulationRequest {
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            Mode::Unconditional => Ok(()),
            Mode::Conditional | Mode::Edit | Mode::Harmonize => {
                ensure!(self.input.is_some(), "{:?} requires an input image", self.mode);
                Ok(())
            }
            Mode::Inpaint => {
                ensure!(self.input.is_some(), "inpaint requires an input image");
                ensure!(self.pixel_mask.is_some(), "inpaint requires a pixel mask");
                Ok(())
            }
        }
    }
}

/// Sample a code grid from the prior and render it through the decoder and
/// every residual scale.
pub fn generate_unconditional(
    model: &PyramidModel,
    prior: &MaskedConvPrior,
    sampling: Sampling,
    seed: u64,
) -> Result<Image> {
    ensure!(
        prior.cfg.k == model.codebook.k(),
        "prior token count {} does not match codebook size {}",
        prior.cfg.k,
        model.codebook.k()
    );
    let grid = sample(prior, model.latent_hw, sampling, seed)?;
    model.full_forward_from_indices(&grid)
}

/// Re-render an arbitrary image through the full pipeline. Editing and
/// harmonization are this same pass on an edited or composited input; inputs
/// at other resolutions are first resized to the scale-0 resolution.
pub fn render_conditional(model: &PyramidModel, x: &Image) -> Result<Image> {
    let x0 = to_scale0(model, x)?;
    model.full_forward(&x0)
}

/// Conservative mask transfer into the token grid: a token is unobserved iff
/// any pixel of its cell is masked.
pub fn downscale_mask(
    pixel_mask: &Array2<bool>,
    image_hw: (usize, usize),
    token_hw: (usize, usize),
) -> Result<TokenMask> {
    ensure!(
        pixel_mask.dim() == image_hw,
        "pixel mask {:?} does not match image {:?}",
        pixel_mask.dim(),
        image_hw
    );
    let (ph, pw) = image_hw;
    let (th, tw) = token_hw;
    let mut observed = Array2::from_elem((th, tw), true);
    for row in 0..th {
        let y0 = row * ph / th;
        let y1 = ((row + 1) * ph).div_ceil(th).min(ph);
        for col in 0..tw {
            let x0 = col * pw / tw;
            let x1 = ((col + 1) * pw).div_ceil(tw).min(pw);
            'cell: for y in y0..y1 {
                for x in x0..x1 {
                    if pixel_mask[[y, x]] {
                        observed[[row, col]] = false;
                        break 'cell;
                    }
                }
            }
        }
    }
    Ok(TokenMask { data: observed })
}

/// Three-step inpainting: encode and quantize the input, complete the masked
/// tokens with the prior, decode and refine. Masked content is discarded
/// entirely; different seeds give different completions.
pub fn inpaint(
    model: &PyramidModel,
    prior: &MaskedConvPrior,
    x: &Image,
    pixel_mask: &Array2<bool>,
    sampling: Sampling,
    seed: u64,
) -> Result<Image> {
    let x0 = to_scale0(model, x)?;
    let (_, h, w) = x0.dim();
    ensure!(
        pixel_mask.dim() == (h, w),
        "pixel mask {:?} does not match the scale-0 resolution {:?}",
        pixel_mask.dim(),
        (h, w)
    );
    let grid = model.encode_indices(&x0)?;
    let token_mask = downscale_mask(pixel_mask, (h, w), grid.spatial())?;
    let filled = conditional_fill(prior, &grid, &token_mask, sampling, seed)?;
    model.full_forward_from_indices(&filled)
}

/// The token grid an inpainting call would complete (exposed for tests and
/// diagnostics).
pub fn inpaint_grid(
    model: &PyramidModel,
    prior: &MaskedConvPrior,
    x: &Image,
    pixel_mask: &Array2<bool>,
    sampling: Sampling,
    seed: u64,
) -> Result<(IndexGrid, IndexGrid, TokenMask)> {
    let x0 = to_scale0(model, x)?;
    let (_, h, w) = x0.dim();
    let grid = model.encode_indices(&x0)?;
    let token_mask = downscale_mask(pixel_mask, (h, w), grid.spatial())?;
    let filled = conditional_fill(prior, &grid, &token_mask, sampling, seed)?;
    Ok((grid, filled, token_mask))
}

/// Dispatch one request.
pub fn run_request(
    model: &PyramidModel,
    prior: Option<&MaskedConvPrior>,
    req: &ManipulationRequest,
) -> Result<Image> {
    req.validate()?;
    match req.mode {
        Mode::Unconditional => {
            let prior = prior.ok_or_else(|| {
                Error::InvalidState("unconditional generation requires a trained prior".into())
            })?;
            generate_unconditional(model, prior, req.sampling, req.seed)
        }
        Mode::Conditional | Mode::Edit | Mode::Harmonize => {
            render_conditional(model, req.input.as_ref().unwrap())
        }
        Mode::Inpaint => {
            let prior = prior.ok_or_else(|| {
                Error::InvalidState("inpainting requires a trained prior".into())
            })?;
            inpaint(
                model,
                prior,
                req.input.as_ref().unwrap(),
                req.pixel_mask.as_ref().unwrap(),
                req.sampling,
                req.seed,
            )
        }
    }
}

fn to_scale0(model: &PyramidModel, x: &Image) -> Result<Image> {
    let (c, h, w) = x.dim();
    ensure!(c == 3, "expected a 3-channel image");
    let target = model.scale0_size();
    if (h, w) == target {
        Ok(x.clone())
    } else {
        resize_area(x, target)
    }
}
