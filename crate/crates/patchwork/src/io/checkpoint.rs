//! Versioned binary checkpoint container.
//!
//! Layout: 8 magic bytes, a u32 LE format version, then length-prefixed named
//! sections (u16 name length, name, u64 payload length, payload). Parameter
//! tensors serialize as u32 ndim, u64 dims, little-endian f64 data, so a
//! round trip is bit-exact. Writes go to a temp file and rename into place.

use crate::ensure;
use crate::error::{Error, Result};
use crate::generators::PyramidModel;
use crate::io::config::TrainConfig;
use crate::prior::{MaskedConvPrior, PriorConfig};
use crate::tensor::{Arr, Var};
use ndarray::IxDyn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 8] = b"PWCKPT\0\0";
const VERSION: u32 = 1;

pub struct Checkpoint {
    pub config: TrainConfig,
    /// Level sizes, coarse to fine (the schedule the model was built on).
    pub sizes: Vec<(usize, usize)>,
    /// Scales fully trained so far (0 = none, T+1 = all).
    pub trained_scales: usize,
    pub prior_trained: bool,
    pub model: PyramidModel,
    pub prior: Option<MaskedConvPrior>,
}

impl std::fmt::Debug for Checkpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Checkpoint")
            .field("sizes", &self.sizes)
            .field("trained_scales", &self.trained_scales)
            .field("prior_trained", &self.prior_trained)
            .field("fingerprint", &format_args!("{:016x}", self.fingerprint()))
            .finish()
    }
}

fn tensor_bytes(v: &Arr) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + v.ndim() * 8 + v.len() * 8);
    out.extend((v.ndim() as u32).to_le_bytes());
    for d in v.shape() {
        out.extend((*d as u64).to_le_bytes());
    }
    for x in v.iter() {
        out.extend(x.to_le_bytes());
    }
    out
}

fn tensor_from_bytes(name: &str, bytes: &[u8]) -> Result<Arr> {
    let fail = || Error::Corrupt(format!("truncated tensor section {name:?}"));
    ensure_len(bytes, 4, fail)?;
    let ndim = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let mut off = 4;
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        ensure_len(bytes, off + 8, fail)?;
        dims.push(u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()) as usize);
        off += 8;
    }
    let count: usize = dims.iter().product();
    ensure_len(bytes, off + count * 8, fail)?;
    let mut data = Vec::with_capacity(count);
    for i in 0..count {
        let s = off + i * 8;
        data.push(f64::from_le_bytes(bytes[s..s + 8].try_into().unwrap()));
    }
    Arr::from_shape_vec(IxDyn(&dims), data)
        .map_err(|_| Error::Corrupt(format!("bad tensor shape in section {name:?}")))
}

fn ensure_len(bytes: &[u8], need: usize, fail: impl Fn() -> Error) -> Result<()> {
    if bytes.len() < need {
        Err(fail())
    } else {
        Ok(())
    }
}

fn write_section(buf: &mut Vec<u8>, name: &str, payload: &[u8]) {
    buf.extend((name.len() as u16).to_le_bytes());
    buf.extend(name.as_bytes());
    buf.extend((payload.len() as u64).to_le_bytes());
    buf.extend(payload);
}

impl Checkpoint {
    fn all_named_params(&self) -> Vec<(String, Var)> {
        let mut named = self.model.named_params();
        if let Some(prior) = &self.prior {
            named.extend(prior.named_params());
        }
        named
    }

    /// Bit-exact fingerprint over every parameter in the checkpoint.
    pub fn fingerprint(&self) -> u64 {
        crate::nn::param_fingerprint(&self.all_named_params())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let named = self.all_named_params();
        for (name, var) in &named {
            if !var.value_ref().iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidState(format!(
                    "refusing to checkpoint non-finite parameter {name:?}"
                )));
            }
        }
        let mut buf = Vec::new();
        buf.extend(MAGIC);
        buf.extend(VERSION.to_le_bytes());
        write_section(&mut buf, "config", self.config.to_text().as_bytes());
        let sizes = self
            .sizes
            .iter()
            .map(|(h, w)| format!("{h}x{w}"))
            .collect::<Vec<_>>()
            .join(",");
        let mut meta = format!(
            "sizes={sizes}\ntrained_scales={}\nprior_trained={}\n",
            self.trained_scales, self.prior_trained
        );
        if let Some(prior) = &self.prior {
            meta.push_str(&format!("prior_codebook_tag={:016x}\n", prior.codebook_tag));
        }
        write_section(&mut buf, "meta", meta.as_bytes());
        for (name, var) in &named {
            write_section(&mut buf, &format!("tensor:{name}"), &tensor_bytes(&var.value()));
        }
        let tmp = path.with_extension("tmp");
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut f = std::fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(&buf).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
        drop(f);
        std::fs::rename(&tmp, path).map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = std::fs::read(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        ensure!(
            bytes.len() >= 12 && &bytes[0..8] == MAGIC,
            "not a checkpoint file: {}",
            path.display()
        );
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                supported: VERSION,
            });
        }
        let mut sections: HashMap<String, &[u8]> = HashMap::new();
        let mut off = 12;
        while off < bytes.len() {
            let fail = || Error::Corrupt("truncated section header".into());
            ensure_len(&bytes, off + 2, fail)?;
            let name_len = u16::from_le_bytes(bytes[off..off + 2].try_into().unwrap()) as usize;
            off += 2;
            ensure_len(&bytes, off + name_len + 8, fail)?;
            let name = String::from_utf8(bytes[off..off + name_len].to_vec())
                .map_err(|_| Error::Corrupt("non-utf8 section name".into()))?;
            off += name_len;
            let payload_len =
                u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()) as usize;
            off += 8;
            ensure_len(&bytes, off + payload_len, || {
                Error::Corrupt(format!("truncated payload for section {name:?}"))
            })?;
            sections.insert(name, &bytes[off..off + payload_len]);
            off += payload_len;
        }

        let config_text = sections
            .get("config")
            .ok_or_else(|| Error::Corrupt("missing config section".into()))?;
        let mut config = TrainConfig::default();
        config.apply_text(std::str::from_utf8(config_text).map_err(|_| {
            Error::Corrupt("non-utf8 config section".into())
        })?)?;

        let meta_text = sections
            .get("meta")
            .ok_or_else(|| Error::Corrupt("missing meta section".into()))?;
        let mut sizes = Vec::new();
        let mut trained_scales = 0usize;
        let mut prior_trained = false;
        let mut prior_tag: Option<u64> = None;
        for line in std::str::from_utf8(meta_text)
            .map_err(|_| Error::Corrupt("non-utf8 meta section".into()))?
            .lines()
        {
            let Some((k, v)) = line.split_once('=') else { continue };
            match k {
                "sizes" => {
                    for part in v.split(',') {
                        let (h, w) = part
                            .split_once('x')
                            .ok_or_else(|| Error::Corrupt("bad sizes entry".into()))?;
                        sizes.push((
                            h.parse().map_err(|_| Error::Corrupt("bad size".into()))?,
                            w.parse().map_err(|_| Error::Corrupt("bad size".into()))?,
                        ));
                    }
                }
                "trained_scales" => {
                    trained_scales =
                        v.parse().map_err(|_| Error::Corrupt("bad trained_scales".into()))?
                }
                "prior_trained" => {
                    prior_trained =
                        v.parse().map_err(|_| Error::Corrupt("bad prior_trained".into()))?
                }
                "prior_codebook_tag" => {
                    prior_tag = Some(
                        u64::from_str_radix(v, 16)
                            .map_err(|_| Error::Corrupt("bad codebook tag".into()))?,
                    )
                }
                _ => {}
            }
        }
        ensure!(!sizes.is_empty(), "meta section lists no scale sizes");

        // rebuild the skeleton, then overwrite every parameter
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = PyramidModel::new(&config, &sizes, &mut rng)?;
        let mut prior = if sections.contains_key("tensor:prior.stack0.weight") {
            Some(MaskedConvPrior::new(
                PriorConfig::new(
                    config.k,
                    config.prior_hidden,
                    config.prior_layers,
                    config.prior_first_kernel,
                ),
                &mut rng,
            )?)
        } else {
            None
        };

        let mut named = model.named_params();
        if let Some(p) = &prior {
            named.extend(p.named_params());
        }
        for (name, var) in &named {
            let key = format!("tensor:{name}");
            let payload = sections
                .get(key.as_str())
                .ok_or_else(|| Error::Corrupt(format!("missing tensor section {name:?}")))?;
            let arr = tensor_from_bytes(name, payload)?;
            ensure!(
                arr.shape() == var.shape().as_slice(),
                "tensor {name:?} has shape {:?}, expected {:?}",
                arr.shape(),
                var.shape()
            );
            var.set_value(arr);
        }

        if let Some(p) = prior.as_mut() {
            let tag =
                prior_tag.ok_or_else(|| Error::Corrupt("prior stored without tag".into()))?;
            p.codebook_tag = tag;
            if model.codebook.version_tag() != tag {
                return Err(Error::CodebookMismatch);
            }
        }

        Ok(Checkpoint {
            config,
            sizes,
            trained_scales,
            prior_trained,
            model,
            prior,
        })
    }
}
