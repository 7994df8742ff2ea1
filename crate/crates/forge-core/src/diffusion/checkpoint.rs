//! Denoiser checkpoint files.
//!
//! Binary layout, little-endian throughout:
//!
//! ```text
//! magic        4 bytes  "FGDZ"
//! version      u32      1
//! arch_len     u32      followed by that many UTF-8 bytes
//! horizon      u32
//! hidden_width u32
//! hidden_layers u32
//! num_steps    u32      diffusion schedule the model was trained with
//! beta_min     f64
//! beta_max     f64
//! norm_scale   f64
//! param_count  u64
//! params       f64 * param_count
//! ```

use super::mlp::{layer_sizes, param_count, Denoiser};
use super::{make_schedule, DiffusionError, NoiseSchedule};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"FGDZ";
const VERSION: u32 = 1;

pub fn save_denoiser(
    denoiser: &Denoiser,
    schedule: &NoiseSchedule,
    beta_min: f64,
    beta_max: f64,
    path: impl AsRef<Path>,
) -> Result<(), DiffusionError> {
    let mut f = fs::File::create(path.as_ref())?;
    f.write_all(MAGIC)?;
    f.write_all(&VERSION.to_le_bytes())?;
    let arch = denoiser.arch.as_bytes();
    f.write_all(&(arch.len() as u32).to_le_bytes())?;
    f.write_all(arch)?;
    f.write_all(&(denoiser.horizon as u32).to_le_bytes())?;
    f.write_all(&(denoiser.hidden_width as u32).to_le_bytes())?;
    f.write_all(&(denoiser.hidden_layers as u32).to_le_bytes())?;
    f.write_all(&(schedule.num_steps() as u32).to_le_bytes())?;
    f.write_all(&beta_min.to_le_bytes())?;
    f.write_all(&beta_max.to_le_bytes())?;
    f.write_all(&denoiser.norm_scale.to_le_bytes())?;
    f.write_all(&(denoiser.params.len() as u64).to_le_bytes())?;
    for p in &denoiser.params {
        f.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_denoiser(path: impl AsRef<Path>) -> Result<(Denoiser, NoiseSchedule), DiffusionError> {
    let mut data = Vec::new();
    fs::File::open(path.as_ref())?.read_to_end(&mut data)?;
    let mut cur = 0usize;
    let mut take = |n: usize| -> Result<&[u8], DiffusionError> {
        if cur + n > data.len() {
            return Err(DiffusionError::Corrupt("truncated file".into()));
        }
        let s = &data[cur..cur + n];
        cur += n;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err(DiffusionError::Corrupt("bad magic".into()));
    }
    let read_u32 = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    let read_f64 = |b: &[u8]| f64::from_le_bytes(b.try_into().unwrap());
    let version = read_u32(take(4)?);
    if version != VERSION {
        return Err(DiffusionError::Corrupt(format!(
            "unsupported version {version}"
        )));
    }
    let arch_len = read_u32(take(4)?) as usize;
    let arch = String::from_utf8(take(arch_len)?.to_vec())
        .map_err(|_| DiffusionError::Corrupt("arch descriptor is not UTF-8".into()))?;
    let horizon = read_u32(take(4)?) as usize;
    let hidden_width = read_u32(take(4)?) as usize;
    let hidden_layers = read_u32(take(4)?) as usize;
    let num_steps = read_u32(take(4)?) as usize;
    let beta_min = read_f64(take(8)?);
    let beta_max = read_f64(take(8)?);
    let norm_scale = read_f64(take(8)?);
    let n_params = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let expected = param_count(&layer_sizes(horizon, hidden_width, hidden_layers));
    if n_params != expected {
        return Err(DiffusionError::Corrupt(format!(
            "parameter count {n_params} does not match architecture (expected {expected})"
        )));
    }
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        params.push(read_f64(take(8)?));
    }
    if cur != data.len() {
        return Err(DiffusionError::Corrupt("trailing bytes".into()));
    }
    let schedule = make_schedule(num_steps, beta_min, beta_max)?;
    Ok((
        Denoiser {
            horizon,
            hidden_width,
            hidden_layers,
            params,
            norm_scale,
            arch,
        },
        schedule,
    ))
}
