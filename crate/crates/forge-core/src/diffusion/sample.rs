//! DDPM ancestral sampling and truncated re-denoising.

use super::mlp::Denoiser;
use super::{DiffusionError, NoiseSchedule, Trajectory};
use crate::rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Run the reverse chain from step `t_start` down to 0 on a normalized flat
/// trajectory.
/// Normalized trajectories stay inside this bound by construction of the
/// corpus scale; predicted clean samples are clamped to it during the reverse
/// chain.
const CLIP_BOUND: f64 = 1.5;

fn reverse_chain(
    denoiser: &Denoiser,
    schedule: &NoiseSchedule,
    mut x: Vec<f64>,
    t_start: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    for t in (1..=t_start).rev() {
        let eps_hat = denoiser.predict_noise(&x, t);
        let alpha = schedule.alpha(t);
        let ab = schedule.alpha_bar(t);
        let ab_prev = schedule.alpha_bar(t - 1);
        let beta = schedule.beta(t);
        // Posterior mean in predicted-x0 form, with the prediction clamped.
        let x0_coeff = ab_prev.sqrt() * beta / (1.0 - ab);
        let xt_coeff = alpha.sqrt() * (1.0 - ab_prev) / (1.0 - ab);
        // Posterior variance (the "fixed small" choice).
        let sigma = if t > 1 {
            ((1.0 - ab_prev) / (1.0 - ab) * beta).sqrt()
        } else {
            0.0
        };
        for k in 0..x.len() {
            let x0_pred =
                ((x[k] - (1.0 - ab).sqrt() * eps_hat[k]) / ab.sqrt()).clamp(-CLIP_BOUND, CLIP_BOUND);
            let mean = x0_coeff * x0_pred + xt_coeff * x[k];
            let z: f64 = if t > 1 { rng.sample(StandardNormal) } else { 0.0 };
            x[k] = mean + sigma * z;
        }
    }
    x
}

/// Draw a batch of trajectories from pure noise via the full reverse chain.
///
/// Each batch element consumes its own seed-derived stream, so the output is
/// independent of thread count.
pub fn sample<R: Rng>(
    denoiser: &Denoiser,
    schedule: &NoiseSchedule,
    batch: usize,
    rng: &mut R,
) -> Vec<Trajectory> {
    let batch_seed: u64 = rng.random();
    let dim = denoiser.input_dim();
    let t_total = schedule.num_steps();
    (0..batch)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::derived(batch_seed, "sample", i as u64);
            let x0: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let out = reverse_chain(denoiser, schedule, x0, t_total, &mut rng);
            Trajectory::from_flat(&out).scaled(denoiser.norm_scale)
        })
        .collect()
}

/// Mutate a batch: forward-noise each trajectory to `t_trunc`, then denoise
/// back down. `t_trunc = 0` is the identity; `t_trunc = num_steps` is
/// statistically a fresh sample.
pub fn redenoise<R: Rng>(
    denoiser: &Denoiser,
    schedule: &NoiseSchedule,
    batch: &[Trajectory],
    t_trunc: usize,
    rng: &mut R,
) -> Result<Vec<Trajectory>, DiffusionError> {
    if t_trunc > schedule.num_steps() {
        return Err(DiffusionError::StepOutOfRange {
            t: t_trunc,
            lo: 0,
            hi: schedule.num_steps(),
        });
    }
    if t_trunc == 0 {
        return Ok(batch.to_vec());
    }
    let batch_seed: u64 = rng.random();
    let ab = schedule.alpha_bar(t_trunc);
    let (signal, noise) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(batch
        .par_iter()
        .enumerate()
        .map(|(i, traj)| {
            let mut rng = rng::derived(batch_seed, "redenoise", i as u64);
            let x: Vec<f64> = traj
                .scaled(1.0 / denoiser.norm_scale)
                .flat()
                .iter()
                .map(|&v| {
                    let e: f64 = rng.sample(StandardNormal);
                    signal * v + noise * e
                })
                .collect();
            let out = reverse_chain(denoiser, schedule, x, t_trunc, &mut rng);
            Trajectory::from_flat(&out).scaled(denoiser.norm_scale)
        })
        .collect())
}
