//! Noise-prediction training: SGD with momentum on the standard MSE objective
//! `E || eps - model(forward_noise(x, t, eps), t) ||^2`.
//!
//! Single-threaded and deterministic given the seed. A zero-parameter model
//! predicts zero noise and scores a loss of 1.0 per coordinate against
//! unit-variance targets, which is the baseline losses are compared to.

use super::mlp::{backward, embed_input, forward, Denoiser};
use super::{DiffusionError, NoiseSchedule, TrajectoryCorpus};
use crate::config::DiffusionConfig;
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

/// Trained model plus the per-epoch loss curve.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub denoiser: Denoiser,
    pub epoch_losses: Vec<f64>,
}

/// Train a denoiser on the corpus. The corpus normalization scale is baked
/// into the returned model.
pub fn train_denoiser(
    corpus: &TrajectoryCorpus,
    schedule: &NoiseSchedule,
    cfg: &DiffusionConfig,
    seed: u64,
) -> Result<TrainResult, DiffusionError> {
    if corpus.trajectories.is_empty() {
        return Err(DiffusionError::BadParams("corpus is empty".into()));
    }
    let horizon = corpus.trajectories[0].horizon();
    let mut model = Denoiser::new(horizon, cfg.hidden_width, cfg.hidden_layers);
    model.norm_scale = corpus.scale;
    let mut rng = rng::derived(seed, "train", 0);
    model.init_params(&mut rng);

    let sizes = model.layer_sizes();
    let dim = model.input_dim();
    let normalized: Vec<Vec<f64>> = corpus
        .trajectories
        .iter()
        .map(|t| t.scaled(1.0 / corpus.scale).flat())
        .collect();

    let mut velocity = vec![0.0; model.params.len()];
    let mut grad = vec![0.0; model.params.len()];
    let mut indices: Vec<usize> = (0..normalized.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        // Step decay: full rate for the first 60% of epochs, then 0.3x, then
        // 0.1x for the final 15%.
        let progress = epoch as f64 / cfg.epochs.max(1) as f64;
        let lr = cfg.learning_rate
            * if progress < 0.6 {
                1.0
            } else if progress < 0.85 {
                0.3
            } else {
                0.1
            };
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_terms = 0usize;
        for chunk in indices.chunks(cfg.batch_size.max(1)) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in chunk {
                let t = rng.random_range(1..=schedule.num_steps());
                let eps: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let ab = schedule.alpha_bar(t);
                let (signal, noise) = (ab.sqrt(), (1.0 - ab).sqrt());
                let noisy: Vec<f64> = normalized[i]
                    .iter()
                    .zip(&eps)
                    .map(|(x, e)| signal * x + noise * e)
                    .collect();
                let input = embed_input(&noisy, t);
                let pass = forward(&model.params, &sizes, &input);
                let mut grad_out = vec![0.0; dim];
                let mut sample_loss = 0.0;
                for k in 0..dim {
                    let diff = pass.output[k] - eps[k];
                    sample_loss += diff * diff;
                    grad_out[k] = 2.0 * diff / (dim * chunk.len()) as f64;
                }
                batch_loss += sample_loss / dim as f64;
                backward(&model.params, &sizes, &pass, &grad_out, &mut grad);
            }
            batch_loss /= chunk.len() as f64;
            if !batch_loss.is_finite() {
                return Err(DiffusionError::Diverged { epoch });
            }
            epoch_loss += batch_loss * chunk.len() as f64;
            epoch_terms += chunk.len();
            for ((p, v), g) in model.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v - lr * g;
                *p += *v;
            }
        }
        epoch_losses.push(epoch_loss / epoch_terms as f64);
    }
    Ok(TrainResult {
        denoiser: model,
        epoch_losses,
    })
}

/// Mean per-coordinate MSE of the model over a fixed evaluation draw; used by
/// tests to compare against the zero-predictor baseline.
pub fn eval_loss(
    model: &Denoiser,
    corpus: &TrajectoryCorpus,
    schedule: &NoiseSchedule,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = rng::derived(seed, "eval-loss", 0);
    let dim = model.input_dim();
    let sizes = model.layer_sizes();
    let mut total = 0.0;
    for _ in 0..samples {
        let i = rng.random_range(0..corpus.trajectories.len());
        let t = rng.random_range(1..=schedule.num_steps());
        let x = corpus.trajectories[i].scaled(1.0 / corpus.scale).flat();
        let eps: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let ab = schedule.alpha_bar(t);
        let noisy: Vec<f64> = x
            .iter()
            .zip(&eps)
            .map(|(x, e)| ab.sqrt() * x + (1.0 - ab).sqrt() * e)
            .collect();
        let input = embed_input(&noisy, t);
        let pass = forward(&model.params, &sizes, &input);
        total += pass
            .output
            .iter()
            .zip(&eps)
            .map(|(p, e)| (p - e) * (p - e))
            .sum::<f64>()
            / dim as f64;
    }
    total / samples as f64
}
