//! Denoising diffusion over fixed-length trajectories.
//!
//! A trajectory is H body-frame waypoints at the annotation period; waypoint
//! `k` is the pose reached at time `(k+1) * dt` after the planning keyframe,
//! so the planning-time pose is the implicit origin. The model is a small
//! noise-predicting MLP trained on synthetic bicycle-model rollouts and
//! sampled with standard DDPM ancestral steps. Truncated re-denoising
//! (forward-noise to `t_trunc`, then denoise back) provides the controlled
//! mutation used by trajectory refinement.

mod checkpoint;
mod corpus;
mod mlp;
mod sample;
mod train;

pub use checkpoint::{load_denoiser, save_denoiser};
pub use corpus::{gen_training_corpus, TrajectoryCorpus};
pub use mlp::Denoiser;
pub use sample::{redenoise, sample};
pub use train::{train_denoiser, TrainResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("invalid parameter: {0}")]
    BadParams(String),
    #[error("diffusion step {t} outside [{lo}, {hi}]")]
    StepOutOfRange { t: usize, lo: usize, hi: usize },
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

/// Fixed-length sequence of 2D body-frame waypoints, meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub waypoints: Vec<[f64; 2]>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<[f64; 2]>) -> Self {
        Self { waypoints }
    }

    pub fn zeros(horizon: usize) -> Self {
        Self {
            waypoints: vec![[0.0, 0.0]; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.waypoints.len()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.waypoints.iter().flat_map(|w| [w[0], w[1]]).collect()
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        assert!(flat.len() % 2 == 0);
        Self {
            waypoints: flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            waypoints: self
                .waypoints
                .iter()
                .map(|w| [w[0] * factor, w[1] * factor])
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.waypoints
            .iter()
            .all(|w| w[0].is_finite() && w[1].is_finite())
    }
}

/// DDPM beta schedule with precomputed cumulative products.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    /// `alpha_bars[t]` = product of `(1 - beta_i)` for `i <= t`; index 0 is 1.
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn num_steps(&self) -> usize {
        self.betas.len()
    }

    /// `beta_t` for `t` in `1..=num_steps`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.betas[t - 1]
    }

    /// Cumulative product of alphas up to `t`; `alpha_bar(0)` is 1.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }

    pub fn check_step(&self, t: usize) -> Result<(), DiffusionError> {
        if t < 1 || t > self.num_steps() {
            Err(DiffusionError::StepOutOfRange {
                t,
                lo: 1,
                hi: self.num_steps(),
            })
        } else {
            Ok(())
        }
    }
}

/// Linear beta schedule from `beta_min` to `beta_max` over `num_steps` steps.
pub fn make_schedule(
    num_steps: usize,
    beta_min: f64,
    beta_max: f64,
) -> Result<NoiseSchedule, DiffusionError> {
    if num_steps < 1 {
        return Err(DiffusionError::BadParams("num_steps must be >= 1".into()));
    }
    if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
        return Err(DiffusionError::BadParams(format!(
            "betas must satisfy 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]"
        )));
    }
    let betas: Vec<f64> = (0..num_steps)
        .map(|i| {
            if num_steps == 1 {
                beta_min
            } else {
                beta_min + (beta_max - beta_min) * i as f64 / (num_steps - 1) as f64
            }
        })
        .collect();
    let mut alpha_bars = Vec::with_capacity(num_steps + 1);
    alpha_bars.push(1.0);
    let mut prod = 1.0;
    for &b in &betas {
        prod *= 1.0 - b;
        alpha_bars.push(prod);
    }
    Ok(NoiseSchedule { betas, alpha_bars })
}

/// Forward-noise a normalized trajectory to step `t`:
/// `sqrt(alpha_bar_t) * traj + sqrt(1 - alpha_bar_t) * eps`.
pub fn forward_noise(
    traj: &Trajectory,
    t: usize,
    eps: &Trajectory,
    schedule: &NoiseSchedule,
) -> Result<Trajectory, DiffusionError> {
    schedule.check_step(t)?;
    assert_eq!(traj.horizon(), eps.horizon(), "noise shape must match");
    let ab = schedule.alpha_bar(t);
    let signal = ab.sqrt();
    let noise = (1.0 - ab).sqrt();
    Ok(Trajectory::new(
        traj.waypoints
            .iter()
            .zip(&eps.waypoints)
            .map(|(w, e)| [signal * w[0] + noise * e[0], signal * w[1] + noise * e[1]])
            .collect(),
    ))
}
