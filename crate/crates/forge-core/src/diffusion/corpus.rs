//! Synthetic training corpus: kinematic bicycle rollouts under smooth random
//! control profiles, standing in for a real trajectory dataset.

use super::Trajectory;
use crate::physics::{bicycle_step, VehicleParams, VehicleState};
use crate::rng;
use crate::scene::Pose2D;
use rand::Rng;
use rayon::prelude::*;

/// Trajectories plus the scalar normalization used for diffusion training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryCorpus {
    pub trajectories: Vec<Trajectory>,
    /// 99th-percentile absolute coordinate; trajectories are divided by this
    /// before entering the model.
    pub scale: f64,
}

impl TrajectoryCorpus {
    /// Mean per-step displacement across the corpus, meters. The first step is
    /// measured from the implicit body-frame origin.
    pub fn mean_step_displacement(&self) -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for traj in &self.trajectories {
            let mut prev = [0.0, 0.0];
            for w in &traj.waypoints {
                total += ((w[0] - prev[0]).powi(2) + (w[1] - prev[1]).powi(2)).sqrt();
                prev = *w;
                count += 1;
            }
        }
        total / count.max(1) as f64
    }
}

fn corpus_vehicle() -> VehicleParams {
    VehicleParams {
        lf: 1.8,
        lr: 1.8,
        length: 4.5,
        width: 2.0,
        steer_limit: 0.6,
        a_min: -6.0,
        a_max: 4.0,
        v_max: 25.0,
    }
}

const DT: f64 = 0.5;
const SUBSTEPS: usize = 10;

fn roll_profile(v0: f64, controls: &[(f64, f64)], params: &VehicleParams) -> Trajectory {
    let mut state = VehicleState {
        pose: Pose2D::new(0.0, 0.0, 0.0),
        speed: v0,
    };
    let dt = DT / SUBSTEPS as f64;
    let mut waypoints = Vec::with_capacity(controls.len());
    for &(accel, steer) in controls {
        for _ in 0..SUBSTEPS {
            state = bicycle_step(&state, accel, steer, params, dt);
        }
        waypoints.push([state.pose.x, state.pose.y]);
    }
    Trajectory::new(waypoints)
}

/// Generate `n` body-frame trajectories of the given horizon.
///
/// Initial speeds are uniform in [0, 15] m/s; acceleration and steering are
/// low-pass-filtered uniform noise, bounded well inside the vehicle limits.
/// Entry 0 is a deterministic zero-steer constant-speed anchor. Deterministic
/// in the rng stream and independent of thread count.
pub fn gen_training_corpus<R: Rng>(n: usize, horizon: usize, rng: &mut R) -> TrajectoryCorpus {
    assert!(n >= 1, "corpus size must be >= 1");
    let params = corpus_vehicle();
    let base_seed: u64 = rng.random();
    let mut trajectories: Vec<Trajectory> = (0..n)
        .into_par_iter()
        .map(|i| {
            if i == 0 {
                // Anchor: straight line at constant speed.
                return roll_profile(10.0, &vec![(0.0, 0.0); horizon], &params);
            }
            let mut rng = rng::derived(base_seed, "corpus", i as u64);
            let v0 = rng.random_range(0.0..15.0);
            let mut accel = 0.0f64;
            let mut steer = 0.0f64;
            let controls: Vec<(f64, f64)> = (0..horizon)
                .map(|_| {
                    accel = 0.8 * accel + 0.2 * rng.random_range(-2.5..2.0);
                    steer = 0.75 * steer + 0.25 * rng.random_range(-0.25..0.25);
                    (accel, steer)
                })
                .collect();
            roll_profile(v0, &controls, &params)
        })
        .collect();
    // Guard against fully degenerate corpora (e.g. n = 1 with v0 = 0).
    let mut magnitudes: Vec<f64> = trajectories
        .iter()
        .flat_map(|t| t.waypoints.iter().flat_map(|w| [w[0].abs(), w[1].abs()]))
        .collect();
    magnitudes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((0.99 * magnitudes.len() as f64).ceil() as usize).clamp(1, magnitudes.len()) - 1;
    let scale = magnitudes[idx].max(1e-6);
    trajectories.shrink_to_fit();
    TrajectoryCorpus {
        trajectories,
        scale,
    }
}
