//! Physics-aware planning simulator: LQR tracking of candidate trajectories
//! followed by kinematic bicycle rollout.
//!
//! The bicycle model is the standard CG-referenced kinematic formulation with
//! slip angle `beta = atan(l_r tan(delta) / (l_f + l_r))`:
//!
//! ```text
//! x'     = v cos(theta + beta)
//! y'     = v sin(theta + beta)
//! theta' = (v / l_r) sin(beta)
//! v'     = a
//! ```
//!
//! integrated with explicit Euler. Speed is clamped to `[0, v_max]`; there is
//! no reverse driving.

mod lqr;

pub use lqr::{lqr_track, LqrWeights};

use crate::config::PhysicsConfig;
use crate::diffusion::Trajectory;
use crate::scene::{OrientedBox, Pose2D};
use rayon::prelude::*;

/// Vehicle geometry and actuation limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    /// Front axle to CG distance, meters.
    pub lf: f64,
    /// Rear axle to CG distance, meters.
    pub lr: f64,
    pub length: f64,
    pub width: f64,
    /// Steering angle limit, radians (symmetric).
    pub steer_limit: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub v_max: f64,
}

impl VehicleParams {
    /// Derive params for an agent of the given footprint; axle positions
    /// default to `axle_ratio * length` on both sides of the CG.
    pub fn for_agent(cfg: &PhysicsConfig, length: f64, width: f64) -> Self {
        Self {
            lf: cfg.axle_ratio * length,
            lr: cfg.axle_ratio * length,
            length,
            width,
            steer_limit: cfg.steer_limit,
            a_min: cfg.a_min,
            a_max: cfg.a_max,
            v_max: cfg.v_max,
        }
    }

    pub fn wheelbase(&self) -> f64 {
        self.lf + self.lr
    }

    /// Slip angle for a steering angle.
    pub fn slip_angle(&self, steer: f64) -> f64 {
        (self.lr * steer.tan() / self.wheelbase()).atan()
    }
}

/// Pose plus longitudinal speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub pose: Pose2D,
    pub speed: f64,
}

/// One planning-step control: acceleration and steering angle, held for the
/// whole annotation period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Control {
    pub accel: f64,
    pub steer: f64,
}

pub type ControlSequence = Vec<Control>;

/// Result of rolling the bicycle model along a control sequence: states and
/// oriented boxes at annotation-step boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedTrajectory {
    pub start: VehicleState,
    /// State after each planning step (length = number of controls).
    pub states: Vec<VehicleState>,
    pub controls: ControlSequence,
    pub boxes: Vec<OrientedBox>,
}

impl SimulatedTrajectory {
    pub fn end_state(&self) -> VehicleState {
        *self.states.last().unwrap_or(&self.start)
    }

    pub fn horizon(&self) -> usize {
        self.states.len()
    }
}

/// One explicit-Euler step of the kinematic bicycle model.
///
/// Derivatives are evaluated at the incoming state; speed is clamped to
/// `[0, v_max]` after the update.
pub fn bicycle_step(
    state: &VehicleState,
    accel: f64,
    steer: f64,
    params: &VehicleParams,
    dt: f64,
) -> VehicleState {
    let beta = params.slip_angle(steer);
    let course = state.pose.heading + beta;
    let x = state.pose.x + dt * state.speed * course.cos();
    let y = state.pose.y + dt * state.speed * course.sin();
    let heading = state.pose.heading + dt * state.speed / params.lr * beta.sin();
    let speed = (state.speed + dt * accel).clamp(0.0, params.v_max);
    VehicleState {
        pose: Pose2D::new(x, y, heading),
        speed,
    }
}

/// Roll a control sequence forward, recording one state per planning step.
///
/// Each planning step is integrated with `substeps` Euler sub-iterations under
/// zero-order-hold controls.
pub fn rollout(
    init: &VehicleState,
    controls: &[Control],
    params: &VehicleParams,
    dt_annot: f64,
    substeps: usize,
) -> SimulatedTrajectory {
    assert!(substeps >= 1, "substeps must be >= 1");
    let dt = dt_annot / substeps as f64;
    let mut state = *init;
    let mut states = Vec::with_capacity(controls.len());
    let mut boxes = Vec::with_capacity(controls.len());
    for c in controls {
        for _ in 0..substeps {
            state = bicycle_step(&state, c.accel, c.steer, params, dt);
        }
        states.push(state);
        boxes.push(OrientedBox {
            pose: state.pose,
            length: params.length,
            width: params.width,
        });
    }
    SimulatedTrajectory {
        start: *init,
        states,
        controls: controls.to_vec(),
        boxes,
    }
}

/// Track a body-frame candidate from `anchor` and roll it out.
pub fn simulate_candidate(
    candidate: &Trajectory,
    anchor: &VehicleState,
    params: &VehicleParams,
    weights: &LqrWeights,
    dt_annot: f64,
    substeps: usize,
) -> SimulatedTrajectory {
    let reference: Vec<[f64; 2]> = candidate
        .waypoints
        .iter()
        .map(|w| anchor.pose.local_point_to_world(*w))
        .collect();
    let controls = lqr_track(anchor, &reference, params, weights, dt_annot, substeps);
    rollout(anchor, &controls, params, dt_annot, substeps)
}

/// Simulate a batch of body-frame candidates about a shared anchor state.
///
/// Candidates are independent, so this parallelizes; output order matches the
/// input and does not depend on thread count.
pub fn simulate_batch(
    batch: &[Trajectory],
    anchor: &VehicleState,
    params: &VehicleParams,
    weights: &LqrWeights,
    dt_annot: f64,
    substeps: usize,
) -> Vec<SimulatedTrajectory> {
    batch
        .par_iter()
        .map(|candidate| simulate_candidate(candidate, anchor, params, weights, dt_annot, substeps))
        .collect()
}

#[cfg(test)]
mod tests;
