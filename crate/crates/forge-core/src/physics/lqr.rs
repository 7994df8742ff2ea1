//! Finite-horizon LQR trajectory tracking.
//!
//! Two decoupled regulators run on linearizations about the reference:
//!
//! * longitudinal — state `[station error, speed error]`, control
//!   acceleration, dynamics `A = [[1, dt], [0, 1]]`, `B = [dt^2/2, dt]`;
//! * lateral — state `[lateral error, heading error]`, control steering,
//!   dynamics `A = [[1, v dt], [0, 1]]`, `B = [v^2 dt^2 / 2L, v dt / L]`
//!   with `L` the wheelbase and `v` the local reference speed.
//!
//! Gains come from a backward Riccati recursion with terminal cost `Q`. The
//! controller is applied closed-loop on the nonlinear bicycle model, with
//! feedforward acceleration and steering recovered from reference finite
//! differences, and the resulting per-step controls (clamped to the vehicle
//! limits) are returned. Re-rolling those controls reproduces the tracked
//! motion exactly.

use super::{bicycle_step, Control, ControlSequence, VehicleParams, VehicleState};
use crate::config::PhysicsConfig;
use crate::scene::wrap_angle;

/// Quadratic tracking costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrWeights {
    pub q_lat: f64,
    pub q_head: f64,
    pub r_steer: f64,
    pub q_s: f64,
    pub q_v: f64,
    pub r_acc: f64,
}

impl From<&PhysicsConfig> for LqrWeights {
    fn from(cfg: &PhysicsConfig) -> Self {
        Self {
            q_lat: cfg.q_lat,
            q_head: cfg.q_head,
            r_steer: cfg.r_steer,
            q_s: cfg.q_s,
            q_v: cfg.q_v,
            r_acc: cfg.r_acc,
        }
    }
}

type M2 = [[f64; 2]; 2];
type V2 = [f64; 2];

fn mat_mul(a: &M2, b: &M2) -> M2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

fn transpose(a: &M2) -> M2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn mat_vec(a: &M2, v: &V2) -> V2 {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

fn dot(a: &V2, b: &V2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// One backward Riccati step for scalar control: returns (gain row, next P).
fn riccati_step(p: &M2, a: &M2, b: &V2, q: &M2, r: f64) -> (V2, M2) {
    let at = transpose(a);
    let pb = mat_vec(p, b); // P B
    let s = r + dot(b, &pb); // R + B' P B  (positive for R > 0)
    let bpa = mat_vec(&transpose(&mat_mul(p, a)), b); // (P A)' B = A' P' B; P symmetric
    let k = [bpa[0] / s, bpa[1] / s]; // K = S^-1 B' P A
    let apa = mat_mul(&at, &mat_mul(p, a));
    let apb = mat_vec(&at, &pb); // A' P B
    let mut next = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            next[i][j] = q[i][j] + apa[i][j] - apb[i] * k[j];
        }
    }
    // Symmetrize against roundoff drift.
    let sym = (next[0][1] + next[1][0]) * 0.5;
    next[0][1] = sym;
    next[1][0] = sym;
    (k, next)
}

/// Per-step reference quantities derived from the waypoints.
struct ReferenceProfile {
    /// Node positions, including the anchor at index 0 (length H+1).
    positions: Vec<[f64; 2]>,
    /// Heading of the upcoming segment at each node (length H+1).
    headings: Vec<f64>,
    /// Node speeds from centered finite differences (length H+1).
    speeds: Vec<f64>,
    /// Feedforward acceleration per step (length H).
    accel_ff: Vec<f64>,
    /// Feedforward steering per step (length H).
    steer_ff: Vec<f64>,
}

fn build_profile(
    init: &VehicleState,
    reference: &[[f64; 2]],
    params: &VehicleParams,
    dt: f64,
) -> ReferenceProfile {
    let h = reference.len();
    let mut positions = Vec::with_capacity(h + 1);
    positions.push([init.pose.x, init.pose.y]);
    positions.extend_from_slice(reference);

    let seg_len: Vec<f64> = (0..h)
        .map(|k| {
            let d = [
                positions[k + 1][0] - positions[k][0],
                positions[k + 1][1] - positions[k][1],
            ];
            (d[0] * d[0] + d[1] * d[1]).sqrt()
        })
        .collect();

    // Segment headings; degenerate segments inherit the previous heading.
    let mut seg_heading = Vec::with_capacity(h);
    let mut prev = init.pose.heading;
    for k in 0..h {
        let d = [
            positions[k + 1][0] - positions[k][0],
            positions[k + 1][1] - positions[k][1],
        ];
        let heading = if seg_len[k] > 1e-9 {
            d[1].atan2(d[0])
        } else {
            prev
        };
        seg_heading.push(heading);
        prev = heading;
    }

    // Node heading = heading of the upcoming segment.
    let mut headings = Vec::with_capacity(h + 1);
    for k in 0..h {
        headings.push(seg_heading[k]);
    }
    headings.push(*seg_heading.last().unwrap_or(&init.pose.heading));

    // Node speeds: anchor speed at node 0, centered differences inside,
    // trailing segment speed at the end.
    let mut speeds = Vec::with_capacity(h + 1);
    speeds.push(init.speed);
    for k in 1..h {
        speeds.push((seg_len[k - 1] + seg_len[k]) / (2.0 * dt));
    }
    if h >= 1 {
        speeds.push(seg_len[h - 1] / dt);
    }

    let accel_ff: Vec<f64> = (0..h).map(|k| (speeds[k + 1] - speeds[k]) / dt).collect();

    // Invert the bicycle geometry for the heading change over each step:
    // delta_psi = dt * (v / l_r) sin(beta).
    let steer_ff: Vec<f64> = (0..h)
        .map(|k| {
            let v = 0.5 * (speeds[k] + speeds[k + 1]);
            if v < 1e-6 {
                return 0.0;
            }
            let dpsi = wrap_angle(headings[k + 1] - headings[k]);
            let sin_beta = (dpsi * params.lr / (v * dt)).clamp(-0.99, 0.99);
            let beta = sin_beta.asin();
            (beta.tan() * params.wheelbase() / params.lr).atan()
        })
        .collect();

    ReferenceProfile {
        positions,
        headings,
        speeds,
        accel_ff,
        steer_ff,
    }
}

/// Compute a control sequence that tracks `reference` (world-frame waypoints
/// at the annotation period) from `init`.
///
/// Infeasible references produce clamped best-effort controls; feasibility is
/// judged downstream by the scorer.
pub fn lqr_track(
    init: &VehicleState,
    reference: &[[f64; 2]],
    params: &VehicleParams,
    weights: &LqrWeights,
    dt_annot: f64,
    substeps: usize,
) -> ControlSequence {
    let h = reference.len();
    if h == 0 {
        return Vec::new();
    }
    let profile = build_profile(init, reference, params, dt_annot);
    let dt = dt_annot;
    let wheelbase = params.wheelbase();

    // Longitudinal gains (time-invariant dynamics, finite horizon).
    let q_lon: M2 = [[weights.q_s, 0.0], [0.0, weights.q_v]];
    let a_lon: M2 = [[1.0, dt], [0.0, 1.0]];
    let b_lon: V2 = [0.5 * dt * dt, dt];
    let mut k_lon = vec![[0.0; 2]; h];
    let mut p = q_lon;
    for k in (0..h).rev() {
        let (gain, next) = riccati_step(&p, &a_lon, &b_lon, &q_lon, weights.r_acc);
        k_lon[k] = gain;
        p = next;
    }

    // Lateral gains (speed-scheduled dynamics).
    let q_lat: M2 = [[weights.q_lat, 0.0], [0.0, weights.q_head]];
    let mut k_lat = vec![[0.0; 2]; h];
    let mut p = q_lat;
    for k in (0..h).rev() {
        let v = 0.5 * (profile.speeds[k] + profile.speeds[k + 1]);
        let a: M2 = [[1.0, v * dt], [0.0, 1.0]];
        let b: V2 = [0.5 * v * v * dt * dt / wheelbase, v * dt / wheelbase];
        let (gain, next) = riccati_step(&p, &a, &b, &q_lat, weights.r_steer);
        k_lat[k] = gain;
        p = next;
    }

    // Closed-loop pass over the nonlinear model.
    let dt_sub = dt_annot / substeps as f64;
    let mut state = *init;
    let mut controls = Vec::with_capacity(h);
    for k in 0..h {
        let psi = profile.headings[k];
        let (sin_psi, cos_psi) = psi.sin_cos();
        let dx = state.pose.x - profile.positions[k][0];
        let dy = state.pose.y - profile.positions[k][1];
        let e_s = cos_psi * dx + sin_psi * dy;
        let e_lat = -sin_psi * dx + cos_psi * dy;
        let e_head = wrap_angle(state.pose.heading - psi);
        let e_v = state.speed - profile.speeds[k];

        let accel = (profile.accel_ff[k] - dot(&k_lon[k], &[e_s, e_v]))
            .clamp(params.a_min, params.a_max);
        let steer = (profile.steer_ff[k] - dot(&k_lat[k], &[e_lat, e_head]))
            .clamp(-params.steer_limit, params.steer_limit);
        controls.push(Control { accel, steer });
        for _ in 0..substeps {
            state = bicycle_step(&state, accel, steer, params, dt_sub);
        }
    }
    controls
}
