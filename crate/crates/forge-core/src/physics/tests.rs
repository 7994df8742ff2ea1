use super::*;
use crate::diffusion::Trajectory;
use crate::rng;
use crate::scene::Pose2D;
use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

fn test_params() -> VehicleParams {
    VehicleParams {
        lf: 1.25,
        lr: 1.25,
        length: 4.5,
        width: 2.0,
        steer_limit: 0.6,
        a_min: -6.0,
        a_max: 4.0,
        v_max: 25.0,
    }
}

fn default_weights() -> LqrWeights {
    LqrWeights::from(&crate::config::PhysicsConfig::default())
}

fn state(x: f64, y: f64, heading: f64, v: f64) -> VehicleState {
    VehicleState {
        pose: Pose2D::new(x, y, heading),
        speed: v,
    }
}

// -- bicycle_step -------------------------------------------------------------

#[test]
fn straight_line_step() {
    let params = test_params();
    let s = bicycle_step(&state(0.0, 0.0, 0.3, 10.0), 0.0, 0.0, &params, 0.1);
    let d = ((s.pose.x).powi(2) + (s.pose.y).powi(2)).sqrt();
    assert!((d - 1.0).abs() < 1e-12);
    assert_eq!(s.pose.heading, 0.3);
    assert_eq!(s.speed, 10.0);
}

#[test]
fn no_motion_at_rest() {
    let params = test_params();
    let before = state(3.0, -2.0, 1.1, 0.0);
    let after = bicycle_step(&before, 2.0, 0.5, &params, 0.1);
    assert_eq!(after.pose, before.pose);
    assert!((after.speed - 0.2).abs() < 1e-12);
}

#[test]
fn position_conserved_at_rest_with_zero_accel() {
    let params = test_params();
    let before = state(3.0, -2.0, 1.1, 0.0);
    let after = bicycle_step(&before, 0.0, 0.4, &params, 0.05);
    assert_eq!(after, before);
}

#[test]
fn constant_steer_circle_radius_matches_closed_form() {
    let params = test_params();
    let steer = 0.2;
    let speed = 5.0;
    let dt = 0.005;
    let beta = params.slip_angle(steer);
    let radius = params.lr / beta.sin();
    let period = 2.0 * PI * radius / speed;
    let steps = (period / dt).ceil() as usize;
    let mut s = state(0.0, 0.0, 0.0, speed);
    let mut xs = Vec::with_capacity(steps);
    for _ in 0..steps {
        s = bicycle_step(&s, 0.0, steer, &params, dt);
        xs.push([s.pose.x, s.pose.y]);
    }
    let cx = xs.iter().map(|p| p[0]).sum::<f64>() / xs.len() as f64;
    let cy = xs.iter().map(|p| p[1]).sum::<f64>() / xs.len() as f64;
    for p in &xs {
        let r = ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt();
        assert!(
            (r - radius).abs() < 0.01 * radius,
            "radius {r} vs closed form {radius}"
        );
    }
}

#[test]
fn speed_clamped_to_limits() {
    let params = test_params();
    let fast = bicycle_step(&state(0.0, 0.0, 0.0, 24.9), 100.0, 0.0, &params, 0.5);
    assert_eq!(fast.speed, params.v_max);
    let slow = bicycle_step(&state(0.0, 0.0, 0.0, 0.1), -100.0, 0.0, &params, 0.5);
    assert_eq!(slow.speed, 0.0);
}

// -- rollout --------------------------------------------------------------------

#[test]
fn zero_control_rollout_spacing() {
    let params = test_params();
    let controls = vec![
        Control {
            accel: 0.0,
            steer: 0.0
        };
        12
    ];
    let sim = rollout(&state(0.0, 0.0, 0.0, 8.0), &controls, &params, 0.5, 10);
    assert_eq!(sim.horizon(), 12);
    let mut prev = [0.0, 0.0];
    for s in &sim.states {
        let d = ((s.pose.x - prev[0]).powi(2) + (s.pose.y - prev[1]).powi(2)).sqrt();
        assert!((d - 4.0).abs() < 1e-9, "spacing {d}");
        assert!(s.pose.y.abs() < 1e-12);
        prev = [s.pose.x, s.pose.y];
    }
}

#[test]
fn substep_refinement_converges() {
    let params = test_params();
    let controls: Vec<Control> = (0..12)
        .map(|k| Control {
            accel: 0.5 * (k as f64 * 0.4).sin(),
            steer: 0.08 * (k as f64 * 0.3).cos(),
        })
        .collect();
    let coarse = rollout(&state(0.0, 0.0, 0.0, 8.0), &controls, &params, 0.5, 10);
    let fine = rollout(&state(0.0, 0.0, 0.0, 8.0), &controls, &params, 0.5, 20);
    let a = coarse.end_state().pose;
    let b = fine.end_state().pose;
    let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
    assert!(d < 0.01, "final pose moved {d} m when doubling substeps");
}

#[test]
fn resimulation_is_bit_identical() {
    let params = test_params();
    let mut rng = rng::seeded(3);
    let controls: Vec<Control> = (0..12)
        .map(|_| Control {
            accel: rng.random_range(-2.0..2.0),
            steer: rng.random_range(-0.3..0.3),
        })
        .collect();
    let sim = rollout(&state(1.0, 2.0, 0.5, 6.0), &controls, &params, 0.5, 10);
    let again = rollout(&sim.start, &sim.controls, &params, 0.5, 10);
    assert_eq!(sim, again);
}

#[test]
fn rollout_speed_stays_in_bounds() {
    let params = test_params();
    let mut rng = rng::seeded(4);
    for _ in 0..200 {
        let controls: Vec<Control> = (0..12)
            .map(|_| Control {
                accel: rng.random_range(params.a_min..params.a_max),
                steer: rng.random_range(-params.steer_limit..params.steer_limit),
            })
            .collect();
        let v0 = rng.random_range(0.0..params.v_max);
        let sim = rollout(&state(0.0, 0.0, 0.0, v0), &controls, &params, 0.5, 10);
        for s in &sim.states {
            assert!(s.speed >= 0.0 && s.speed <= params.v_max);
        }
    }
}

// -- lqr_track -------------------------------------------------------------------

/// Reference from rolling known smooth controls; returns (init, waypoints).
fn feasible_reference(seed: u64, params: &VehicleParams) -> (VehicleState, Vec<[f64; 2]>) {
    let mut rng = rng::seeded(seed);
    let v0 = rng.random_range(2.0..12.0);
    let init = state(
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
        rng.random_range(-PI..PI),
        v0,
    );
    let mut accel = 0.0f64;
    let mut steer = 0.0f64;
    let controls: Vec<Control> = (0..12)
        .map(|_| {
            accel = 0.8 * accel + 0.2 * rng.random_range(-1.5..1.5);
            steer = 0.75 * steer + 0.25 * rng.random_range(-0.15..0.15);
            Control { accel, steer }
        })
        .collect();
    let sim = rollout(&init, &controls, params, 0.5, 10);
    let waypoints = sim.states.iter().map(|s| [s.pose.x, s.pose.y]).collect();
    (init, waypoints)
}

fn tracking_errors(
    init: &VehicleState,
    reference: &[[f64; 2]],
    params: &VehicleParams,
) -> (f64, f64) {
    let weights = default_weights();
    let controls = lqr_track(init, reference, params, &weights, 0.5, 10);
    let sim = rollout(init, &controls, params, 0.5, 10);
    let mut sum_sq_lat = 0.0;
    let mut prev = [init.pose.x, init.pose.y];
    for (s, r) in sim.states.iter().zip(reference) {
        let seg = [r[0] - prev[0], r[1] - prev[1]];
        let len = (seg[0] * seg[0] + seg[1] * seg[1]).sqrt();
        let (tx, ty) = if len > 1e-9 {
            (seg[0] / len, seg[1] / len)
        } else {
            (init.pose.heading.cos(), init.pose.heading.sin())
        };
        let dx = s.pose.x - r[0];
        let dy = s.pose.y - r[1];
        let lat = -ty * dx + tx * dy;
        sum_sq_lat += lat * lat;
        prev = *r;
    }
    let rms_lat = (sum_sq_lat / reference.len() as f64).sqrt();
    let last_sim = sim.states.last().unwrap();
    let last_ref = reference.last().unwrap();
    let final_err =
        ((last_sim.pose.x - last_ref[0]).powi(2) + (last_sim.pose.y - last_ref[1]).powi(2)).sqrt();
    (rms_lat, final_err)
}

#[test]
fn tracks_feasible_references_closely() {
    let params = test_params();
    for seed in 0..20 {
        let (init, reference) = feasible_reference(seed, &params);
        let (rms_lat, final_err) = tracking_errors(&init, &reference, &params);
        assert!(rms_lat < 0.5, "seed {seed}: RMS lateral error {rms_lat}");
        assert!(final_err < 0.3, "seed {seed}: final position error {final_err}");
    }
}

#[test]
fn standing_still_needs_no_control() {
    let params = test_params();
    let init = state(2.0, 3.0, 0.7, 0.0);
    let reference = vec![[2.0, 3.0]; 12];
    let controls = lqr_track(&init, &reference, &params, &default_weights(), 0.5, 10);
    for c in &controls {
        assert!(c.accel.abs() < 1e-6 && c.steer.abs() < 1e-6);
    }
}

#[test]
fn impossible_acceleration_saturates_exactly() {
    let params = test_params();
    let init = state(0.0, 0.0, 0.0, 0.0);
    // Demands ~50 m/s^2 at the first step and keeps outrunning the vehicle.
    let reference: Vec<[f64; 2]> = (1..=12).map(|k| [k as f64 * k as f64 * 25.0, 0.0]).collect();
    let controls = lqr_track(&init, &reference, &params, &default_weights(), 0.5, 10);
    for c in &controls {
        assert_eq!(c.accel, params.a_max);
    }
}

#[test]
fn gains_finite_for_random_positive_weights() {
    let params = test_params();
    let mut rng = rng::seeded(5);
    let (init, reference) = feasible_reference(42, &params);
    for _ in 0..1000 {
        let weights = LqrWeights {
            q_lat: rng.random_range(0.01..100.0),
            q_head: rng.random_range(0.01..100.0),
            r_steer: rng.random_range(0.01..100.0),
            q_s: rng.random_range(0.01..100.0),
            q_v: rng.random_range(0.01..100.0),
            r_acc: rng.random_range(0.01..100.0),
        };
        let controls = lqr_track(&init, &reference, &params, &weights, 0.5, 10);
        assert!(controls
            .iter()
            .all(|c| c.accel.is_finite() && c.steer.is_finite()));
    }
}

// -- simulate_batch -----------------------------------------------------------------

#[test]
fn zero_displacement_candidate_stays_near_anchor() {
    let params = test_params();
    let anchor = state(5.0, 5.0, 0.0, 0.0);
    let batch = vec![Trajectory::zeros(12)];
    let sims = simulate_batch(&batch, &anchor, &params, &default_weights(), 0.5, 10);
    let end = sims[0].end_state();
    let d = ((end.pose.x - 5.0).powi(2) + (end.pose.y - 5.0).powi(2)).sqrt();
    assert!(d < 0.1, "moved {d} m from anchor");
}

#[test]
fn parallel_and_serial_simulation_agree() {
    let params = test_params();
    let anchor = state(0.0, 0.0, 0.3, 5.0);
    let mut rng = rng::seeded(6);
    let batch: Vec<Trajectory> = (0..64)
        .map(|_| {
            Trajectory::new(
                (1..=12)
                    .map(|k| {
                        [
                            k as f64 * rng.random_range(1.0..4.0),
                            rng.random_range(-3.0..3.0),
                        ]
                    })
                    .collect(),
            )
        })
        .collect();
    let weights = default_weights();
    let parallel = simulate_batch(&batch, &anchor, &params, &weights, 0.5, 10);
    let serial: Vec<SimulatedTrajectory> = batch
        .iter()
        .map(|c| simulate_candidate(c, &anchor, &params, &weights, 0.5, 10))
        .collect();
    assert_eq!(parallel, serial);
    // And identical under an explicit single-thread pool.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let single = pool.install(|| simulate_batch(&batch, &anchor, &params, &weights, 0.5, 10));
    assert_eq!(parallel, single);
}

#[test]
fn infeasible_turn_deviates_from_reference() {
    let params = test_params();
    let anchor = state(0.0, 0.0, 0.0, 10.0);
    // 90-degree instant turn mid-trajectory at 10 m/s.
    let mut waypoints = Vec::new();
    for k in 1..=6 {
        waypoints.push([k as f64 * 5.0, 0.0]);
    }
    for k in 1..=6 {
        waypoints.push([30.0, k as f64 * 5.0]);
    }
    let batch = vec![Trajectory::new(waypoints.clone())];
    let sims = simulate_batch(&batch, &anchor, &params, &default_weights(), 0.5, 10);
    let max_dev = sims[0]
        .states
        .iter()
        .zip(&waypoints)
        .map(|(s, w)| ((s.pose.x - w[0]).powi(2) + (s.pose.y - w[1]).powi(2)).sqrt())
        .fold(0.0f64, f64::max)
        ;
    assert!(max_dev > 1.0, "simulator tracked an infeasible turn too well: {max_dev}");
}

#[test]
fn batch_simulation_parallel_iteration_is_order_stable() {
    let params = test_params();
    let anchor = state(0.0, 0.0, 0.0, 5.0);
    let batch: Vec<Trajectory> = (0..8)
        .map(|i| {
            Trajectory::new((1..=12).map(|k| [k as f64 * (1.0 + i as f64 * 0.1), 0.0]).collect())
        })
        .collect();
    let weights = default_weights();
    let sims = simulate_batch(&batch, &anchor, &params, &weights, 0.5, 10);
    let reordered: Vec<SimulatedTrajectory> = batch
        .par_iter()
        .map(|c| simulate_candidate(c, &anchor, &params, &weights, 0.5, 10))
        .collect();
    assert_eq!(sims, reordered);
}
