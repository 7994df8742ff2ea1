//! Synthetic multi-lane scene construction for tests and desk-scale runs.
//!
//! Builds a straight or constant-curvature corridor of parallel lanes,
//! rasterizes it into the drivable grid, and populates it with constant-speed
//! lane-following traffic. Agents within one lane share the lane's speed, so
//! the ground-truth replay is collision-free by construction.

use super::{AgentBox, AgentCategory, AgentRole, AgentTrack, BevMap, Pose2D, Scene, SceneError, TrackPoint};
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng;

/// Parameters for [`synth_scene`].
#[derive(Debug, Clone)]
pub struct SyntheticSceneSpec {
    /// Number of parallel lanes (>= 1).
    pub lanes: usize,
    /// Lane width in meters.
    pub lane_width: f64,
    /// Corridor length in meters (arc length of the reference centerline).
    pub length: f64,
    /// Number of background vehicles (the ego is extra).
    pub agents: usize,
    /// Background/ego speeds are drawn per lane from this range (m/s).
    pub speed_range: (f64, f64),
    /// Number of annotation frames.
    pub num_frames: usize,
    /// Grid resolution in meters per cell.
    pub resolution: f64,
    /// Reference centerline curvature in 1/m; 0 gives a straight corridor.
    pub curvature: f64,
    /// Lane index for the ego vehicle; defaults to the middle lane.
    pub ego_lane: Option<usize>,
    /// Fixed ego speed; defaults to the ego lane's speed.
    pub ego_speed: Option<f64>,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        Self {
            lanes: 3,
            lane_width: 3.5,
            length: 400.0,
            agents: 6,
            speed_range: (5.0, 12.0),
            num_frames: 40,
            resolution: 0.5,
            curvature: 0.0,
            ego_lane: None,
            ego_speed: None,
        }
    }
}

/// Longitudinal spacing between same-lane start slots, meters.
const SLOT_SPACING: f64 = 25.0;
/// Start slots occupy this leading fraction of the corridor.
const PLACEMENT_FRACTION: f64 = 0.45;

/// Pose on a lane centerline at arc position `s` along the reference line.
///
/// `offset` is the lateral lane offset (left positive). For curved corridors
/// `s` is measured along the reference centerline; lanes are concentric arcs.
fn lane_pose(offset: f64, s: f64, curvature: f64) -> Pose2D {
    if curvature.abs() < 1e-12 {
        Pose2D::new(s, offset, 0.0)
    } else {
        let r_ref = 1.0 / curvature;
        let phi = s * curvature;
        let r_lane = r_ref - offset;
        // Turn center sits at (0, r_ref); lanes are concentric circles.
        Pose2D::new(r_lane * phi.sin(), r_ref - r_lane * phi.cos(), phi)
    }
}

fn rasterize_corridor(
    lanes: usize,
    lane_width: f64,
    length: f64,
    curvature: f64,
    resolution: f64,
) -> BevMap {
    let half_width = 0.5 * lanes as f64 * lane_width;
    let margin = 4.0;
    // Corridor bounding box from sampled centerline poses.
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let steps = (length / resolution).ceil() as usize + 1;
    for i in 0..=steps {
        let s = length * i as f64 / steps as f64;
        let p = lane_pose(0.0, s, curvature);
        for side in [-half_width, half_width] {
            let q = p.local_point_to_world([0.0, side]);
            for d in 0..2 {
                lo[d] = lo[d].min(q[d]);
                hi[d] = hi[d].max(q[d]);
            }
        }
    }
    let origin = [lo[0] - margin, lo[1] - margin];
    let cols = ((hi[0] + margin - origin[0]) / resolution).ceil() as usize;
    let rows = ((hi[1] + margin - origin[1]) / resolution).ceil() as usize;
    let mut drivable = vec![false; rows * cols];
    for row in 0..rows {
        for col in 0..cols {
            let cx = origin[0] + (col as f64 + 0.5) * resolution;
            let cy = origin[1] + (row as f64 + 0.5) * resolution;
            let inside = if curvature.abs() < 1e-12 {
                cx >= 0.0 && cx <= length && cy.abs() <= half_width
            } else {
                let r_ref = 1.0 / curvature;
                let sgn = curvature.signum();
                let dx = cx;
                let dz = cy - r_ref;
                let radial = (dx * dx + dz * dz).sqrt();
                // Lateral offset from the reference arc (left positive).
                let offset = sgn * (r_ref.abs() - radial);
                // Arc-length position along the reference centerline.
                let phi = (sgn * dx).atan2(-sgn * dz);
                let s = phi / curvature;
                offset.abs() <= half_width && s >= 0.0 && s <= length
            };
            if inside {
                drivable[row * cols + col] = true;
            }
        }
    }
    BevMap {
        origin,
        resolution,
        rows,
        cols,
        drivable,
    }
}

/// Build a deterministic synthetic scene.
pub fn synth_scene(spec: &SyntheticSceneSpec, seed: u64) -> Result<Scene, SceneError> {
    if spec.lanes == 0 {
        return Err(SceneError::Invalid("spec.lanes must be >= 1".into()));
    }
    if !(spec.lane_width > 0.0 && spec.length > 0.0 && spec.resolution > 0.0) {
        return Err(SceneError::Invalid(
            "spec lane_width, length, resolution must be positive".into(),
        ));
    }
    if spec.num_frames < 2 {
        return Err(SceneError::Invalid("spec.num_frames must be >= 2".into()));
    }
    let (v_lo, v_hi) = spec.speed_range;
    if !(v_lo >= 0.0 && v_hi >= v_lo) {
        return Err(SceneError::Invalid("spec.speed_range must be ordered and non-negative".into()));
    }
    if spec.curvature.abs() * spec.length > std::f64::consts::PI {
        return Err(SceneError::Invalid(
            "spec: |curvature| * length must not exceed pi (corridor would wrap)".into(),
        ));
    }
    let slots_per_lane = ((spec.length * PLACEMENT_FRACTION) / SLOT_SPACING).floor() as usize + 1;
    let capacity = spec.lanes * slots_per_lane;
    if spec.agents + 1 > capacity {
        return Err(SceneError::Invalid(format!(
            "infeasible spec: {} agents + ego exceed lane capacity {capacity}",
            spec.agents
        )));
    }

    let mut rng = rng::seeded(seed);
    let dt = 0.5;
    let lane_offset =
        |lane: usize| (lane as f64 - (spec.lanes as f64 - 1.0) / 2.0) * spec.lane_width;
    let lane_speeds: Vec<f64> = (0..spec.lanes)
        .map(|_| {
            if v_hi > v_lo {
                rng.random_range(v_lo..v_hi)
            } else {
                v_lo
            }
        })
        .collect();

    let ego_lane = spec.ego_lane.unwrap_or(spec.lanes / 2).min(spec.lanes - 1);
    let ego_slot = slots_per_lane / 2;
    let mut free_slots: Vec<(usize, usize)> = (0..spec.lanes)
        .flat_map(|l| (0..slots_per_lane).map(move |s| (l, s)))
        .filter(|&(l, s)| !(l == ego_lane && s == ego_slot))
        .collect();
    free_slots.shuffle(&mut rng);

    let make_track = |id: String, role: AgentRole, lane: usize, slot: usize, speed: f64, dims: [f64; 3]| {
        let s0 = slot as f64 * SLOT_SPACING + 0.02 * spec.length;
        let points = (0..spec.num_frames)
            .map(|f| TrackPoint {
                t: f,
                pose: lane_pose(lane_offset(lane), s0 + speed * dt * f as f64, spec.curvature),
                speed,
                present: true,
            })
            .collect();
        AgentTrack {
            agent: AgentBox {
                agent_id: id,
                length: dims[0],
                width: dims[1],
                height: dims[2],
                category: AgentCategory::Vehicle,
                role,
            },
            points,
        }
    };

    let ego_speed = spec.ego_speed.unwrap_or(lane_speeds[ego_lane]);
    let mut tracks = vec![make_track(
        "ego".into(),
        AgentRole::Ego,
        ego_lane,
        ego_slot,
        ego_speed,
        [4.5, 2.0, 1.6],
    )];
    for i in 0..spec.agents {
        let (lane, slot) = free_slots[i];
        tracks.push(make_track(
            format!("veh_{i:02}"),
            AgentRole::Background,
            lane,
            slot,
            lane_speeds[lane],
            [4.5, 2.0, 1.6],
        ));
    }

    let map = rasterize_corridor(
        spec.lanes,
        spec.lane_width,
        spec.length,
        spec.curvature,
        spec.resolution,
    );
    let scene = Scene {
        map,
        tracks,
        num_frames: spec.num_frames,
        dt_annot: dt,
    };
    scene.validate()?;
    Ok(scene)
}
