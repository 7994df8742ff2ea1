//! Canonical scene representation: drivable-area map, agent box tracks, and
//! the coordinate transforms everything else is built on.
//!
//! Scenes are annotated at a fixed period (`dt_annot`, 0.5 s by default,
//! matching 2 Hz box tracks). World coordinates are meters; headings are
//! radians CCW from +x, normalized to `[-pi, pi)`. Agent body frames have +x
//! forward and +y left.

mod io;
mod synth;

pub use io::{
    canonical_json_bytes, load_scene, load_scene_with_provenance, save_scene,
    save_scene_with_provenance, scene_to_canonical_bytes, scene_to_value,
};
pub use synth::{synth_scene, SyntheticSceneSpec};

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Invalid(String),
}

/// Wrap an angle to `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r >= PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Planar pose: position in meters, heading in radians CCW from +x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2D {
    /// Construct with the heading normalized to `[-pi, pi)`.
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    /// Map a point given in this pose's body frame to world coordinates.
    pub fn local_point_to_world(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.heading.sin_cos();
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }

    /// Map a world point into this pose's body frame.
    pub fn world_point_to_local(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.heading.sin_cos();
        let dx = p[0] - self.x;
        let dy = p[1] - self.y;
        [c * dx + s * dy, -s * dx + c * dy]
    }

    /// Express `world`, a pose in world coordinates, in this pose's frame.
    pub fn world_to_local(&self, world: &Pose2D) -> Pose2D {
        let p = self.world_point_to_local([world.x, world.y]);
        Pose2D::new(p[0], p[1], world.heading - self.heading)
    }

    /// Map `local`, a pose in this pose's frame, back to world coordinates.
    pub fn local_to_world(&self, local: &Pose2D) -> Pose2D {
        let p = self.local_point_to_world([local.x, local.y]);
        Pose2D::new(p[0], p[1], local.heading + self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentCategory {
    Vehicle,
    Pedestrian,
    Obstacle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRole {
    Ego,
    Background,
    Adversary,
}

/// Static agent description: identity, box dimensions, category, role.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentBox {
    pub agent_id: String,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub category: AgentCategory,
    pub role: AgentRole,
}

/// One annotated state of an agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub t: usize,
    pub pose: Pose2D,
    pub speed: f64,
    pub present: bool,
}

/// An agent plus its per-frame annotated states.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTrack {
    pub agent: AgentBox,
    pub points: Vec<TrackPoint>,
}

impl AgentTrack {
    /// Pose and speed at an annotation frame, if the agent is present there.
    pub fn state_at(&self, frame: usize) -> Option<(Pose2D, f64)> {
        self.points
            .iter()
            .find(|p| p.t == frame && p.present)
            .map(|p| (p.pose, p.speed))
    }

    pub fn present_at(&self, frame: usize) -> bool {
        self.state_at(frame).is_some()
    }

    fn present_points(&self) -> impl Iterator<Item = &TrackPoint> {
        self.points.iter().filter(|p| p.present)
    }
}

/// Boolean drivable-area grid in world coordinates.
///
/// Cell `(row, col)` covers the half-open square
/// `[origin + [col, row] * resolution, origin + [col+1, row+1] * resolution)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BevMap {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub rows: usize,
    pub cols: usize,
    pub drivable: Vec<bool>,
}

impl BevMap {
    /// Grid cell containing a world point, or `None` outside the grid.
    pub fn cell_of(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        let col = ((p[0] - self.origin[0]) / self.resolution).floor();
        let row = ((p[1] - self.origin[1]) / self.resolution).floor();
        if col < 0.0 || row < 0.0 || col >= self.cols as f64 || row >= self.rows as f64 {
            None
        } else {
            Some((row as usize, col as usize))
        }
    }

    /// World coordinates of a cell center.
    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        [
            self.origin[0] + (col as f64 + 0.5) * self.resolution,
            self.origin[1] + (row as f64 + 0.5) * self.resolution,
        ]
    }

    pub fn at(&self, row: usize, col: usize) -> bool {
        self.drivable[row * self.cols + col]
    }
}

/// True iff the cell containing `point` is drivable. Points outside the grid
/// count as non-drivable.
pub fn is_drivable(map: &BevMap, point: [f64; 2]) -> bool {
    match map.cell_of(point) {
        Some((r, c)) => map.at(r, c),
        None => false,
    }
}

/// Oriented rectangular footprint of an agent: center pose plus dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub pose: Pose2D,
    pub length: f64,
    pub width: f64,
}

impl OrientedBox {
    pub fn center(&self) -> [f64; 2] {
        [self.pose.x, self.pose.y]
    }

    /// Corners ordered (FL, FR, RL, RR).
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let k = box_key_points(&self.pose, self.length, self.width);
        [k[1], k[2], k[3], k[4]]
    }

    /// Footprint half-diagonal; radius of the circumscribed circle.
    pub fn circumradius(&self) -> f64 {
        0.5 * (self.length * self.length + self.width * self.width).sqrt()
    }
}

/// Center and corners of an oriented box footprint, ordered
/// (center, front-left, front-right, rear-left, rear-right).
pub fn box_key_points(pose: &Pose2D, length: f64, width: f64) -> [[f64; 2]; 5] {
    let hl = 0.5 * length;
    let hw = 0.5 * width;
    [
        [pose.x, pose.y],
        pose.local_point_to_world([hl, hw]),
        pose.local_point_to_world([hl, -hw]),
        pose.local_point_to_world([-hl, hw]),
        pose.local_point_to_world([-hl, -hw]),
    ]
}

/// A full driving scene: map, tracks, and the annotation clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub map: BevMap,
    pub tracks: Vec<AgentTrack>,
    pub num_frames: usize,
    pub dt_annot: f64,
}

impl Scene {
    pub fn ego_index(&self) -> usize {
        self.tracks
            .iter()
            .position(|t| t.agent.role == AgentRole::Ego)
            .expect("validated scene has an ego track")
    }

    pub fn ego_track(&self) -> &AgentTrack {
        &self.tracks[self.ego_index()]
    }

    pub fn track_index(&self, agent_id: &str) -> Option<usize> {
        self.tracks.iter().position(|t| t.agent.agent_id == agent_id)
    }

    pub fn track(&self, agent_id: &str) -> Option<&AgentTrack> {
        self.track_index(agent_id).map(|i| &self.tracks[i])
    }

    /// Check every structural invariant; error messages name the offender.
    pub fn validate(&self) -> Result<(), SceneError> {
        let inv = |msg: String| Err(SceneError::Invalid(msg));
        if self.map.resolution <= 0.0 || !self.map.resolution.is_finite() {
            return inv(format!("map.resolution must be positive, got {}", self.map.resolution));
        }
        if self.map.rows == 0 || self.map.cols == 0 {
            return inv("map grid dimensions must be positive".into());
        }
        if self.map.drivable.len() != self.map.rows * self.map.cols {
            return inv(format!(
                "map.drivable has {} cells, expected rows*cols = {}",
                self.map.drivable.len(),
                self.map.rows * self.map.cols
            ));
        }
        if !(self.dt_annot > 0.0 && self.dt_annot.is_finite()) {
            return inv(format!("dt must be positive, got {}", self.dt_annot));
        }
        if self.num_frames == 0 {
            return inv("frames must be positive".into());
        }
        let ego_count = self
            .tracks
            .iter()
            .filter(|t| t.agent.role == AgentRole::Ego)
            .count();
        if ego_count != 1 {
            return inv(format!("scene must have exactly one ego agent, found {ego_count}"));
        }
        for track in &self.tracks {
            let id = &track.agent.agent_id;
            let a = &track.agent;
            if !(a.width > 0.0 && a.length >= a.width) {
                return inv(format!(
                    "agent {id}: dims must satisfy length >= width > 0, got {}x{}",
                    a.length, a.width
                ));
            }
            let mut last_t: Option<usize> = None;
            for p in &track.points {
                if let Some(prev) = last_t {
                    if p.t <= prev {
                        return inv(format!("agent {id}: track timesteps must be strictly increasing at t={}", p.t));
                    }
                }
                last_t = Some(p.t);
                if p.t >= self.num_frames {
                    return inv(format!("agent {id}: track index {} outside [0, {})", p.t, self.num_frames));
                }
                if !(p.pose.x.is_finite() && p.pose.y.is_finite() && p.pose.heading.is_finite()) {
                    return inv(format!("agent {id}: non-finite pose at t={}", p.t));
                }
                if !(p.speed.is_finite() && p.speed >= 0.0) {
                    return inv(format!("agent {id}: invalid speed {} at t={}", p.speed, p.t));
                }
            }
        }
        let ego = &self.tracks[self
            .tracks
            .iter()
            .position(|t| t.agent.role == AgentRole::Ego)
            .unwrap()];
        for f in 0..self.num_frames {
            if !ego.present_at(f) {
                return inv(format!("ego track missing at frame {f}"));
            }
        }
        Ok(())
    }
}

/// Pose of a track at an arbitrary time, by linear interpolation of position
/// and shortest-arc interpolation of heading between present samples.
pub fn interpolate_pose(track: &AgentTrack, t: f64, dt_annot: f64) -> Result<Pose2D, SceneError> {
    let pts: Vec<&TrackPoint> = track.present_points().collect();
    if pts.is_empty() {
        return Err(SceneError::Invalid(format!(
            "agent {}: no present samples to interpolate",
            track.agent.agent_id
        )));
    }
    let t_first = pts[0].t as f64 * dt_annot;
    let t_last = pts[pts.len() - 1].t as f64 * dt_annot;
    let eps = 1e-9;
    if t < t_first - eps || t > t_last + eps {
        return Err(SceneError::Invalid(format!(
            "time {t} outside track support [{t_first}, {t_last}] for agent {}",
            track.agent.agent_id
        )));
    }
    let t = t.clamp(t_first, t_last);
    // Find the bracketing present samples.
    let mut hi = 0;
    while hi < pts.len() && (pts[hi].t as f64) * dt_annot < t - eps {
        hi += 1;
    }
    if hi == 0 {
        return Ok(pts[0].pose);
    }
    if hi >= pts.len() {
        return Ok(pts[pts.len() - 1].pose);
    }
    let a = pts[hi - 1];
    let b = pts[hi];
    let ta = a.t as f64 * dt_annot;
    let tb = b.t as f64 * dt_annot;
    let u = (t - ta) / (tb - ta);
    let heading = a.pose.heading + wrap_angle(b.pose.heading - a.pose.heading) * u;
    Ok(Pose2D::new(
        a.pose.x + (b.pose.x - a.pose.x) * u,
        a.pose.y + (b.pose.y - a.pose.y) * u,
        heading,
    ))
}

/// Background vehicles that ever come within `proximity_radius` of the ego
/// center, subsampled uniformly to at most `k` ids. Output is sorted by id.
pub fn select_adversary_candidates<R: Rng>(
    scene: &Scene,
    k: usize,
    proximity_radius: f64,
    rng: &mut R,
) -> Vec<String> {
    let ego = scene.ego_track();
    let mut qualifying: Vec<String> = scene
        .tracks
        .iter()
        .filter(|t| {
            t.agent.role == AgentRole::Background && t.agent.category == AgentCategory::Vehicle
        })
        .filter(|t| {
            t.present_points().any(|p| {
                ego.state_at(p.t).is_some_and(|(ep, _)| {
                    let dx = p.pose.x - ep.x;
                    let dy = p.pose.y - ep.y;
                    (dx * dx + dy * dy).sqrt() <= proximity_radius
                })
            })
        })
        .map(|t| t.agent.agent_id.clone())
        .collect();
    qualifying.sort();
    if qualifying.len() <= k {
        return qualifying;
    }
    let chosen = rand::seq::index::sample(rng, qualifying.len(), k);
    let mut out: Vec<String> = chosen.iter().map(|i| qualifying[i].clone()).collect();
    out.sort();
    out
}
