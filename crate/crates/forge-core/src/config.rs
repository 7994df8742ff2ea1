//! Global configuration: every tunable in one serializable struct.
//!
//! Defaults follow the reference hyperparameter set (scoring weights,
//! planning horizon, refinement rounds, temperature) plus the simulator and
//! evaluation knobs documented per field.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionConfig {
    /// Number of diffusion steps in the schedule.
    pub num_steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    /// Truncation step for mutation re-denoising.
    pub t_trunc: usize,
    /// Hidden width of the denoiser MLP.
    pub hidden_width: usize,
    /// Number of hidden layers.
    pub hidden_layers: usize,
    /// Synthetic training corpus size.
    pub corpus_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            num_steps: 50,
            beta_min: 1e-4,
            beta_max: 0.2,
            t_trunc: 15,
            hidden_width: 128,
            hidden_layers: 2,
            corpus_size: 5000,
            epochs: 30,
            batch_size: 64,
            learning_rate: 0.01,
            momentum: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    /// LQR weight on lateral offset error.
    pub q_lat: f64,
    /// LQR weight on heading error.
    pub q_head: f64,
    /// LQR weight on station (along-track) error.
    pub q_s: f64,
    /// LQR weight on speed error.
    pub q_v: f64,
    /// LQR steering effort weight.
    pub r_steer: f64,
    /// LQR acceleration effort weight.
    pub r_acc: f64,
    /// Steering angle limit, radians.
    pub steer_limit: f64,
    /// Acceleration limits, m/s^2.
    pub a_min: f64,
    pub a_max: f64,
    /// Speed cap, m/s.
    pub v_max: f64,
    /// Euler sub-steps per annotation period.
    pub substeps: usize,
    /// Front/rear axle distance from CG as a fraction of vehicle length.
    pub axle_ratio: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            q_lat: 4.0,
            q_head: 1.0,
            q_s: 1.0,
            q_v: 0.5,
            r_steer: 8.0,
            r_acc: 1.0,
            steer_limit: 0.6,
            a_min: -6.0,
            a_max: 4.0,
            v_max: 25.0,
            substeps: 10,
            axle_ratio: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerConfig {
    /// Scale of the uniform random score each candidate starts with.
    pub init_scale: f64,
    /// Penalty ratio of corner violations relative to center violations.
    pub corner_weight: f64,
    pub dac_weight: f64,
    pub cr_weight: f64,
    pub ac_weight: f64,
    /// Drivable-area step weights run quadratically from `dac_step_from` down
    /// to `dac_step_to`; collision weights share the same shape.
    pub dac_step_from: f64,
    pub dac_step_to: f64,
    pub col_step_from: f64,
    pub col_step_to: f64,
    /// Challenge step weights run linearly from `ac_step_from` up to
    /// `ac_step_to`.
    pub ac_step_from: f64,
    pub ac_step_to: f64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            init_scale: 1e-3,
            corner_weight: 0.2,
            dac_weight: 5.0,
            cr_weight: 10.0,
            ac_weight: 1.0,
            dac_step_from: 1.0,
            dac_step_to: 0.85,
            col_step_from: 1.0,
            col_step_to: 0.85,
            ac_step_from: 0.7,
            ac_step_to: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    /// Candidate batch size per round.
    pub batch: usize,
    /// Number of refinement rounds (1 = plain best-of-batch).
    pub rounds: usize,
    /// Softmax temperature for resampling.
    pub temperature: f64,
    /// Planning horizon in annotation steps.
    pub horizon: usize,
    /// Frames between planning keyframes; defaults to the horizon.
    pub keyframe_stride: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            batch: 64,
            rounds: 5,
            temperature: 1.0,
            horizon: 12,
            keyframe_stride: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    /// Half-extent of the ego-centered containment box, meters.
    pub area_half_extent: f64,
    /// Radius the adversary must enter at least once, meters.
    pub close_radius: f64,
    /// Interpolated sub-frame samples per annotation interval for the
    /// ego-safety overlap check.
    pub midpoint_samples: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            area_half_extent: 50.0,
            close_radius: 8.0,
            midpoint_samples: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Collision-rate horizons, seconds.
    pub horizons: Vec<f64>,
    /// IDM headway time, seconds.
    pub idm_headway: f64,
    /// IDM minimum gap, meters.
    pub idm_min_gap: f64,
    /// IDM maximum acceleration, m/s^2.
    pub idm_accel: f64,
    /// IDM/reactive comfortable deceleration, m/s^2.
    pub comfort_decel: f64,
    /// Reactive planner time-to-collision trigger, seconds.
    pub ttc_trigger: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            horizons: vec![1.0, 2.0, 3.0],
            idm_headway: 1.5,
            idm_min_gap: 2.0,
            idm_accel: 1.5,
            comfort_decel: 3.0,
            ttc_trigger: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Candidate adversaries tried per scene.
    pub per_scene_candidates: usize,
    /// Accepted scenarios emitted per scene (top-ranked by challenge).
    pub emit_per_scene: usize,
    /// Radius for "comes close to the ego" candidate selection, meters.
    pub proximity_radius: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            per_scene_candidates: 10,
            emit_per_scene: 1,
            proximity_radius: 20.0,
        }
    }
}

/// The complete tunable surface of the pipeline.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub diffusion: DiffusionConfig,
    pub physics: PhysicsConfig,
    pub scorer: ScorerConfig,
    pub refine: RefineConfig,
    pub validation: ValidationConfig,
    pub eval: EvalConfig,
    pub dataset: DatasetConfig,
}

impl GlobalConfig {
    /// Parse a config file, filling unspecified fields with defaults.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Hex SHA-256 of the canonical JSON encoding; logged in run manifests.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let bytes = crate::scene::canonical_json_bytes(&value);
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_hyperparameters() {
        let cfg = GlobalConfig::default();
        assert_eq!(cfg.scorer.init_scale, 1e-3);
        assert_eq!(cfg.scorer.corner_weight, 0.2);
        assert_eq!(cfg.refine.horizon, 12);
        assert_eq!(cfg.scorer.dac_weight, 5.0);
        assert_eq!(cfg.scorer.cr_weight, 10.0);
        assert_eq!(cfg.scorer.ac_weight, 1.0);
        assert_eq!(cfg.refine.temperature, 1.0);
        assert_eq!(cfg.refine.rounds, 5);
        assert_eq!((cfg.scorer.dac_step_from, cfg.scorer.dac_step_to), (1.0, 0.85));
        assert_eq!((cfg.scorer.col_step_from, cfg.scorer.col_step_to), (1.0, 0.85));
        assert_eq!((cfg.scorer.ac_step_from, cfg.scorer.ac_step_to), (0.7, 1.0));
    }

    #[test]
    fn partial_file_overrides_only_named_fields() {
        let cfg = GlobalConfig::from_json(r#"{"refine": {"rounds": 2}}"#).unwrap();
        assert_eq!(cfg.refine.rounds, 2);
        assert_eq!(cfg.refine.batch, 64);
        assert_eq!(cfg.scorer.cr_weight, 10.0);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(GlobalConfig::from_json(r#"{"refinement": {}}"#).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = GlobalConfig::default();
        let mut b = GlobalConfig::default();
        assert_eq!(a.hash(), b.hash());
        b.refine.rounds = 4;
        assert_ne!(a.hash(), b.hash());
    }
}
