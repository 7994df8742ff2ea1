//! Adversarial driving scenario generation.
//!
//! The pipeline turns an ordinary driving scene into a challenging one by
//! re-planning a single background vehicle: candidate trajectories are drawn
//! from an unconditional diffusion model, made physically feasible by an
//! LQR-tracked kinematic bicycle simulator, scored for drivable-area
//! compliance, collision avoidance, and closeness to the ego vehicle, and
//! iteratively refined by softmax resampling plus truncated re-denoising.
//! Accepted scenes can be rasterized to BEV animations and stress-tested
//! against simple surrogate ego planners.

pub mod config;
pub mod diffusion;
pub mod eval;
pub mod physics;
pub mod refine;
pub mod render;
pub mod rng;
pub mod scene;
pub mod scorer;

pub use config::GlobalConfig;
pub use scene::{AgentBox, AgentCategory, AgentRole, AgentTrack, BevMap, Pose2D, Scene};
