//! Simulation substrate for multi-pursuer, multi-target tracking.
//!
//! Pursuers move with unicycle kinematics and pick from a small set of motion
//! primitives. Targets follow a noisy double integrator inside a square map.
//! A shared bank of extended Kalman filters keeps a Gaussian belief per target,
//! and each pursuer sees that bank as a set of per-target feature vectors
//! expressed in its own frame.

pub mod action;
pub mod belief;
pub mod encoding;
pub mod environment;
mod error;
pub mod geometry;
pub mod stream;
pub mod trace;

pub use action::{ActionPrimitive, N_ACTIONS};
pub use belief::{FilterBank, FilterParams, GaussianBelief, RangeBearingMeasurement};
pub use encoding::{FeatureSet, TargetFeature, FEATURE_DIM};
pub use environment::{Environment, StepResult, WorldConfig, WorldState};
pub use error::{Error, Result};
pub use geometry::{Pose2, TargetPhase};
pub use stream::SeededStream;
