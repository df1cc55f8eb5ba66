//! Parameter-shared soft double Q-learning over the tracking world.
//!
//! All pursuers act through one pair of online Q-networks and write into one
//! replay buffer; training alternates whole-episode collection with a block of
//! gradient updates.

mod config;
mod error;
mod learner;
mod optim;
mod policy;
mod replay;
mod rollout;
mod targets;
mod train;

pub use config::{AlphaSchedule, EpsilonSchedule, PolicyMode, SoftPolicySource, TrainConfig};
pub use error::{Error, Result};
pub use learner::{q_values, Learner, QNets, UpdateStats};
pub use optim::{clip_global_norm, Adam};
pub use policy::{argmax, entropy, policy_distribution, sample_categorical, select_action, select_from_values, Exploration};
pub use replay::{ReplayBuffer, Transition};
pub use rollout::{collect_episode, EpisodeStats};
pub use targets::{greedy_min_target, hard_double_q_target, huber, huber_grad, soft_double_q_target};
pub use train::{checkpoint_name, sample_task, train, CurveRow, TrainOutcome};
