//! Proximal policy optimization with recurrent networks.

pub mod config;
pub mod returns;
pub mod rollout;
pub mod train;
pub mod update;

pub use config::{RunConfig, TrainingParams};
pub use returns::{dual_discount_returns, normalize};
pub use rollout::{action_seed, collect_batch, collect_episode, episode_seed, EpisodeRollout};
pub use train::{checkpoint_path, train, TrainError, Trainer, UpdateMetrics, METRICS_HEADER};
pub use update::{clipped_surrogate, evaluate_policy, kl_servo, ServoState};
