//! Meta-SAC: soft actor-critic with a learned meta-critic loss.

pub mod losses;
pub mod normalizer;
pub mod replay;
pub mod sac;
pub mod train;

pub use losses::{actor_objective, critic_loss, meta_critic_loss, meta_gradient, td_target, MetaProblem};
pub use normalizer::RunningNormalizer;
pub use replay::{Batch, ReplayBuffer};
pub use sac::{network_widths, ActorStep, MetaSacAgent, SacHyper, UpdateStats};
pub use train::{
    evaluate_policy, final_window_mean, run_random_policy, train, write_training_log, EpisodeLog, PolicyEvaluation,
    RunStreams, TRAINING_LOG_HEADER,
};
