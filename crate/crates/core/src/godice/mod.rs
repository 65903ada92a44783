//! Goal-conditioned, option-aware stationary distribution correction.
//!
//! Four networks are trained from offline data: a discriminator `Ψ` that
//! separates expert from offline tuples, a critic `ν` over
//! `(previous option, state, goal)`, and the hierarchical policy
//! `(π_H, π_L)`. Option labels of unannotated trajectories are inferred by
//! Viterbi decoding under slowly moving target copies of the policy.

mod config;
mod encode;
mod losses;
mod policy;
pub(crate) mod train;
mod viterbi;

pub use config::{Mode, TrainConfig};
pub use encode::Encoder;
pub use losses::{
    advantage, critic_loss, disc_inputs, discriminator_loss, importance_weights, log_ratio_reward,
    policy_loss, raw_importance_weights, reward_from_logits, CriticLoss, DiscriminatorLoss,
    PolicyLoss, ABSORBING_ACTION, REWARD_CLIP,
};
pub use policy::{polyak_update, HierarchicalPolicy};
pub use policy::HierarchicalActor;
pub use train::{IterationLosses, Trainer, TrainerState};
pub use viterbi::{decode_tables, viterbi_segment, ViterbiTables};
