//! Per-PDC double deep Q-learning: binary state encoding, a 25-32-32-3 ReLU
//! network trained with Adam from a replay buffer, a periodically synced
//! target network, and the constraint-aware reward.

pub mod adam;
pub mod agent;
pub mod checkpoint;
pub mod encoding;
pub mod network;
pub mod replay;
pub mod reward;
pub mod train;

pub use agent::{
    action_delta, ddqn_target, ddqn_target_from_values, epsilon_at, select_action, DdqnAgent,
    TrainConfig, NUM_ACTIONS,
};
pub use checkpoint::{Checkpoint, CheckpointError};
pub use encoding::{decode_state, encode_state, EncodedState};
pub use network::{argmax, Mlp, LAYER_SIZES};
pub use reward::{compute_reward, RewardParams};
pub use train::{train, train_agents, EpisodeStats, TrainError, TrainOutcome};
