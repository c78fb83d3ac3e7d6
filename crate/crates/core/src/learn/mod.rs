//! Multi-agent deterministic actor-critic learning, written from scratch:
//! dense networks with backpropagation, Adam, joint replay, centralized
//! critics, and the per-agent reward functions.

pub mod adam;
pub mod maddpg;
pub mod mlp;
pub mod replay;
pub mod rewards;

pub use maddpg::{decode_action, Agent, AgentSpec, DecodedAction, Maddpg, TrainDiagnostics};
pub use mlp::{Activation, Mlp};
pub use replay::{OptimizedAction, ReplayBuffer, Transition};
pub use rewards::{aris_reward, dual_mode_reward, uav_reward, RewardWeights};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("input has {got} entries, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("checkpoint version {0} is not supported")]
    CheckpointVersion(u32),
    #[error("checkpoint I/O at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint format: {0}")]
    Format(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Reward discount factor.
    pub gamma_d: f64,
    pub tau_soft: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Probability of a uniformly random exploratory action.
    pub epsilon: f64,
    /// Standard deviation of Gaussian exploration noise, in action units.
    pub noise_scale: f64,
    pub hidden: Vec<usize>,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            gamma_d: 0.95,
            tau_soft: 0.01,
            batch_size: 256,
            buffer_capacity: 500_000,
            epsilon: 0.1,
            noise_scale: 0.1,
            hidden: vec![128, 128],
        }
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    learner: Maddpg,
}

/// Writes every network, optimizer state, hyperparameter and the
/// exploration RNG state as JSON; floats round-trip exactly.
pub fn save_checkpoint(learner: &Maddpg, path: &Path) -> Result<(), LearnError> {
    let text = serde_json::to_string(&Checkpoint {
        version: CHECKPOINT_VERSION,
        learner: learner.clone(),
    })?;
    std::fs::write(path, text).map_err(|source| LearnError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Maddpg, LearnError> {
    let text = std::fs::read_to_string(path).map_err(|source| LearnError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let ck: Checkpoint = serde_json::from_str(&text)?;
    if ck.version != CHECKPOINT_VERSION {
        return Err(LearnError::CheckpointVersion(ck.version));
    }
    Ok(ck.learner)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let specs = [AgentSpec {
            state_dim: 3,
            action_dim: 3,
        }];
        let mut m = Maddpg::new(
            &specs,
            HyperParams {
                hidden: vec![5],
                ..HyperParams::default()
            },
            1,
            2,
        );
        // advance the exploration stream so its position is part of the state
        m.act_all(&[vec![0.1, 0.2, 0.3]], true);
        let dir = std::env::temp_dir().join(format!("uav-noma-ck-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ck.json");
        save_checkpoint(&m, &path).unwrap();
        let mut back = load_checkpoint(&path).unwrap();
        assert_eq!(back, m);
        let s = [vec![0.4, -0.2, 0.9]];
        assert_eq!(back.act_all(&s, true), m.act_all(&s, true));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
