//! Episode rollouts: act, step, store, learn.

use serde::{Deserialize, Serialize};

use super::config::Scheme;
use super::sim::Env;
use crate::learn::{Maddpg, OptimizedAction, ReplayBuffer, Transition};
use crate::rng::{derive_seed, Stream};

/// Evaluation episodes draw their streams from this index offset so they never
/// replay a training episode's arrivals or fading.
pub const EVAL_EPISODE_OFFSET: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOptions {
    pub episode: u64,
    /// Explore, store transitions and update the networks.
    pub train: bool,
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: u64,
    /// Data collected over the episode, in nats.
    pub throughput_nats: f64,
    pub throughput_bits: f64,
    /// Mean per-slot reward, averaged over agents.
    pub mean_reward: f64,
    /// Slots in which at least one platform violated a constraint.
    pub violations: usize,
    pub slots: usize,
    /// Number of slots each UAV spent collecting.
    pub active_slots: Vec<usize>,
    /// Data collected in each slot; `throughput_nats` is their sum.
    pub collected_per_slot: Vec<f64>,
    /// Smallest and largest GU backlog seen at any point of the episode.
    pub backlog_range: (f64, f64),
    pub mean_critic_loss: Option<f64>,
}

/// One platform in one slot, for trajectory output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub episode: u64,
    pub slot: usize,
    pub platform: usize,
    pub x: f64,
    pub y: f64,
    /// `"active"`, `"passive"` or `"reflector"`.
    pub mode: String,
    pub reward: f64,
}

/// Runs one episode. When `opts.train` is set the learner explores, every
/// slot is pushed to `buffer`, and one update runs per slot once the buffer
/// holds a full batch.
pub fn run_episode(
    env: &mut Env,
    learner: &mut Maddpg,
    mut buffer: Option<&mut ReplayBuffer>,
    opts: EpisodeOptions,
) -> (EpisodeMetrics, Vec<TraceRecord>) {
    let seed = env.scenario.seed;
    let stream_index = if opts.train {
        opts.episode
    } else {
        EVAL_EPISODE_OFFSET + opts.episode
    };
    let mode = if opts.train {
        env.scenario.optimizer.train_mode
    } else {
        env.scenario.optimizer.eval_mode
    };
    learner.reseed_exploration(derive_seed(seed, Stream::Exploration, stream_index));
    let mut states = env.reset(stream_index);

    let m = env.scenario.num_uavs;
    let mut collected = 0.0;
    let mut reward_sum = 0.0;
    let mut violations = 0;
    let mut active_slots = vec![0; m];
    let mut losses = Vec::new();
    let mut trace = Vec::new();
    let mut slots = 0;
    let mut per_slot = Vec::with_capacity(env.scenario.slots);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    loop {
        let actions = learner.act_all(&states, opts.train);
        let out = env.step(&actions, mode);
        let next_states = env.observe();
        slots += 1;
        collected += out.total_collected();
        per_slot.push(out.total_collected());
        for &b in out.backlog_before.iter().chain(&out.backlog_after) {
            lo = lo.min(b);
            hi = hi.max(b);
        }
        reward_sum += out.rewards.iter().sum::<f64>() / out.rewards.len() as f64;
        violations += usize::from(out.violations.iter().any(|&v| v));
        for (c, &a) in active_slots.iter_mut().zip(&out.modes) {
            *c += usize::from(a);
        }
        if opts.trace {
            for (i, p) in out.positions.iter().enumerate() {
                let mode = if i >= m {
                    "reflector"
                } else if out.modes[i] {
                    "active"
                } else {
                    "passive"
                };
                trace.push(TraceRecord {
                    episode: opts.episode,
                    slot: out.slot,
                    platform: i,
                    x: p.x,
                    y: p.y,
                    mode: mode.to_string(),
                    reward: out.rewards[i],
                });
            }
        }
        if opts.train {
            if let Some(buf) = buffer.as_deref_mut() {
                buf.push(Transition {
                    states: std::mem::take(&mut states),
                    actions,
                    optimized: OptimizedAction {
                        phases: out.phases.clone(),
                        serving: out.serving.clone(),
                    },
                    rewards: out.rewards.clone(),
                    next_states: next_states.clone(),
                    done: out.done,
                });
                if let Some(d) = learner.train_from(buf) {
                    losses.push(d.critic_loss.iter().sum::<f64>() / d.critic_loss.len().max(1) as f64);
                }
            }
        }
        states = next_states;
        if out.done {
            break;
        }
    }
    debug_assert!(env.scenario.scheme == Scheme::DmSwitching || active_slots.iter().all(|&c| c == slots));
    let metrics = EpisodeMetrics {
        episode: opts.episode,
        throughput_nats: collected,
        throughput_bits: collected / std::f64::consts::LN_2,
        mean_reward: reward_sum / slots as f64,
        violations,
        slots,
        active_slots,
        collected_per_slot: per_slot,
        backlog_range: (lo, hi),
        mean_critic_loss: (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64),
    };
    (metrics, trace)
}
