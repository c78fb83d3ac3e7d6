//! Centralized-critic, decentralized-actor deterministic policy gradient for
//! several agents.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::mlp::{Activation, Gradients, Mlp};
use super::replay::{ReplayBuffer, Transition};
use super::HyperParams;

/// Observation and action sizes of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub state_dim: usize,
    pub action_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub spec: AgentSpec,
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
}

impl Agent {
    fn new<R: Rng + ?Sized>(spec: AgentSpec, joint_dim: usize, hp: &HyperParams, rng: &mut R) -> Self {
        let mut actor_sizes = vec![spec.state_dim];
        actor_sizes.extend(&hp.hidden);
        actor_sizes.push(spec.action_dim);
        let mut critic_sizes = vec![joint_dim];
        critic_sizes.extend(&hp.hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, Activation::Tanh, Activation::Tanh, rng);
        let critic = Mlp::new(&critic_sizes, Activation::Tanh, Activation::Identity, rng);
        Self {
            spec,
            actor_opt: Adam::new(&actor, hp.actor_lr),
            critic_opt: Adam::new(&critic, hp.critic_lr),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
        }
    }

    /// Policy output for `state`, optionally perturbed for exploration: with
    /// probability `epsilon` a uniform action, otherwise Gaussian noise of
    /// scale `noise_scale` added and clipped to `[-1, 1]`.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], explore: bool, hp: &HyperParams, rng: &mut R) -> Vec<f64> {
        let out = self.actor.forward(state).expect("state matches the actor input");
        if !explore {
            return out;
        }
        if hp.epsilon > 0.0 && rng.random::<f64>() < hp.epsilon {
            return (0..out.len()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        }
        if hp.noise_scale > 0.0 {
            let noise = Normal::new(0.0, hp.noise_scale).expect("positive scale");
            out.iter().map(|a| (a + noise.sample(rng)).clamp(-1.0, 1.0)).collect()
        } else {
            out
        }
    }
}

/// Decoded movement and mode of a learned action `(a0, a1[, logit])`: the
/// first two components are a velocity in units of the speed limit (norm
/// clipped to 1), the optional third is the mode logit, active iff `>= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedAction {
    pub direction: f64,
    pub speed: f64,
    pub active: Option<bool>,
}

pub fn decode_action(action: &[f64], v_max: f64) -> DecodedAction {
    let (x, y) = (action[0], action[1]);
    DecodedAction {
        direction: y.atan2(x),
        speed: x.hypot(y).min(1.0) * v_max,
        active: action.get(2).map(|&logit| logit >= 0.0),
    }
}

/// Losses observed during one update, per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainDiagnostics {
    pub critic_loss: Vec<f64>,
    pub policy_value: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Maddpg {
    pub agents: Vec<Agent>,
    pub hp: HyperParams,
    rng: ChaCha8Rng,
}

impl Maddpg {
    /// Fresh networks for `specs`, weights drawn from `init_seed`, exploration
    /// noise from `explore_seed`.
    pub fn new(specs: &[AgentSpec], hp: HyperParams, init_seed: u64, explore_seed: u64) -> Self {
        let joint: usize = specs.iter().map(|s| s.state_dim + s.action_dim).sum();
        let mut init = ChaCha8Rng::seed_from_u64(init_seed);
        let agents = specs.iter().map(|&s| Agent::new(s, joint, &hp, &mut init)).collect();
        Self {
            agents,
            hp,
            rng: ChaCha8Rng::seed_from_u64(explore_seed),
        }
    }

    /// Resets the exploration stream, e.g. at the start of an episode.
    pub fn reseed_exploration(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn act_all(&mut self, states: &[Vec<f64>], explore: bool) -> Vec<Vec<f64>> {
        let hp = self.hp.clone();
        let rng = &mut self.rng;
        self.agents
            .iter()
            .zip(states)
            .map(|(a, s)| a.act(s, explore, &hp, rng))
            .collect()
    }

    fn joint(states: &[Vec<f64>], actions: &[Vec<f64>]) -> Vec<f64> {
        states.iter().chain(actions).flatten().copied().collect()
    }

    fn action_offset(&self, i: usize) -> usize {
        let states: usize = self.agents.iter().map(|a| a.spec.state_dim).sum();
        states + self.agents[..i].iter().map(|a| a.spec.action_dim).sum::<usize>()
    }

    /// Samples a batch and updates every agent; `None` while the buffer holds
    /// fewer transitions than the batch size.
    pub fn train_from(&mut self, buffer: &mut ReplayBuffer) -> Option<TrainDiagnostics> {
        let batch: Vec<Transition> = buffer.sample(self.hp.batch_size)?.into_iter().cloned().collect();
        Some(self.train_step(&batch))
    }

    /// One critic step, one actor step, then a soft target update, for each
    /// agent in turn.
    pub fn train_step(&mut self, batch: &[Transition]) -> TrainDiagnostics {
        let n = batch.len() as f64;
        let target_actions: Vec<Vec<Vec<f64>>> = batch
            .iter()
            .map(|t| {
                self.agents
                    .iter()
                    .zip(&t.next_states)
                    .map(|(a, s)| a.target_actor.forward(s).expect("state size"))
                    .collect()
            })
            .collect();
        let next_joint: Vec<Vec<f64>> = batch
            .iter()
            .zip(&target_actions)
            .map(|(t, a)| Self::joint(&t.next_states, a))
            .collect();
        let joint: Vec<Vec<f64>> = batch.iter().map(|t| Self::joint(&t.states, &t.actions)).collect();
        let mut diag = TrainDiagnostics {
            critic_loss: Vec::new(),
            policy_value: Vec::new(),
        };
        for i in 0..self.agents.len() {
            let gamma = self.hp.gamma_d;
            let agent = &mut self.agents[i];
            let mut grads = Gradients::zeros_like(&agent.critic);
            let mut loss = 0.0;
            for ((t, x), x_next) in batch.iter().zip(&joint).zip(&next_joint) {
                let q_next = agent.target_critic.forward(x_next).expect("joint size")[0];
                let y = t.rewards[i] + if t.done { 0.0 } else { gamma * q_next };
                let cache = agent.critic.forward_cached(x).expect("joint size");
                let err = cache.output()[0] - y;
                loss += err * err / n;
                agent.critic.backward(&cache, &[2.0 * err / n], &mut grads);
            }
            agent.critic_opt.step(&mut agent.critic, &grads);
            diag.critic_loss.push(loss);

            let (grads, value) = self.policy_gradient(i, batch);
            let agent = &mut self.agents[i];
            agent.actor_opt.step(&mut agent.actor, &grads);
            diag.policy_value.push(value);
        }
        let tau = self.hp.tau_soft;
        for agent in &mut self.agents {
            agent.target_actor.soft_update(&agent.actor, tau);
            agent.target_critic.soft_update(&agent.critic, tau);
        }
        diag
    }

    /// Gradient of `-mean Q_i(s, a)` with respect to agent `i`'s actor
    /// parameters, where agent `i`'s stored action is replaced by its current
    /// policy output. Also returns `mean Q_i`.
    pub fn policy_gradient(&self, i: usize, batch: &[Transition]) -> (Gradients, f64) {
        let n = batch.len() as f64;
        let agent = &self.agents[i];
        let offset = self.action_offset(i);
        let dim = agent.spec.action_dim;
        let mut grads = Gradients::zeros_like(&agent.actor);
        let mut value = 0.0;
        for t in batch {
            let actor_cache = agent.actor.forward_cached(&t.states[i]).expect("state size");
            let mut x = Self::joint(&t.states, &t.actions);
            x[offset..offset + dim].copy_from_slice(actor_cache.output());
            let critic_cache = agent.critic.forward_cached(&x).expect("joint size");
            value += critic_cache.output()[0] / n;
            let dq = agent.critic.input_gradient(&critic_cache, &[1.0]);
            let upstream: Vec<f64> = dq[offset..offset + dim].iter().map(|g| -g / n).collect();
            agent.actor.backward(&actor_cache, &upstream, &mut grads);
        }
        (grads, value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::replay::OptimizedAction;

    fn hp() -> HyperParams {
        HyperParams {
            hidden: vec![8, 8],
            batch_size: 8,
            ..HyperParams::default()
        }
    }

    fn specs() -> Vec<AgentSpec> {
        vec![
            AgentSpec {
                state_dim: 3,
                action_dim: 2,
            },
            AgentSpec {
                state_dim: 4,
                action_dim: 3,
            },
        ]
    }

    fn batch(rng: &mut ChaCha8Rng, n: usize) -> Vec<Transition> {
        let dims = specs();
        (0..n)
            .map(|_| {
                let s: Vec<Vec<f64>> = dims
                    .iter()
                    .map(|d| (0..d.state_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect();
                Transition {
                    next_states: s.iter().map(|v| v.iter().map(|x| x * 0.5).collect()).collect(),
                    actions: dims
                        .iter()
                        .map(|d| (0..d.action_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                        .collect(),
                    rewards: vec![rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0)],
                    optimized: OptimizedAction::default(),
                    done: false,
                    states: s,
                }
            })
            .collect()
    }

    #[test]
    fn greedy_action_is_deterministic() {
        let mut m = Maddpg::new(&specs(), hp(), 1, 2);
        let s = vec![vec![0.1, 0.2, 0.3], vec![0.0, -0.5, 0.5, 1.0]];
        assert_eq!(m.act_all(&s, false), m.act_all(&s, false));
        let quiet = HyperParams {
            epsilon: 0.0,
            noise_scale: 0.0,
            ..hp()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = &m.agents[0];
        assert_eq!(a.act(&s[0], true, &quiet, &mut rng), a.actor.forward(&s[0]).unwrap());
        let explored = m.act_all(&s, true);
        assert!(explored.iter().flatten().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn decoding_conventions() {
        let d = decode_action(&[0.0, 1.0, 0.0], 50.0);
        assert_eq!(d.active, Some(true));
        assert!((d.direction - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(d.speed, 50.0);
        assert_eq!(decode_action(&[1.0, 1.0, -1e-9], 10.0).active, Some(false));
        assert_eq!(decode_action(&[1.0, 1.0], 10.0).speed, 10.0);
        assert!((decode_action(&[0.3, 0.4], 10.0).speed - 5.0).abs() < 1e-12);
    }

    #[test]
    fn hard_target_copy() {
        let mut m = Maddpg::new(
            &specs(),
            HyperParams {
                tau_soft: 1.0,
                ..hp()
            },
            3,
            4,
        );
        let b = batch(&mut ChaCha8Rng::seed_from_u64(5), 8);
        m.train_step(&b);
        for a in &m.agents {
            assert_eq!(a.target_actor, a.actor);
            assert_eq!(a.target_critic, a.critic);
        }
    }

    #[test]
    fn critic_regresses_immediate_rewards() {
        let mut m = Maddpg::new(
            &specs(),
            HyperParams {
                gamma_d: 0.0,
                actor_lr: 0.0,
                ..hp()
            },
            6,
            7,
        );
        let b = batch(&mut ChaCha8Rng::seed_from_u64(8), 16);
        let losses: Vec<f64> = (0..100).map(|_| m.train_step(&b).critic_loss[0]).collect();
        assert!(losses[99] < 0.5 * losses[0], "{} -> {}", losses[0], losses[99]);
        let late: f64 = losses[80..].iter().sum();
        let early: f64 = losses[..20].iter().sum();
        assert!(late < early);
    }

    #[test]
    fn policy_gradient_matches_finite_differences() {
        let mut m = Maddpg::new(&specs(), hp(), 9, 10);
        let b = batch(&mut ChaCha8Rng::seed_from_u64(11), 5);
        for i in 0..2 {
            let (g, _) = m.policy_gradient(i, &b);
            let h = 1e-5;
            for p in 0..m.agents[i].actor.num_params() {
                let orig = *m.agents[i].actor.param_mut(p);
                *m.agents[i].actor.param_mut(p) = orig + h;
                let up = m.policy_gradient(i, &b).1;
                *m.agents[i].actor.param_mut(p) = orig - h;
                let down = m.policy_gradient(i, &b).1;
                *m.agents[i].actor.param_mut(p) = orig;
                let fd = -(up - down) / (2.0 * h);
                let an = g.get(p);
                assert!((fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-4), "{an} vs {fd}");
            }
        }
    }

    #[test]
    fn insufficient_buffer_is_a_no_op() {
        let mut m = Maddpg::new(&specs(), hp(), 1, 1);
        let before = m.clone();
        let mut buf = ReplayBuffer::new(100, 0);
        for t in batch(&mut ChaCha8Rng::seed_from_u64(1), 7) {
            buf.push(t);
        }
        assert!(m.train_from(&mut buf).is_none());
        assert_eq!(m, before);
    }
}
