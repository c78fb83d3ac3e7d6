//! One slot of the environment: move, sense, optimize, transmit, drain,
//! reward.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{Layout, Scenario, ScenarioError, Scheme};
use crate::channel::{build_channels, build_dualmode_channels, ChannelConstants, ChannelSet, PhaseShiftVector};
use crate::geometry::{apply_move, check_safety, MobilityLimits, Position};
use crate::learn::{aris_reward, decode_action, dual_mode_reward, uav_reward, AgentSpec};
use crate::noma::{compute_sinr, decode_order, oma_baseline_rates, rates_and_feasibility, AssociationMatrix, RadioParams};
use crate::optimize::{alternate_optimize, AoConfig, AoMode};
use crate::queueing::{step_queue, QueueState};
use crate::rng::{stream_rng, Stream};
use crate::C64;

/// Everything that happened in one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub slot: usize,
    /// Platform positions after moving (UAVs, then the reflector if any).
    pub positions: Vec<Position>,
    /// Per UAV: `true` when collecting.
    pub modes: Vec<bool>,
    /// Executed phase shifts of the (possibly stacked) surface.
    pub phases: Vec<f64>,
    /// Serving UAV of each GU.
    pub serving: Vec<Option<usize>>,
    pub sinr: Vec<Vec<f64>>,
    pub rates: Vec<Vec<f64>>,
    pub arrivals: Vec<f64>,
    /// Backlogs after admitting this slot's arrivals, before draining.
    pub backlog_before: Vec<f64>,
    pub backlog_after: Vec<f64>,
    pub collected: Vec<f64>,
    pub rewards: Vec<f64>,
    pub violations: Vec<bool>,
    /// Optimizer objective (unclamped sum rate) and iteration count.
    pub objective: f64,
    pub optimizer_iterations: usize,
    pub done: bool,
}

impl StepOutcome {
    pub fn total_collected(&self) -> f64 {
        self.collected.iter().sum()
    }
}

/// Simulator state for one scenario. GU positions are fixed per master seed;
/// everything else is reset per episode.
#[derive(Debug, Clone)]
pub struct Env {
    pub scenario: Scenario,
    pub gus: Vec<Position>,
    pub positions: Vec<Position>,
    pub modes: Vec<bool>,
    pub queue: QueueState,
    pub slot: usize,
    rp: RadioParams,
    limits: MobilityLimits,
    consts: ChannelConstants,
    arrivals_rng: ChaCha8Rng,
    fading_rng: ChaCha8Rng,
}

/// Samples GU ground positions for `scenario` from its layout stream.
pub fn sample_layout(scenario: &Scenario) -> Vec<Position> {
    let mut rng = stream_rng(scenario.seed, Stream::Layout, 0);
    let side = scenario.area_side;
    match &scenario.layout {
        Layout::Uniform => (0..scenario.num_gus)
            .map(|_| Position::new(rng.random_range(0.0..=side), rng.random_range(0.0..=side), 0.0))
            .collect(),
        Layout::Clustered { pois, std_dev } => (0..scenario.num_gus)
            .map(|k| {
                let [cx, cy] = pois[k % pois.len()];
                let (dx, dy) = if *std_dev > 0.0 {
                    let n = Normal::new(0.0, *std_dev).expect("positive deviation");
                    (n.sample(&mut rng), n.sample(&mut rng))
                } else {
                    (0.0, 0.0)
                };
                Position::new((cx + dx).clamp(0.0, side), (cy + dy).clamp(0.0, side), 0.0)
            })
            .collect(),
    }
}

/// Start positions: explicit, clustered near the centre, or spread on a
/// circle of radius `side / 4` (the reflector, if any, at the centre).
pub fn start_positions(scenario: &Scenario) -> Vec<Position> {
    let h = scenario.altitude;
    let side = scenario.area_side;
    if let Some(starts) = &scenario.starts {
        return starts.iter().map(|[x, y]| Position::new(*x, *y, h)).collect();
    }
    let centre = side / 2.0;
    let n = scenario.num_platforms();
    if scenario.shared_start {
        let gap = 2.0 * scenario.mobility.d_min.max(1.0);
        return (0..n)
            .map(|i| Position::new((centre + gap * i as f64).min(side), centre, h))
            .collect();
    }
    let m = scenario.num_uavs;
    let mut out: Vec<Position> = (0..m)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
            Position::new(centre + side / 4.0 * a.cos(), centre + side / 4.0 * a.sin(), h)
        })
        .collect();
    if scenario.scheme == Scheme::FixedAris {
        out.push(Position::new(centre, centre, h));
    }
    out
}

fn unit(x: f64, side: f64) -> f64 {
    2.0 * x / side - 1.0
}

impl Env {
    pub fn new(scenario: Scenario) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let gus = sample_layout(&scenario);
        let positions = start_positions(&scenario);
        let queue = QueueState::empty(scenario.num_gus, scenario.queue.d_max, scenario.queue.arrival_max);
        Ok(Self {
            rp: scenario.radio.params(),
            limits: scenario.limits(),
            consts: scenario.channel_constants(),
            modes: vec![true; scenario.num_uavs],
            arrivals_rng: stream_rng(scenario.seed, Stream::Arrivals, 0),
            fading_rng: stream_rng(scenario.seed, Stream::Fading, 0),
            gus,
            positions,
            queue,
            slot: 0,
            scenario,
        })
    }

    pub fn radio(&self) -> &RadioParams {
        &self.rp
    }

    /// Restores the start state of episode `episode` and returns the
    /// observations.
    pub fn reset(&mut self, episode: u64) -> Vec<Vec<f64>> {
        let s = &self.scenario;
        self.positions = start_positions(s);
        self.modes = vec![true; s.num_uavs];
        self.queue = QueueState::empty(s.num_gus, s.queue.d_max, s.queue.arrival_max);
        self.slot = 0;
        self.arrivals_rng = stream_rng(s.seed, Stream::Arrivals, episode);
        self.fading_rng = stream_rng(s.seed, Stream::Fading, episode);
        self.observe()
    }

    pub fn num_agents(&self) -> usize {
        self.scenario.num_platforms()
    }

    pub fn agent_specs(&self) -> Vec<AgentSpec> {
        let s = &self.scenario;
        let state_dim = 2 + 2 * s.num_platforms() + 2 * s.num_gus;
        let action_dim = if s.scheme == Scheme::DmSwitching { 3 } else { 2 };
        vec![
            AgentSpec {
                state_dim,
                action_dim
            };
            s.num_platforms()
        ]
    }

    /// Per-agent observation in `[-1, 1]`: own position, every platform
    /// position, GU backlogs, and the line-of-sight SNR to each GU.
    pub fn observe(&self) -> Vec<Vec<f64>> {
        let side = self.scenario.area_side;
        let d_max = self.scenario.queue.d_max;
        let snr_scale = self.rp.p_g / self.rp.sigma2;
        (0..self.positions.len())
            .map(|i| {
                let me = self.positions[i];
                let mut f = vec![unit(me.x, side), unit(me.y, side)];
                for p in &self.positions {
                    f.push(unit(p.x, side));
                    f.push(unit(p.y, side));
                }
                f.extend(self.queue.backlog.iter().map(|b| 2.0 * b / d_max - 1.0));
                f.extend(self.gus.iter().map(|g| {
                    let d = me.distance(g).max(1e-9);
                    let snr = snr_scale * self.consts.beta * d.powf(-self.consts.alpha0);
                    2.0 * (snr.ln_1p() / 20.0).tanh() - 1.0
                }));
                f
            })
            .collect()
    }

    /// Executes one slot with one learned action per agent.
    pub fn step(&mut self, actions: &[Vec<f64>], mode: AoMode) -> StepOutcome {
        let s = self.scenario.clone();
        let (m_count, k_count) = (s.num_uavs, s.num_gus);
        assert_eq!(actions.len(), self.num_agents(), "one action per agent");

        // move and check separation
        let decoded: Vec<_> = actions.iter().map(|a| decode_action(a, s.mobility.v_max)).collect();
        for (p, d) in self.positions.iter_mut().zip(&decoded) {
            *p = apply_move(*p, d.direction, d.speed, &self.limits);
        }
        let safety = check_safety(&self.positions, &self.limits);
        let mut violations: Vec<bool> = (0..self.positions.len()).map(|i| safety.involves(i)).collect();

        let arrivals = self.queue.sample_arrivals(&mut self.arrivals_rng);
        let admitted = self.queue.admitted(&arrivals);

        self.modes = match s.scheme {
            Scheme::DmSwitching => decoded.iter().map(|d| d.active.unwrap_or(true)).collect(),
            _ => vec![true; m_count],
        };

        let mut rates = vec![vec![0.0; k_count]; m_count];
        let mut sinr = vec![vec![0.0; k_count]; m_count];
        let mut serving = vec![None; k_count];
        let mut phases = Vec::new();
        let mut objective = 0.0;
        let mut iterations = 0;
        let mut reflected: Vec<Vec<f64>> = vec![vec![0.0; k_count]; self.positions.len()];

        let uavs = &self.positions[..m_count];
        let built: Option<(ChannelSet, Vec<usize>)> = match s.scheme {
            Scheme::FixedAris => build_channels(uavs, &self.positions[m_count], &self.gus, &self.consts, &mut self.fading_rng)
                .ok()
                .map(|cs| (cs, (0..m_count).collect())),
            _ => build_dualmode_channels(uavs, &self.gus, &self.consts, &mut self.fading_rng)
                .ok()
                .and_then(|dm| dm.stacked(&self.modes).ok()),
        };
        match &built {
            None => violations.iter_mut().for_each(|v| *v = true),
            Some((cs, _)) if cs.num_uavs() == 0 => violations.iter_mut().for_each(|v| *v = true),
            Some((cs, receivers)) => {
                let cfg = AoConfig { mode, ..s.optimizer.ao };
                let res = alternate_optimize(cs, &self.rp, Some(&admitted), &cfg).expect("shapes are consistent");
                objective = res.objective;
                iterations = res.iterations();
                phases = res.theta.phases();
                let gains = cs.gains(&res.theta);
                let strength = cs.optimistic_gains();
                let order = decode_order(&strength, &res.assoc);
                let local_sinr = compute_sinr(&gains, &res.assoc, &order, &self.rp);
                let local_rates = match s.access.oma() {
                    None => rates_and_feasibility(&local_sinr, &self.rp).rates,
                    Some(oma) => oma_baseline_rates(&gains, &res.assoc, &self.rp, oma),
                };
                for (row, &m) in receivers.iter().enumerate() {
                    sinr[m] = local_sinr[row].clone();
                    rates[m] = local_rates[row].clone();
                }
                for (k, slot) in serving.iter_mut().enumerate() {
                    *slot = res.assoc.serving(k).map(|r| receivers[r]);
                }
                reflected = self.reflected_terms(cs, &res.theta, &res.assoc, receivers);
            }
        }

        let (next_queue, collected) = step_queue(&self.queue, &arrivals, &rates, s.mobility.tau);
        let snr_scale = self.rp.p_g / self.rp.sigma2;
        let w = &s.rewards;
        let rewards: Vec<f64> = (0..self.num_agents())
            .map(|i| {
                let active = uav_reward(&rates.get(i).cloned().unwrap_or_default(), &admitted, s.mobility.tau, violations[i], w);
                let ones = vec![vec![1.0; k_count]];
                let passive = aris_reward(&ones, &reflected[i..=i], snr_scale, violations[i], w);
                match s.scheme {
                    Scheme::FixedAris if i == m_count => passive,
                    Scheme::DmSwitching => dual_mode_reward(self.modes[i], active, passive),
                    _ => active,
                }
            })
            .collect();

        self.queue = next_queue;
        self.slot += 1;
        StepOutcome {
            slot: self.slot - 1,
            positions: self.positions.clone(),
            modes: self.modes.clone(),
            phases,
            serving,
            sinr,
            rates,
            arrivals,
            backlog_before: admitted,
            backlog_after: self.queue.backlog.clone(),
            collected,
            rewards,
            violations,
            objective,
            optimizer_iterations: iterations,
            done: self.slot >= s.slots,
        }
    }

    /// Per platform and GU, the magnitude of the part of the served GU's
    /// channel reflected by that platform's surface: the dedicated reflector
    /// in fixed-ARIS, the UAV's own block of the stacked surface otherwise.
    fn reflected_terms(
        &self,
        cs: &ChannelSet,
        theta: &PhaseShiftVector,
        assoc: &AssociationMatrix,
        receivers: &[usize],
    ) -> Vec<Vec<f64>> {
        let s = &self.scenario;
        let l = s.elements;
        let mut out = vec![vec![0.0; s.num_gus]; self.positions.len()];
        for k in 0..s.num_gus {
            let Some(row) = assoc.serving(k) else { continue };
            let _ = receivers[row];
            match s.scheme {
                Scheme::FixedAris => out[s.num_uavs][k] = cs.reflected_channel(theta, row, k).norm(),
                _ => {
                    for (j, slot) in out.iter_mut().enumerate().take(s.num_uavs) {
                        let block = j * l..(j + 1) * l;
                        let sum = cs.cascade[row][k][block.clone()]
                            .iter()
                            .zip(&theta.as_slice()[block])
                            .fold(C64::new(0.0, 0.0), |acc, (c, t)| acc + c * t);
                        slot[k] = sum.norm();
                    }
                }
            }
        }
        out
    }
}
