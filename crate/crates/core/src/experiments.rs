//! Reusable experiment drivers: train-then-evaluate runs and the two-UAV
//! separation sweep comparing two collecting UAVs against one collecting
//! UAV assisted by a reflecting one.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::{build_dualmode_channels, ChannelConstants, ChannelSet};
use crate::env::{run_episode, Env, EpisodeMetrics, EpisodeOptions, Scenario, ScenarioError};
use crate::geometry::Position;
use crate::learn::{Maddpg, ReplayBuffer};
use crate::noma::RadioParams;
use crate::optimize::{alternate_optimize, AoConfig};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub training: Vec<EpisodeMetrics>,
    pub evaluation: Vec<EpisodeMetrics>,
}

impl RunReport {
    /// Mean evaluation throughput in nats.
    pub fn eval_throughput(&self) -> f64 {
        let n = self.evaluation.len().max(1) as f64;
        self.evaluation.iter().map(|e| e.throughput_nats).sum::<f64>() / n
    }
}

/// Fresh learner for `env`, seeded from the scenario's master seed.
pub fn new_learner(env: &Env) -> Maddpg {
    let s = &env.scenario;
    Maddpg::new(
        &env.agent_specs(),
        s.learning.clone(),
        derive_seed(s.seed, Stream::Init, 0),
        derive_seed(s.seed, Stream::Exploration, 0),
    )
}

/// Trains for `scenario.episodes` episodes, then evaluates the greedy policy
/// for `scenario.eval_episodes` episodes. `on_episode` sees every episode's
/// metrics as they finish (training first, then evaluation).
pub fn train_and_evaluate(
    scenario: &Scenario,
    mut on_episode: impl FnMut(&EpisodeMetrics, bool),
) -> Result<(RunReport, Maddpg), ScenarioError> {
    let mut env = Env::new(scenario.clone())?;
    let mut learner = new_learner(&env);
    let mut buffer = ReplayBuffer::new(
        scenario.learning.buffer_capacity,
        derive_seed(scenario.seed, Stream::Replay, 0),
    );
    let mut training = Vec::with_capacity(scenario.episodes);
    for e in 0..scenario.episodes {
        let opts = EpisodeOptions {
            episode: e as u64,
            train: true,
            trace: false,
        };
        let (m, _) = run_episode(&mut env, &mut learner, Some(&mut buffer), opts);
        on_episode(&m, true);
        training.push(m);
    }
    let evaluation = evaluate(&mut env, &mut learner, scenario.eval_episodes, |m| on_episode(m, false)).0;
    Ok((RunReport { training, evaluation }, learner))
}

/// Greedy rollouts of `learner`; also returns the concatenated trace.
pub fn evaluate(
    env: &mut Env,
    learner: &mut Maddpg,
    episodes: usize,
    mut on_episode: impl FnMut(&EpisodeMetrics),
) -> (Vec<EpisodeMetrics>, Vec<crate::env::TraceRecord>) {
    let mut out = Vec::with_capacity(episodes);
    let mut trace = Vec::new();
    for e in 0..episodes {
        let opts = EpisodeOptions {
            episode: e as u64,
            train: false,
            trace: true,
        };
        let (m, t) = run_episode(env, learner, None, opts);
        on_episode(&m);
        out.push(m);
        trace.extend(t);
    }
    (out, trace)
}

/// Settings of the separation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationSweep {
    pub separations: Vec<f64>,
    pub num_gus: usize,
    pub elements: usize,
    pub area_side: f64,
    pub altitude: f64,
    /// Number of random GU layouts averaged per separation.
    pub layouts: usize,
    pub seed: u64,
    pub radio: RadioParams,
    pub ao: AoConfig,
}

impl Default for SeparationSweep {
    fn default() -> Self {
        Self {
            separations: vec![5.0, 25.0, 50.0, 100.0, 200.0, 400.0],
            num_gus: 6,
            elements: 8,
            area_side: 500.0,
            altitude: 30.0,
            layouts: 20,
            seed: 0,
            radio: RadioParams::default(),
            ao: AoConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationPoint {
    pub separation: f64,
    /// Mean optimized sum rate with both UAVs collecting, nats per slot.
    pub two_active: f64,
    /// Mean optimized sum rate with one UAV collecting and the other
    /// reflecting (the better of the two role assignments).
    pub passive_active: f64,
}

/// Places two UAVs symmetrically about the centre of the area at each
/// separation and compares the two operating modes on the same GU layouts.
pub fn separation_sweep(cfg: &SeparationSweep) -> Vec<SeparationPoint> {
    let consts = ChannelConstants {
        elements: cfg.elements,
        ..ChannelConstants::default()
    };
    let layouts: Vec<Vec<Position>> = (0..cfg.layouts as u64)
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, Stream::Layout, i);
            (0..cfg.num_gus)
                .map(|_| {
                    Position::new(
                        rng.random_range(0.0..=cfg.area_side),
                        rng.random_range(0.0..=cfg.area_side),
                        0.0,
                    )
                })
                .collect()
        })
        .collect();
    let c = cfg.area_side / 2.0;
    cfg.separations
        .iter()
        .map(|&d| {
            let uavs = [
                Position::new(c - d / 2.0, c, cfg.altitude),
                Position::new(c + d / 2.0, c, cfg.altitude),
            ];
            let (mut two, mut pa) = (0.0, 0.0);
            for gus in &layouts {
                // fading is off by default, so the generator is never drawn from
                let mut rng = stream_rng(cfg.seed, Stream::Fading, 0);
                let dm = build_dualmode_channels(&uavs, gus, &consts, &mut rng).expect("distinct positions");
                let solve = |modes: &[bool]| {
                    let (cs, _) = dm.stacked(modes).expect("valid modes");
                    alternate_optimize(&cs, &cfg.radio, None, &cfg.ao).expect("consistent shapes").objective
                };
                two += solve(&[true, true]);
                pa += solve(&[true, false]).max(solve(&[false, true]));
            }
            let n = cfg.layouts.max(1) as f64;
            SeparationPoint {
                separation: d,
                two_active: two / n,
                passive_active: pa / n,
            }
        })
        .collect()
}

fn cn<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Channel set with independent unit-variance complex Gaussian entries on
/// every link, for solver benchmarks that should not depend on geometry.
pub fn rayleigh_instance<R: Rng + ?Sized>(rng: &mut R, num_uavs: usize, num_gus: usize, elements: usize) -> ChannelSet {
    ChannelSet::from_links(
        (0..num_uavs).map(|_| (0..num_gus).map(|_| cn(rng)).collect()).collect(),
        (0..num_uavs).map(|_| (0..elements).map(|_| cn(rng)).collect()).collect(),
        (0..num_gus).map(|_| (0..elements).map(|_| cn(rng)).collect()).collect(),
    )
    .expect("consistent shapes")
}
