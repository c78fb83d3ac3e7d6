use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uav_noma::env::{run_episode, sample_layout, Env, EpisodeOptions, Layout, Scenario, Scheme};
use uav_noma::experiments::new_learner;
use uav_noma::learn::ReplayBuffer;
use uav_noma::optimize::{AoMode, PhaseStrategy};

fn small(scheme: Scheme, num_uavs: usize) -> Scenario {
    let mut s = Scenario::new(num_uavs, 4);
    s.scheme = scheme;
    s.elements = 4;
    s.slots = 6;
    s.area_side = 300.0;
    s.learning.hidden = vec![8];
    s.learning.batch_size = 4;
    s
}

fn random_actions(rng: &mut ChaCha8Rng, env: &Env) -> Vec<Vec<f64>> {
    env.agent_specs()
        .iter()
        .map(|s| (0..s.action_dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect()
}

#[test]
fn queues_stay_in_bounds_and_throughput_is_the_sum_of_slots() {
    for (i, scheme) in [Scheme::DmSwitching, Scheme::FixedAris, Scheme::AllActive].into_iter().enumerate() {
        let mut s = small(scheme, 2);
        s.queue.d_max = 8.0;
        s.queue.arrival_max = 5.0;
        let d_max = s.queue.d_max;
        let mut env = Env::new(s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        env.reset(0);
        let mut total = 0.0;
        loop {
            let out = env.step(&random_actions(&mut rng, &env), AoMode::TwoStep);
            for (b, a) in out.backlog_before.iter().zip(&out.backlog_after) {
                assert!((0.0..=d_max).contains(b));
                assert!((0.0..=d_max).contains(a));
            }
            let drained: f64 = out.backlog_before.iter().zip(&out.backlog_after).map(|(b, a)| b - a).sum();
            assert!((drained - out.total_collected()).abs() < 1e-9);
            total += out.total_collected();
            if out.done {
                break;
            }
        }
        assert!(total >= 0.0);

        let mut env = Env::new(env.scenario.clone()).unwrap();
        let mut learner = new_learner(&env);
        let mut buffer = ReplayBuffer::new(64, 1);
        let opts = EpisodeOptions {
            episode: 0,
            train: true,
            trace: false,
        };
        let (m, _) = run_episode(&mut env, &mut learner, Some(&mut buffer), opts);
        assert_eq!(m.slots, 6);
        assert_eq!(buffer.len(), 6);
        assert!((m.throughput_bits - m.throughput_nats / std::f64::consts::LN_2).abs() < 1e-9);
    }
}

#[test]
fn dual_mode_with_every_uav_active_matches_all_active() {
    let mut dm = Env::new(small(Scheme::DmSwitching, 2)).unwrap();
    let mut aa = Env::new(small(Scheme::AllActive, 2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    dm.reset(3);
    aa.reset(3);
    for _ in 0..6 {
        let moves = random_actions(&mut rng, &aa);
        let with_modes: Vec<Vec<f64>> = moves.iter().map(|a| vec![a[0], a[1], 0.7]).collect();
        let a = aa.step(&moves, AoMode::Full);
        let d = dm.step(&with_modes, AoMode::Full);
        assert_eq!(a.rates, d.rates);
        assert_eq!(a.collected, d.collected);
        assert_eq!(a.rewards, d.rewards);
    }
}

#[test]
fn dual_mode_with_one_passive_uav_matches_fixed_reflector() {
    let mut fixed = small(Scheme::FixedAris, 1);
    let mut dual = small(Scheme::DmSwitching, 2);
    for s in [&mut fixed, &mut dual] {
        s.starts = Some(vec![[100.0, 150.0], [160.0, 150.0]]);
        s.optimizer.ao.phases.strategy = PhaseStrategy::Heuristic;
    }
    let mut fa = Env::new(fixed).unwrap();
    let mut dm = Env::new(dual).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    fa.reset(1);
    dm.reset(1);
    for _ in 0..6 {
        let moves = random_actions(&mut rng, &fa);
        let with_modes = vec![vec![moves[0][0], moves[0][1], 0.5], vec![moves[1][0], moves[1][1], -0.5]];
        for mode in [AoMode::TwoStep, AoMode::Full] {
            let mut fa2 = fa.clone();
            let mut dm2 = dm.clone();
            let f = fa2.step(&moves, mode);
            let d = dm2.step(&with_modes, mode);
            assert_eq!(d.modes, vec![true, false]);
            assert!((f.rates[0].iter().sum::<f64>() - d.rates[0].iter().sum::<f64>()).abs() < 1e-9);
            assert!((f.rewards[0] - d.rewards[0]).abs() < 1e-9);
            assert!((f.rewards[1] - d.rewards[1]).abs() <= 1e-9 * f.rewards[1].abs().max(1.0));
        }
        fa.step(&moves, AoMode::TwoStep);
        dm.step(&with_modes, AoMode::TwoStep);
    }
}

#[test]
fn all_passive_slot_collects_nothing_and_is_penalised() {
    let mut env = Env::new(small(Scheme::DmSwitching, 2)).unwrap();
    env.reset(0);
    let out = env.step(&[vec![0.0, 0.0, -1.0], vec![0.0, 0.0, -1.0]], AoMode::TwoStep);
    assert_eq!(out.total_collected(), 0.0);
    assert!(out.violations.iter().all(|&v| v));
    assert!(out.rewards.iter().all(|&r| r < 0.0));
}

#[test]
fn identical_seeds_give_identical_episodes() {
    let run = || {
        let mut s = small(Scheme::DmSwitching, 2);
        s.seed = 42;
        let mut env = Env::new(s).unwrap();
        let mut learner = new_learner(&env);
        let mut buffer = ReplayBuffer::new(64, 3);
        let mut out = Vec::new();
        for e in 0..3 {
            let opts = EpisodeOptions {
                episode: e,
                train: true,
                trace: true,
            };
            out.push(serde_json::to_string(&run_episode(&mut env, &mut learner, Some(&mut buffer), opts)).unwrap());
        }
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn uniform_layout_has_the_expected_mean() {
    let mut sum = (0.0, 0.0);
    let n = 10_000;
    let mut s = Scenario::new(1, 1);
    for seed in 0..n {
        s.seed = seed;
        let g = sample_layout(&s)[0];
        sum.0 += g.x;
        sum.1 += g.y;
    }
    // standard error of the mean is side / sqrt(12 n), about 2.9 m
    let (mx, my) = (sum.0 / n as f64, sum.1 / n as f64);
    assert!((mx - 500.0).abs() < 15.0 && (my - 500.0).abs() < 15.0, "{mx} {my}");
}

#[test]
fn clustered_layout_without_spread_sits_on_the_point_of_interest() {
    let mut s = Scenario::new(1, 5);
    s.layout = Layout::Clustered {
        pois: vec![[500.0, 500.0]],
        std_dev: 0.0,
    };
    assert!(sample_layout(&s).iter().all(|g| g.x == 500.0 && g.y == 500.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn observations_are_normalised(seed in any::<u64>(), steps in 1usize..4) {
        let mut s = small(Scheme::FixedAris, 2);
        s.seed = seed;
        let mut env = Env::new(s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        env.reset(0);
        for _ in 0..steps {
            env.step(&random_actions(&mut rng, &env), AoMode::TwoStep);
            for (obs, spec) in env.observe().iter().zip(env.agent_specs()) {
                prop_assert_eq!(obs.len(), spec.state_dim);
                prop_assert!(obs.iter().all(|v| (-1.0..=1.0).contains(v)));
            }
        }
    }
}
