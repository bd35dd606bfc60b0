use gradient_core::overlay::NodeId;
use gradient_core::streaming::{
    auction_round, generate_scenario_events, select_block, simulate, sweep, Action, Bid,
    BlockWindow, ParentSlots, Sampler, Scenario, ScenarioKind, StreamConfig, SOURCE,
};
use gradient_core::Execution;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small(kind: ScenarioKind) -> Scenario {
    Scenario {
        initial_joins: 40,
        second_count: 30,
        duration_s: 30.0,
        ..Scenario::reduced(kind)
    }
}

fn checked() -> StreamConfig {
    StreamConfig {
        check_invariants: true,
        ..StreamConfig::default()
    }
}

#[test]
fn invariants_hold_in_every_scenario() {
    for kind in ScenarioKind::ALL {
        for sampler in Sampler::ALL {
            for seed in [1, 2] {
                let run = simulate(&checked(), &small(kind), sampler, seed).unwrap();
                assert!(
                    run.invariants.holds(),
                    "{kind} {sampler} seed {seed}: {:?}",
                    run.invariants.violations
                );
                assert_eq!(run.invariants.steps_checked, 3_001);
            }
        }
    }
}

#[test]
fn sweep_is_identical_across_execution_modes() {
    let scenario = small(ScenarioKind::FlashCrowd);
    let config = StreamConfig::default();
    let seeds = [3, 4, 5];
    let seq = sweep(
        &config,
        &scenario,
        &Sampler::ALL,
        &seeds,
        Execution::Sequential,
    )
    .unwrap();
    let par = sweep(
        &config,
        &scenario,
        &Sampler::ALL,
        &seeds,
        Execution::Parallel,
    )
    .unwrap();
    assert_eq!(seq, par);
    for (runs, sampler) in seq.iter().zip(Sampler::ALL) {
        assert!(runs.iter().all(|r| r.metrics.sampler == sampler));
        assert_eq!(runs.iter().map(|r| r.seed).collect::<Vec<_>>(), seeds);
    }
}

#[test]
fn checking_does_not_change_the_run() {
    let scenario = small(ScenarioKind::Churn);
    let plain = simulate(&StreamConfig::default(), &scenario, Sampler::Gradient, 8).unwrap();
    let checked = simulate(&checked(), &scenario, Sampler::Gradient, 8).unwrap();
    assert_eq!(plain.metrics, checked.metrics);
}

#[test]
fn latency_never_below_the_buffer() {
    let config = StreamConfig::default();
    for kind in ScenarioKind::ALL {
        let run = simulate(&config, &small(kind), Sampler::Random, 6).unwrap();
        for &(t, l) in &run.metrics.latency_series {
            assert!(
                l >= config.buffer_seconds as f64,
                "{kind} t={t}: latency {l}"
            );
        }
    }
}

#[test]
fn scenario_events_are_ordered_and_consistent() {
    for kind in ScenarioKind::ALL {
        let scenario = Scenario::reduced(kind);
        let events = generate_scenario_events(&scenario, 10, 11).unwrap();
        assert!(events.windows(2).all(|w| w[0].time_us <= w[1].time_us));
        let mut alive = vec![SOURCE];
        for e in &events {
            assert_ne!(e.node, SOURCE);
            match e.action {
                Action::Join { class } => {
                    assert!((1..=10).contains(&class));
                    assert!(!alive.contains(&e.node));
                    alive.push(e.node);
                }
                Action::Fail => {
                    let pos = alive
                        .iter()
                        .position(|&n| n == e.node)
                        .expect("fails a live node");
                    alive.swap_remove(pos);
                }
            }
        }
    }
}

fn rank(x: (u32, u32)) -> (u32, std::cmp::Reverse<u32>) {
    (x.1, std::cmp::Reverse(x.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// The occupants after a round are the best-ranked bids among the old
    /// occupants and the valid new bids.
    #[test]
    fn auction_keeps_the_top_bids(
        capacity in 1usize..8,
        first in prop::collection::vec((1u32..20, 1u32..10), 0..10),
        second in prop::collection::vec((0u32..20, 1u32..10), 0..10),
        dead in prop::collection::vec(0u32..20, 0..4),
    ) {
        let owner = NodeId(0);
        let live = |c: NodeId| !dead.contains(&c.0);
        let to_bids = |v: &[(u32, u32)]| {
            v.iter().map(|&(c, a)| Bid { child: NodeId(c), amount: a }).collect::<Vec<_>>()
        };
        let mut slots = ParentSlots::new(owner, capacity);
        auction_round(&mut slots, &to_bids(&first), |_| true);
        let before: Vec<(u32, u32)> =
            slots.slots().iter().filter_map(|s| s.occupant.map(|(c, a)| (c.0, a))).collect();
        let out = auction_round(&mut slots, &to_bids(&second), live);

        let mut pool = before.clone();
        pool.extend(second.iter().copied().filter(|&(c, _)| c != 0 && live(NodeId(c))));
        pool.sort_by_key(|&x| std::cmp::Reverse(rank(x)));
        let mut want: Vec<(u32, u32)> = pool.into_iter().take(capacity).collect();
        let mut got: Vec<(u32, u32)> =
            slots.slots().iter().filter_map(|s| s.occupant.map(|(c, a)| (c.0, a))).collect();
        want.sort_unstable();
        got.sort_unstable();
        prop_assert_eq!(got, want);
        prop_assert!(slots.occupied() <= capacity);
        prop_assert_eq!(out.accepted.len() + out.rejected.len() + out.ignored.len(), second.len());
        prop_assert!(out.evicted.len() <= before.len());
    }

    #[test]
    fn selected_block_is_wanted(
        wanted in prop::collection::vec(any::<bool>(), 32),
        start in 0u64..10_000,
        q in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let window = BlockWindow { start, wanted: wanted.clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match select_block(&window, q, &mut rng) {
            Some(b) => {
                prop_assert!(b >= start && b < start + 32);
                prop_assert!(wanted[(b - start) as usize]);
            }
            None => prop_assert!(wanted.iter().all(|&w| !w)),
        }
    }
}
