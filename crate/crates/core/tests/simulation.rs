use dispatchq::sim::simulate_observed;
use dispatchq::{
    simulate, waiting_times, DispatchPolicy, SimulationConfig, SystemParams, Threshold,
};
use proptest::prelude::*;

fn env() -> SystemParams {
    SystemParams::new(1.5, 1.5, 0.1)
}

fn within_3se(estimate: f64, stderr: f64, reference: f64) -> bool {
    (estimate - reference).abs() <= 3.0 * stderr
}

#[test]
fn blind_policy_waits_match_the_closed_form() {
    let policy = DispatchPolicy::blind(1.25, 2);
    let r = simulate(&SimulationConfig::new(policy, env(), 3_000_000, 2024)).unwrap();
    assert!(
        within_3se(r.order_wait_mean, r.order_wait_stderr, 4.56),
        "{r:?}"
    );
    assert!(
        within_3se(r.rider_wait_mean, r.rider_wait_stderr, 0.56),
        "{r:?}"
    );
    assert!(
        within_3se(r.realized_rider_rate, r.realized_rider_rate_stderr, 1.0),
        "{r:?}"
    );
}

#[test]
fn disclosed_policy_waits_match_the_series() {
    let policy = DispatchPolicy::new(vec![1.3, 0.7, 1.1], 1.45, 2, Threshold::Finite(1));
    let exact = waiting_times(&policy, &env()).unwrap();
    let r = simulate(&SimulationConfig::new(policy, env(), 3_000_000, 77)).unwrap();
    assert!(
        within_3se(r.order_wait_mean, r.order_wait_stderr, exact.order_wait),
        "{r:?} vs {exact:?}"
    );
    assert!(
        within_3se(r.rider_wait_mean, r.rider_wait_stderr, exact.rider_wait),
        "{r:?} vs {exact:?}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sample_paths_respect_the_queue_rules(
        l0 in 1.05f64..1.5,
        slow in 0.2f64..1.5,
        tail in 1.05f64..1.5,
        d in 0u32..5,
        m in 0u32..4,
        seed in any::<u64>(),
    ) {
        let policy = DispatchPolicy::new(vec![l0, slow], tail, d, Threshold::Finite(m));
        let cfg = SimulationConfig::new(policy.clone(), env(), 20_000, seed);
        let floor = -i64::from(d);
        let mut finished = Vec::new();
        let mut picked = Vec::new();
        let mut ok = true;
        simulate_observed(&cfg, |s| {
            ok &= s.prepared == 0 || s.riders_waiting == 0;
            ok &= s.q2() >= floor;
            let expected = if s.q2() > floor { policy.rate_at_state(s.q2()) } else { 0.0 };
            ok &= s.rider_rate == expected;
            if s.q2() <= i64::from(m) && s.q2() > floor {
                ok &= s.rider_rate == l0;
            }
            finished.extend(s.finished_order);
            picked.extend(s.picked_order);
        })
        .unwrap();
        prop_assert!(ok);
        prop_assert!(picked.len() <= finished.len());
        prop_assert_eq!(&finished[..picked.len()], &picked[..]);
    }

    #[test]
    fn same_seed_same_result(seed in any::<u64>(), d in 0u32..4) {
        let cfg = SimulationConfig::new(DispatchPolicy::blind(1.3, d), env(), 10_000, seed);
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        prop_assert_eq!(a.order_wait_mean.to_bits(), b.order_wait_mean.to_bits());
        prop_assert_eq!(a.rider_wait_mean.to_bits(), b.rider_wait_mean.to_bits());
        prop_assert_eq!(a.events, b.events);
    }
}
