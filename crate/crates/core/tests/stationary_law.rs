mod common;

use common::{close, feasible_case, Case};
use dispatchq::stationary::STORE_CUTOFF;
use dispatchq::{
    decoupled_stationary, joint_stationary_pmf, waiting_times, waiting_times_series,
    DispatchPolicy, Threshold,
};
use proptest::prelude::*;

fn threshold_index(p: &DispatchPolicy) -> i64 {
    match p.threshold {
        Threshold::Finite(m) => i64::from(m),
        Threshold::Infinite => 0,
    }
}

/// Inflow minus outflow at `(q1, q2)`, relative to the larger of the two.
fn balance_gap(case: &Case, q1: i64, q2: i64) -> f64 {
    let p = &case.policy;
    let mu = case.params.mu;
    let floor = -i64::from(p.buffer);
    let pi = |a: i64, b: i64| {
        if a < 0 || b < floor {
            0.0
        } else {
            joint_stationary_pmf(p, mu, a, b).unwrap()
        }
    };
    let here = pi(q1, q2);
    let out_rate =
        1.0 + if q1 > 0 { mu } else { 0.0 } + if q2 > floor { p.rate_at_state(q2) } else { 0.0 };
    let outflow = here * out_rate;
    let inflow =
        pi(q1 - 1, q2) + mu * pi(q1 + 1, q2 - 1) + p.rate_at_state(q2 + 1) * pi(q1, q2 + 1);
    (inflow - outflow).abs() / inflow.max(outflow)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn joint_law_balances_every_state(case in feasible_case()) {
        let floor = -i64::from(case.policy.buffer);
        let top = threshold_index(&case.policy) + 20;
        for q1 in 0..=20 {
            for q2 in floor..=top {
                let gap = balance_gap(&case, q1, q2);
                prop_assert!(gap <= 1e-9, "state ({q1},{q2}) gap {gap:e} for {:?}", case.policy);
            }
        }
    }

    #[test]
    fn joint_law_factorizes(case in feasible_case()) {
        let mu = case.params.mu;
        let nu = decoupled_stationary(&case.policy).unwrap();
        let floor = nu.first_state();
        for q2 in floor..floor + 15 {
            // summing the geometric q1 factor must give back the marginal
            let summed: f64 = (0..2000).map(|q1| joint_stationary_pmf(&case.policy, mu, q1, q2).unwrap()).sum();
            prop_assert!((summed - nu.mass(q2)).abs() <= 1e-10);
        }
        for q1 in 0..10i64 {
            let summed: f64 = nu.iter().map(|(q2, _)| joint_stationary_pmf(&case.policy, mu, q1, q2).unwrap()).sum();
            let geometric = (1.0 - 1.0 / mu) * mu.powi(-(q1 as i32));
            prop_assert!((summed + nu.tail_mass() * geometric - geometric).abs() <= 1e-10);
        }
    }

    #[test]
    fn decoupled_chain_is_in_detailed_balance(case in feasible_case()) {
        let nu = decoupled_stationary(&case.policy).unwrap();
        let stored: Vec<(i64, f64)> = nu.iter().collect();
        prop_assert!((stored.iter().map(|s| s.1).sum::<f64>() + nu.tail_mass() - 1.0).abs() <= 1e-12);
        for pair in stored.windows(2) {
            let ((q, lower), (_, upper)) = (pair[0], pair[1]);
            let up = lower;
            let down = upper * case.policy.rate_at_state(q + 1);
            prop_assert!((up - down).abs() <= 1e-10 * up.max(down), "q={q}: {up} vs {down}");
        }
    }

    #[test]
    fn riders_are_dispatched_at_the_order_rate(case in feasible_case()) {
        let nu = decoupled_stationary(&case.policy).unwrap();
        let floor = nu.first_state();
        let stored: f64 = nu
            .iter()
            .filter(|&(q, _)| q > floor)
            .map(|(q, mass)| case.policy.rate_at_state(q) * mass)
            .sum();
        // beyond the stored window every state dispatches at the tail rate
        let throughput = stored + case.policy.tail_rate * nu.tail_mass();
        prop_assert!((throughput - 1.0).abs() <= 1e-9, "throughput {throughput}");
        prop_assert!(nu.tail_mass() <= STORE_CUTOFF * 1e3);
    }

    #[test]
    fn series_matches_closed_form_for_blind_policies(l0 in 1.001f64..3.0, d in 0u32..60, mu in 1.05f64..3.0) {
        let params = dispatchq::SystemParams::new(mu, 3.0, 0.1);
        let p = DispatchPolicy::blind(l0, d);
        let closed = waiting_times(&p, &params).unwrap();
        let series = waiting_times_series(&p, &params).unwrap();
        prop_assert!(close(closed.order_wait, series.order_wait, 1e-10));
        prop_assert!(close(closed.rider_wait, series.rider_wait, 1e-10));
    }

    #[test]
    fn order_wait_never_beats_preparation_time(case in feasible_case()) {
        let w = waiting_times(&case.policy, &case.params).unwrap();
        prop_assert!(w.order_wait >= case.params.order_wait_floor() - 1e-12);
        prop_assert!(w.rider_wait >= 0.0 && w.rider_wait <= f64::from(case.policy.buffer) + 1e-12);
    }
}

#[test]
fn threshold_boundary_cases_balance() {
    // exercise the three regimes below, at and above the threshold explicitly
    let params = dispatchq::SystemParams::new(1.5, 1.5, 0.1);
    let policy = DispatchPolicy::new(vec![1.25, 0.4, 1.5], 1.45, 3, Threshold::Finite(4));
    let case = Case { params, policy };
    for q1 in 0..5 {
        for q2 in [3, 4, 5, 6, 7] {
            assert!(balance_gap(&case, q1, q2) <= 1e-12);
        }
    }
}
