#![allow(dead_code)]

use dispatchq::{DispatchPolicy, SystemParams, Threshold};
use proptest::prelude::*;

/// Environment plus a policy that is admissible for it.
#[derive(Debug, Clone)]
pub struct Case {
    pub params: SystemParams,
    pub policy: DispatchPolicy,
}

pub fn threshold() -> impl Strategy<Value = Threshold> {
    prop_oneof![
        3 => (0u32..8).prop_map(Threshold::Finite),
        1 => Just(Threshold::Infinite),
    ]
}

/// Rates stay at or below capacity, so every case is feasible.
pub fn feasible_case() -> impl Strategy<Value = Case> {
    (1.1f64..2.5, 1.2f64..3.0, 0.01f64..1.0)
        .prop_flat_map(|(mu, cap, t_star)| {
            (
                Just(SystemParams::new(mu, cap, t_star)),
                0.0f64..=1.0,
                prop::collection::vec(0.05f64..=1.0, 0..4),
                0.0f64..=1.0,
                0u32..7,
                threshold(),
            )
        })
        .prop_map(|(params, a, prefix, t, d, threshold)| {
            let cap = params.cap_lambda;
            let l0 = 1.02 + a * (cap - 1.02);
            let mut rates = vec![l0];
            rates.extend(prefix.iter().map(|f| f * cap));
            let tail = 1.02 + t * (cap - 1.02);
            Case {
                params,
                policy: DispatchPolicy::new(rates, tail, d, threshold),
            }
        })
}

/// Cases for the truncated-chain solver: rates kept away from 1 so the box stays small.
pub fn oracle_case() -> impl Strategy<Value = Case> {
    (1.3f64..2.2, 1.3f64..2.0)
        .prop_flat_map(|(mu, cap)| {
            (
                Just(SystemParams::new(mu, cap, 0.1)),
                0.0f64..=1.0,
                prop::collection::vec(0.3f64..=1.0, 0..3),
                0.0f64..=1.0,
                0u32..5,
                0u32..5,
            )
        })
        .prop_map(|(params, a, prefix, t, d, m)| {
            let cap = params.cap_lambda;
            let l0 = 1.15 + a * (cap - 1.15);
            let mut rates = vec![l0];
            rates.extend(prefix.iter().map(|f| f * cap));
            let tail = 1.15 + t * (cap - 1.15);
            Case {
                params,
                policy: DispatchPolicy::new(rates, tail, d, Threshold::Finite(m)),
            }
        })
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
