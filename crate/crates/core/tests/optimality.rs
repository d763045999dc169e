use dispatchq::optimizer::{binding_rider_wait, patience_load};
use dispatchq::waiting::blind_rider_wait;
use dispatchq::{optimize_dispatch, rider_wait_lower_bound, smallest_buffer, SystemParams};
use proptest::prelude::*;

const RHO_STEP: f64 = 1e-4;
const MAX_BUFFER: u32 = 100;

/// Smallest rider wait over every feasible `(ρ, d)` on a fixed grid.
fn grid_minimum(cap: f64, t_star: f64) -> f64 {
    let rho_min = 1.0 / cap;
    let steps = ((1.0 - rho_min) / RHO_STEP) as usize;
    let mut best = f64::INFINITY;
    for d in 0..=MAX_BUFFER {
        for k in 0..steps {
            let rho = rho_min + k as f64 * RHO_STEP;
            if patience_load(rho, u64::from(d)) <= t_star {
                best = best.min(blind_rider_wait(rho, d));
            }
        }
    }
    best
}

#[test]
fn algorithm_beats_the_brute_force_grid() {
    for t_star in [0.01, 0.05, 0.1] {
        let params = SystemParams::new(1.5, 1.5, t_star);
        let opt = optimize_dispatch(&params).unwrap();
        let grid = grid_minimum(1.5, t_star);
        assert!(
            opt.rider_wait <= grid + 1e-12,
            "T*={t_star}: {} vs grid {grid}",
            opt.rider_wait
        );
        assert!(
            grid - opt.rider_wait <= 1e-3,
            "T*={t_star}: {} vs grid {grid}",
            opt.rider_wait
        );
        assert!(opt.constraint_slack.abs() <= 1e-9);
    }
}

#[test]
fn binding_rider_wait_increases_with_the_buffer() {
    let d_low = smallest_buffer(1.0 / 1.5, 0.1).unwrap();
    let h: Vec<f64> = (d_low..=d_low + 10)
        .map(|d| binding_rider_wait(d, 0.1).unwrap())
        .collect();
    assert!(h.windows(2).all(|w| w[1] > w[0]), "{h:?}");
}

#[test]
fn tradeoff_bound_holds_on_the_feasible_grid() {
    let params = SystemParams::new(1.5, 1.5, 0.1);
    let bound = rider_wait_lower_bound(&params).value().unwrap();
    assert!((bound - 0.115_761_554_338_835_7).abs() < 1e-12);
    let mut checked = 0;
    for i in 1..=500 {
        let l0 = 1.0 + 0.5 * f64::from(i) / 500.0;
        for d in 0..=200u32 {
            if patience_load(1.0 / l0, u64::from(d)) <= params.t_star {
                assert!(
                    blind_rider_wait(1.0 / l0, d) >= bound - 1e-9,
                    "λ0={l0} d={d}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 1000);
}

proptest! {
    #[test]
    fn constraint_binds_whenever_full_capacity_is_too_slow(cap in 1.05f64..4.0, t_star in 1e-3f64..2.0) {
        let params = SystemParams::new(1.5, cap, t_star);
        let opt = optimize_dispatch(&params).unwrap();
        prop_assert!(opt.lambda0 > 1.0 && opt.lambda0 <= cap);
        if 1.0 / (cap - 1.0) > t_star {
            prop_assert!(opt.constraint_slack.abs() <= 1e-9, "slack {}", opt.constraint_slack);
        } else {
            prop_assert_eq!(opt.buffer, 0);
            prop_assert_eq!(opt.rider_wait, 0.0);
        }
    }

    #[test]
    fn no_feasible_neighbour_does_better(cap in 1.2f64..3.0, t_star in 5e-3f64..0.5, d in 0u32..40, frac in 0.0f64..1.0) {
        let params = SystemParams::new(1.5, cap, t_star);
        let opt = optimize_dispatch(&params).unwrap();
        let rho = 1.0 / cap + frac * (1.0 - 1.0 / cap);
        if patience_load(rho, u64::from(d)) <= t_star {
            prop_assert!(blind_rider_wait(rho, d) >= opt.rider_wait - 1e-9);
        }
    }
}
