mod common;

use bktirt::bkt::{fit_baum_welch, forward_filter, sequence_loglik, simulate_panel, FitOptions};
use bktirt::{BktParams, Constraints};
use common::brute_force_loglik;
use proptest::prelude::*;

fn interior() -> impl Strategy<Value = f64> {
    0.01..0.99f64
}

fn params() -> impl Strategy<Value = BktParams> {
    (interior(), interior(), interior(), interior(), interior())
        .prop_map(|(i, l, f, s, g)| BktParams::new(i, l, f, s, g))
}

proptest! {
    #[test]
    fn forward_matches_enumeration(p in params(), x in prop::collection::vec(0u8..2, 1..10)) {
        let fwd = forward_filter(&p, &x).unwrap();
        prop_assert!((fwd.log_likelihood - brute_force_loglik(&p, &x)).abs() < 1e-10);
    }

    #[test]
    fn predictive_is_a_probability(p in params(), x in prop::collection::vec(0u8..2, 1..30)) {
        let fwd = forward_filter(&p, &x).unwrap();
        prop_assert!(fwd.posterior.iter().chain(&fwd.predictive).all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn relabelling_states_keeps_likelihood(p in params(), x in prop::collection::vec(0u8..2, 1..20)) {
        let a = forward_filter(&p, &x).unwrap().log_likelihood;
        let b = forward_filter(&p.label_swapped(), &x).unwrap().log_likelihood;
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn em_trace_never_decreases(
        truth in params(), init in params(), seed in 0u64..1000, people in 5u32..40, attempts in 2u32..12, which in 0usize..4,
    ) {
        let cons = [Constraints::NONE, Constraints::classic(), Constraints::identified(), Constraints::both()][which];
        let panel = simulate_panel(&truth, people, attempts, 3, seed).unwrap();
        let mut start = init;
        if cons.classic {
            start.p_forget = 0.0;
        }
        if cons.identified {
            start.p_slip *= 0.5;
            start.p_guess *= 0.5;
        }
        let report = fit_baum_welch(&panel, 3, &start, cons, FitOptions::default()).unwrap();
        for w in report.loglik_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
        let final_ll = sequence_loglik(&report.params, &panel, 3).unwrap();
        prop_assert!((final_ll - report.loglik_trace.last().unwrap()).abs() < 1e-9);
    }
}

#[test]
fn simulated_panel_is_reproducible() {
    let p = BktParams::new(0.2, 0.3, 0.05, 0.1, 0.2);
    let a = simulate_panel(&p, 30, 8, 1, 9).unwrap();
    assert_eq!(a, simulate_panel(&p, 30, 8, 1, 9).unwrap());
    assert_eq!(a.len(), 240);
    assert_eq!(a.skills(), vec![1]);
}
