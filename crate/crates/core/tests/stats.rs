use proptest::prelude::*;
use roughpde::stats::{compensated_sum, fit_rate, order_invariant_sum};

proptest! {
    #[test]
    fn exact_power_laws_are_recovered(
        slope in -3.0..3.0f64,
        c in 1e-3..1e3f64,
        xs in prop::collection::btree_set(1u32..100_000, 3..12),
    ) {
        let pairs: Vec<(f64, f64)> = xs.iter().map(|&x| {
            let x = x as f64 * 1e-4;
            (x, c * x.powf(slope))
        }).collect();
        let fit = fit_rate(&pairs).unwrap();
        prop_assert!((fit.slope - slope).abs() <= 1e-9);
        prop_assert!((fit.intercept - c.ln()).abs() <= 1e-8);
        prop_assert!(fit.r_squared >= 1.0 - 1e-9);
    }

    #[test]
    fn sorted_sums_ignore_order(mut xs in prop::collection::vec(-1e6..1e6f64, 0..200), rot in 0usize..200) {
        let a = order_invariant_sum(xs.clone());
        if !xs.is_empty() {
            let r = rot % xs.len();
            xs.rotate_left(r);
        }
        xs.reverse();
        prop_assert_eq!(a, order_invariant_sum(xs.clone()));
        let naive: f64 = xs.iter().sum();
        prop_assert!((compensated_sum(xs.iter().copied()) - naive).abs() <= 1e-6);
    }
}

#[test]
fn fits_need_positive_data() {
    assert!(fit_rate(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
    assert!(fit_rate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
}
