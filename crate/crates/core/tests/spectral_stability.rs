use critflow::spectral_stability::*;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

// Independent brute-force oracle: the symbol in i128 rational arithmetic,
// scaled by ω⁴·den(c) so that every value is an integer.
fn scaled_symbol(n: i128, w: i128, cn: i128, cd: i128) -> i128 {
    let (n2, w2) = (n * n, w * w);
    2 * n2 * n2 * cd - (6 * cn + 2 * cd) * n2 * w2 + 8 * cn * w2 * w2
}

fn brute_force_stable(cn: i128, cd: i128, w: i128, n_max: i128) -> bool {
    (1..=n_max).filter(|&n| n != w).all(|n| scaled_symbol(n, w, cn, cd) > 0)
}

#[test]
fn stability_interval_matches_brute_force() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    for _ in 0..500 {
        let w: i64 = rng.gen_range(1..=40);
        let cd: i64 = rng.gen_range(1..=997);
        let cn: i64 = rng.gen_range(-2 * cd..=3 * cd);
        let c = rational(cn, cd);
        let th = thresholds(w).unwrap();
        let oracle = brute_force_stable(cn as i128, cd as i128, w as i128, 8 * w as i128 + 8);
        assert_eq!(th.contains(&c), oracle, "c = {cn}/{cd}, omega = {w}");
        let (gap, _) = lambda_hat_exact(&c, w).unwrap();
        assert_eq!(gap.is_positive(), oracle, "c = {cn}/{cd}, omega = {w}");
    }
}

#[test]
fn lattice_test_agrees_with_gap() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    for _ in 0..200 {
        let c = if rng.gen_bool(0.5) {
            rng.gen_range(1e-3..(1.0 / 9.0 - 1e-3))
        } else {
            rng.gen_range(1.001..4.0)
        };
        assert_eq!(
            stable_omegas_lattice(c, 60).unwrap(),
            stable_omegas(c, 60),
            "c = {c}"
        );
    }
}

#[test]
fn search_bound_covers_the_minimiser() {
    for &c in &[-3.0, -1.0, 0.0, 0.2, 1.0, 2.5, 10.0, 40.0] {
        for w in 1..=25u64 {
            let (gap, _) = lambda_hat(c, w as i64).unwrap();
            let wide = (1..=20 * w + 200)
                .filter(|&n| n != w)
                .map(|n| p_c(n as f64 / w as f64, c))
                .fold(f64::INFINITY, f64::min);
            assert_eq!(gap, wide, "c = {c}, omega = {w}");
        }
    }
}

#[test]
fn thresholds_bracket_the_fixed_band() {
    let ninth = rational(1, 9);
    let one = rational(1, 1);
    let mut sup_minus = BigRational::zero();
    let mut inf_plus = rational(3, 2);
    for w in 2..=512 {
        let th = thresholds(w).unwrap();
        let lo = th.c_minus.clone().unwrap();
        assert!(lo.is_positive() && lo < ninth, "omega = {w}");
        assert!(th.c_plus > one, "omega = {w}");
        sup_minus = sup_minus.max(lo);
        inf_plus = inf_plus.min(th.c_plus.clone());
    }
    // The extremes approach the band edges without reaching them.
    assert!(to_f64(&(ninth - sup_minus)) < 1e-3);
    assert!(to_f64(&(inf_plus - one)) < 1e-3);
}

#[test]
fn threshold_endpoints_are_borderline() {
    for w in 2..=30 {
        let th = thresholds(w).unwrap();
        let (gap, _) = lambda_hat_exact(&th.c_plus, w).unwrap();
        assert!(gap.is_zero(), "omega = {w}");
        let (gap, _) = lambda_hat_exact(th.c_minus.as_ref().unwrap(), w).unwrap();
        assert!(gap.is_zero(), "omega = {w}");
    }
}

#[test]
fn grid_rows_match_thresholds() {
    let grid = stability_region_grid(-0.5, 2.0, 12, 26).unwrap();
    assert_eq!(grid.rows.len(), 12);
    for row in &grid.rows {
        let th = thresholds(row.omega as i64).unwrap();
        for (c, &stable) in grid.c_values.iter().zip(&row.stable) {
            let inside = *c > th.c_minus_f64() && *c < th.c_plus_f64();
            assert_eq!(stable, inside, "c = {c}, omega = {}", row.omega);
        }
    }
}

proptest! {
    #[test]
    fn gap_is_a_lower_bound_for_every_mode(c in -5.0f64..5.0, w in 1i64..30, n in 1u64..400) {
        let (gap, argmin) = lambda_hat(c, w).unwrap();
        prop_assert!(argmin != w as u64);
        if n != w as u64 {
            prop_assert!(gap <= p_c(n as f64 / w as f64, c));
        }
    }

    #[test]
    fn symbol_roots_are_roots(c in prop_oneof![1e-4f64..0.111, 1.0001f64..20.0]) {
        let (lo, hi) = symbol_roots(c).unwrap();
        prop_assert!(lo < hi);
        for r in [lo, hi] {
            let scale = 2.0 * r.powi(4) + (6.0 * c + 2.0) * r * r + 8.0 * c;
            prop_assert!(p_c(r, c).abs() < 1e-12 * scale);
        }
        prop_assert!(p_c(0.5 * (lo + hi), c) < 0.0);
    }

    #[test]
    fn exact_and_float_gaps_agree(cn in -300i64..600, w in 1i64..20) {
        let c = rational(cn, 100);
        let (exact, n_exact) = lambda_hat_exact(&c, w).unwrap();
        let (float, n_float) = lambda_hat(cn as f64 / 100.0, w).unwrap();
        prop_assert!((to_f64(&exact) - float).abs() < 1e-9 * float.abs().max(1.0));
        let at = |n: u64| p_c(n as f64 / w as f64, cn as f64 / 100.0);
        prop_assert!((at(n_exact) - at(n_float)).abs() < 1e-9 * float.abs().max(1.0));
    }
}
