use std::f64::consts::PI;

use critflow::geometry::metrics;
use critflow::perturbation::*;
use critflow::spectral_stability::p_c;
use critflow::ClosedCurve;
use rand::{Rng, SeedableRng};

fn random_terms(rng: &mut impl Rng, omega: i64, scale: f64) -> Vec<SupportTerm> {
    (1..=4 * omega)
        .filter(|&n| n != omega)
        .map(|n| SupportTerm {
            n,
            cos: scale * rng.gen_range(-1.0..1.0) / (n * n) as f64,
            sin: scale * rng.gen_range(-1.0..1.0) / (n * n) as f64,
        })
        .collect()
}

fn scaled_terms(terms: &[SupportTerm], by: f64) -> Vec<SupportTerm> {
    terms
        .iter()
        .map(|t| SupportTerm { n: t.n, cos: by * t.cos, sin: by * t.sin })
        .collect()
}

#[test]
fn quadrature_and_symbol_forms_of_q_agree() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    for _ in 0..10 {
        let omega = rng.gen_range(1..=3);
        let c = rng.gen_range(-1.0..2.0);
        let terms = random_terms(&mut rng, omega, 0.05);
        let curve = build_support_curve_from_terms(omega, &terms, 256).unwrap();
        let quad = q_functional(&curve, c).unwrap();
        let symbol = q_functional_fourier(&curve, c).unwrap();
        assert!((quad - symbol).abs() <= 1e-8 * quad.abs(), "{quad} vs {symbol}");
    }
}

#[test]
fn q_leading_order_for_single_mode() {
    let p = SupportPerturbation::new(2, 1, 0.02).unwrap();
    let curve = build_support_curve(&p, 256).unwrap();
    let q = q_functional(&curve, 0.0).unwrap();
    let lead = PI * 2.0 * (9.0 / 16.0) * p_c(0.5, 0.0) * 0.02f64.powi(2);
    assert!(q < 0.0);
    assert!((q / lead - 1.0).abs() < 0.05, "{q} vs {lead}");
}

#[test]
fn single_mode_remainder_is_higher_order() {
    let p = |eta| SupportPerturbation::new(2, 1, eta).unwrap();
    let ratios: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&eta| {
            let curve = build_support_curve(&p(eta), 256).unwrap();
            r_functional(&curve, 0.0).unwrap().abs() / eta.powi(3)
        })
        .collect();
    assert!(ratios.windows(2).all(|w| w[1] <= w[0] * 1.01), "{ratios:?}");
}

#[test]
fn remainder_scales_cubically_for_generic_data() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    let terms = random_terms(&mut rng, 2, 1.0);
    let r_at = |eta: f64| {
        let curve = build_support_curve_from_terms(2, &scaled_terms(&terms, eta), 256).unwrap();
        r_functional(&curve, 0.3).unwrap()
    };
    let ratio = (r_at(0.02) / r_at(0.01)).abs();
    assert!((6.0..=10.0).contains(&ratio), "ratio {ratio}");
}

fn reflected_reversed(curve: &ClosedCurve) -> ClosedCurve {
    let mut pts: Vec<[f64; 2]> = curve.points().iter().map(|p| [p[0], -p[1]]).collect();
    pts.reverse();
    ClosedCurve::new(pts).unwrap()
}

#[test]
fn q_is_invariant_under_reflection_and_shift() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(9);
    let terms = random_terms(&mut rng, 1, 0.05);
    let curve = build_support_curve_from_terms(1, &terms, 256).unwrap();
    let q = q_functional(&curve, 0.4).unwrap();

    let mirror = reflected_reversed(&curve);
    assert_eq!(metrics(&mirror).unwrap().omega, 1);
    let q_mirror = q_functional(&mirror, 0.4).unwrap();
    assert!((q - q_mirror).abs() < 1e-10 * q.abs());

    let mut pts = curve.points().to_vec();
    pts.rotate_left(37);
    let shifted = ClosedCurve::new(pts).unwrap().rotated(0.3).translated([2.0, -1.0]);
    let q_shift = q_functional(&shifted, 0.4).unwrap();
    assert!((q - q_shift).abs() < 1e-10 * q.abs());
}

#[test]
fn variational_terms_of_a_circle_vanish() {
    let circle = ClosedCurve::circle(3.0, 2, 128).unwrap();
    let v = variational_terms(&circle, 1.3).unwrap();
    assert!(v.e.abs() < 1e-20 && v.q.abs() < 1e-12 && v.r.abs() < 1e-12);
}

#[test]
fn stable_mode_decays_at_predicted_rate() {
    let p = SupportPerturbation::new(1, 2, 0.01).unwrap();
    let m = measure_eta(&p, 0.0, 128).unwrap();
    assert!(m.measured < 0.0);
    assert!((m.measured / e_prime0_prediction(&p, 0.0) - 1.0).abs() < 0.1);
}

#[test]
fn experiment_uses_the_minimising_mode() {
    let report = run_instability_experiment(0.0, 2, &[0.02, 0.01], 128).unwrap();
    assert_eq!(report.n0, 1);
    assert!(report.all_positive);
    assert!(report.measurements.iter().all(|m| m.relative_error < 0.1));
}
