use std::f64::consts::{PI, TAU};

use critflow::flow::*;
use critflow::geometry::{fourier_of_curvature, metrics, translation_mode_energy};
use critflow::perturbation::{build_support_curve, SupportPerturbation};
use critflow::spectral_stability::lambda_hat;
use critflow::{ClosedCurve, Error};

fn perturbed(omega: i64, n0: i64, eta: f64, samples: usize) -> ClosedCurve {
    build_support_curve(&SupportPerturbation::new(omega, n0, eta).unwrap(), samples).unwrap()
}

fn radial_component(v: &[f64; 2], p: &[f64; 2]) -> f64 {
    (v[0] * p[0] + v[1] * p[1]) / p[0].hypot(p[1])
}

#[test]
fn circle_velocity_fields() {
    let circle = ClosedCurve::circle(1.0, 1, 64).unwrap();
    let still = velocity_field(&circle, 0.0, FlowMode::Unnormalised).unwrap();
    assert!(still.iter().all(|v| v[0].hypot(v[1]) < 1e-10));

    let grow = velocity_field(&circle, 0.5, FlowMode::Unnormalised).unwrap();
    for (v, p) in grow.iter().zip(circle.points()) {
        assert!((radial_component(v, p) - 0.5).abs() < 1e-10);
        assert!(v[0].hypot(v[1]) - 0.5 < 1e-10);
    }

    let double = ClosedCurve::circle(1.0, 2, 128).unwrap();
    for c in [-1.0, 0.5, 2.0] {
        let v = velocity_field(&double, c, FlowMode::LengthNormalised).unwrap();
        assert!(v.iter().all(|v| v[0].hypot(v[1]) < 1e-10), "c = {c}");
    }
}

#[test]
fn short_circle_run_follows_the_radius_law() {
    let mut cfg = FlowConfig::new(0.5, FlowMode::Unnormalised);
    cfg.samples = 64;
    cfg.t_end = Some(0.01);
    let out = run(&ClosedCurve::circle(1.0, 1, 64).unwrap(), &cfg).unwrap();
    assert_eq!(out.stop, StopReason::TimeReached);
    let last = out.series.last().unwrap();
    assert_eq!(last.t, 0.01);
    let r = last.length / TAU;
    assert!((r / (1.0 + 2.0 * last.t).powf(0.25) - 1.0).abs() < 1e-10);
    for w in out.series.records.windows(2) {
        assert!(w[1].t > w[0].t);
    }
}

#[test]
fn curvature_ceiling_reports_blowup() {
    let mut cfg = FlowConfig::new(-1.0, FlowMode::Unnormalised);
    cfg.samples = 64;
    cfg.stop_kmax = 0.5;
    let state = FlowState::new(ClosedCurve::circle(1.0, 1, 64).unwrap(), cfg.mode).unwrap();
    match step(&state, &cfg) {
        Err(Error::Blowup(b)) => {
            assert_eq!(b.state.time, 0.0);
            // Lifetime bound L⁴/(64π⁴|c|) = 1/4 for the unit circle.
            assert!((b.bracket.1 - 0.25).abs() < 1e-12);
        }
        other => panic!("expected blowup, got {other:?}"),
    }
}

#[test]
fn normalised_run_conserves_length_and_decays() {
    let (c, omega) = (0.5, 1);
    let mut cfg = FlowConfig::new(c, FlowMode::LengthNormalised);
    cfg.samples = 64;
    cfg.t_end = Some(0.05);
    cfg.record_every = 200;
    cfg.snapshot_every = Some(1);
    let out = run(&perturbed(omega, 2, 0.007, 64), &cfg).unwrap();
    let (gap, _) = lambda_hat(c, omega).unwrap();
    let first = out.series.records[0];
    assert!(first.k_osc < 1e-2);
    for r in &out.series.records {
        assert!((r.length - TAU).abs() / TAU < 1e-6);
        assert!(r.e() <= 2.0 * first.e() * (-gap * r.t).exp());
    }
    for w in out.series.records.windows(2) {
        assert!(w[1].k_osc <= w[0].k_osc + 1e-10);
    }
    assert!(out.final_state.max_length_correction < 1e-6);
    for (_, curve) in &out.series.snapshots {
        let modes = fourier_of_curvature(curve, 20).unwrap();
        let e = modes.energy();
        let e_tr = translation_mode_energy(&modes, omega).unwrap();
        assert!(e_tr <= 10.0 * e * e, "E_tr = {e_tr:e}, e = {e:e}");
    }
}

#[test]
fn length_decreases_for_negative_c() {
    let mut cfg = FlowConfig::new(-1.0, FlowMode::Unnormalised);
    cfg.samples = 64;
    cfg.t_end = Some(0.02);
    cfg.record_every = 50;
    let out = run(&perturbed(1, 3, 0.05, 64), &cfg).unwrap();
    assert!(out.series.records.len() > 100);
    for w in out.series.records.windows(2) {
        assert!(w[1].length < w[0].length);
    }
}

#[test]
fn circle_lifetime_respects_the_length_bound() {
    // A smaller circle keeps the run short; T = r⁴/(4|c|) saturates the bound.
    let r0: f64 = 0.5;
    let mut cfg = FlowConfig::new(-1.0, FlowMode::Unnormalised);
    cfg.samples = 64;
    cfg.stop_kmax = 2.0 / r0 * 10.0;
    cfg.record_every = 100_000;
    let err = run(&ClosedCurve::circle(r0, 1, 64).unwrap(), &cfg).unwrap_err();
    let Error::Blowup(b) = err else { panic!("expected blowup, got {err}") };
    let exact = r0.powi(4) / 4.0;
    let bound = (TAU * r0).powi(4) / (64.0 * PI.powi(4));
    assert!((exact - bound).abs() < 1e-15);
    assert!(b.bracket.0 < exact && exact <= b.bracket.1, "{:?}", b.bracket);
    assert!(b.bracket.0 > 0.99 * exact);
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&v| v < x).clamp(1, xs.len() - 1);
    let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    ys[i - 1] + w * (ys[i] - ys[i - 1])
}

#[test]
fn unnormalised_run_rescales_onto_normalised_run() {
    let gamma0 = perturbed(1, 2, 0.03, 64);
    let mut cfg = FlowConfig::new(0.0, FlowMode::Unnormalised);
    cfg.samples = 64;
    cfg.t_end = Some(0.04);
    cfg.record_every = 20;
    let plain = run(&gamma0, &cfg).unwrap();

    // Normalised time t = ∫ σ⁻⁴ dτ with σ = L/L₀, by the trapezoidal rule.
    let rec = &plain.series.records;
    let mut t = vec![0.0];
    for w in rec.windows(2) {
        let dt = 0.5 * (w[0].sigma.powi(-4) + w[1].sigma.powi(-4)) * (w[1].t - w[0].t);
        t.push(t.last().unwrap() + dt);
    }

    cfg.mode = FlowMode::LengthNormalised;
    cfg.t_end = Some(*t.last().unwrap());
    let normalised = run(&gamma0, &cfg).unwrap();
    let nt: Vec<f64> = normalised.series.records.iter().map(|r| r.t).collect();
    let nk: Vec<f64> = normalised.series.records.iter().map(|r| r.k_osc).collect();
    for (ti, r) in t.iter().zip(rec) {
        let expected = interpolate(&nt, &nk, *ti);
        assert!((r.k_osc / expected - 1.0).abs() < 1e-2, "t = {ti}");
    }
    assert!(rec.last().unwrap().k_osc < 0.5 * rec[0].k_osc);
}

#[test]
fn e_evolution_matches_variational_expression() {
    let mut cfg = FlowConfig::new(0.0, FlowMode::LengthNormalised);
    cfg.samples = 128;
    for (omega, n0, sign) in [(1, 2, -1.0), (2, 1, 1.0)] {
        let state = FlowState::new(perturbed(omega, n0, 0.02, 128), cfg.mode).unwrap();
        let check = e_evolution_check(&state, 0.0).unwrap();
        assert!(check.relative < 1e-2, "{check:?}");
        assert_eq!(check.lhs.signum(), sign);
        assert_eq!(check.rhs.signum(), sign);
    }
    let circle = FlowState::new(ClosedCurve::circle(1.0, 1, 64).unwrap(), cfg.mode).unwrap();
    let check = e_evolution_check(&circle, 0.0).unwrap();
    assert!(check.lhs.abs() < 1e-10 && check.rhs.abs() < 1e-10);
}

#[test]
fn sigma_asymptotics_on_exact_circle() {
    let mut cfg = FlowConfig::new(0.5, FlowMode::LengthNormalised);
    cfg.samples = 64;
    cfg.t_end = Some(1e-3);
    cfg.record_every = 50;
    let out = run(&ClosedCurve::circle(1.0, 1, 64).unwrap(), &cfg).unwrap();
    let s = sigma_asymptotics(&out.series, 0.5).unwrap();
    assert!((s.sigma_inf - 1.0).abs() < 1e-12);
    assert!(s.decay_rate.is_none());

    cfg.t_end = Some(1e-4);
    let unconverged = run(&perturbed(1, 2, 0.03, 64), &cfg).unwrap();
    assert!(matches!(
        sigma_asymptotics(&unconverged.series, 0.5),
        Err(Error::NotApplicable(_))
    ));
}

#[test]
fn series_csv_has_fixed_header() {
    let mut cfg = FlowConfig::new(0.0, FlowMode::Unnormalised);
    cfg.samples = 64;
    cfg.max_steps = Some(3);
    cfg.record_every = 1;
    let out = run(&ClosedCurve::circle(1.0, 1, 64).unwrap(), &cfg).unwrap();
    assert_eq!(out.stop, StopReason::StepLimit);
    let mut buf = Vec::new();
    out.series.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,L,A,omega,Kosc,kmax,lambda,sigma,cx,cy"));
    assert_eq!(lines.count(), 4);
    assert!(metrics(&out.final_state.curve).is_ok());
}
