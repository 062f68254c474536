//! Support-function perturbations of ω-circles and the functionals that
//! govern the oscillation energy `e = ∫(k − 1)² ds` near them:
//!
//! ```text
//! de/dt = −Q[f] + R[f],   Q[f] = 2∫f_ss² − (6c+2)∫f_s² + 8c∫f²,
//! ```
//!
//! with `f = k − 1` measured on the curve rescaled to length `2πω`.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::flow::{measure_e_prime, FlowMode, FlowState, DEFAULT_DT_SAFETY};
use crate::geometry::{
    curvature_profile, fourier_of_curvature, normalise_to_circle_length, resample_by_arclength, ClosedCurve,
};
use crate::spectral_stability::{lambda_hat, p_c, Verdict};

/// `h(ϑ) = 1 + η cos(n₀ϑ/ω)` on `ϑ ∈ [0, 2πω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportPerturbation {
    pub omega: i64,
    pub n0: i64,
    pub eta: f64,
}

impl SupportPerturbation {
    pub fn new(omega: i64, n0: i64, eta: f64) -> Result<Self> {
        if omega < 1 {
            return Err(domain(format!("omega = {omega} must be >= 1")));
        }
        if n0 < 1 || n0 == omega {
            return Err(domain(format!("mode n0 = {n0} must be positive and differ from omega")));
        }
        if !eta.is_finite() {
            return Err(domain("eta must be finite"));
        }
        let p = Self { omega, n0, eta };
        if (p.a() * eta).abs() >= 1.0 {
            return Err(Error::NonConvexSupport(p.a() * eta));
        }
        Ok(p)
    }

    /// `a = 1 − n₀²/ω²`, so that `ρ = h + h'' = 1 + aη cos(n₀ϑ/ω)`.
    pub fn a(&self) -> f64 {
        let r = self.n0 as f64 / self.omega as f64;
        1.0 - r * r
    }
}

/// One term `α cos(nϑ/ω) + β sin(nϑ/ω)` of a support function `1 + Σ terms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportTerm {
    pub n: i64,
    pub cos: f64,
    pub sin: f64,
}

/// Curve with support function `h = 1 + Σ terms` about the origin,
/// `γ(ϑ) = h(cos ϑ, sin ϑ) + h'(−sin ϑ, cos ϑ)`, resampled to uniform arclength.
pub fn build_support_curve_from_terms(omega: i64, terms: &[SupportTerm], samples: usize) -> Result<ClosedCurve> {
    if omega < 1 {
        return Err(domain(format!("omega = {omega} must be >= 1")));
    }
    let w = omega as f64;
    let support = |theta: f64| {
        terms.iter().fold((1.0, 0.0, 1.0), |(h, dh, rho), t| {
            let r = t.n as f64 / w;
            let (s, c) = (r * theta).sin_cos();
            let v = t.cos * c + t.sin * s;
            (h + v, dh + r * (t.sin * c - t.cos * s), rho + (1.0 - r * r) * v)
        })
    };
    let mut rho_min = f64::INFINITY;
    let mut points = Vec::with_capacity(samples);
    for j in 0..samples {
        let theta = TAU * w * j as f64 / samples as f64;
        let (h, dh, rho) = support(theta);
        rho_min = rho_min.min(rho);
        let (s, c) = theta.sin_cos();
        points.push([h * c - dh * s, h * s + dh * c]);
    }
    if !(rho_min > 0.0) {
        return Err(Error::NonConvexSupport(1.0 - rho_min));
    }
    let curve = ClosedCurve::new(points)?;
    resample_by_arclength(&curve, samples)
}

pub fn build_support_curve(p: &SupportPerturbation, samples: usize) -> Result<ClosedCurve> {
    build_support_curve_from_terms(
        p.omega,
        &[SupportTerm {
            n: p.n0,
            cos: p.eta,
            sin: 0.0,
        }],
        samples,
    )
}

/// `f = k − 1` and its first two arclength derivatives on the curve rescaled
/// to length `2πω`, with the arclength step.
struct Oscillation {
    f: Vec<f64>,
    f_s: Vec<f64>,
    f_ss: Vec<f64>,
    ds: f64,
    omega: f64,
}

impl Oscillation {
    fn of(curve: &ClosedCurve) -> Result<Self> {
        let (uniform, omega) = normalise_to_circle_length(curve)?;
        let prof = curvature_profile(&uniform)?;
        let sign = omega.signum() as f64;
        let n = uniform.len();
        let w = omega.unsigned_abs() as f64;
        Ok(Self {
            f: prof.k.iter().map(|k| sign * k - 1.0).collect(),
            f_s: prof.k_s.iter().map(|k| sign * k).collect(),
            f_ss: prof.k_ss.iter().map(|k| sign * k).collect(),
            ds: TAU * w / n as f64,
            omega: w,
        })
    }

    fn integral(&self, g: impl Fn(usize) -> f64) -> f64 {
        (0..self.f.len()).map(g).sum::<f64>() * self.ds
    }

    fn e(&self) -> f64 {
        self.integral(|i| self.f[i] * self.f[i])
    }

    fn q(&self, c: f64) -> f64 {
        let fss2 = self.integral(|i| self.f_ss[i] * self.f_ss[i]);
        let fs2 = self.integral(|i| self.f_s[i] * self.f_s[i]);
        2.0 * fss2 - (6.0 * c + 2.0) * fs2 + 8.0 * c * self.e()
    }

    fn r(&self, c: f64) -> f64 {
        let f = &self.f;
        let fss = &self.f_ss;
        let e = self.e();
        let l = TAU * self.omega;
        let f2fss = self.integral(|i| f[i] * f[i] * fss[i]);
        let f3fss = self.integral(|i| f[i].powi(3) * fss[i]);
        let f3 = self.integral(|i| f[i].powi(3));
        let f4 = self.integral(|i| f[i].powi(4));
        let f5 = self.integral(|i| f[i].powi(5));
        let f6 = self.integral(|i| f[i].powi(6));
        let fs2 = self.integral(|i| self.f_s[i] * self.f_s[i]);
        -(6.0 * c + 3.0) * f2fss - (2.0 * c + 1.0) * f3fss - 16.0 * c * f3 - 14.0 * c * f4 - 6.0 * c * f5 - c * f6
            - e / l * fs2
            + 6.0 * c / l * e * e
            + 4.0 * c * e / l * f3
            + c * e / l * f4
    }
}

/// `Q_{c,ω}[f]` by direct quadrature.
pub fn q_functional(curve: &ClosedCurve, c: f64) -> Result<f64> {
    Ok(Oscillation::of(curve)?.q(c))
}

/// `Q_{c,ω}[f] = 2πω Σ_{n≠0} p_c(n/ω)|a_n|²` from the curvature spectrum.
pub fn q_functional_fourier(curve: &ClosedCurve, c: f64) -> Result<f64> {
    let n_max = curve.len() / 2 - 1;
    Ok(fourier_of_curvature(curve, n_max)?.quadratic_form(|x| p_c(x, c)))
}

/// The ten-term remainder `R_{c,ω}[f]`.
pub fn r_functional(curve: &ClosedCurve, c: f64) -> Result<f64> {
    Ok(Oscillation::of(curve)?.r(c))
}

/// `e`, `Q`, `R` and the ratio `|R| / (√e (‖f_ss‖² + e))` on one curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VariationalTerms {
    pub e: f64,
    pub q: f64,
    pub r: f64,
    pub remainder_ratio: f64,
}

pub fn variational_terms(curve: &ClosedCurve, c: f64) -> Result<VariationalTerms> {
    let osc = Oscillation::of(curve)?;
    let e = osc.e();
    let fss2 = osc.integral(|i| osc.f_ss[i] * osc.f_ss[i]);
    let r = osc.r(c);
    let denom = e.sqrt() * (fss2 + e);
    Ok(VariationalTerms {
        e,
        q: osc.q(c),
        r,
        remainder_ratio: if denom > 0.0 { r.abs() / denom } else { 0.0 },
    })
}

/// Leading-order `e'(0) = −πω a² p_c(n₀/ω) η²`.
pub fn e_prime0_prediction(p: &SupportPerturbation, c: f64) -> f64 {
    let w = p.omega as f64;
    -PI * w * p.a().powi(2) * p_c(p.n0 as f64 / w, c) * p.eta * p.eta
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EtaMeasurement {
    pub eta: f64,
    pub predicted: f64,
    pub measured: f64,
    /// `e'(0)/η²`.
    pub scaled: f64,
    /// `|scaled/limit − 1|`.
    pub relative_error: f64,
    pub q: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InstabilityReport {
    pub c: f64,
    pub omega: i64,
    pub n0: i64,
    pub lambda_hat: f64,
    pub verdict: Verdict,
    /// `−πω a² λ̂`, the limit of `e'(0)/η²`.
    pub limit: f64,
    pub samples: usize,
    pub measurements: Vec<EtaMeasurement>,
    pub all_positive: bool,
    /// `log₂` of successive error ratios, for η halving.
    pub observed_orders: Vec<f64>,
}

pub const DEFAULT_EXPERIMENT_SAMPLES: usize = 128;

/// Measures `e'(0)` on support perturbations along the most unstable mode.
pub fn run_instability_experiment(c: f64, omega: i64, eta_list: &[f64], samples: usize) -> Result<InstabilityReport> {
    let (gap, n0) = lambda_hat(c, omega)?;
    if gap >= 0.0 {
        return Err(Error::Precondition(format!(
            "instability experiment needs a negative spectral gap, got {gap} for (c, omega) = ({c}, {omega})"
        )));
    }
    let n0 = n0 as i64;
    let measurements = eta_list
        .par_iter()
        .map(|&eta| {
            let p = SupportPerturbation::new(omega, n0, eta)?;
            measure_eta(&p, c, samples)
        })
        .collect::<Result<Vec<_>>>()?;
    let a = 1.0 - (n0 as f64 / omega as f64).powi(2);
    let limit = -PI * omega as f64 * a * a * gap;
    let observed_orders = measurements
        .windows(2)
        .map(|w| (w[0].relative_error / w[1].relative_error).log2() / (w[0].eta / w[1].eta).log2())
        .collect();
    Ok(InstabilityReport {
        c,
        omega,
        n0,
        lambda_hat: gap,
        verdict: Verdict::from_gap(gap),
        limit,
        samples,
        all_positive: measurements.iter().all(|m| m.measured > 0.0),
        measurements,
        observed_orders,
    })
}

/// Flow-measured `e'(0)` for one perturbation, with `Q` and `R` at `t = 0`.
pub fn measure_eta(p: &SupportPerturbation, c: f64, samples: usize) -> Result<EtaMeasurement> {
    let curve = build_support_curve(p, samples)?;
    let state = FlowState::new(curve, FlowMode::LengthNormalised)?;
    let measured = measure_e_prime(&state, c, DEFAULT_DT_SAFETY)?;
    let terms = variational_terms(&state.curve, c)?;
    let w = p.omega as f64;
    let limit = -PI * w * p.a().powi(2) * p_c(p.n0 as f64 / w, c);
    let scaled = measured / (p.eta * p.eta);
    Ok(EtaMeasurement {
        eta: p.eta,
        predicted: e_prime0_prediction(p, c),
        measured,
        scaled,
        relative_error: (scaled / limit - 1.0).abs(),
        q: terms.q,
        r: terms.r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::metrics;

    #[test]
    fn perturbation_validation() {
        assert!(SupportPerturbation::new(2, 2, 0.1).is_err());
        assert!(SupportPerturbation::new(0, 1, 0.1).is_err());
        assert!(matches!(SupportPerturbation::new(1, 2, 0.4), Err(Error::NonConvexSupport(_))));
        let p = SupportPerturbation::new(1, 2, 0.05).unwrap();
        assert_eq!(p.a(), -3.0);
    }

    #[test]
    fn zero_eta_is_the_circle() {
        let p = SupportPerturbation::new(3, 1, 0.0).unwrap();
        let curve = build_support_curve(&p, 128).unwrap();
        let m = metrics(&curve).unwrap();
        assert_eq!(m.omega, 3);
        assert!(m.k_osc < 1e-20);
        assert!(q_functional(&curve, 0.7).unwrap().abs() < 1e-12);
        assert!(r_functional(&curve, 0.7).unwrap().abs() < 1e-12);
    }

    #[test]
    fn support_curve_length_and_energy() {
        let p = SupportPerturbation::new(2, 1, 0.05).unwrap();
        let curve = build_support_curve(&p, 256).unwrap();
        let m = metrics(&curve).unwrap();
        assert_eq!(m.omega, 2);
        assert!((m.length / (4.0 * PI) - 1.0).abs() < 1e-8);
        let e = m.k_osc / (4.0 * PI);
        let lead = PI * 2.0 * (0.75f64 * 0.05).powi(2);
        assert!((e / lead - 1.0).abs() < 0.1, "{e} vs {lead}");
    }

    #[test]
    fn prediction_arithmetic() {
        let p = SupportPerturbation::new(2, 1, 0.02).unwrap();
        let v = e_prime0_prediction(&p, 0.0);
        assert!((v - 27.0 * PI / 64.0 * 4e-4).abs() < 1e-15);
        let p = SupportPerturbation::new(1, 2, 0.01).unwrap();
        assert!((e_prime0_prediction(&p, 0.0) + PI * 9.0 * 24.0 * 1e-4).abs() < 1e-14);
    }

    #[test]
    fn experiment_rejects_stable_pairs() {
        assert!(matches!(
            run_instability_experiment(0.0, 1, &[0.01], 64),
            Err(Error::Precondition(_))
        ));
    }
}
