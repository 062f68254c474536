//! Stationary solutions of `k_ss + c k³ = 0`: the curvature ODE, the
//! super-lemniscates and the identities that single out the lemniscate of
//! Bernoulli among homothetic solutions.

use std::f64::consts::FRAC_PI_4;

use crate::error::{domain, Error, Result};
use crate::geometry::{curvature_profile, metrics, tangent_normal_curvature, ClosedCurve};
use crate::spectral::SpectralGrid;
use crate::special_functions::{cn_sn_dn_unchecked, closure_integral_f, quarter_period_half};

/// Minimum sample count accepted by [`SuperLemniscateSpec::new`].
pub const MIN_LEMNISCATE_SAMPLES: usize = 512;

/// `c_j = 2/(4j − 1)²`.
pub fn super_lemniscate_parameter(j: u32) -> f64 {
    let d = 4.0 * j as f64 - 1.0;
    2.0 / (d * d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperLemniscateSpec {
    pub j: u32,
    pub c_j: f64,
    /// One curvature period `4K(1/2)` in arclength.
    pub period: f64,
    pub samples: usize,
}

impl SuperLemniscateSpec {
    pub fn new(j: u32, samples: usize) -> Result<Self> {
        if j == 0 {
            return Err(domain("super-lemniscate index j must be >= 1"));
        }
        if samples < MIN_LEMNISCATE_SAMPLES || samples % 2 != 0 {
            return Err(domain(format!(
                "super-lemniscate needs an even sample count >= {MIN_LEMNISCATE_SAMPLES}, got {samples}"
            )));
        }
        Ok(Self {
            j,
            c_j: super_lemniscate_parameter(j),
            period: 4.0 * quarter_period_half(),
            samples,
        })
    }

    /// Half-width `√(2/c)·π/4` of the tangent-angle range.
    pub fn theta_range(&self) -> f64 {
        theta_half_range(self.c_j)
    }
}

pub fn theta_half_range(c: f64) -> f64 {
    (2.0 / c).sqrt() * FRAC_PI_4
}

/// A curve built from the stationary profile `k = cn(s; 1/2)/√c`.
#[derive(Debug, Clone)]
pub struct StationaryCurve {
    pub c: f64,
    pub curve: ClosedCurve,
    /// Arclength positions of the samples.
    pub arclength: Vec<f64>,
    /// Exact curvature at each sample.
    pub curvature: Vec<f64>,
    /// Exact tangent angle at each sample.
    pub theta: Vec<f64>,
    /// `|γ(L) − γ(0)|` from integrating the tangent over one period.
    pub closure_gap: f64,
}

impl StationaryCurve {
    /// Curvature profile rescaled so that `max k = 1`, as `(s, k)` pairs.
    pub fn rescaled_profile(&self) -> Vec<(f64, f64)> {
        let sc = self.c.sqrt();
        self.arclength
            .iter()
            .zip(&self.curvature)
            .map(|(&s, &k)| (s / sc, k * sc))
            .collect()
    }
}

pub fn build_super_lemniscate(spec: &SuperLemniscateSpec) -> Result<StationaryCurve> {
    build_stationary_profile(spec.c_j, spec.samples)
}

/// Integrates the tangent of the `c`-profile over one curvature period. For
/// `c ∉ {c_j}` the result does not close, and the gap is reported as is.
pub fn build_stationary_profile(c: f64, samples: usize) -> Result<StationaryCurve> {
    if !(c > 0.0) {
        return Err(domain(format!("stationary profile needs c > 0, got {c}")));
    }
    if samples < 16 || samples % 2 != 0 {
        return Err(domain(format!("sample count {samples} must be even and >= 16")));
    }
    let period = 4.0 * quarter_period_half();
    let sc = c.sqrt();
    let amp = (2.0 / c).sqrt();
    let mut arclength = Vec::with_capacity(samples);
    let mut curvature = Vec::with_capacity(samples);
    let mut theta = Vec::with_capacity(samples);
    for j in 0..samples {
        let s = period * j as f64 / samples as f64;
        let (cn, sn, _) = cn_sn_dn_unchecked(s, 0.5);
        arclength.push(s);
        curvature.push(cn / sc);
        theta.push(amp * (sn / std::f64::consts::SQRT_2).asin());
    }

    let mut grid = SpectralGrid::new(samples);
    let (ax, mx) = grid.antiderivative_real(&theta.iter().map(|t| t.cos()).collect::<Vec<_>>());
    let (ay, my) = grid.antiderivative_real(&theta.iter().map(|t| t.sin()).collect::<Vec<_>>());
    let dsdx = period / std::f64::consts::TAU;
    let points = (0..samples)
        .map(|j| {
            let s = arclength[j];
            [dsdx * ax[j] + mx * s, dsdx * ay[j] + my * s]
        })
        .collect();
    let closure_gap = period * mx.hypot(my);
    Ok(StationaryCurve {
        c,
        curve: ClosedCurve::new(points)?,
        arclength,
        curvature,
        theta,
        closure_gap,
    })
}

/// `½ f(1/√(2c))`. It vanishes exactly when the `c`-profile closes; the
/// quarter-period integral `∫₀^{K(1/2)} cos θ ds` equals `√2` times this value.
pub fn closure_residual(c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(domain(format!("closure residual needs c > 0, got {c}")));
    }
    Ok(0.5 * closure_integral_f(1.0 / (2.0 * c).sqrt()))
}

/// Parameters of `k(s) = (α/√c) cn(αs + β; 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeSolutionParams {
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k0: f64,
    pub k1: f64,
}

impl OdeSolutionParams {
    pub fn curvature(&self, s: f64) -> f64 {
        let (cn, _, _) = cn_sn_dn_unchecked(self.alpha * s + self.beta, 0.5);
        self.alpha / self.c.sqrt() * cn
    }

    pub fn curvature_derivative(&self, s: f64) -> f64 {
        let (_, sn, dn) = cn_sn_dn_unchecked(self.alpha * s + self.beta, 0.5);
        -self.alpha * self.alpha / self.c.sqrt() * sn * dn
    }
}

/// Solves `k'' + c k³ = 0, k(0) = k0, k'(0) = k1` in closed form.
pub fn solve_curvature_ode(c: f64, k0: f64, k1: f64) -> Result<OdeSolutionParams> {
    if !(c > 0.0) {
        return Err(domain(format!("curvature ODE needs c > 0, got {c}")));
    }
    if !(k0.is_finite() && k1.is_finite()) {
        return Err(domain("initial data must be finite"));
    }
    if k0 == 0.0 && k1 == 0.0 {
        return Err(Error::TrivialSolution);
    }
    // s ↦ −s flips the sign of k1 and of β.
    let flip = k1 > 0.0;
    let k1r = if flip { -k1 } else { k1 };
    let kq = quarter_period_half();
    let sc = c.sqrt();
    let (alpha, beta) = if k0 == 0.0 {
        (( -k1r * (2.0 * c).sqrt()).sqrt(), kq)
    } else {
        let f = |t: f64| {
            let (cn, sn, dn) = cn_sn_dn_unchecked(t, 0.5);
            -sc * k0 * k0 * sn * dn / (cn * cn)
        };
        // f decreases from 0 at t = 0 to −∞ as t → K.
        let beta = if k1r == 0.0 {
            0.0
        } else {
            let (mut lo, mut hi) = (0.0, kq);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid) > k1r {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let (cn, _, _) = cn_sn_dn_unchecked(beta, 0.5);
        (sc * k0 / cn, beta)
    };
    Ok(OdeSolutionParams {
        c,
        alpha,
        beta: if flip { -beta } else { beta },
        k0,
        k1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomotheticMode {
    /// `k_ss + (2/9) k³ = 0`.
    LemniscateMu,
    /// `h = A k³` with `A` fitted.
    LemniscateSupport,
}

#[derive(Debug, Clone)]
pub struct HomotheticCheck {
    pub residual: f64,
    /// Fitted `A` (support mode only).
    pub fitted_a: Option<f64>,
    /// Support function about the centroid, measured along the outward normal
    /// `−N`, so that the counter-clockwise unit circle has `h ≡ 1`.
    pub support: Vec<f64>,
}

/// Relative cutoff below which `|k|` is excluded from the support fit.
pub const SUPPORT_FIT_CUTOFF: f64 = 0.1;

pub fn homothetic_identity_check(curve: &ClosedCurve, mode: HomotheticMode) -> Result<HomotheticCheck> {
    let m = metrics(curve)?;
    let centre = curve.centroid()?;
    let frame = tangent_normal_curvature(curve)?;
    let support: Vec<f64> = curve
        .points()
        .iter()
        .zip(&frame.normal)
        .map(|(p, nrm)| -((p[0] - centre[0]) * nrm[0] + (p[1] - centre[1]) * nrm[1]))
        .collect();
    match mode {
        HomotheticMode::LemniscateMu => {
            if m.omega != 0 {
                return Err(Error::NotApplicable(format!(
                    "the lemniscate identity needs turning number 0, got {}",
                    m.omega
                )));
            }
            let prof = curvature_profile(curve)?;
            let residual = prof
                .k
                .iter()
                .zip(&prof.k_ss)
                .map(|(k, kss)| (kss + 2.0 / 9.0 * k * k * k).abs())
                .fold(0.0, f64::max);
            Ok(HomotheticCheck {
                residual,
                fitted_a: None,
                support,
            })
        }
        HomotheticMode::LemniscateSupport => {
            let k = &frame.curvature;
            let cutoff = SUPPORT_FIT_CUTOFF * m.k_max_abs;
            let fit: Vec<usize> = (0..k.len()).filter(|&i| k[i].abs() > cutoff).collect();
            let (num, den) = fit.iter().fold((0.0, 0.0), |(n, d), &i| {
                let k3 = k[i].powi(3);
                (n + support[i] * k3, d + k3 * k3)
            });
            if !(den > 0.0) {
                return Err(Error::DegenerateCurve("curvature vanishes identically".into()));
            }
            let a = num / den;
            let residual = fit
                .iter()
                .map(|&i| (support[i] - a * k[i].powi(3)).abs())
                .fold(0.0, f64::max);
            Ok(HomotheticCheck {
                residual,
                fitted_a: Some(a),
                support,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(SuperLemniscateSpec::new(0, 1024).is_err());
        assert!(SuperLemniscateSpec::new(1, 256).is_err());
        let s = SuperLemniscateSpec::new(1, 1024).unwrap();
        assert!((s.c_j - 2.0 / 9.0).abs() < 1e-16);
        assert!((s.theta_range() - 3.0 * FRAC_PI_4).abs() < 1e-14);
    }

    #[test]
    fn closure_residual_zeros() {
        assert!(closure_residual(2.0 / 9.0).unwrap().abs() < 1e-8);
        assert!(closure_residual(2.0 / 49.0).unwrap().abs() < 1e-8);
        assert!(closure_residual(0.1).unwrap().abs() > 1e-3);
        assert!(closure_residual(0.0).is_err());
        assert!(closure_residual(-1.0).is_err());
    }

    #[test]
    fn gap_is_proportional_to_residual() {
        let built = build_stationary_profile(0.1, 1024).unwrap();
        let r = closure_residual(0.1).unwrap();
        assert!((built.closure_gap - 4.0 * std::f64::consts::SQRT_2 * r.abs()).abs() < 1e-10, "{} vs {}", built.closure_gap, r);
    }

    #[test]
    fn ode_trivial_branches() {
        let p = solve_curvature_ode(1.0, 1.0, 0.0).unwrap();
        assert!((p.alpha - 1.0).abs() < 1e-15 && p.beta == 0.0);
        let p = solve_curvature_ode(1.0, 0.0, -2f64.sqrt()).unwrap();
        assert!((p.alpha - 2f64.sqrt()).abs() < 1e-14);
        assert!((p.beta - quarter_period_half()).abs() < 1e-15);
        assert!(matches!(solve_curvature_ode(1.0, 0.0, 0.0), Err(Error::TrivialSolution)));
        assert!(solve_curvature_ode(-1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn ode_matching_conditions() {
        for &(c, k0, k1) in &[(2.0, 0.5, -0.3), (2.0, 0.5, 0.3), (0.3, -1.2, 0.7), (1.0, 0.0, 1.0), (5.0, -0.1, -4.0)] {
            let p = solve_curvature_ode(c, k0, k1).unwrap();
            assert!((p.curvature(0.0) - k0).abs() < 1e-10, "{c} {k0} {k1}");
            assert!((p.curvature_derivative(0.0) - k1).abs() < 1e-10, "{c} {k0} {k1}");
        }
    }
}
