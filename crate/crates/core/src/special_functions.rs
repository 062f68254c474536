//! Elliptic integrals, Jacobi elliptic functions and the closure integral
//!
//! ```text
//! f(t) = ∫₀^{π/2} cos(t x) / √(cos x) dx
//! ```
//!
//! whose zeros `|t| = (4j − 1)/2` select the closed super-lemniscates.
//!
//! `F(x; m)` is evaluated by adaptive Gauss–Kronrod quadrature of its defining
//! integral, while `am(u; m)` uses the descending Landen (AGM) recursion, so
//! the two are computed along independent paths.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{domain, Result};
use crate::quadrature;

/// Absolute tolerance used for the elliptic integrals.
pub const ELLIPTIC_TOL: f64 = 1e-13;
/// Absolute tolerance used for the closure integral.
pub const CLOSURE_TOL: f64 = 1e-12;

/// An argument pair `(u, m)` for the Jacobi elliptic functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticArg {
    u: f64,
    m: f64,
}

impl EllipticArg {
    pub fn new(u: f64, m: f64) -> Result<Self> {
        check_parameter(m)?;
        if !u.is_finite() {
            return Err(domain(format!("argument u = {u} is not finite")));
        }
        Ok(Self { u, m })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn am(&self) -> f64 {
        am_unchecked(self.u, self.m)
    }

    pub fn cn_sn_dn(&self) -> (f64, f64, f64) {
        cn_sn_dn_unchecked(self.u, self.m)
    }
}

fn check_parameter(m: f64) -> Result<()> {
    if m > 0.0 && m < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("elliptic parameter m = {m} outside (0, 1)")))
    }
}

/// Complete elliptic integral of the first kind, `K(m) = π / (2 AGM(1, √(1−m)))`.
pub fn complete_k(m: f64) -> Result<f64> {
    check_parameter(m)?;
    Ok(complete_k_unchecked(m))
}

fn complete_k_unchecked(m: f64) -> f64 {
    let mut a = 1.0;
    let mut b = (1.0 - m).sqrt();
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    PI / (a + b)
}

/// Incomplete elliptic integral of the first kind,
/// `F(x; m) = ∫₀ˣ dθ / √(1 − m sin²θ)`, for any real `x`.
///
/// The integral is evaluated on the reduced argument `r ∈ [−π/2, π/2]` and
/// extended by `F(x + π) = F(x) + 2K`.
pub fn incomplete_f(x: f64, m: f64) -> Result<f64> {
    check_parameter(m)?;
    if !x.is_finite() {
        return Err(domain(format!("amplitude x = {x} is not finite")));
    }
    let periods = (x / PI).round();
    let r = x - periods * PI;
    let partial = quadrature::integrate(
        |t| {
            let s = t.sin();
            1.0 / (1.0 - m * s * s).sqrt()
        },
        0.0,
        r,
        ELLIPTIC_TOL,
    );
    Ok(2.0 * periods * complete_k_unchecked(m) + partial)
}

/// Jacobi amplitude `am(u; m)`, the inverse of `F(·; m)`.
pub fn jacobi_am(u: f64, m: f64) -> Result<f64> {
    Ok(EllipticArg::new(u, m)?.am())
}

/// Jacobi elliptic functions `(cn, sn, dn)` at `(u, m)`.
pub fn jacobi_cn_sn_dn(u: f64, m: f64) -> Result<(f64, f64, f64)> {
    Ok(EllipticArg::new(u, m)?.cn_sn_dn())
}

// Descending Landen transformation (Abramowitz & Stegun 16.4).
fn am_unchecked(u: f64, m: f64) -> f64 {
    const MAX_STEPS: usize = 32;
    let mut a = [0.0; MAX_STEPS + 1];
    let mut c = [0.0; MAX_STEPS + 1];
    a[0] = 1.0;
    c[0] = m.sqrt();
    let mut b = (1.0 - m).sqrt();
    let mut n = 0;
    while n < MAX_STEPS && c[n].abs() > f64::EPSILON * a[n] {
        a[n + 1] = 0.5 * (a[n] + b);
        c[n + 1] = 0.5 * (a[n] - b);
        b = (a[n] * b).sqrt();
        n += 1;
    }
    let mut phi = (1u64 << n) as f64 * a[n] * u;
    for j in (1..=n).rev() {
        phi = 0.5 * (phi + (c[j] / a[j] * phi.sin()).asin());
    }
    phi
}

pub(crate) fn cn_sn_dn_unchecked(u: f64, m: f64) -> (f64, f64, f64) {
    let phi = am_unchecked(u, m);
    let (sn, cn) = phi.sin_cos();
    let dn = (1.0 - m * sn * sn).sqrt();
    (cn, sn, dn)
}

/// `K(1/2)`, the quarter period of `cn(·; 1/2)`.
pub fn quarter_period_half() -> f64 {
    complete_k_unchecked(0.5)
}

/// The closure integral `f(t) = ∫₀^{π/2} cos(t x)/√(cos x) dx`.
///
/// The substitution `x = π/2 − y²` removes the inverse-square-root endpoint
/// singularity: the integrand becomes `2 cos(t(π/2 − y²)) / √(sin(y²)/y²)`,
/// smooth on `[0, √(π/2)]`.
pub fn closure_integral_f(t: f64) -> f64 {
    let upper = FRAC_PI_2.sqrt();
    let t = t.abs();
    quadrature::integrate(
        |y| {
            let y2 = y * y;
            let sinc = if y2 < 1e-4 {
                1.0 - y2 * y2 / 6.0 + y2.powi(4) / 120.0
            } else {
                y2.sin() / y2
            };
            2.0 * (t * (FRAC_PI_2 - y2)).cos() / sinc.sqrt()
        },
        0.0,
        upper,
        CLOSURE_TOL,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const K_HALF: f64 = 1.854_074_677_301_372;

    #[test]
    fn complete_k_reference_values() {
        assert!((complete_k(0.5).unwrap() - K_HALF).abs() < 1e-13);
        assert!((complete_k(0.75).unwrap() - 2.156_515_647_499_643).abs() < 1e-13);
        assert!((complete_k(1e-12).unwrap() - FRAC_PI_2).abs() < 1e-11);
    }

    #[test]
    fn f_matches_k_and_is_quasi_periodic() {
        assert_eq!(incomplete_f(0.0, 0.5).unwrap(), 0.0);
        assert!((incomplete_f(FRAC_PI_2, 0.5).unwrap() - K_HALF).abs() < 1e-12);
        let x = 0.3;
        let shifted = incomplete_f(x + PI, 0.5).unwrap();
        let expected = incomplete_f(x, 0.5).unwrap() + 2.0 * K_HALF;
        assert!((shifted - expected).abs() < 1e-12);
        assert!((incomplete_f(-1.1, 0.3).unwrap() + incomplete_f(1.1, 0.3).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn parameter_outside_unit_interval_is_rejected() {
        for m in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(complete_k(m).is_err());
            assert!(incomplete_f(0.2, m).is_err());
            assert!(jacobi_am(0.2, m).is_err());
            assert!(jacobi_cn_sn_dn(0.2, m).is_err());
        }
    }

    #[test]
    fn am_special_points() {
        assert_eq!(jacobi_am(0.0, 0.5).unwrap(), 0.0);
        assert!((jacobi_am(K_HALF, 0.5).unwrap() - FRAC_PI_2).abs() < 1e-13);
        let v = jacobi_am(0.9, 0.5).unwrap();
        assert!((incomplete_f(v, 0.5).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn cn_sn_dn_special_points() {
        let (cn, sn, dn) = jacobi_cn_sn_dn(0.0, 0.5).unwrap();
        assert_eq!((cn, sn, dn), (1.0, 0.0, 1.0));
        let (cn, sn, dn) = jacobi_cn_sn_dn(K_HALF, 0.5).unwrap();
        assert!(cn.abs() < 1e-13);
        assert!((sn - 1.0).abs() < 1e-13);
        assert!((dn - 0.5f64.sqrt()).abs() < 1e-13);
        let (cn, sn, dn) = jacobi_cn_sn_dn(0.7, 0.5).unwrap();
        assert!((sn * sn + cn * cn - 1.0).abs() < 1e-12);
        assert!((dn * dn - (1.0 - 0.5 * sn * sn)).abs() < 1e-12);
    }

    #[test]
    fn cn_anti_periodic_and_even() {
        for &u in &[0.1, 0.77, 2.3, -1.4] {
            let (cn, sn, _) = cn_sn_dn_unchecked(u, 0.5);
            let (cn_shift, sn_shift, _) = cn_sn_dn_unchecked(u + 2.0 * K_HALF, 0.5);
            let (cn_neg, sn_neg, _) = cn_sn_dn_unchecked(-u, 0.5);
            assert!((cn + cn_shift).abs() < 1e-12);
            assert!((sn + sn_shift).abs() < 1e-12);
            assert!((cn - cn_neg).abs() < 1e-14);
            assert!((sn + sn_neg).abs() < 1e-14);
        }
    }

    #[test]
    fn closure_integral_zeros_and_value_at_origin() {
        assert!(closure_integral_f(1.5).abs() < 1e-9);
        assert!(closure_integral_f(3.5).abs() < 1e-9);
        // Γ(1/4)Γ(1/2) / (2Γ(3/4))
        assert!((closure_integral_f(0.0) - 2.622_057_554_292_119_8).abs() < 1e-10);
        assert_eq!(closure_integral_f(2.2), closure_integral_f(-2.2));
    }
}
