//! Spectral stability calculus for ω-fold circles.
//!
//! Stability of the ω-circle is decided by the sign of the spectral gap
//!
//! ```text
//! λ̂_{c,ω} = min_{n ∈ ℤ∖{0,±ω}} p_c(n/ω),   p_c(x) = 2x⁴ − (6c+2)x² + 8c,
//! ```
//!
//! equivalently by `c ∈ (c_ω⁻, c_ω⁺)`. Thresholds are ratios of integers and
//! are computed in exact rational arithmetic; λ̂ has both a floating and an
//! exact (rational `c`) evaluation.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{domain, Result};

/// |λ̂| at or below this value is reported as borderline in floating mode.
pub const BORDERLINE_EPS: f64 = 1e-12;

/// The quartic symbol `p_c(x) = 2x⁴ − (6c+2)x² + 8c`.
pub fn p_c(x: f64, c: f64) -> f64 {
    let x2 = x * x;
    2.0 * x2 * x2 - (6.0 * c + 2.0) * x2 + 8.0 * c
}

pub fn p_c_exact(x: &BigRational, c: &BigRational) -> BigRational {
    let x2 = x * x;
    let two = rational(2, 1);
    let six = rational(6, 1);
    let eight = rational(8, 1);
    &two * &x2 * &x2 - (&six * c + &two) * &x2 + &eight * c
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Exact rational value of a finite `f64` (every finite double is dyadic).
pub fn rational_from_f64(v: f64) -> Result<BigRational> {
    BigRational::from_float(v).ok_or_else(|| domain(format!("{v} is not finite")))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Largest mode index that can realise λ̂: `p_c` is increasing in `|x|` for
/// `x² ≥ max(0, (3c+1)/2)`.
pub fn search_bound(c: f64, omega: u64) -> u64 {
    let knee = (0.5 * (3.0 * c + 1.0)).max(0.0).sqrt().ceil() as u64;
    (omega + 2).max(omega * knee + omega + 2)
}

fn check_omega(omega: i64) -> Result<u64> {
    if omega >= 1 {
        Ok(omega as u64)
    } else {
        Err(domain(format!("turning number omega = {omega} must be >= 1")))
    }
}

/// Spectral gap `λ̂_{c,ω}` and its minimising mode `|n|`.
pub fn lambda_hat(c: f64, omega: i64) -> Result<(f64, u64)> {
    let w = check_omega(omega)?;
    Ok(lambda_hat_with_bound(c, w, search_bound(c, w)))
}

pub(crate) fn lambda_hat_with_bound(c: f64, w: u64, n_max: u64) -> (f64, u64) {
    let wf = w as f64;
    (1..=n_max)
        .filter(|&n| n != w)
        .map(|n| (p_c(n as f64 / wf, c), n))
        .fold((f64::INFINITY, 0), |best, cand| if cand.0 < best.0 { cand } else { best })
}

/// Exact `λ̂_{c,ω}` for rational `c`.
pub fn lambda_hat_exact(c: &BigRational, omega: i64) -> Result<(BigRational, u64)> {
    let w = check_omega(omega)?;
    // The f64 bound plus one mode of slack covers rounding in the knee.
    let n_max = search_bound(to_f64(c), w) + w;
    let wr = BigRational::from_integer(BigInt::from(w));
    let mut best: Option<(BigRational, u64)> = None;
    for n in (1..=n_max).filter(|&n| n != w) {
        let x = BigRational::from_integer(BigInt::from(n)) / &wr;
        let v = p_c_exact(&x, c);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, n));
        }
    }
    Ok(best.expect("search range is never empty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Borderline,
}

impl Verdict {
    pub fn from_gap(lambda_hat: f64) -> Self {
        if lambda_hat.abs() <= BORDERLINE_EPS {
            Verdict::Borderline
        } else if lambda_hat > 0.0 {
            Verdict::Stable
        } else {
            Verdict::Unstable
        }
    }

    pub fn from_exact_gap(lambda_hat: &BigRational) -> Self {
        if lambda_hat.is_zero() {
            Verdict::Borderline
        } else if lambda_hat.is_positive() {
            Verdict::Stable
        } else {
            Verdict::Unstable
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Borderline => "borderline",
        })
    }
}

/// `g(n/ω) = n²(ω²−n²) / (ω²(4ω²−3n²))`, the value of `c` at which
/// `p_c(n/ω)` changes sign.
pub fn sign_change_parameter(n: u64, omega: u64) -> BigRational {
    let n2 = BigInt::from(n) * BigInt::from(n);
    let w2 = BigInt::from(omega) * BigInt::from(omega);
    let num = &n2 * (&w2 - &n2);
    let den = &w2 * (BigInt::from(4) * &w2 - BigInt::from(3) * &n2);
    BigRational::new(num, den)
}

/// The stability interval `(c_ω⁻, c_ω⁺)`; `c_minus = None` encodes `−∞`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thresholds {
    pub omega: u64,
    pub c_minus: Option<BigRational>,
    pub c_plus: BigRational,
}

impl Thresholds {
    pub fn c_minus_f64(&self) -> f64 {
        self.c_minus.as_ref().map_or(f64::NEG_INFINITY, to_f64)
    }

    pub fn c_plus_f64(&self) -> f64 {
        to_f64(&self.c_plus)
    }

    /// Whether `c` lies strictly inside the stability interval.
    pub fn contains(&self, c: &BigRational) -> bool {
        self.c_minus.as_ref().is_none_or(|lo| c > lo) && *c < self.c_plus
    }
}

pub fn thresholds(omega: i64) -> Result<Thresholds> {
    let w = check_omega(omega)?;
    let c_minus = (1..w).map(|n| sign_change_parameter(n, w)).max();

    // Smallest n with 3n² > 4ω²; 2ω/√3 is irrational so no tie is possible.
    let mut n = ((2.0 * w as f64) / 3f64.sqrt()).floor() as u64;
    while 3 * n * n <= 4 * w * w {
        n += 1;
    }
    let mut best = sign_change_parameter(n, w);
    loop {
        n += 1;
        let g = sign_change_parameter(n, w);
        // g is increasing on (√2, ∞), so nothing further can undercut `best`.
        let past_knee = n * n > 2 * w * w;
        if g < best {
            best = g;
        } else if past_knee {
            break;
        }
    }
    Ok(Thresholds {
        omega: w,
        c_minus,
        c_plus: best,
    })
}

/// Positive roots `r_c^± = √((3c+1 ± √((c−1)(9c−1)))/2)` of `p_c`, defined for
/// `c ∈ (0, 1/9) ∪ (1, ∞)`.
pub fn symbol_roots(c: f64) -> Result<(f64, f64)> {
    if !(c > 0.0 && c < 1.0 / 9.0 || c > 1.0) {
        return Err(domain(format!(
            "symbol roots need c in (0, 1/9) ∪ (1, ∞), got {c}"
        )));
    }
    let disc = ((c - 1.0) * (9.0 * c - 1.0)).sqrt();
    let b = 3.0 * c + 1.0;
    let plus_sq = 0.5 * (b + disc);
    // Vieta (r⁻ r⁺)² = 4c avoids cancellation in b − disc.
    let minus_sq = 4.0 * c / plus_sq;
    Ok((minus_sq.sqrt(), plus_sq.sqrt()))
}

/// `{ω ≤ ω_max : λ̂_{c,ω} > 0}` via the spectral gap.
pub fn stable_omegas(c: f64, omega_max: u64) -> BTreeSet<u64> {
    (1..=omega_max)
        .filter(|&w| Verdict::from_gap(lambda_hat_with_bound(c, w, search_bound(c, w)).0) == Verdict::Stable)
        .collect()
}

/// Exact stable set for rational `c`.
pub fn stable_omegas_exact(c: &BigRational, omega_max: u64) -> BTreeSet<u64> {
    (1..=omega_max)
        .filter(|&w| {
            let (gap, _) = lambda_hat_exact(c, w as i64).expect("omega >= 1");
            gap.is_positive()
        })
        .collect()
}

/// Stable set via the lattice test: ω is stable iff no `n/ω` lies in
/// `[r_c⁻, r_c⁺]`.
pub fn stable_omegas_lattice(c: f64, omega_max: u64) -> Result<BTreeSet<u64>> {
    let (lo, hi) = symbol_roots(c)?;
    Ok((1..=omega_max)
        .filter(|&w| {
            let wf = w as f64;
            let first = (wf * lo).ceil().max(1.0);
            first > (wf * hi).floor()
        })
        .collect())
}

fn serialize_neg_inf_as_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub c: f64,
    pub omega: u64,
    pub lambda_hat: f64,
    pub argmin_n: u64,
    pub verdict: Verdict,
    /// `−∞` for ω = 1, serialised as `null`.
    #[serde(serialize_with = "serialize_neg_inf_as_null")]
    pub c_minus: f64,
    pub c_plus: f64,
    pub r_minus: Option<f64>,
    pub r_plus: Option<f64>,
}

pub fn stability_report(c: f64, omega: i64) -> Result<StabilityReport> {
    let (gap, argmin) = lambda_hat(c, omega)?;
    let th = thresholds(omega)?;
    let roots = symbol_roots(c).ok();
    Ok(StabilityReport {
        c,
        omega: omega as u64,
        lambda_hat: gap,
        argmin_n: argmin,
        verdict: Verdict::from_gap(gap),
        c_minus: th.c_minus_f64(),
        c_plus: th.c_plus_f64(),
        r_minus: roots.map(|r| r.0),
        r_plus: roots.map(|r| r.1),
    })
}

/// One ω-row of a stability-region grid.
#[derive(Debug, Clone, Serialize)]
pub struct GridRow {
    pub omega: u64,
    pub stable: Vec<bool>,
    #[serde(serialize_with = "serialize_neg_inf_as_null")]
    pub c_minus: f64,
    pub c_plus: f64,
    /// Exact endpoints as `p/q` strings (`"-inf"` for ω = 1).
    pub c_minus_exact: String,
    pub c_plus_exact: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityGrid {
    pub c_values: Vec<f64>,
    pub rows: Vec<GridRow>,
}

pub fn stability_region_grid(
    c_min: f64,
    c_max: f64,
    omega_max: u64,
    resolution: usize,
) -> Result<StabilityGrid> {
    if resolution < 2 {
        return Err(domain(format!("grid resolution {resolution} must be >= 2")));
    }
    if !(c_min < c_max) {
        return Err(domain(format!("empty c-range [{c_min}, {c_max}]")));
    }
    let c_values: Vec<f64> = (0..resolution)
        .map(|i| c_min + (c_max - c_min) * i as f64 / (resolution - 1) as f64)
        .collect();
    let rows = (1..=omega_max)
        .into_par_iter()
        .map(|w| {
            let th = thresholds(w as i64).expect("omega >= 1");
            let stable = c_values
                .iter()
                .map(|&c| Verdict::from_gap(lambda_hat_with_bound(c, w, search_bound(c, w)).0) == Verdict::Stable)
                .collect();
            GridRow {
                omega: w,
                stable,
                c_minus: th.c_minus_f64(),
                c_plus: th.c_plus_f64(),
                c_minus_exact: th.c_minus.as_ref().map_or_else(|| "-inf".to_string(), |r| r.to_string()),
                c_plus_exact: th.c_plus.to_string(),
            }
        })
        .collect();
    Ok(StabilityGrid { c_values, rows })
}
