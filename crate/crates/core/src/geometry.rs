//! Sampled closed immersed planar curves and their diagnostics.
//!
//! A [`ClosedCurve`] stores `N` points sampled at uniform parameter values
//! `x_j = 2πj/N` of the periodic parameter circle. All derivatives are
//! trigonometric (FFT-based) in `x`; arclength derivatives use
//! `∂_s = |γ_x|⁻¹ ∂_x`.

use std::f64::consts::{PI, TAU};
use std::io::{BufRead, Write};

use log::warn;
pub use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{self, SpectralGrid};

/// Smallest admissible number of samples.
pub const MIN_SAMPLES: usize = 16;
/// Turning numbers farther than this from an integer are rejected.
pub const TURNING_REJECT: f64 = 0.1;
/// Turning numbers farther than this from an integer are reported.
pub const TURNING_WARN: f64 = 1e-3;
/// Spectral energy fraction in the top third of the band that triggers a
/// resolution warning.
pub const RESOLUTION_WARN: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedCurve {
    points: Vec<[f64; 2]>,
}

impl ClosedCurve {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        let n = points.len();
        if n < MIN_SAMPLES || n % 2 != 0 {
            return Err(Error::DegenerateCurve(format!(
                "need an even number of samples >= {MIN_SAMPLES}, got {n}"
            )));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateCurve("non-finite coordinates".into()));
        }
        for j in 0..n {
            let p = points[j];
            let q = points[(j + 1) % n];
            if p == q {
                return Err(Error::DegenerateCurve(format!(
                    "samples {j} and {} coincide",
                    (j + 1) % n
                )));
            }
        }
        Ok(Self { points })
    }

    /// Samples `f` at `x_j = 2πj/n`.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> [f64; 2]) -> Result<Self> {
        Self::new((0..n).map(|j| f(spectral::grid_point(j, n))).collect())
    }

    /// Counterclockwise `omega`-fold circle of the given radius about the origin.
    pub fn circle(radius: f64, omega: u32, n: usize) -> Result<Self> {
        let w = omega as f64;
        Self::from_fn(n, |x| [radius * (w * x).cos(), radius * (w * x).sin()])
    }

    /// Counterclockwise ellipse `(a cos x, b sin x)`.
    pub fn ellipse(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::from_fn(n, |x| [a * x.cos(), b * x.sin()])
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn into_points(self) -> Vec<[f64; 2]> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|p| [factor * p[0], factor * p[1]])
    }

    pub fn translated(&self, by: [f64; 2]) -> Self {
        self.map(|p| [p[0] + by[0], p[1] + by[1]])
    }

    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        self.map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]])
    }

    fn map(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        Self {
            points: self.points.iter().map(|&p| f(p)).collect(),
        }
    }

    pub(crate) fn as_complex(&self) -> Vec<Complex64> {
        self.points.iter().map(|p| Complex64::new(p[0], p[1])).collect()
    }

    pub(crate) fn from_complex_unchecked(z: &[Complex64]) -> Self {
        Self {
            points: z.iter().map(|c| [c.re, c.im]).collect(),
        }
    }

    /// Arclength-weighted centroid `(1/L) ∫ γ ds`.
    pub fn centroid(&self) -> Result<[f64; 2]> {
        let frame = tangent_normal_curvature(self)?;
        let total: f64 = frame.speed.iter().sum();
        let mut c = [0.0, 0.0];
        for (p, v) in self.points.iter().zip(&frame.speed) {
            c[0] += p[0] * v;
            c[1] += p[1] * v;
        }
        Ok([c[0] / total, c[1] / total])
    }

    /// Writes the curve in the `x,px,py` CSV format.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,px,py")?;
        let n = self.len();
        for (j, p) in self.points.iter().enumerate() {
            writeln!(out, "{:.17e},{:.17e},{:.17e}", spectral::grid_point(j, n), p[0], p[1])?;
        }
        Ok(())
    }

    /// Reads a curve in the `x,px,py` CSV format. The parameter column must
    /// be the uniform grid `2πj/N`.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::CurveFile("empty file".into()))??;
        if header.trim() != "x,px,py" {
            return Err(Error::CurveFile(format!("unexpected header {header:?}")));
        }
        let mut params = Vec::new();
        let mut points = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::CurveFile(format!("line {}: {e}", lineno + 2)))?;
            if fields.len() != 3 {
                return Err(Error::CurveFile(format!(
                    "line {}: expected 3 columns, found {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            params.push(fields[0]);
            points.push([fields[1], fields[2]]);
        }
        let n = points.len();
        for (j, &x) in params.iter().enumerate() {
            if (x - spectral::grid_point(j, n)).abs() > 1e-9 {
                return Err(Error::CurveFile(format!(
                    "parameter grid is not uniform: row {j} has x = {x}, expected {}",
                    spectral::grid_point(j, n)
                )));
            }
        }
        Self::new(points)
    }
}

/// Unit tangent, unit normal, curvature and parametrisation speed `|γ_x|` at
/// every sample.
#[derive(Debug, Clone)]
pub struct Frame {
    pub tangent: Vec<[f64; 2]>,
    pub normal: Vec<[f64; 2]>,
    pub curvature: Vec<f64>,
    pub speed: Vec<f64>,
}

/// Computes `T`, `N = J T` (rotation by +π/2) and `k = ⟨γ_ss, N⟩`.
pub fn tangent_normal_curvature(curve: &ClosedCurve) -> Result<Frame> {
    let n = curve.len();
    let mut grid = SpectralGrid::new(n);
    let (zx, zxx) = grid.derivatives_complex(&curve.as_complex());
    let mut frame = Frame {
        tangent: Vec::with_capacity(n),
        normal: Vec::with_capacity(n),
        curvature: Vec::with_capacity(n),
        speed: Vec::with_capacity(n),
    };
    let scale = zx.iter().map(|d| d.norm()).fold(0.0, f64::max);
    for (d1, d2) in zx.iter().zip(&zxx) {
        let v = d1.norm();
        if !(v > 1e-12 * scale) {
            return Err(Error::DegenerateCurve("curve is not immersed".into()));
        }
        let t = [d1.re / v, d1.im / v];
        frame.tangent.push(t);
        frame.normal.push([-t[1], t[0]]);
        frame.curvature.push((d1.re * d2.im - d1.im * d2.re) / (v * v * v));
        frame.speed.push(v);
    }
    Ok(frame)
}

/// Curvature together with its first two arclength derivatives.
#[derive(Debug, Clone)]
pub struct CurvatureProfile {
    pub k: Vec<f64>,
    pub k_s: Vec<f64>,
    pub k_ss: Vec<f64>,
    pub speed: Vec<f64>,
}

pub fn curvature_profile(curve: &ClosedCurve) -> Result<CurvatureProfile> {
    let frame = tangent_normal_curvature(curve)?;
    let n = curve.len();
    let mut grid = SpectralGrid::new(n);
    let (kx, kxx) = grid.derivatives_real(&frame.curvature);
    let (vx, _) = grid.derivatives_real(&frame.speed);
    let mut k_s = Vec::with_capacity(n);
    let mut k_ss = Vec::with_capacity(n);
    for j in 0..n {
        let v = frame.speed[j];
        k_s.push(kx[j] / v);
        k_ss.push(kxx[j] / (v * v) - kx[j] * vx[j] / (v * v * v));
    }
    Ok(CurvatureProfile {
        k: frame.curvature,
        k_s,
        k_ss,
        speed: frame.speed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveMetrics {
    /// Length `L`.
    pub length: f64,
    /// Signed area `½∮(x dy − y dx)`.
    pub area: f64,
    /// Turning number, rounded from `turning_raw`.
    pub omega: i64,
    /// `(1/2π) ∫ k ds` before rounding.
    pub turning_raw: f64,
    /// Mean curvature `2πω/L`.
    pub k_bar: f64,
    /// Curvature oscillation `L ∫ (k − k̄)² ds`.
    pub k_osc: f64,
    pub k_max_abs: f64,
}

pub fn metrics(curve: &ClosedCurve) -> Result<CurveMetrics> {
    let n = curve.len();
    let frame = tangent_normal_curvature(curve)?;
    let dx = TAU / n as f64;
    let length: f64 = frame.speed.iter().sum::<f64>() * dx;
    let area = 0.5
        * curve
            .points
            .iter()
            .zip(&frame.tangent)
            .zip(&frame.speed)
            .map(|((p, t), v)| (p[0] * t[1] - p[1] * t[0]) * v)
            .sum::<f64>()
        * dx;
    let total_turning: f64 = frame
        .curvature
        .iter()
        .zip(&frame.speed)
        .map(|(k, v)| k * v)
        .sum::<f64>()
        * dx;
    let turning_raw = total_turning / TAU;
    let omega = turning_raw.round();
    let defect = (turning_raw - omega).abs();
    if defect > TURNING_REJECT {
        return Err(Error::NonClosedCurvature { raw: turning_raw });
    }
    if defect > TURNING_WARN {
        warn!("turning number {turning_raw} deviates from {omega} by {defect:.2e}");
    }
    let k_bar = TAU * omega / length;
    let osc: f64 = frame
        .curvature
        .iter()
        .zip(&frame.speed)
        .map(|(k, v)| (k - k_bar).powi(2) * v)
        .sum::<f64>()
        * dx;
    let k_max_abs = frame.curvature.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    Ok(CurveMetrics {
        length,
        area,
        omega: omega as i64,
        turning_raw,
        k_bar,
        k_osc: length * osc,
        k_max_abs,
    })
}

/// Fraction of the position spectrum's energy in the top third of the band.
pub fn resolution_defect(curve: &ClosedCurve) -> f64 {
    let mut grid = SpectralGrid::new(curve.len());
    let mut z = curve.as_complex();
    grid.forward(&mut z);
    // The mean (translation) carries no shape information.
    z[0] = Complex64::new(0.0, 0.0);
    SpectralGrid::top_third_energy(&z)
}

fn warn_if_under_resolved(curve: &ClosedCurve) {
    let defect = resolution_defect(curve);
    if defect > RESOLUTION_WARN {
        warn!(
            "curve with {} samples looks under-resolved: top third of the spectrum holds {defect:.2e} of the energy",
            curve.len()
        );
    }
}

/// Resamples the curve at `n_out` points equally spaced in arclength, using
/// trigonometric interpolation of the position. The first sample is kept.
pub fn resample_by_arclength(curve: &ClosedCurve, n_out: usize) -> Result<ClosedCurve> {
    warn_if_under_resolved(curve);
    let n = curve.len();
    let mut grid = SpectralGrid::new(n);
    let mut coeffs = curve.as_complex();
    grid.forward(&mut coeffs);
    let speed = tangent_normal_curvature(curve)?.speed;
    let (anti, mean_speed) = grid.antiderivative_real(&speed);
    let anti_coeffs = grid.spectrum_real(&anti);
    let arclength = |x: f64| {
        let (a, da) = spectral::evaluate_with_derivative(&anti_coeffs, x);
        (mean_speed * x + a.re, mean_speed + da.re)
    };
    let offset = arclength(0.0).0;
    let mut out = Vec::with_capacity(n_out);
    let mut shift = 0.0;
    for j in 0..n_out {
        let base = spectral::grid_point(j, n_out);
        let target = mean_speed * base + offset;
        // Newton on s(x) = target (s' = |γ_x| > 0), seeded with the
        // previous point's offset from the uniform grid.
        let mut x = base + shift;
        for _ in 0..50 {
            let (s, ds) = arclength(x);
            let delta = (s - target) / ds;
            x -= delta;
            if delta.abs() < 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        shift = x - base;
        let z = spectral::evaluate(&coeffs, x);
        out.push([z.re, z.im]);
    }
    ClosedCurve::new(out)
}

/// Fourier coefficients `a_n`, `|n| ≤ n_max`, of `f = k − 1` as a function of
/// arclength after rescaling the curve to length `2πω`:
/// `f(s) = Σ a_n e^{ins/ω}`.
#[derive(Debug, Clone)]
pub struct FourierModes {
    omega: i64,
    n_max: usize,
    coeffs: Vec<Complex64>,
}

impl FourierModes {
    pub fn omega(&self) -> i64 {
        self.omega
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Coefficient `a_n`; `None` when `|n| > n_max`.
    pub fn get(&self, n: i64) -> Option<Complex64> {
        let idx = n + self.n_max as i64;
        (n.unsigned_abs() as usize <= self.n_max).then(|| self.coeffs[idx as usize])
    }

    /// `2πω Σ_{n≠0} |a_n|²` over the stored modes, i.e. `e = K_osc/(2πω)`.
    pub fn energy(&self) -> f64 {
        let w = self.omega.abs() as f64;
        TAU * w
            * (1..=self.n_max as i64)
                .map(|n| self.get(n).unwrap().norm_sqr() + self.get(-n).unwrap().norm_sqr())
                .sum::<f64>()
    }

    /// `2πω Σ_{n≠0} p(n/ω) |a_n|²` for a symbol `p`.
    pub fn quadratic_form(&self, symbol: impl Fn(f64) -> f64) -> f64 {
        let w = self.omega.abs() as f64;
        TAU * w
            * (1..=self.n_max as i64)
                .map(|n| {
                    symbol(n as f64 / w)
                        * (self.get(n).unwrap().norm_sqr() + self.get(-n).unwrap().norm_sqr())
                })
                .sum::<f64>()
    }
}

/// Rescales to `L = 2πω`, resamples uniformly in arclength and returns the
/// curve with its turning number.
pub(crate) fn normalise_to_circle_length(curve: &ClosedCurve) -> Result<(ClosedCurve, i64)> {
    let m = metrics(curve)?;
    if m.omega == 0 {
        return Err(Error::UndefinedExpansion);
    }
    let target = TAU * m.omega.abs() as f64;
    let scaled = curve.scaled(target / m.length);
    let uniform = resample_by_arclength(&scaled, curve.len())?;
    Ok((uniform, m.omega))
}

pub fn fourier_of_curvature(curve: &ClosedCurve, n_max: usize) -> Result<FourierModes> {
    let (uniform, omega) = normalise_to_circle_length(curve)?;
    let n = uniform.len();
    if n_max >= n / 2 {
        return Err(Error::Precondition(format!(
            "n_max = {n_max} must be below N/2 = {}",
            n / 2
        )));
    }
    let frame = tangent_normal_curvature(&uniform)?;
    // Orientation: for ω < 0 the circle has k ≡ −1.
    let sign = omega.signum() as f64;
    let f: Vec<f64> = frame.curvature.iter().map(|k| sign * k - 1.0).collect();
    let mut grid = SpectralGrid::new(n);
    let spec = grid.spectrum_real(&f);
    // Uniform arclength on a curve of length 2πω gives s = ωx, so the
    // coefficient of e^{ins/ω} is DFT bin n.
    let coeffs = (-(n_max as i64)..=n_max as i64)
        .map(|m| spec[m.rem_euclid(n as i64) as usize])
        .collect();
    Ok(FourierModes {
        omega,
        n_max,
        coeffs,
    })
}

/// `E_tr = 2πω (|a_ω|² + |a_{−ω}|²)`, the energy in the translation modes.
pub fn translation_mode_energy(modes: &FourierModes, omega: i64) -> Result<f64> {
    match (modes.get(omega), modes.get(-omega)) {
        (Some(p), Some(m)) => Ok(TAU * omega.abs() as f64 * (p.norm_sqr() + m.norm_sqr())),
        _ => Err(Error::Precondition(format!(
            "|omega| = {} exceeds n_max = {}",
            omega.abs(),
            modes.n_max
        ))),
    }
}

/// Maximum over samples of `| |γ − centre| / mean − 1 |`, a roundness gauge.
pub fn roundness_defect(curve: &ClosedCurve) -> Result<f64> {
    let c = curve.centroid()?;
    let radii: Vec<f64> = curve
        .points
        .iter()
        .map(|p| (p[0] - c[0]).hypot(p[1] - c[1]))
        .collect();
    let mean = radii.iter().sum::<f64>() / radii.len() as f64;
    Ok(radii.iter().fold(0.0f64, |m, r| m.max((r / mean - 1.0).abs())))
}

/// Winding number of the tangent image about the origin, computed from
/// accumulated angle increments (independent of the curvature integral).
pub fn tangent_winding(curve: &ClosedCurve) -> Result<f64> {
    let frame = tangent_normal_curvature(curve)?;
    let n = frame.tangent.len();
    let mut total = 0.0;
    for j in 0..n {
        let a = frame.tangent[j];
        let b = frame.tangent[(j + 1) % n];
        total += (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]);
    }
    Ok(total / (2.0 * PI))
}
