//! Fourier machinery on the uniform periodic grid `x_j = 2πj/N`.

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Relative size, against the largest non-constant coefficient, below which
/// position coefficients are treated as roundoff. Without it the fourth
/// derivatives behind `k_ss` amplify roundoff by `N⁴`.
pub(crate) const NOISE_FLOOR: f64 = 1e-14;

/// Zeroes every non-constant coefficient smaller than `rel` times the largest
/// non-constant one. The constant bin only carries a translation.
pub(crate) fn chop_noise(coeffs: &mut [Complex64], rel: f64) {
    let peak = coeffs.iter().skip(1).map(|c| c.norm_sqr()).fold(0.0, f64::max);
    let cut = rel * rel * peak;
    for c in coeffs.iter_mut().skip(1) {
        if c.norm_sqr() < cut {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

/// Signed integer wavenumber of FFT bin `j`.
pub(crate) fn signed_mode(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Planned transforms plus scratch space for one grid size.
pub(crate) struct SpectralGrid {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    /// Differentiation wavenumbers; the Nyquist bin is zeroed.
    wave: Vec<f64>,
}

impl SpectralGrid {
    pub(crate) fn new(n: usize) -> Self {
        let (fwd, inv) = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            (p.plan_fft_forward(n), p.plan_fft_inverse(n))
        });
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        let wave = (0..n)
            .map(|j| {
                if n % 2 == 0 && j == n / 2 {
                    0.0
                } else {
                    signed_mode(j, n) as f64
                }
            })
            .collect();
        Self {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            wave,
        }
    }

    /// In-place forward transform, normalised so that bin `j` holds the
    /// Fourier coefficient of `e^{i k_j x}`.
    pub(crate) fn forward(&mut self, buf: &mut [Complex64]) {
        self.fwd.process_with_scratch(buf, &mut self.scratch);
        let scale = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    /// In-place forward transform without the `1/N` normalisation.
    pub(crate) fn forward_raw(&mut self, buf: &mut [Complex64]) {
        self.fwd.process_with_scratch(buf, &mut self.scratch);
    }

    /// In-place inverse of [`SpectralGrid::forward`].
    pub(crate) fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inv.process_with_scratch(buf, &mut self.scratch);
    }

    /// Writes the spectra of the first and second derivatives of the signal
    /// whose spectrum is `coeffs`.
    pub(crate) fn derivative_spectra(
        &self,
        coeffs: &[Complex64],
        first: &mut [Complex64],
        second: &mut [Complex64],
    ) {
        for (j, c) in coeffs.iter().enumerate() {
            let k = self.wave[j];
            first[j] = Complex64::new(-k * c.im, k * c.re);
            second[j] = -k * k * c;
        }
    }

    /// First and second x-derivatives of a complex signal. Coefficients below
    /// the relative noise floor are dropped first.
    pub(crate) fn derivatives_complex(&mut self, z: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut coeffs = z.to_vec();
        self.forward(&mut coeffs);
        chop_noise(&mut coeffs, NOISE_FLOOR);
        let mut d1 = vec![Complex64::new(0.0, 0.0); self.n];
        let mut d2 = d1.clone();
        self.derivative_spectra(&coeffs, &mut d1, &mut d2);
        self.inverse(&mut d1);
        self.inverse(&mut d2);
        (d1, d2)
    }

    /// First and second x-derivatives of a real signal, computed with one
    /// forward and one inverse transform.
    pub(crate) fn derivatives_real(&mut self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.derivatives_real_in_place(&mut buf);
        (buf.iter().map(|c| c.re).collect(), buf.iter().map(|c| c.im).collect())
    }

    /// `buf` holds a real signal on entry; on exit, `re` is the first and `im`
    /// the second derivative.
    pub(crate) fn derivatives_real_in_place(&mut self, buf: &mut [Complex64]) {
        self.forward(buf);
        let i = Complex64::new(0.0, 1.0);
        for (j, c) in buf.iter_mut().enumerate() {
            let k = self.wave[j];
            let d1 = Complex64::new(-k * c.im, k * c.re);
            let d2 = -k * k * *c;
            *c = d1 + i * d2;
        }
        self.inverse(buf);
    }

    /// Normalised spectrum of a real signal.
    pub(crate) fn spectrum_real(&mut self, u: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Periodic antiderivative (zero mean) of a real signal's oscillating part
    /// together with the signal mean.
    pub(crate) fn antiderivative_real(&mut self, u: &[f64]) -> (Vec<f64>, f64) {
        let mut buf = self.spectrum_real(u);
        let mean = buf[0].re;
        buf[0] = Complex64::new(0.0, 0.0);
        for (j, c) in buf.iter_mut().enumerate() {
            let k = self.wave[j];
            *c = if k == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(c.im / k, -c.re / k)
            };
        }
        self.inverse(&mut buf);
        (buf.iter().map(|c| c.re).collect(), mean)
    }

    /// Fraction of spectral energy in the top third of the resolved band.
    pub(crate) fn top_third_energy(coeffs: &[Complex64]) -> f64 {
        let n = coeffs.len();
        let cutoff = (n / 2) as i64 * 2 / 3;
        let mut total = 0.0;
        let mut top = 0.0;
        for (j, c) in coeffs.iter().enumerate() {
            let e = c.norm_sqr();
            total += e;
            if signed_mode(j, n).abs() > cutoff {
                top += e;
            }
        }
        if total > 0.0 {
            top / total
        } else {
            0.0
        }
    }
}

/// Evaluates the trigonometric interpolant with spectrum `coeffs` at `x`.
/// The Nyquist coefficient is split evenly between `±N/2`.
pub(crate) fn evaluate(coeffs: &[Complex64], x: f64) -> Complex64 {
    let n = coeffs.len();
    let step = Complex64::from_polar(1.0, x);
    let mut pos = Complex64::new(1.0, 0.0);
    let mut acc = coeffs[0];
    let half = n / 2;
    for j in 1..half {
        pos *= step;
        acc += coeffs[j] * pos + coeffs[n - j] * pos.conj();
    }
    if n % 2 == 0 {
        acc += coeffs[half] * (half as f64 * x).cos();
    } else {
        pos *= step;
        acc += coeffs[half] * pos + coeffs[half + 1] * pos.conj();
    }
    acc
}

/// Evaluates the interpolant and its x-derivative at `x`.
pub(crate) fn evaluate_with_derivative(coeffs: &[Complex64], x: f64) -> (Complex64, Complex64) {
    let n = coeffs.len();
    let step = Complex64::from_polar(1.0, x);
    let i = Complex64::new(0.0, 1.0);
    let mut pos = Complex64::new(1.0, 0.0);
    let mut value = coeffs[0];
    let mut deriv = Complex64::new(0.0, 0.0);
    let half = n / 2;
    for j in 1..half {
        pos *= step;
        let p = coeffs[j] * pos;
        let q = coeffs[n - j] * pos.conj();
        value += p + q;
        deriv += i * (j as f64) * (p - q);
    }
    if n % 2 == 0 {
        let h = half as f64;
        value += coeffs[half] * (h * x).cos();
        deriv -= coeffs[half] * h * (h * x).sin();
    }
    (value, deriv)
}

pub(crate) fn grid_point(j: usize, n: usize) -> f64 {
    TAU * j as f64 / n as f64
}
