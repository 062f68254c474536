//! Time integration of `∂tγ = −(k_ss + c k³)N` and its length-normalised
//! variant `∂tγ = −(k_ss + c k³)N + λ(t)γ`.
//!
//! Steps are explicit RK4 with `dt = dt_safety·Δs_min⁴`. The curve is
//! periodically resampled to uniform arclength, which moves points along the
//! curve but leaves its image unchanged.

use std::f64::consts::{PI, TAU};

use log::{debug, info};
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::geometry::{metrics, resample_by_arclength, ClosedCurve};
use crate::perturbation::{q_functional, r_functional};
use crate::spectral::{SpectralGrid, NOISE_FLOOR};

pub const DEFAULT_DT_SAFETY: f64 = 0.02;
pub const MAX_DT_SAFETY: f64 = 0.03;
pub const MIN_FLOW_SAMPLES: usize = 64;
/// Steps shorter than this are treated as a singularity.
pub const DT_UNDERFLOW: f64 = 1e-15;
/// Relative length drift tolerated in the normalised flow between corrections.
pub const LENGTH_DRIFT_TOL: f64 = 1e-6;
/// Resampling is skipped while the parametrisation speed is uniform to this
/// relative tolerance.
pub const UNIFORM_SPEED_TOL: f64 = 1e-12;
/// Exponential filter `exp(−α q^p)` applied at every reparametrisation.
pub const FILTER_STRENGTH: f64 = 36.0;
pub const FILTER_ORDER: i32 = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    Unnormalised,
    LengthNormalised,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowConfig {
    pub c: f64,
    pub mode: FlowMode,
    pub samples: usize,
    pub dt_safety: f64,
    pub reparam_every: usize,
    pub t_end: Option<f64>,
    pub stop_kmax: f64,
    /// Stop (without error) once `K_osc` exceeds this value.
    pub stop_koscmax: f64,
    /// Stop once `K_osc` falls below this value.
    pub stop_kosc_below: Option<f64>,
    pub record_every: usize,
    /// Keep a curve snapshot every this many records.
    pub snapshot_every: Option<usize>,
    pub max_steps: Option<u64>,
}

impl FlowConfig {
    pub fn new(c: f64, mode: FlowMode) -> Self {
        Self {
            c,
            mode,
            samples: 128,
            dt_safety: DEFAULT_DT_SAFETY,
            reparam_every: 10,
            t_end: None,
            stop_kmax: 1e4,
            stop_koscmax: f64::INFINITY,
            stop_kosc_below: None,
            record_every: 1000,
            snapshot_every: None,
            max_steps: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.c.is_finite() {
            return Err(domain(format!("c = {} is not finite", self.c)));
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= MAX_DT_SAFETY) {
            return Err(domain(format!(
                "dt_safety = {} outside (0, {MAX_DT_SAFETY}]",
                self.dt_safety
            )));
        }
        if self.samples < MIN_FLOW_SAMPLES || self.samples % 2 != 0 {
            return Err(domain(format!(
                "flow needs an even sample count >= {MIN_FLOW_SAMPLES}, got {}",
                self.samples
            )));
        }
        if self.reparam_every == 0 || self.record_every == 0 {
            return Err(domain("reparam_every and record_every must be positive"));
        }
        if let Some(t) = self.t_end {
            if !(t >= 0.0) {
                return Err(domain(format!("t_end = {t} must be non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub time: f64,
    pub curve: ClosedCurve,
    /// `λ(t)` at the start of the last step (normalised flow only).
    pub lambda_now: f64,
    /// Accumulated scale `σ`; in the unnormalised flow simply `L/L₀`.
    pub sigma: f64,
    /// Reference length `L₀ = 2π|ω|`, or the initial length when `ω = 0`.
    pub l0: f64,
    pub omega: i64,
    pub mode: FlowMode,
    pub steps: u64,
    /// Largest `|factor − 1|` applied by the length correction so far.
    pub max_length_correction: f64,
}

impl FlowState {
    /// Initial state. In the normalised flow the curve is first rescaled to
    /// `L₀ = 2π|ω|` and the factor is recorded in `σ`.
    pub fn new(curve: ClosedCurve, mode: FlowMode) -> Result<Self> {
        let m = metrics(&curve)?;
        let (curve, l0, sigma) = match mode {
            FlowMode::LengthNormalised => {
                if m.omega == 0 {
                    return Err(Error::NotApplicable(
                        "the length-normalised flow needs a non-zero turning number".into(),
                    ));
                }
                let l0 = TAU * m.omega.unsigned_abs() as f64;
                (curve.scaled(l0 / m.length), l0, m.length / l0)
            }
            FlowMode::Unnormalised => {
                let l0 = if m.omega == 0 { m.length } else { TAU * m.omega.unsigned_abs() as f64 };
                (curve, l0, m.length / l0)
            }
        };
        Ok(Self {
            time: 0.0,
            curve,
            lambda_now: 0.0,
            sigma,
            l0,
            omega: m.omega,
            mode,
            steps: 0,
            max_length_correction: 0.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Record {
    pub t: f64,
    pub length: f64,
    pub area: f64,
    pub omega: i64,
    pub k_osc: f64,
    pub k_max: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub centroid: [f64; 2],
}

impl Record {
    /// `e = K_osc/(2π|ω|)`.
    pub fn e(&self) -> f64 {
        self.k_osc / (TAU * self.omega.unsigned_abs().max(1) as f64)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TimeSeries {
    pub records: Vec<Record>,
    pub snapshots: Vec<(f64, ClosedCurve)>,
}

impl TimeSeries {
    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    /// Writes the series CSV with columns `t,L,A,omega,Kosc,kmax,lambda,sigma,cx,cy`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,L,A,omega,Kosc,kmax,lambda,sigma,cx,cy")?;
        for r in &self.records {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.t, r.length, r.area, r.omega, r.k_osc, r.k_max, r.lambda, r.sigma, r.centroid[0], r.centroid[1]
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TimeReached,
    Converged,
    KoscCeiling,
    StepLimit,
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub series: TimeSeries,
    pub final_state: FlowState,
    pub stop: StopReason,
}

/// A detected singularity: the last accepted state, everything recorded up to
/// it, and a bracket for the blowup time.
#[derive(Debug, Clone)]
pub struct Blowup {
    pub state: FlowState,
    pub series: TimeSeries,
    pub bracket: (f64, f64),
    pub reason: String,
}

/// Quantities evaluated alongside the velocity.
#[derive(Debug, Clone, Copy)]
struct Diagnostics {
    lambda: f64,
    k_max: f64,
    v_min: f64,
    speed_spread: f64,
}

/// Reusable spectral workspace for velocity evaluations at a fixed `N`.
struct Workspace {
    n: usize,
    grid: SpectralGrid,
    wave: Vec<f64>,
    zx: Vec<Complex64>,
    zxx: Vec<Complex64>,
    w: Vec<Complex64>,
    v: Vec<f64>,
    inv_v: Vec<f64>,
    vx: Vec<f64>,
    k: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let zero = vec![Complex64::new(0.0, 0.0); n];
        let wave = (0..n)
            .map(|j| {
                if j == n / 2 {
                    0.0
                } else if j < n / 2 {
                    j as f64
                } else {
                    j as f64 - n as f64
                }
            })
            .collect();
        Self {
            n,
            grid: SpectralGrid::new(n),
            wave,
            zx: zero.clone(),
            zxx: zero.clone(),
            w: zero,
            v: vec![0.0; n],
            inv_v: vec![0.0; n],
            vx: vec![0.0; n],
            k: vec![0.0; n],
        }
    }

    /// Writes the velocity of the flow at `z` into `out`.
    fn velocity(&mut self, z: &[Complex64], c: f64, normalised: Option<f64>, out: &mut [Complex64]) -> Result<Diagnostics> {
        let n = self.n;
        let scale = 1.0 / n as f64;
        self.zx.copy_from_slice(z);
        self.grid.forward_raw(&mut self.zx);
        // Same relative cut as `chop_noise`, fused with differentiation.
        let peak = self.zx.iter().skip(1).map(|c| c.norm_sqr()).fold(0.0, f64::max);
        let cut = NOISE_FLOOR * NOISE_FLOOR * peak;
        for j in 0..n {
            let kw = self.wave[j];
            let a = self.zx[j];
            let a = if a.norm_sqr() < cut { Complex64::new(0.0, 0.0) } else { a * scale };
            self.zxx[j] = -kw * kw * a;
            self.zx[j] = Complex64::new(-kw * a.im, kw * a.re);
        }
        self.grid.inverse(&mut self.zx);
        self.grid.inverse(&mut self.zxx);

        let mut v_max = 0.0f64;
        let mut v_min = f64::INFINITY;
        for j in 0..n {
            let d1 = self.zx[j];
            let d2 = self.zxx[j];
            // sqrt of the squared norm; `norm` goes through the slower hypot.
            let v = d1.norm_sqr().sqrt();
            let iv = 1.0 / v;
            self.v[j] = v;
            self.inv_v[j] = iv;
            self.vx[j] = (d1.re * d2.re + d1.im * d2.im) * iv;
            self.k[j] = (d1.re * d2.im - d1.im * d2.re) * iv * iv * iv;
            self.w[j] = Complex64::new(self.k[j], 0.0);
            v_max = v_max.max(v);
            v_min = v_min.min(v);
        }
        if !(v_min > 1e-12 * v_max) {
            return Err(Error::DegenerateCurve("curve lost immersion during the flow".into()));
        }

        // k is real, so k_x and k_xx come back as the real and imaginary
        // parts of one inverse transform.
        self.grid.forward_raw(&mut self.w);
        for j in 0..n {
            let kw = self.wave[j];
            let a = self.w[j] * scale;
            let d1 = Complex64::new(-kw * a.im, kw * a.re);
            let d2 = -kw * kw * a;
            self.w[j] = Complex64::new(d1.re - d2.im, d1.im + d2.re);
        }
        self.grid.inverse(&mut self.w);

        let dx = TAU / n as f64;
        let mut ks2 = 0.0;
        let mut k4 = 0.0;
        let mut k_max = 0.0f64;
        for j in 0..n {
            let v = self.v[j];
            let iv = self.inv_v[j];
            let k = self.k[j];
            let kx = self.w[j].re;
            let kxx = self.w[j].im;
            let k_s = kx * iv;
            let k_ss = (kxx - k_s * self.vx[j]) * iv * iv;
            let f = k_ss + c * k * k * k;
            let t = self.zx[j] * iv;
            // −F N with N = iT.
            out[j] = Complex64::new(f * t.im, -f * t.re);
            ks2 += kx * k_s;
            k4 += k * k * k * k * v;
            k_max = k_max.max(k.abs());
        }
        ks2 *= dx;
        k4 *= dx;
        let lambda = match normalised {
            Some(l0) => {
                let lambda = (ks2 - c * k4) / l0;
                for (o, p) in out.iter_mut().zip(z) {
                    *o += lambda * p;
                }
                lambda
            }
            None => 0.0,
        };
        Ok(Diagnostics {
            lambda,
            k_max,
            v_min,
            speed_spread: (v_max - v_min) / v_max,
        })
    }
}

/// Outcome of one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub dt: f64,
    pub k_max: f64,
    pub lambda: f64,
    pub resampled: bool,
}

/// Stateful RK4 integrator bound to one configuration.
pub struct Stepper {
    config: FlowConfig,
    ws: Workspace,
    z: Vec<Complex64>,
    stage: Vec<Complex64>,
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    /// Spectral filter weights applied at every reparametrisation.
    filter: Vec<f64>,
}

impl Stepper {
    pub fn new(config: &FlowConfig) -> Result<Self> {
        config.validate()?;
        let n = config.samples;
        let zero = vec![Complex64::new(0.0, 0.0); n];
        Ok(Self {
            config: config.clone(),
            ws: Workspace::new(n),
            z: zero.clone(),
            stage: zero.clone(),
            k1: zero.clone(),
            k2: zero.clone(),
            k3: zero.clone(),
            k4: zero,
            filter: (0..n)
                .map(|j| {
                    let q = j.min(n - j) as f64 / (n / 2) as f64;
                    (-FILTER_STRENGTH * q.powi(FILTER_ORDER)).exp()
                })
                .collect(),
        })
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    fn l0_for(&self, state: &FlowState) -> Option<f64> {
        (self.config.mode == FlowMode::LengthNormalised).then_some(state.l0)
    }

    fn dt_for_speed(&self, v_min: f64) -> f64 {
        let ds = v_min * TAU / self.z.len() as f64;
        self.config.dt_safety * ds.powi(4)
    }

    /// Natural step size `dt_safety·Δs_min⁴` for the current curve.
    pub fn natural_dt(&mut self, curve: &ClosedCurve) -> Result<f64> {
        let z = curve.as_complex();
        let d = self.ws.velocity(&z, self.config.c, None, &mut self.k1)?;
        Ok(self.dt_for_speed(d.v_min))
    }

    /// Loads `state` and evaluates the first RK4 stage.
    fn first_stage(&mut self, state: &FlowState) -> Result<Diagnostics> {
        for (zj, p) in self.z.iter_mut().zip(state.curve.points()) {
            *zj = Complex64::new(p[0], p[1]);
        }
        let l0 = self.l0_for(state);
        self.ws.velocity(&self.z, self.config.c, l0, &mut self.k1)
    }

    /// Remaining RK4 stages; commits the step to `state` only on success.
    fn finish(&mut self, state: &mut FlowState, d1: Diagnostics, dt: f64) -> Result<()> {
        let c = self.config.c;
        let l0 = self.l0_for(state);
        let n = self.z.len();
        for j in 0..n {
            self.stage[j] = self.z[j] + 0.5 * dt * self.k1[j];
        }
        let d2 = self.ws.velocity(&self.stage, c, l0, &mut self.k2)?;
        for j in 0..n {
            self.stage[j] = self.z[j] + 0.5 * dt * self.k2[j];
        }
        let d3 = self.ws.velocity(&self.stage, c, l0, &mut self.k3)?;
        for j in 0..n {
            self.stage[j] = self.z[j] + dt * self.k3[j];
        }
        let d4 = self.ws.velocity(&self.stage, c, l0, &mut self.k4)?;
        for j in 0..n {
            self.stage[j] = self.z[j] + dt / 6.0 * (self.k1[j] + 2.0 * self.k2[j] + 2.0 * self.k3[j] + self.k4[j]);
        }
        if self.stage.iter().any(|p| !(p.re.is_finite() && p.im.is_finite())) {
            return Err(Error::DegenerateCurve("non-finite positions".into()));
        }
        state.curve = ClosedCurve::from_complex_unchecked(&self.stage);
        state.time += dt;
        state.lambda_now = d1.lambda;
        if self.config.mode == FlowMode::LengthNormalised {
            let mean_lambda = (d1.lambda + 2.0 * d2.lambda + 2.0 * d3.lambda + d4.lambda) / 6.0;
            state.sigma *= (-mean_lambda * dt).exp();
        }
        Ok(())
    }

    /// One RK4 step of size `dt` (which may be negative), without resampling
    /// or stop checks.
    fn rk4(&mut self, state: &mut FlowState, dt: f64) -> Result<()> {
        let d1 = self.first_stage(state)?;
        self.finish(state, d1, dt)
    }

    /// Advances `state` by one step of at most `dt_cap`. On a detected
    /// singularity `state` is left at the last accepted step.
    pub fn step(&mut self, state: &mut FlowState, dt_cap: Option<f64>) -> Result<StepInfo, StepFailure> {
        let d1 = self.first_stage(state).map_err(|e| StepFailure::Singular(e.to_string()))?;
        if d1.k_max > self.config.stop_kmax {
            return Err(StepFailure::Singular(format!(
                "max |k| = {:.3e} exceeded {:.3e}",
                d1.k_max, self.config.stop_kmax
            )));
        }
        let mut dt = self.dt_for_speed(d1.v_min);
        if dt < DT_UNDERFLOW {
            return Err(StepFailure::Singular(format!("time step {dt:.3e} underflowed")));
        }
        if let Some(cap) = dt_cap {
            dt = dt.min(cap);
        }
        self.finish(state, d1, dt)
            .map_err(|e| StepFailure::Singular(e.to_string()))?;
        state.steps += 1;
        let mut resampled = false;
        if state.steps % self.config.reparam_every as u64 == 0 {
            resampled = self.reparametrise(state, d1.speed_spread).map_err(StepFailure::Other)?;
        }
        Ok(StepInfo {
            dt,
            k_max: d1.k_max,
            lambda: d1.lambda,
            resampled,
        })
    }

    /// Applies `exp(−36 (|n|/(N/2))³⁶)` to the position spectrum. Near the
    /// Nyquist mode the discrete normal velocity does not damp odd-even
    /// zigzags about the curve; roundoff there otherwise grows without bound.
    fn filter_high_modes(&mut self, curve: &ClosedCurve) -> ClosedCurve {
        let mut z = curve.as_complex();
        self.ws.grid.forward(&mut z);
        for (c, w) in z.iter_mut().zip(&self.filter) {
            *c *= w;
        }
        self.ws.grid.inverse(&mut z);
        ClosedCurve::from_complex_unchecked(&z)
    }

    fn reparametrise(&mut self, state: &mut FlowState, speed_spread: f64) -> Result<bool> {
        let resample = speed_spread > UNIFORM_SPEED_TOL;
        if resample {
            state.curve = resample_by_arclength(&state.curve, self.config.samples)?;
        }
        state.curve = self.filter_high_modes(&state.curve);
        if self.config.mode == FlowMode::LengthNormalised {
            let length = metrics(&state.curve)?.length;
            let factor = state.l0 / length;
            let drift = (factor - 1.0).abs();
            if drift > LENGTH_DRIFT_TOL {
                return Err(Error::Precondition(format!(
                    "length drifted by {drift:.3e}, above the {LENGTH_DRIFT_TOL:.0e} tolerance"
                )));
            }
            if drift > 0.0 {
                state.curve = state.curve.scaled(factor);
                state.sigma /= factor;
                state.max_length_correction = state.max_length_correction.max(drift);
                debug!("t = {:.6e}: length correction factor {factor:.17}", state.time);
            }
        }
        Ok(resample)
    }
}

#[derive(Debug)]
pub enum StepFailure {
    Singular(String),
    Other(Error),
}

/// One step from `state` with a fresh workspace.
pub fn step(state: &FlowState, config: &FlowConfig) -> Result<FlowState> {
    let mut stepper = Stepper::new(config)?;
    let mut next = state.clone();
    match stepper.step(&mut next, None) {
        Ok(_) => Ok(next),
        Err(StepFailure::Other(e)) => Err(e),
        Err(StepFailure::Singular(reason)) => {
            let dt = stepper.natural_dt(&state.curve).unwrap_or(0.0);
            let bracket = blowup_bracket(state, config, dt);
            Err(Error::Blowup(Box::new(Blowup {
                state: state.clone(),
                series: TimeSeries::default(),
                bracket,
                reason,
            })))
        }
    }
}

/// Velocity of the flow at every sample, as `[x, y]` pairs.
pub fn velocity_field(curve: &ClosedCurve, c: f64, mode: FlowMode) -> Result<Vec<[f64; 2]>> {
    let n = curve.len();
    let l0 = match mode {
        FlowMode::LengthNormalised => {
            let m = metrics(curve)?;
            if m.omega == 0 {
                return Err(Error::NotApplicable(
                    "the length-normalised flow needs a non-zero turning number".into(),
                ));
            }
            Some(TAU * m.omega.unsigned_abs() as f64)
        }
        FlowMode::Unnormalised => None,
    };
    let mut ws = Workspace::new(n);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    ws.velocity(&curve.as_complex(), c, l0, &mut out)?;
    Ok(out.iter().map(|v| [v.re, v.im]).collect())
}

fn blowup_bracket(state: &FlowState, config: &FlowConfig, dt: f64) -> (f64, f64) {
    if config.c < 0.0 && config.mode == FlowMode::Unnormalised {
        // Remaining lifetime of any curve is at most L⁴/(64π⁴|c|).
        if let Ok(m) = metrics(&state.curve) {
            return (state.time, state.time + m.length.powi(4) / (64.0 * PI.powi(4) * -config.c));
        }
    }
    (state.time, state.time + dt)
}

fn record(state: &FlowState) -> Result<Record> {
    let m = metrics(&state.curve)?;
    let sigma = match state.mode {
        FlowMode::LengthNormalised => state.sigma,
        FlowMode::Unnormalised => m.length / state.l0,
    };
    Ok(Record {
        t: state.time,
        length: m.length,
        area: m.area,
        omega: m.omega,
        k_osc: m.k_osc,
        k_max: m.k_max_abs,
        lambda: state.lambda_now,
        sigma,
        centroid: state.curve.centroid()?,
    })
}

/// Integrates the flow from `gamma0` until a stop condition.
pub fn run(gamma0: &ClosedCurve, config: &FlowConfig) -> Result<FlowOutcome> {
    config.validate()?;
    let start = if gamma0.len() == config.samples {
        gamma0.clone()
    } else {
        resample_by_arclength(gamma0, config.samples)?
    };
    let mut state = FlowState::new(start, config.mode)?;
    let mut stepper = Stepper::new(config)?;
    let mut series = TimeSeries::default();
    if config.mode == FlowMode::LengthNormalised {
        state.lambda_now = lambda_of(&state, config.c)?;
    }
    let push = |series: &mut TimeSeries, state: &FlowState| -> Result<Record> {
        let r = record(state)?;
        series.records.push(r);
        if let Some(every) = config.snapshot_every {
            if (series.records.len() - 1) % every == 0 {
                series.snapshots.push((state.time, state.curve.clone()));
            }
        }
        Ok(r)
    };
    let first = push(&mut series, &state)?;
    if let Some(stop) = check_kosc(config, first.k_osc) {
        return Ok(FlowOutcome { series, final_state: state, stop });
    }

    let stop = loop {
        let remaining = config.t_end.map(|t| t - state.time);
        if let Some(r) = remaining {
            if r <= 0.0 {
                break StopReason::TimeReached;
            }
        }
        if config.max_steps.is_some_and(|m| state.steps >= m) {
            break StopReason::StepLimit;
        }
        match stepper.step(&mut state, remaining) {
            Ok(_) => {}
            Err(StepFailure::Other(e)) => return Err(e),
            Err(StepFailure::Singular(reason)) => {
                info!("singularity at t = {:.9e}: {reason}", state.time);
                if series.last().is_none_or(|r| r.t < state.time) {
                    push(&mut series, &state)?;
                }
                let dt = stepper.natural_dt(&state.curve).unwrap_or(0.0);
                let bracket = blowup_bracket(&state, config, dt);
                return Err(Error::Blowup(Box::new(Blowup { state, series, bracket, reason })));
            }
        }
        let at_end = config.t_end.is_some_and(|t| state.time >= t);
        if state.steps % config.record_every as u64 == 0 || at_end {
            let r = push(&mut series, &state)?;
            if let Some(stop) = check_kosc(config, r.k_osc) {
                break stop;
            }
        }
    };
    if series.last().is_none_or(|r| r.t < state.time) {
        push(&mut series, &state)?;
    }
    info!(
        "flow stopped ({stop:?}) at t = {:.6e} after {} steps",
        state.time, state.steps
    );
    Ok(FlowOutcome { series, final_state: state, stop })
}

fn check_kosc(config: &FlowConfig, k_osc: f64) -> Option<StopReason> {
    if k_osc > config.stop_koscmax {
        Some(StopReason::KoscCeiling)
    } else if config.stop_kosc_below.is_some_and(|b| k_osc < b) {
        Some(StopReason::Converged)
    } else {
        None
    }
}

fn lambda_of(state: &FlowState, c: f64) -> Result<f64> {
    let n = state.curve.len();
    let mut ws = Workspace::new(n);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    Ok(ws.velocity(&state.curve.as_complex(), c, Some(state.l0), &mut out)?.lambda)
}

/// `e = K_osc/(2π|ω|)` of a curve.
pub fn oscillation_energy(curve: &ClosedCurve) -> Result<f64> {
    let m = metrics(curve)?;
    if m.omega == 0 {
        return Err(Error::UndefinedExpansion);
    }
    Ok(m.k_osc / (TAU * m.omega.unsigned_abs() as f64))
}

/// Flow-measured `de/dt` against the variational expression `−Q + R`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvolutionCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / max(|lhs|, |rhs|)`, or 0 when both vanish.
    pub relative: f64,
}

/// Measures `de/dt` at `state` by centred differences over RK4 micro-steps
/// `±h, ±2h` of the normalised flow, combined by Richardson extrapolation.
pub fn measure_e_prime(state: &FlowState, c: f64, samples_dt_safety: f64) -> Result<f64> {
    let mut config = FlowConfig::new(c, FlowMode::LengthNormalised);
    config.samples = state.curve.len();
    config.dt_safety = samples_dt_safety;
    let mut stepper = Stepper::new(&config)?;
    let h = stepper.natural_dt(&state.curve)?;
    let mut e_at = |steps: i32| -> Result<f64> {
        let mut s = state.clone();
        for _ in 0..steps.unsigned_abs() {
            stepper.rk4(&mut s, h * steps.signum() as f64)?;
        }
        oscillation_energy(&s.curve)
    };
    let (p1, m1, p2, m2) = (e_at(1)?, e_at(-1)?, e_at(2)?, e_at(-2)?);
    let d1 = (p1 - m1) / (2.0 * h);
    let d2 = (p2 - m2) / (4.0 * h);
    Ok((4.0 * d1 - d2) / 3.0)
}

pub fn e_evolution_check(state: &FlowState, c: f64) -> Result<EvolutionCheck> {
    let lhs = measure_e_prime(state, c, DEFAULT_DT_SAFETY)?;
    let rhs = -q_functional(&state.curve, c)? + r_functional(&state.curve, c)?;
    let scale = lhs.abs().max(rhs.abs());
    let relative = if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 };
    Ok(EvolutionCheck { lhs, rhs, relative })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SigmaAsymptotics {
    /// Limit of `σ(t)e^{−ct}`.
    pub sigma_inf: f64,
    /// Slope of `log|λ + c|` over the recorded tail; `None` when `λ + c`
    /// stays at roundoff level throughout.
    pub decay_rate: Option<f64>,
}

/// Relative `K_osc` below which a run counts as converged.
pub const CONVERGED_KOSC: f64 = 1e-8;

pub fn sigma_asymptotics(series: &TimeSeries, c: f64) -> Result<SigmaAsymptotics> {
    let last = series
        .last()
        .ok_or_else(|| Error::NotApplicable("empty time series".into()))?;
    if !(last.k_osc < CONVERGED_KOSC) {
        return Err(Error::NotApplicable(format!(
            "run has not converged: final K_osc = {:.3e}",
            last.k_osc
        )));
    }
    let sigma_inf = last.sigma * (-c * last.t).exp();
    let floor = 1e-12 * c.abs().max(1.0);
    let tail: Vec<(f64, f64)> = series
        .records
        .iter()
        .filter(|r| (r.lambda + c).abs() > floor)
        .map(|r| (r.t, (r.lambda + c).abs().ln()))
        .collect();
    let tail = &tail[tail.len() / 4..];
    let decay_rate = (tail.len() >= 3).then(|| {
        let n = tail.len() as f64;
        let mt = tail.iter().map(|p| p.0).sum::<f64>() / n;
        let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = tail.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = tail.iter().map(|p| (p.0 - mt).powi(2)).sum();
        sxy / sxx
    });
    Ok(SigmaAsymptotics { sigma_inf, decay_rate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sup(v: &[[f64; 2]]) -> f64 {
        v.iter().fold(0.0f64, |m, p| m.max(p[0].hypot(p[1])))
    }

    #[test]
    fn circle_velocities() {
        let circle = ClosedCurve::circle(1.0, 1, 64).unwrap();
        assert!(sup(&velocity_field(&circle, 0.0, FlowMode::Unnormalised).unwrap()) < 1e-10);
        let v = velocity_field(&circle, 0.5, FlowMode::Unnormalised).unwrap();
        for (p, q) in v.iter().zip(circle.points()) {
            assert!((p[0] - 0.5 * q[0]).abs() < 1e-10 && (p[1] - 0.5 * q[1]).abs() < 1e-10);
        }
        for w in [1, 3] {
            let c = ClosedCurve::circle(1.0, w, 128).unwrap();
            for cc in [-1.0, 0.0, 0.7] {
                assert!(sup(&velocity_field(&c, cc, FlowMode::LengthNormalised).unwrap()) < 1e-10);
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = FlowConfig::new(0.0, FlowMode::Unnormalised);
        assert!(cfg.validate().is_ok());
        cfg.dt_safety = 0.05;
        assert!(cfg.validate().is_err());
        cfg.dt_safety = 0.02;
        cfg.samples = 32;
        assert!(cfg.validate().is_err());
        cfg.samples = 65;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_step_matches_circle_ode() {
        let cfg = FlowConfig::new(0.5, FlowMode::Unnormalised);
        let circle = ClosedCurve::circle(1.0, 1, 128).unwrap();
        let s0 = FlowState::new(circle, cfg.mode).unwrap();
        let s1 = step(&s0, &cfg).unwrap();
        let r = metrics(&s1.curve).unwrap().length / TAU;
        let exact = (1.0 + 2.0 * s1.time).powf(0.25);
        assert!((r - exact).abs() < 1e-14, "{r} vs {exact}");
    }

    #[test]
    fn rk4_is_fourth_order_on_the_circle() {
        // Large steps are stable here: the circle excites no oscillating modes.
        let cfg = FlowConfig::new(0.5, FlowMode::Unnormalised);
        let circle = ClosedCurve::circle(1.0, 1, 64).unwrap();
        let error = |h: f64, steps: usize| {
            let mut stepper = Stepper::new(&FlowConfig { samples: 64, ..cfg.clone() }).unwrap();
            let mut s = FlowState::new(circle.clone(), cfg.mode).unwrap();
            for _ in 0..steps {
                stepper.rk4(&mut s, h).unwrap();
            }
            let r = metrics(&s.curve).unwrap().length / TAU;
            (r - (1.0 + 2.0 * h * steps as f64).powf(0.25)).abs()
        };
        let coarse = error(0.1, 4);
        let fine = error(0.05, 8);
        let order = (coarse / fine).log2();
        assert!((3.7..4.5).contains(&order), "observed order {order}");
    }

    #[test]
    fn normalised_circle_is_fixed() {
        let mut cfg = FlowConfig::new(0.5, FlowMode::LengthNormalised);
        cfg.samples = 64;
        cfg.t_end = Some(1e-3);
        cfg.record_every = 100;
        let circle = ClosedCurve::circle(1.0, 2, 64).unwrap();
        let out = run(&circle, &cfg).unwrap();
        let last = out.series.last().unwrap();
        assert!((last.t - 1e-3).abs() < 1e-15);
        assert!((last.lambda + 0.5).abs() < 1e-10);
        assert!((last.sigma - (0.5 * last.t).exp()).abs() < 1e-12);
        for (p, q) in out.final_state.curve.points().iter().zip(circle.points()) {
            assert!((p[0] - q[0]).abs() < 1e-10 && (p[1] - q[1]).abs() < 1e-10);
        }
    }
}
