use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;

use anyhow::{Context, Result};
use log::info;
use serde::Serialize;
use serde_json::json;

use critflow::flow::{self, FlowConfig, FlowMode, Record, StopReason, TimeSeries};
use critflow::geometry::{curvature_profile, metrics};
use critflow::perturbation::{self, EtaMeasurement, SupportPerturbation};
use critflow::spectral_stability::{self as stab, Verdict};
use critflow::stationary::{build_super_lemniscate, SuperLemniscateSpec};
use critflow::{ClosedCurve, Error};

use crate::manifest::Run;
use crate::svg;
use crate::{Cli, Command, FiguresArgs, FlowArgs, Format, ModeArg, PerturbArgs, StabilityArgs, StationaryArgs};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_BLOWUP: u8 = 3;

/// Bad command-line input detected after clap parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn exit_code_for(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::Io(_)) | None => 1,
        Some(Error::Blowup(_)) => EXIT_BLOWUP,
        Some(_) => EXIT_USAGE,
    }
}

pub fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Stationary(a) => stationary(cli, a),
        Command::Stability(a) => stability(cli, a),
        Command::Flow(a) => flow_cmd(cli, a),
        Command::Perturb(a) => perturb(cli, a),
        Command::Figures(a) => figures(cli, a),
    }
}

fn say(cli: &Cli, msg: impl std::fmt::Display) {
    if !cli.quiet {
        println!("{msg}");
    }
}

fn curve_text(curve: &ClosedCurve, format: Format) -> Result<String> {
    Ok(match format {
        Format::Csv => {
            let mut buf = Vec::new();
            curve.write_csv(&mut buf)?;
            String::from_utf8(buf)?
        }
        Format::Json => serde_json::to_string(&json!({ "points": curve.points() }))? + "\n",
    })
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn default_lemniscate_samples(j: u32) -> usize {
    2048.max(64 * (4 * j as usize - 1))
}

fn lemniscate(j: u32, samples: usize) -> Result<critflow::stationary::StationaryCurve> {
    Ok(build_super_lemniscate(&SuperLemniscateSpec::new(j, samples)?)?)
}

fn stationarity_residual(curve: &ClosedCurve, c: f64) -> Result<f64> {
    let p = curvature_profile(curve)?;
    Ok(p.k.iter().zip(&p.k_ss).map(|(k, kss)| (kss + c * k * k * k).abs()).fold(0.0, f64::max))
}

fn stationary(cli: &Cli, a: &StationaryArgs) -> Result<u8> {
    if a.j == 0 {
        return Err(usage("--j must be at least 1"));
    }
    let samples = a.samples.unwrap_or_else(|| default_lemniscate_samples(a.j));
    let mut run = Run::new("stationary", serde_json::to_value(a)?, &cli.out_dir)?;
    let built = lemniscate(a.j, samples)?;
    let m = metrics(&built.curve)?;
    let residual = stationarity_residual(&built.curve, built.c)?;
    let stem = format!("lemniscate_j{}", a.j);
    run.write(&format!("{stem}.{}", ext(cli.format)), curve_text(&built.curve, cli.format)?)?;
    run.write(&format!("{stem}.svg"), svg::curve_row(&[(format!("j = {}", a.j), &built.curve)]))?;
    let summary = json!({
        "j": a.j,
        "c": built.c,
        "samples": samples,
        "length": m.length,
        "turning_number": m.omega,
        "closure_gap": built.closure_gap,
        "stationarity_residual": residual,
    });
    run.write(&format!("{stem}.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    say(cli, format!("j = {}: c = {:.12}, closure gap {:.2e}, residual {:.2e}", a.j, built.c, built.closure_gap, residual));
    run.finish(0)?;
    Ok(0)
}

fn parse_grid(spec: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(usage(format!("--grid expects cmin:cmax:steps, got {spec:?}")));
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| usage(format!("bad number {s:?} in --grid")));
    let steps = parts[2]
        .trim()
        .parse::<usize>()
        .map_err(|_| usage(format!("bad step count {:?} in --grid", parts[2])))?;
    Ok((num(parts[0])?, num(parts[1])?, steps))
}

/// Exact stable segment of each ω, as floats.
fn stable_segments(omega_max: u64) -> Result<Vec<(u64, f64, f64)>> {
    (1..=omega_max)
        .map(|w| {
            let th = stab::thresholds(w as i64)?;
            Ok((w, th.c_minus_f64(), th.c_plus_f64()))
        })
        .collect()
}

fn stability_svg(c_range: (f64, f64), omega_max: u64, mark: Option<f64>) -> Result<String> {
    let segments = stable_segments(omega_max)?;
    let mark_label = mark.map(|m| format!("{m}"));
    let mut guides = vec![(1.0 / 9.0, "1/9"), (1.0, "1"), (1.5, "3/2")];
    if let (Some(m), Some(label)) = (mark, mark_label.as_deref()) {
        guides.push((m, label));
    }
    Ok(svg::stability_region(&svg::StabilityFigure {
        c_range,
        omega_max,
        segments: &segments,
        guides: &guides,
    }))
}

fn stability(cli: &Cli, a: &StabilityArgs) -> Result<u8> {
    let mut run = Run::new("stability", serde_json::to_value(a)?, &cli.out_dir)?;
    let mut did_something = false;

    if let (Some(c), Some(omega)) = (a.c, a.omega) {
        let report = stab::stability_report(c, omega)?;
        let text = serde_json::to_string_pretty(&report)? + "\n";
        run.write("stability_report.json", &text)?;
        say(cli, text.trim_end());
        did_something = true;
    } else if let Some(c) = a.c {
        let omega_max = a.omega_max.unwrap_or(30);
        let stable: Vec<u64> = stab::stable_omegas(c, omega_max).into_iter().collect();
        let lattice: Option<Vec<u64>> = stab::stable_omegas_lattice(c, omega_max).ok().map(|s| s.into_iter().collect());
        let reports = (1..=omega_max as i64)
            .map(|w| stab::stability_report(c, w))
            .collect::<critflow::Result<Vec<_>>>()?;
        let body = json!({
            "c": c,
            "omega_max": omega_max,
            "stable": stable,
            "stable_lattice_test": lattice,
            "reports": reports,
        });
        run.write("stable_set.json", serde_json::to_string_pretty(&body)? + "\n")?;
        say(cli, format!("c = {c}: stable omega <= {omega_max}: {stable:?}"));
        did_something = true;
    }

    if let Some(spec) = &a.grid {
        let (c0, c1, steps) = parse_grid(spec)?;
        let omega_max = a.omega_max.unwrap_or(30);
        if omega_max == 0 {
            return Err(usage("--omega-max must be positive"));
        }
        let grid = stab::stability_region_grid(c0, c1, omega_max, steps)?;
        let text = match cli.format {
            Format::Json => serde_json::to_string(&grid)? + "\n",
            Format::Csv => {
                let mut s = String::from("omega,c,stable\n");
                for row in &grid.rows {
                    for (c, st) in grid.c_values.iter().zip(&row.stable) {
                        writeln!(s, "{},{:.17e},{}", row.omega, c, u8::from(*st))?;
                    }
                }
                s
            }
        };
        run.write(&format!("stability_grid.{}", ext(cli.format)), text)?;
        let mut th = String::from("omega,c_minus,c_plus,c_minus_exact,c_plus_exact\n");
        for row in &grid.rows {
            writeln!(th, "{},{:.17e},{:.17e},{},{}", row.omega, row.c_minus, row.c_plus, row.c_minus_exact, row.c_plus_exact)?;
        }
        run.write("thresholds.csv", th)?;
        if let Some(name) = &a.svg {
            run.write(name, stability_svg((c0, c1), omega_max, a.mark)?)?;
        }
        say(cli, format!("grid: {} values of c in [{c0}, {c1}], omega <= {omega_max}", steps));
        did_something = true;
    } else if a.svg.is_some() {
        return Err(usage("--svg needs --grid"));
    }

    if !did_something {
        return Err(usage("give --c with --omega or --omega-max, or --grid"));
    }
    run.finish(0)?;
    Ok(0)
}

fn parse_init(spec: &str, samples: usize) -> Result<ClosedCurve> {
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| usage(format!("--init expects kind:args, got {spec:?}")))?;
    let bad = || usage(format!("malformed --init {spec:?}"));
    match kind {
        "circle" => {
            let omega: u32 = rest.trim().parse().map_err(|_| bad())?;
            if omega == 0 {
                return Err(usage("circle turning number must be at least 1"));
            }
            Ok(ClosedCurve::circle(1.0, omega, samples)?)
        }
        "support" => {
            let f: Vec<&str> = rest.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(bad());
            }
            let omega: i64 = f[0].parse().map_err(|_| bad())?;
            let n0: i64 = f[1].parse().map_err(|_| bad())?;
            let eta: f64 = f[2].parse().map_err(|_| bad())?;
            let p = SupportPerturbation::new(omega, n0, eta)?;
            Ok(perturbation::build_support_curve(&p, samples)?)
        }
        "file" => {
            let file = File::open(rest).with_context(|| format!("opening {rest}"))?;
            Ok(ClosedCurve::read_csv(BufReader::new(file))?)
        }
        "lemniscate" => {
            let j: u32 = rest.trim().parse().map_err(|_| bad())?;
            if j == 0 {
                return Err(usage("lemniscate index must be at least 1"));
            }
            Ok(lemniscate(j, default_lemniscate_samples(j))?.curve)
        }
        _ => Err(usage(format!("unknown --init kind {kind:?}"))),
    }
}

fn series_text(series: &TimeSeries, format: Format) -> Result<String> {
    Ok(match format {
        Format::Csv => {
            let mut buf = Vec::new();
            series.write_csv(&mut buf)?;
            String::from_utf8(buf)?
        }
        Format::Json => serde_json::to_string(&series.records)? + "\n",
    })
}

/// Snapshot rescaled to the reference length and centred, for the filmstrip.
fn rescaled_frame(curve: &ClosedCurve) -> Result<Vec<[f64; 2]>> {
    let m = metrics(curve)?;
    let centre = curve.centroid().unwrap_or([0.0, 0.0]);
    let target = if m.omega == 0 { TAU } else { TAU * m.omega.unsigned_abs() as f64 };
    let s = target / m.length;
    Ok(curve.points().iter().map(|p| [s * (p[0] - centre[0]), s * (p[1] - centre[1])]).collect())
}

#[derive(Serialize)]
struct FlowSummary<'a> {
    outcome: &'a str,
    stop: Option<StopReason>,
    blowup_bracket: Option<(f64, f64)>,
    blowup_reason: Option<&'a str>,
    steps: u64,
    max_length_correction: f64,
    initial: Option<&'a Record>,
    last: Option<&'a Record>,
}

fn flow_cmd(cli: &Cli, a: &FlowArgs) -> Result<u8> {
    let gamma0 = parse_init(&a.init, a.samples)?;
    let mode = match a.mode {
        ModeArg::Unnormalised => FlowMode::Unnormalised,
        ModeArg::LengthNormalised => FlowMode::LengthNormalised,
    };
    let mut cfg = FlowConfig::new(a.c, mode);
    cfg.samples = a.samples;
    cfg.dt_safety = a.dt_safety;
    cfg.reparam_every = a.reparam_every;
    cfg.t_end = a.t_end;
    cfg.stop_kmax = a.stop_kmax;
    cfg.stop_koscmax = a.stop_koscmax.unwrap_or(f64::INFINITY);
    cfg.record_every = a.record_every;
    cfg.max_steps = a.max_steps;
    cfg.stop_kosc_below = a.stop_kosc_below;
    if a.t_end.is_none() {
        cfg.max_steps = Some(a.max_steps.unwrap_or(50_000_000));
        if a.stop_kosc_below.is_none() && metrics(&gamma0)?.k_osc > 1e-8 {
            cfg.stop_kosc_below = Some(1e-8);
        }
    }
    let keep_snapshots = a.snapshots.is_some() || a.filmstrip.is_some();
    if keep_snapshots {
        if a.snapshot_every == 0 {
            return Err(usage("--snapshot-every must be positive"));
        }
        cfg.snapshot_every = Some(a.snapshot_every);
    }
    cfg.validate()?;

    let mut params = serde_json::to_value(a)?;
    params["resolved_config"] = serde_json::to_value(&cfg)?;
    let mut run = Run::new("flow", params, &cli.out_dir)?;

    let (series, summary_state, stop, blowup) = match flow::run(&gamma0, &cfg) {
        Ok(out) => (out.series, out.final_state, Some(out.stop), None),
        Err(Error::Blowup(b)) => {
            let b = *b;
            (b.series, b.state, None, Some((b.bracket, b.reason)))
        }
        Err(e) => return Err(e.into()),
    };

    let series_name = a.out.clone().unwrap_or_else(|| format!("series.{}", ext(cli.format)));
    run.write(&series_name, series_text(&series, cli.format)?)?;
    if let Some(dir) = &a.snapshots {
        for (i, (_, curve)) in series.snapshots.iter().enumerate() {
            run.write(&format!("{dir}/snapshot_{i:05}.csv"), curve_text(curve, Format::Csv)?)?;
        }
    }
    if let Some(name) = &a.filmstrip {
        let n = series.snapshots.len();
        let picks: Vec<usize> = if n <= 6 { (0..n).collect() } else { (0..6).map(|i| i * (n - 1) / 5).collect() };
        let frames = picks
            .into_iter()
            .map(|i| Ok((series.snapshots[i].0, rescaled_frame(&series.snapshots[i].1)?)))
            .collect::<Result<Vec<_>>>()?;
        run.write(name, svg::filmstrip(&frames))?;
    }

    let summary = FlowSummary {
        outcome: if blowup.is_some() { "blowup" } else { "finished" },
        stop,
        blowup_bracket: blowup.as_ref().map(|b| b.0),
        blowup_reason: blowup.as_ref().map(|b| b.1.as_str()),
        steps: summary_state.steps,
        max_length_correction: summary_state.max_length_correction,
        initial: series.records.first(),
        last: series.last(),
    };
    run.write("flow_summary.json", serde_json::to_string_pretty(&summary)? + "\n")?;

    let code = match &blowup {
        Some(((lo, hi), reason)) => {
            say(cli, format!("blowup: {reason}; T in [{lo:.9}, {hi:.9}]"));
            EXIT_BLOWUP
        }
        None => {
            if let Some(last) = series.last() {
                say(cli, format!("stopped ({:?}) at t = {:.6e}, K_osc = {:.3e}", stop.unwrap(), last.t, last.k_osc));
            }
            0
        }
    };
    run.finish(code as i32)?;
    Ok(code)
}

#[derive(Serialize)]
struct PerturbReport {
    c: f64,
    omega: i64,
    n0: i64,
    lambda_hat: f64,
    verdict: Verdict,
    /// `p_c(n₀/ω)` of the perturbed mode.
    symbol: f64,
    /// `−πω a² p_c(n₀/ω)`, the limit of `e'(0)/η²`.
    limit: f64,
    samples: usize,
    measurements: Vec<EtaMeasurement>,
    all_positive: bool,
}

fn perturb(cli: &Cli, a: &PerturbArgs) -> Result<u8> {
    if a.eta.is_empty() {
        return Err(usage("--eta needs at least one value"));
    }
    let (gap, argmin) = stab::lambda_hat(a.c, a.omega)?;
    let n0 = a.n0.unwrap_or(argmin as i64);
    let mut run = Run::new("perturb", serde_json::to_value(a)?, &cli.out_dir)?;
    let measurements = a
        .eta
        .iter()
        .map(|&eta| {
            let p = SupportPerturbation::new(a.omega, n0, eta)?;
            perturbation::measure_eta(&p, a.c, a.samples)
        })
        .collect::<critflow::Result<Vec<_>>>()?;
    let w = a.omega as f64;
    let x = n0 as f64 / w;
    let symbol = stab::p_c(x, a.c);
    let report = PerturbReport {
        c: a.c,
        omega: a.omega,
        n0,
        lambda_hat: gap,
        verdict: Verdict::from_gap(gap),
        symbol,
        limit: -PI * w * (1.0 - x * x).powi(2) * symbol,
        samples: a.samples,
        all_positive: measurements.iter().all(|m| m.measured > 0.0),
        measurements,
    };
    let text = serde_json::to_string_pretty(&report)? + "\n";
    run.write(&a.report, &text)?;
    say(cli, text.trim_end());
    run.finish(0)?;
    Ok(0)
}

fn figures(cli: &Cli, a: &FiguresArgs) -> Result<u8> {
    let mut run = Run::new("figures", serde_json::to_value(a)?, &cli.out_dir)?;
    for &which in &a.which {
        match which {
            1 => {
                let js = [1u32, 2, 3, 4, 10, 100];
                let curves = js
                    .iter()
                    .map(|&j| Ok((format!("j = {j}"), lemniscate(j, default_lemniscate_samples(j))?.curve)))
                    .collect::<Result<Vec<_>>>()?;
                let panels: Vec<(String, &ClosedCurve)> = curves.iter().map(|(t, c)| (t.clone(), c)).collect();
                run.write("fig1_super_lemniscates.svg", svg::curve_row(&panels))?;
            }
            2 => {
                run.write("fig2_stability_region.svg", stability_svg((-0.5, 2.0), 30, None)?)?;
            }
            3 => {
                run.write("fig3_stability_zoom.svg", stability_svg((0.99, 1.01), 30, Some(1.001))?)?;
            }
            other => return Err(usage(format!("unknown figure {other}; expected 1, 2 or 3"))),
        }
        info!("figure {which} written");
    }
    say(cli, format!("figures written to {}", cli.out_dir.display()));
    run.finish(0)?;
    Ok(0)
}
