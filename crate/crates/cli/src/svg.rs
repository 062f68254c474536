//! Plain SVG emitters. Output depends only on the data passed in, so the same
//! data always produces byte-identical files.

use std::fmt::Write;

use critflow::ClosedCurve;

const STROKE: &str = "#1f3b73";
const GUIDE: &str = "#888888";
const SEGMENT: &str = "#9a9a9a";

struct Doc {
    body: String,
    width: f64,
    height: f64,
}

impl Doc {
    fn new(width: f64, height: f64) -> Self {
        Self { body: String::new(), width, height }
    }

    fn polyline(&mut self, pts: impl IntoIterator<Item = (f64, f64)>, closed: bool, stroke: &str, width: f64) {
        let mut d = String::new();
        for (i, (x, y)) in pts.into_iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            write!(d, "{cmd}{x:.3},{y:.3} ").unwrap();
        }
        if closed {
            d.push('Z');
        }
        writeln!(
            self.body,
            r#"<path d="{}" fill="none" stroke="{stroke}" stroke-width="{width}" stroke-linejoin="round"/>"#,
            d.trim_end()
        )
        .unwrap();
    }

    fn line(&mut self, a: (f64, f64), b: (f64, f64), stroke: &str, width: f64, dashed: bool) {
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        writeln!(
            self.body,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="{stroke}" stroke-width="{width}"{dash}/>"#,
            a.0, a.1, b.0, b.1
        )
        .unwrap();
    }

    fn text(&mut self, at: (f64, f64), anchor: &str, size: f64, s: &str) {
        writeln!(
            self.body,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="{size}" text-anchor="{anchor}">{}</text>"#,
            at.0,
            at.1,
            escape(s)
        )
        .unwrap();
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Maps a point set into a square panel at `(x0, y0)` of side `size`,
/// preserving aspect ratio and flipping y.
fn fit(points: &[[f64; 2]], x0: f64, y0: f64, size: f64) -> Vec<(f64, f64)> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-300);
    let scale = 0.9 * size / span;
    let cx = 0.5 * (lo[0] + hi[0]);
    let cy = 0.5 * (lo[1] + hi[1]);
    points
        .iter()
        .map(|p| (x0 + 0.5 * size + scale * (p[0] - cx), y0 + 0.5 * size - scale * (p[1] - cy)))
        .collect()
}

/// Curves side by side, each scaled to fill its own panel.
pub fn curve_row(panels: &[(String, &ClosedCurve)]) -> String {
    let size = 220.0;
    let label = 24.0;
    let mut doc = Doc::new(size * panels.len().max(1) as f64, size + label);
    for (i, (title, curve)) in panels.iter().enumerate() {
        let x0 = i as f64 * size;
        doc.polyline(fit(curve.points(), x0, 0.0, size), true, STROKE, 1.2);
        doc.text((x0 + 0.5 * size, size + 16.0), "middle", 13.0, title);
    }
    doc.finish()
}

/// Horizontal stable segments per ω with dashed vertical guides.
pub struct StabilityFigure<'a> {
    pub c_range: (f64, f64),
    pub omega_max: u64,
    /// `(ω, c_lo, c_hi)`; `c_lo = −∞` is clipped to the left edge.
    pub segments: &'a [(u64, f64, f64)],
    pub guides: &'a [(f64, &'a str)],
}

pub fn stability_region(fig: &StabilityFigure) -> String {
    let (w, h) = (720.0, 520.0);
    let (left, right, top, bottom) = (60.0, 20.0, 20.0, 50.0);
    let (c0, c1) = fig.c_range;
    let px = |c: f64| left + (c.clamp(c0, c1) - c0) / (c1 - c0) * (w - left - right);
    let rows = fig.omega_max.max(1) as f64;
    let py = |omega: f64| h - bottom - (omega - 0.5) / rows * (h - top - bottom);
    let mut doc = Doc::new(w, h);

    doc.line((left, h - bottom), (w - right, h - bottom), "black", 1.0, false);
    doc.line((left, h - bottom), (left, top), "black", 1.0, false);
    for i in 0..=4 {
        let c = c0 + (c1 - c0) * i as f64 / 4.0;
        doc.line((px(c), h - bottom), (px(c), h - bottom + 5.0), "black", 1.0, false);
        doc.text((px(c), h - bottom + 20.0), "middle", 12.0, &format!("{}", round_label(c)));
    }
    doc.text((0.5 * (left + w - right), h - 10.0), "middle", 14.0, "c");
    let step = (fig.omega_max / 6).max(1);
    for omega in (1..=fig.omega_max).filter(|o| *o == 1 || o % step == 0) {
        let y = py(omega as f64);
        doc.line((left - 5.0, y), (left, y), "black", 1.0, false);
        doc.text((left - 8.0, y + 4.0), "end", 12.0, &omega.to_string());
    }
    doc.text((18.0, 0.5 * (top + h - bottom)), "middle", 14.0, "\u{3c9}");

    let thickness = ((h - top - bottom) / rows * 0.5).clamp(1.0, 8.0);
    for &(omega, lo, hi) in fig.segments {
        if hi <= c0 || lo >= c1 {
            continue;
        }
        let y = py(omega as f64);
        doc.line((px(lo), y), (px(hi), y), SEGMENT, thickness, false);
    }
    for &(c, name) in fig.guides {
        if c > c0 && c < c1 {
            doc.line((px(c), h - bottom), (px(c), top), GUIDE, 1.0, true);
            doc.text((px(c), top - 4.0 + 12.0), "start", 11.0, &format!(" {name}"));
        }
    }
    doc.finish()
}

fn round_label(c: f64) -> f64 {
    (c * 1e6).round() / 1e6
}

/// Rescaled profiles `(γ − centroid)·2π|ω|/L` in a row of panels sharing one
/// scale, so that convergence to the ω-circle is visible.
pub fn filmstrip(frames: &[(f64, Vec<[f64; 2]>)]) -> String {
    let size = 160.0;
    let label = 22.0;
    let mut doc = Doc::new(size * frames.len().max(1) as f64, size + label);
    let extent = frames
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p[0].abs().max(p[1].abs())))
        .fold(1e-300, f64::max);
    let scale = 0.45 * size / extent;
    for (i, (t, pts)) in frames.iter().enumerate() {
        let (cx, cy) = (i as f64 * size + 0.5 * size, 0.5 * size);
        doc.polyline(pts.iter().map(|p| (cx + scale * p[0], cy - scale * p[1])), true, STROKE, 1.0);
        doc.text((cx, size + 14.0), "middle", 11.0, &format!("t = {t:.4e}"));
    }
    doc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_is_deterministic_and_well_formed() {
        let circle = ClosedCurve::circle(1.0, 1, 32).unwrap();
        let a = curve_row(&[("circle".into(), &circle)]);
        let b = curve_row(&[("circle".into(), &circle)]);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert_eq!(a.matches("<path").count(), 1);
    }

    #[test]
    fn guides_are_dashed() {
        let segs = [(1, f64::NEG_INFINITY, 1.5), (2, 3.0 / 52.0, 45.0 / 44.0)];
        let svg = stability_region(&StabilityFigure {
            c_range: (-0.5, 2.0),
            omega_max: 2,
            segments: &segs,
            guides: &[(1.0 / 9.0, "1/9"), (1.0, "1"), (1.5, "3/2")],
        });
        assert_eq!(svg.matches("stroke-dasharray").count(), 3);
        assert!(svg.contains(SEGMENT));
    }
}
