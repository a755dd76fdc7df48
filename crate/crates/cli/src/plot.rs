//! Minimal SVG line plots.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
    pub markers: bool,
    pub dashed: bool,
}

impl<'a> Series<'a> {
    pub fn line(label: &'a str, points: Vec<(f64, f64)>) -> Self {
        Self {
            label,
            points,
            markers: false,
            dashed: false,
        }
    }
}

#[derive(Default)]
pub struct Axes<'a> {
    pub title: &'a str,
    pub xlabel: &'a str,
    pub ylabel: &'a str,
    pub log_x: bool,
    pub log_y: bool,
}

struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Scale {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            (lo, hi) = (lo.floor(), hi.ceil());
        }
        if hi - lo <= f64::EPSILON * (lo.abs() + hi.abs()) {
            let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self { lo, hi, log }
    }

    fn transform(&self, v: f64) -> Option<f64> {
        let t = if self.log {
            if v > 0.0 {
                v.log10()
            } else {
                return None;
            }
        } else {
            v
        };
        t.is_finite().then_some(t)
    }

    fn frac(&self, t: f64) -> f64 {
        (t - self.lo) / (self.hi - self.lo)
    }

    /// Tick positions in transformed coordinates with their labels.
    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let step = ((self.hi - self.lo) / 6.0).ceil().max(1.0);
            let mut out = Vec::new();
            let mut e = self.lo;
            while e <= self.hi + 1e-9 {
                out.push((e, format!("1e{}", e as i64)));
                e += step;
            }
            return out;
        }
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let mut t = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.hi + 1e-9 * step {
            out.push((t, label(t, step)));
            t += step;
        }
        out
    }
}

fn label(v: f64, step: f64) -> String {
    if v.abs() < 1e-12 * step {
        return "0".into();
    }
    if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        let digits = (-step.log10().floor()).max(0.0) as usize;
        format!("{v:.digits$}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn line_plot(axes: &Axes, series: &[Series]) -> String {
    let xs = Scale::fit(
        series
            .iter()
            .flat_map(|s| &s.points)
            .filter_map(|p| Scale { lo: 0.0, hi: 1.0, log: axes.log_x }.transform(p.0)),
        axes.log_x,
    );
    let ys = Scale::fit(
        series
            .iter()
            .flat_map(|s| &s.points)
            .filter_map(|p| Scale { lo: 0.0, hi: 1.0, log: axes.log_y }.transform(p.1)),
        axes.log_y,
    );
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |t: f64| LEFT + xs.frac(t) * pw;
    let py = |t: f64| TOP + (1.0 - ys.frac(t)) * ph;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(axes.title)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for (t, text) in xs.ticks() {
        let x = px(t);
        writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{text}</text>"##,
            TOP + ph,
            TOP + ph + 16.0
        )
        .unwrap();
    }
    for (t, text) in ys.ticks() {
        let y = py(t);
        writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{text}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(axes.xlabel)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text transform="translate(16,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        escape(axes.ylabel)
    )
    .unwrap();

    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter_map(|&(x, y)| Some((px(xs.transform(x)?), py(ys.transform(y)?))))
            .collect();
        if pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                path.join(" ")
            )
            .unwrap();
        }
        if s.markers {
            for (x, y) in &pts {
                writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"/>"#).unwrap();
            }
        }
        let ly = TOP + 16.0 + 16.0 * k as f64;
        writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            LEFT + pw - 170.0,
            ly - 4.0,
            LEFT + pw - 150.0,
            ly - 4.0,
            LEFT + pw - 145.0,
            ly,
            escape(s.label)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}
