//! Self-contained SVG charts. Output bytes depend only on the input data.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Time series, one polyline per series.
    Lines,
    /// Nullclines as polylines, equilibria as markers.
    PhasePlane,
    /// One panel per guild, one curve per snapshot time.
    DensitySnapshots,
    /// Markers joined by lines on log–log axes.
    LogLog,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Lines => "lines",
            PlotKind::PhasePlane => "phasePlane",
            PlotKind::DensitySnapshots => "densitySnapshots",
            PlotKind::LogLog => "loglog",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
    LineAndMarkers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points, style: Style::Line }
    }

    pub fn markers(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points, style: Style::Markers }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotData {
    pub title: String,
    pub panels: Vec<Panel>,
}

pub const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

const PANEL_W: f64 = 560.0;
const PANEL_H: f64 = 400.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 55.0;

fn check_shape(kind: PlotKind, data: &PlotData) -> CliResult<()> {
    let fail = |reason: String| Err(CliError::PlotShape { kind: kind.name(), reason });
    if data.panels.is_empty() {
        return fail("no panels".into());
    }
    match kind {
        PlotKind::PhasePlane if data.panels.len() != 1 => fail(format!("{} panels, expected 1", data.panels.len())),
        PlotKind::DensitySnapshots if data.panels.iter().flat_map(|p| &p.series).any(|s| s.style != Style::Line) => {
            fail("snapshots must be drawn as lines".into())
        }
        PlotKind::LogLog => {
            match data.panels.iter().flat_map(|p| &p.series).flat_map(|s| &s.points).find(|(x, y)| !(*x > 0.0 && *y > 0.0))
            {
                Some(&(x, y)) => fail(format!("nonpositive point ({x}, {y}) on log axes")),
                None => Ok(()),
            }
        }
        _ => Ok(()),
    }
}

/// Axis transform: data value to unit interval.
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = values
            .filter(|v| v.is_finite())
            .map(|v| if log { v.log10() } else { v })
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            (lo, hi) = (lo.floor(), hi.ceil());
        }
        if hi - lo < 1e-12 * lo.abs().max(1.0) {
            let pad = if log { 1.0 } else { 0.5 * lo.abs().max(1.0) };
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self { lo, hi, log }
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    /// Tick positions in data units.
    fn ticks(&self) -> Vec<f64> {
        if self.log {
            return (self.lo as i64..=self.hi as i64).map(|e| 10f64.powi(e as i32)).collect();
        }
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|f| f * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last).map(|i| i as f64 * step).collect()
    }
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        return format!("1e{}", v.log10().round() as i64);
    }
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        return format!("{v:.1e}");
    }
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn render_panel(out: &mut String, panel: &Panel, ox: f64, log: bool) {
    let points = || panel.series.iter().flat_map(|s| s.points.iter());
    let xa = Axis::fit(points().map(|p| p.0), log);
    let ya = Axis::fit(points().map(|p| p.1), log);
    let (x0, y0) = (ox + MARGIN_L, MARGIN_T);
    let (w, h) = (PANEL_W - MARGIN_L - MARGIN_R, PANEL_H - MARGIN_T - MARGIN_B);
    let px = |v: f64| x0 + xa.unit(v) * w;
    let py = |v: f64| y0 + (1.0 - ya.unit(v)) * h;

    let _ = writeln!(out, r#"<g class="panel">"#);
    let _ = writeln!(out, r##"<rect x="{x0:.2}" y="{y0:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#000"/>"##);
    for t in xa.ticks() {
        let x = px(t);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000"/><text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"##,
            y0 + h,
            y0 + h + 5.0,
            y0 + h + 18.0,
            tick_label(t, log)
        );
    }
    for t in ya.ticks() {
        let y = py(t);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="#000"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"##,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            tick_label(t, log)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
        x0 + w / 2.0,
        y0 - 12.0,
        escape(&panel.title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
        x0 + w / 2.0,
        y0 + h + 40.0,
        escape(&panel.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
        ox + 18.0,
        y0 + h / 2.0,
        ox + 18.0,
        y0 + h / 2.0,
        escape(&panel.y_label)
    );

    for (k, s) in panel.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> =
            s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()).map(|&(x, y)| (px(x), py(y))).collect();
        if matches!(s.style, Style::Line | Style::LineAndMarkers) && pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
        }
        if matches!(s.style, Style::Markers | Style::LineAndMarkers) {
            for (x, y) in &pts {
                let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"/>"#);
            }
        }
        let ly = y0 + 14.0 + 15.0 * k as f64;
        let lx = x0 + w - 150.0;
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.2}" y="{:.2}" width="12" height="4" fill="{color}"/><text x="{:.2}" y="{ly:.2}" font-size="11">{}</text>"#,
            ly - 5.0,
            lx + 16.0,
            escape(&s.label)
        );
    }
    let _ = writeln!(out, "</g>");
}

pub fn render(kind: PlotKind, data: &PlotData) -> CliResult<String> {
    check_shape(kind, data)?;
    let width = PANEL_W * data.panels.len() as f64;
    let height = PANEL_H + 30.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#fff"/>"##);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="20" font-size="15" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(&data.title)
    );
    let _ = writeln!(out, r#"<g transform="translate(0 30)">"#);
    for (i, panel) in data.panels.iter().enumerate() {
        render_panel(&mut out, panel, i as f64 * PANEL_W, kind == PlotKind::LogLog);
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

pub fn emit_plot(kind: PlotKind, data: &PlotData, path: &Path) -> CliResult<()> {
    let svg = render(kind, data)?;
    std::fs::write(path, svg).map_err(|e| CliError::io(path, e))
}
