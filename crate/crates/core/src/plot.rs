//! Minimal self-contained SVG line plots.
//!
//! Output is a pure function of the input data: coordinates are printed
//! with two decimals and no timestamps or random ids are emitted, so equal
//! inputs give byte-identical files.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::io::{fmt_sig, TrajectoryRow};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 56.0;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
    /// Palette colour; series with the same label share one legend entry.
    pub color: &'static str,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>, color: usize) -> Self {
        Series { label: label.into(), points, style: Style::Line, color: PALETTE[color % PALETTE.len()] }
    }

    pub fn markers(label: impl Into<String>, points: Vec<(f64, f64)>, color: usize) -> Self {
        Series { label: label.into(), points, style: Style::Markers, color: PALETTE[color % PALETTE.len()] }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Result<Axis> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            return Err(Error::InsufficientData("nothing finite to plot".into()));
        }
        if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            lo -= 0.5;
            hi += 0.5;
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil();
        } else {
            let pad = 0.04 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Ok(Axis { lo, hi, log })
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    /// Tick positions in data units with their labels.
    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0) as i64;
            return (self.lo as i64..=self.hi as i64)
                .filter(|k| (k - self.lo as i64) % step == 0)
                .map(|k| (10f64.powi(k as i32), format!("1e{k}")))
                .collect();
        }
        let raw = (self.hi - self.lo) / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last)
            .map(|k| {
                let v = k as f64 * step;
                (v, fmt_sig((v / step).round() * step))
            })
            .collect()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl Plot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Plot { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), ..Default::default() }
    }

    pub fn with(mut self, series: Series) -> Self {
        self.series.push(series);
        self
    }

    /// Render to an SVG document.
    pub fn render(&self) -> Result<String> {
        let usable = |v: f64, log: bool| v.is_finite() && (!log || v > 0.0);
        let xs = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).filter(|&v| usable(v, self.log_x));
        let ys = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).filter(|&v| usable(v, self.log_y));
        let ax = Axis::fit(xs, self.log_x)?;
        let ay = Axis::fit(ys, self.log_y)?;
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let px = |x: f64| LEFT + ax.frac(x) * pw;
        let py = |y: f64| TOP + (1.0 - ay.frac(y)) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for (v, label) in ax.ticks() {
            let x = px(v);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#, TOP + ph + 18.0);
        }
        for (v, label) in ay.ticks() {
            let y = py(v);
            let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#, LEFT - 8.0, y + 4.0);
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        let _ = writeln!(s, r#"<clipPath id="plot-area"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath>"#);
        let _ = writeln!(s, r#"<g clip-path="url(#plot-area)">"#);
        for series in &self.series {
            let pts: Vec<(f64, f64)> = series
                .points
                .iter()
                .filter(|p| usable(p.0, self.log_x) && usable(p.1, self.log_y))
                .map(|&(x, y)| (px(x), py(y)))
                .collect();
            match series.style {
                Style::Line if pts.len() >= 2 => {
                    let mut path = String::new();
                    for (i, (x, y)) in pts.iter().enumerate() {
                        let _ = write!(path, "{}{x:.2},{y:.2}", if i == 0 { "" } else { " " });
                    }
                    let _ = writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{path}"/>"#, series.color);
                }
                _ => {
                    for (x, y) in pts {
                        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{}"/>"#, series.color);
                    }
                }
            }
        }
        let _ = writeln!(s, "</g>");
        let mut seen: Vec<&str> = Vec::new();
        for series in &self.series {
            if series.label.is_empty() || seen.contains(&series.label.as_str()) {
                continue;
            }
            let y = TOP + 10.0 + 18.0 * seen.len() as f64;
            let x = LEFT + pw + 12.0;
            let _ = writeln!(s, r#"<rect x="{x:.2}" y="{:.2}" width="14" height="4" fill="{}"/>"#, y - 4.0, series.color);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 20.0, y + 2.0, escape(&series.label));
            seen.push(&series.label);
        }
        s.push_str("</svg>\n");
        Ok(s)
    }
}

fn mode_color(mode: &str) -> usize {
    match mode {
        "flow+" => 0,
        "flow-" => 1,
        "slide" => 2,
        _ => 3,
    }
}

/// Plot of a trajectory table, one polyline per maximal run of equal mode;
/// event rows are marked. The ordinate is labelled `v` when any row is in
/// the layer, `y` otherwise.
pub fn trajectory_plot(rows: &[TrajectoryRow], title: &str) -> Plot {
    let layer = rows.iter().any(|r| r.mode == "layer");
    let mut plot = Plot::new(title, "x", if layer { "v" } else { "y" });
    let mut start = 0;
    for i in 1..=rows.len() {
        if i == rows.len() || rows[i].mode != rows[start].mode {
            // runs share their boundary sample so the curve stays connected
            let end = (i + 1).min(rows.len());
            let pts = rows[start..end].iter().map(|r| (r.x, r.y_or_v)).collect();
            plot.series.push(Series::line(rows[start].mode.clone(), pts, mode_color(&rows[start].mode)));
            start = i;
        }
    }
    let events: Vec<(f64, f64)> = rows.iter().filter(|r| !r.event.is_empty()).map(|r| (r.x, r.y_or_v)).collect();
    if !events.is_empty() {
        plot.series.push(Series::markers("events", events, 6));
    }
    plot
}

/// SVG of a trajectory CSV given as text. Used both when an experiment
/// writes its figure and by `plot-from-csv`, so the two agree byte for byte.
pub fn svg_from_trajectory_csv(csv_text: &str, title: &str) -> Result<String> {
    let rows = crate::io::read_trajectory(csv_text.as_bytes())?;
    trajectory_plot(&rows, title).render()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_self_contained() {
        let plot = Plot::new("demo", "x", "y").with(Series::line("a", vec![(0.0, 1.0), (1.0, 2.0), (2.0, 0.5)], 0));
        let one = plot.render().unwrap();
        let two = plot.render().unwrap();
        assert_eq!(one, two);
        assert!(one.starts_with("<svg") && one.ends_with("</svg>\n"));
        assert!(!one.contains("href"));
        assert!(one.contains(">x</text>") && one.contains(">y</text>"));
    }

    #[test]
    fn log_axes_use_decade_ticks() {
        let plot = Plot { log_x: true, log_y: true, ..Plot::new("fit", "ε", "d") }
            .with(Series::markers("data", vec![(1e-4, 2e-3), (1e-2, 4e-2)], 0));
        let svg = plot.render().unwrap();
        assert!(svg.contains(">1e-4<") && svg.contains(">1e-2<"), "{svg}");
    }

    #[test]
    fn empty_plot_is_an_error() {
        assert!(Plot::new("t", "x", "y").render().is_err());
    }

    #[test]
    fn csv_labels_select_ordinate() {
        let csv = "x,y_or_v,mode,branch,event\n0,0.5,layer,,\n1,-0.5,layer,,layer-exit\n2,-1.5,flow-,,\n";
        let svg = svg_from_trajectory_csv(csv, "t").unwrap();
        assert!(svg.contains(">v</text>"));
        assert!(svg.contains("<circle"));
    }
}
