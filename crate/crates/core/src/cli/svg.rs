//! Minimal self-contained SVG line plots.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::kinematics::{fk_shape, ShapeSample};
use crate::rod::RodSpec;
use crate::sim::Trace;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    ShapeXy,
    TipPath3dProjection,
    WrenchVsTime,
    ErrorVsTime,
}

impl PlotKind {
    pub fn file_stem(&self) -> &'static str {
        match self {
            PlotKind::ShapeXy => "shape_xy",
            PlotKind::TipPath3dProjection => "tip_path",
            PlotKind::WrenchVsTime => "wrench",
            PlotKind::ErrorVsTime => "error",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    /// Use the same scale on both axes.
    pub equal_aspect: bool,
    pub series: Vec<Series>,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let nice = if frac < 1.5 {
        1.0
    } else if frac < 3.5 {
        2.0
    } else if frac < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if (hi - lo).abs() < 1e-12 * hi.abs().max(1.0) {
        let pad = 0.5 * hi.abs().max(1e-3);
        (lo - pad, hi + pad)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LinePlot {
    pub fn render(&self) -> Result<String> {
        let map_y = |y: f64| if self.log_y { y.log10() } else { y };
        let pts: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_y || *y > 0.0))
            .map(|&(x, y)| (x, map_y(y)))
            .collect();
        if pts.is_empty() {
            return Err(Error::InvalidInput(format!("plot `{}` has no drawable points", self.title)));
        }
        let fold = |f: fn(f64, f64) -> f64, init: f64, sel: fn(&(f64, f64)) -> f64| {
            pts.iter().map(sel).fold(init, f)
        };
        let (mut x0, mut x1) = padded(
            fold(f64::min, f64::INFINITY, |p| p.0),
            fold(f64::max, f64::NEG_INFINITY, |p| p.0),
        );
        let (mut y0, mut y1) = if self.log_y {
            (
                fold(f64::min, f64::INFINITY, |p| p.1).floor(),
                fold(f64::max, f64::NEG_INFINITY, |p| p.1).ceil().max(
                    fold(f64::min, f64::INFINITY, |p| p.1).floor() + 1.0,
                ),
            )
        } else {
            padded(
                fold(f64::min, f64::INFINITY, |p| p.1),
                fold(f64::max, f64::NEG_INFINITY, |p| p.1),
            )
        };
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        if self.equal_aspect {
            let scale = ((x1 - x0) / pw).max((y1 - y0) / ph);
            let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
            x0 = cx - 0.5 * scale * pw;
            x1 = cx + 0.5 * scale * pw;
            y0 = cy - 0.5 * scale * ph;
            y1 = cy + 0.5 * scale * ph;
        }
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut s = String::new();
        let w = &mut s;
        // writing into a String cannot fail
        let _ = writeln!(
            w,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            w,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            w,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );

        let step = nice_step(x1 - x0);
        let mut t = (x0 / step).ceil() * step;
        while t <= x1 {
            let px = sx(t);
            let _ = writeln!(
                w,
                r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{}" stroke="#ddd"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"##,
                TOP + ph,
                TOP + ph + 16.0,
                fmt_tick(t)
            );
            t += step;
        }
        let ystep = if self.log_y { ((y1 - y0) / 8.0).ceil().max(1.0) } else { nice_step(y1 - y0) };
        let mut t = (y0 / ystep).ceil() * ystep;
        while t <= y1 + 1e-9 * ystep {
            let py = sy(t);
            let label = if self.log_y { format!("1e{}", t.round() as i64) } else { fmt_tick(t) };
            let _ = writeln!(
                w,
                r##"<line x1="{LEFT}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{label}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                py + 4.0
            );
            t += ystep;
        }
        let _ = writeln!(
            w,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 18.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            w,
            r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (i, series) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let coords: Vec<String> = series
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_y || *y > 0.0))
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(map_y(y))))
                .collect();
            let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                w,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                coords.join(" ")
            );
            let ly = TOP + 10.0 + 18.0 * i as f64;
            let lx = LEFT + pw + 12.0;
            let _ = writeln!(
                w,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
                lx + 24.0,
                lx + 30.0,
                ly + 4.0,
                escape(&series.label)
            );
        }
        let _ = writeln!(w, "</svg>");
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()?)?;
        Ok(())
    }
}

/// Centerlines projected on the `e1`-`e2` plane, in m.
pub fn shape_plot(title: &str, shapes: &[(String, Vec<ShapeSample>)]) -> LinePlot {
    LinePlot {
        title: title.into(),
        x_label: "x (m)".into(),
        y_label: "y (m)".into(),
        log_y: false,
        equal_aspect: true,
        series: shapes
            .iter()
            .map(|(label, shape)| Series {
                label: label.clone(),
                points: shape.iter().map(|s| (s.pose.position.x, s.pose.position.y)).collect(),
                dashed: false,
            })
            .collect(),
    }
}

/// Oblique projection of a 3-D point on the drawing plane.
fn oblique(p: &Vector3<f64>) -> (f64, f64) {
    let (c, s) = (0.5 * (std::f64::consts::PI / 6.0).cos(), 0.5 * (std::f64::consts::PI / 6.0).sin());
    (p.y - c * p.x, p.z - s * p.x)
}

pub fn tip_path_plot(trace: &Trace, desired: &[Vector3<f64>]) -> LinePlot {
    let mut series = vec![Series {
        label: "tip".into(),
        points: trace.tip_poses.iter().map(|g| oblique(&g.position)).collect(),
        dashed: false,
    }];
    if !desired.is_empty() {
        series.push(Series {
            label: "desired".into(),
            points: desired.iter().map(oblique).collect(),
            dashed: true,
        });
    }
    LinePlot {
        title: "Tip path (oblique projection)".into(),
        x_label: "y - 0.43 x (m)".into(),
        y_label: "z - 0.25 x (m)".into(),
        log_y: false,
        equal_aspect: true,
        series,
    }
}

pub fn wrench_plot(trace: &Trace) -> LinePlot {
    let width = trace.wrenches.first().map_or(0, |w| w.len());
    // only the tip wrench, which is the last block, for distributed control
    let first = width.saturating_sub(6);
    let names = ["m_1 (N m)", "m_2 (N m)", "m_3 (N m)", "n_1 (N)", "n_2 (N)", "n_3 (N)"];
    let series = (first..width)
        .map(|c| Series {
            label: names[c - first].into(),
            points: trace.times.iter().zip(&trace.wrenches).map(|(t, w)| (*t, w[c])).collect(),
            dashed: c - first < 3,
        })
        .collect();
    LinePlot {
        title: "Tip wrench".into(),
        x_label: "t (s)".into(),
        y_label: "moment (N m) / force (N)".into(),
        log_y: false,
        equal_aspect: false,
        series,
    }
}

pub fn error_plot(trace: &Trace, y_label: &str) -> LinePlot {
    LinePlot {
        title: "Tracking error".into(),
        x_label: "t (s)".into(),
        y_label: y_label.into(),
        log_y: true,
        equal_aspect: false,
        series: vec![Series {
            label: "|e|".into(),
            points: trace.times.iter().copied().zip(trace.errors.iter().copied()).collect(),
            dashed: false,
        }],
    }
}

/// Renders one of the standard plots of a trace. `shape-xy` draws the
/// centerline at the first, middle and last recorded samples.
pub fn write_svg_plot(trace: &Trace, kind: PlotKind, spec: &RodSpec, path: &Path) -> Result<()> {
    if trace.is_empty() {
        return Err(Error::InvalidInput("cannot plot an empty trace".into()));
    }
    let plot = match kind {
        PlotKind::ShapeXy => {
            let mut idx = vec![0, trace.len() / 2, trace.len() - 1];
            idx.dedup();
            let shapes = idx
                .into_iter()
                .map(|i| Ok((format!("t = {:.3} s", trace.times[i]), fk_shape(spec, &trace.strains[i], 40)?)))
                .collect::<Result<Vec<_>>>()?;
            shape_plot("Rod shape", &shapes)
        }
        PlotKind::TipPath3dProjection => tip_path_plot(trace, &[]),
        PlotKind::WrenchVsTime => wrench_plot(trace),
        PlotKind::ErrorVsTime => error_plot(trace, "error norm"),
    };
    plot.write(path)
}
