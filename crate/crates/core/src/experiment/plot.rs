//! Static SVG figures rendered from the experiment CSV files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::csv::Table;
use crate::qpd::{extract_timescales_with_threshold, NonclassicalitySeries};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Otoc,
    Qpd,
    Nonclassicality,
    Ratio,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "otoc" => Ok(PlotKind::Otoc),
            "qpd" => Ok(PlotKind::Qpd),
            "nonclassicality" => Ok(PlotKind::Nonclassicality),
            "ratio" => Ok(PlotKind::Ratio),
            other => Err(Error::config("kind", format!("unknown plot kind `{other}`"))),
        }
    }
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

const PALETTE: [&str; 16] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173", "#3182bd",
];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

struct Figure {
    title: String,
    x_label: String,
    y_label: String,
    series: Vec<Series>,
    markers: bool,
    /// Shade y < 0 and y > 1.
    shade_outside_unit: bool,
    /// Shaded x interval.
    band: Option<(f64, f64)>,
}

fn csv_err(path: &str, message: impl Into<String>) -> Error {
    Error::Csv { path: path.to_string(), message: message.into() }
}

fn require(table: &Table, name: &str, path: &str) -> Result<usize> {
    table.column_index(name).ok_or_else(|| csv_err(path, format!("missing column `{name}`")))
}

fn xy(table: &Table, xi: usize, yi: usize) -> Vec<(f64, f64)> {
    table.rows.iter().filter_map(|r| Some((r[xi]?, r[yi]?))).collect()
}

fn figure(table: &Table, kind: PlotKind, path: &str) -> Result<Figure> {
    if table.rows.is_empty() {
        return Err(csv_err(path, "no data rows"));
    }
    let prefixed = |prefix: &str| -> Vec<(usize, String)> {
        table
            .header
            .iter()
            .enumerate()
            .filter_map(|(i, h)| h.strip_prefix(prefix).map(|s| (i, s.to_string())))
            .collect()
    };
    match kind {
        PlotKind::Otoc => {
            let t = require(table, "t_us", path)?;
            let cols = prefixed("re_F_");
            if cols.is_empty() {
                return Err(csv_err(path, "no re_F_* columns"));
            }
            Ok(Figure {
                title: "OTOC".into(),
                x_label: "t (us)".into(),
                y_label: "Re F(t)".into(),
                series: cols.into_iter().map(|(i, l)| Series { label: l, points: xy(table, t, i) }).collect(),
                markers: false,
                shade_outside_unit: false,
                band: None,
            })
        }
        PlotKind::Qpd => {
            let t = require(table, "t_us", path)?;
            let cols = prefixed("re_p_");
            if cols.is_empty() {
                return Err(csv_err(path, "no re_p_* columns"));
            }
            Ok(Figure {
                title: "Quasiprobabilities (real parts)".into(),
                x_label: "t (us)".into(),
                y_label: "Re p(t)".into(),
                series: cols.into_iter().map(|(i, l)| Series { label: l, points: xy(table, t, i) }).collect(),
                markers: false,
                shade_outside_unit: true,
                band: None,
            })
        }
        PlotKind::Nonclassicality => {
            let t = require(table, "t_us", path)?;
            let n = require(table, "n_tilde", path)?;
            let points = xy(table, t, n);
            let band = if points.len() >= 2 {
                let series = NonclassicalitySeries::new(
                    points.iter().map(|p| p.0).collect(),
                    points.iter().map(|p| p.1).collect(),
                )
                .map_err(|e| csv_err(path, e.to_string()))?;
                let report = extract_timescales_with_threshold(&series, series.dt() * series.dt())?;
                report.t_m.zip(report.t_z)
            } else {
                None
            };
            Ok(Figure {
                title: "Total nonclassicality".into(),
                x_label: "t (us)".into(),
                y_label: "N(t)".into(),
                series: vec![Series { label: "n_tilde".into(), points }],
                markers: false,
                shade_outside_unit: false,
                band,
            })
        }
        PlotKind::Ratio => {
            let h = require(table, "h_over_j", path)?;
            let r = require(table, "ratio", path)?;
            Ok(Figure {
                title: "(t_z - t_m) / (t_m - t_star)".into(),
                x_label: "h/J".into(),
                y_label: "ratio".into(),
                series: vec![Series { label: "ratio".into(), points: xy(table, h, r) }],
                markers: true,
                shade_outside_unit: false,
                band: None,
            })
        }
    }
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn tick_label(x: f64) -> String {
    let s = format!("{:.4}", x);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn render(fig: &Figure) -> String {
    let all = fig.series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if fig.shade_outside_unit {
        y0 = y0.min(0.0);
        y1 = y1.max(1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 0.0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&fig.title)
    );

    if fig.shade_outside_unit {
        let top_of_one = sy(1.0);
        let zero = sy(0.0);
        let _ = writeln!(
            s,
            r##"<rect class="nonclassical" x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{:.2}" fill="#f4cccc" fill-opacity="0.6"/>"##,
            (top_of_one - TOP).max(0.0)
        );
        let _ = writeln!(
            s,
            r##"<rect class="nonclassical" x="{LEFT:.2}" y="{zero:.2}" width="{pw:.2}" height="{:.2}" fill="#f4cccc" fill-opacity="0.6"/>"##,
            (TOP + ph - zero).max(0.0)
        );
    }
    if let Some((a, b)) = fig.band {
        let (xa, xb) = (sx(a), sx(b));
        let _ = writeln!(
            s,
            r##"<rect class="band" x="{xa:.2}" y="{TOP:.2}" width="{:.2}" height="{ph:.2}" fill="#cfe2f3" fill-opacity="0.7"/>"##,
            (xb - xa).max(0.0)
        );
    }

    // Axes and ticks.
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
    );
    let xs = nice_step(x1 - x0, 8);
    let mut tick = (x0 / xs).ceil() * xs;
    while tick <= x1 + 1e-9 * xs {
        let px = sx(tick);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#,
            TOP + ph,
            TOP + ph + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph + 19.0,
            tick_label(tick)
        );
        tick += xs;
    }
    let ys = nice_step(y1 - y0, 6);
    let mut tick = (y0 / ys).ceil() * ys;
    while tick <= y1 + 1e-9 * ys {
        let py = sy(tick);
        let _ =
            writeln!(s, r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT:.2}" y2="{py:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            py + 4.0,
            tick_label(tick)
        );
        tick += ys;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(&fig.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&fig.y_label)
    );

    for (i, series) in fig.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = series.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline data-label="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(&series.label),
            pts.join(" ")
        );
        if fig.markers {
            for &(x, y) in &series.points {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
            }
        }
        let ly = TOP + 10.0 + 16.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&series.label));
    }
    s.push_str("</svg>\n");
    s
}

/// Renders the SVG for a parsed table.
pub fn render_svg(table: &Table, kind: PlotKind, source: &str) -> Result<String> {
    Ok(render(&figure(table, kind, source)?))
}

/// Reads `csv_path`, renders it and writes the SVG to `out` (default: same name
/// with an `.svg` extension). Nothing is written when the CSV is malformed or empty.
pub fn emit_plot(csv_path: &Path, kind: PlotKind, out: Option<&Path>) -> Result<PathBuf> {
    let table = Table::read(csv_path)?;
    let svg = render_svg(&table, kind, &csv_path.display().to_string())?;
    let target = out.map(Path::to_path_buf).unwrap_or_else(|| csv_path.with_extension("svg"));
    std::fs::write(&target, svg)?;
    Ok(target)
}
