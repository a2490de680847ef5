//! Minimal SVG line charts written as plain markup.
//!
//! A chart is a vertical stack of panels sharing one x axis. Each series is
//! drawn as exactly one `<polyline>`; reference lines use `<line>`.

use std::fmt::Write;

pub const MAX_POINTS: usize = 2000;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const GAP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Fixed y range; derived from the data when absent.
    pub y_range: Option<(f64, f64)>,
    /// Draws the `y = x` reference line.
    pub diagonal: bool,
}

impl Panel {
    pub fn new(title: impl Into<String>, y_label: impl Into<String>) -> Self {
        Panel {
            title: title.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            y_range: None,
            diagonal: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub panels: Vec<Panel>,
    pub x_range: Option<(f64, f64)>,
    pub width: f64,
    pub panel_height: f64,
}

impl Chart {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>) -> Self {
        Chart {
            title: title.into(),
            x_label: x_label.into(),
            panels: Vec::new(),
            x_range: None,
            width: 900.0,
            panel_height: 220.0,
        }
    }
}

/// Keeps at most `max` points by uniform striding; the last point is kept.
pub fn downsample(points: &[(f64, f64)], max: usize) -> Vec<(f64, f64)> {
    if points.len() <= max || max < 2 {
        return points.to_vec();
    }
    let step = (points.len() - 1).div_ceil(max - 1);
    let mut out: Vec<(f64, f64)> = points.iter().step_by(step).copied().collect();
    if out.last() != points.last() {
        out.push(*points.last().expect("non-empty"));
    }
    out
}

pub fn escape(text: &str) -> String {
    let mut s = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => s.push_str("&amp;"),
            '<' => s.push_str("&lt;"),
            '>' => s.push_str("&gt;"),
            '"' => s.push_str("&quot;"),
            '\'' => s.push_str("&apos;"),
            c => s.push(c),
        }
    }
    s
}

fn finite_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values
        .filter(|v| v.is_finite())
        .fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
}

fn padded((lo, hi): (f64, f64)) -> (f64, f64) {
    if hi - lo < 1e-12 {
        let pad = if lo.abs() > 1e-12 { lo.abs() * 0.1 } else { 1.0 };
        (lo - pad, hi + pad)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

pub fn render(chart: &Chart) -> String {
    let n_panels = chart.panels.len().max(1);
    let height = TOP + n_panels as f64 * (chart.panel_height + GAP) - GAP + BOTTOM;
    let plot_w = chart.width - LEFT - RIGHT;
    let x_range = chart.x_range.unwrap_or_else(|| {
        padded(
            finite_range(
                chart
                    .panels
                    .iter()
                    .flat_map(|p| &p.series)
                    .flat_map(|s| s.points.iter().map(|p| p.0)),
            )
            .unwrap_or((0.0, 1.0)),
        )
    });

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = chart.width,
        h = height
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{}" height="{height}" fill="white"/>"#, chart.width);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        chart.width / 2.0,
        escape(&chart.title)
    );

    for (pi, panel) in chart.panels.iter().enumerate() {
        let top = TOP + pi as f64 * (chart.panel_height + GAP);
        let bottom = top + chart.panel_height;
        let y_range = panel.y_range.unwrap_or_else(|| {
            padded(
                finite_range(panel.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)))
                    .unwrap_or((0.0, 1.0)),
            )
        });
        let sx = |x: f64| LEFT + (x - x_range.0) / (x_range.1 - x_range.0) * plot_w;
        let sy = |y: f64| bottom - (y - y_range.0) / (y_range.1 - y_range.0) * chart.panel_height;

        let _ = writeln!(out, "<g>");
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT}" y="{top}" width="{plot_w}" height="{}" fill="none" stroke="#444"/>"##,
            chart.panel_height
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + plot_w / 2.0,
            top - 6.0,
            escape(&panel.title)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
            escape(&panel.y_label),
            y = top + chart.panel_height / 2.0
        );
        for t in 0..=4 {
            let f = t as f64 / 4.0;
            let yv = y_range.0 + f * (y_range.1 - y_range.0);
            let y = sy(yv);
            let _ = writeln!(
                out,
                r##"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#444"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT - 4.0,
                LEFT - 6.0,
                y + 4.0,
                tick_label(yv)
            );
        }
        if pi + 1 == chart.panels.len() {
            for t in 0..=5 {
                let xv = x_range.0 + t as f64 / 5.0 * (x_range.1 - x_range.0);
                let x = sx(xv);
                let _ = writeln!(
                    out,
                    r##"<line x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{}" stroke="#444"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"##,
                    bottom + 4.0,
                    bottom + 18.0,
                    tick_label(xv)
                );
            }
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                LEFT + plot_w / 2.0,
                bottom + 38.0,
                escape(&chart.x_label)
            );
        }
        if panel.diagonal {
            let lo = x_range.0.max(y_range.0);
            let hi = x_range.1.min(y_range.1);
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="4 4"/>"##,
                sx(lo),
                sy(lo),
                sx(hi),
                sy(hi)
            );
        }
        for (si, series) in panel.series.iter().enumerate() {
            let color = PALETTE[si % PALETTE.len()];
            let mut pts = String::new();
            for &(x, y) in &downsample(&series.points, MAX_POINTS) {
                if x.is_finite() && y.is_finite() {
                    let _ = write!(pts, "{:.2},{:.2} ", sx(x), sy(y));
                }
            }
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"><title>{}</title></polyline>"#,
                pts.trim_end(),
                escape(&series.label)
            );
            let ly = top + 14.0 + si as f64 * 16.0;
            let lx = LEFT + plot_w + 10.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                lx + 18.0,
                lx + 22.0,
                ly + 4.0,
                escape(&series.label)
            );
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    out
}
