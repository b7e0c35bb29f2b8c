//! CSV tables and minimal SVG line plots.

use std::fmt::Write as _;

/// A rectangular table of named numeric columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Formats `value` in scientific notation with `digits` significant digits.
pub fn format_sig(value: f64, digits: usize) -> String {
    format!("{:.*e}", digits.max(1) - 1, value)
}

/// CSV text: one header row, LF line endings, `digits` significant digits.
pub fn to_csv(table: &Table, digits: usize) -> String {
    let mut out = table.headers.join(",");
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|v| format_sig(*v, digits)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// One plotted curve.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub y: Vec<f64>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
/// Tick marks per axis.
pub const TICKS: usize = 5;
const COLORS: [&str; 2] = ["#1f77b4", "#d62728"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(values: &[f64]) -> (f64, f64) {
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(lo.is_finite() && hi.is_finite()) {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if (1e-3..1e4).contains(&v.abs()) {
        let decimals = (3 - v.abs().log10().floor() as i32).clamp(0, 6) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.2e}")
    }
}

/// SVG document with axes, ticks and one or two series against `x`.
///
/// The first series sets the labelled y axis. A second series is rescaled
/// onto the same frame, and its range is printed in the legend.
pub fn to_svg(title: &str, x_label: &str, x: &[f64], series: &[Series], description: &str) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let (x0, x1) = range(x);
    let px = |v: f64| MARGIN_LEFT + (v - x0) / (x1 - x0) * plot_w;
    let primary = series.first().map(|s| range(&s.y)).unwrap_or((0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, "<desc>{}</desc>", escape(description));
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (bottom, right) = (MARGIN_TOP + plot_h, MARGIN_LEFT + plot_w);
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{MARGIN_LEFT}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{bottom}" stroke="black"/>"#
    );
    for k in 0..TICKS {
        let f = k as f64 / (TICKS - 1) as f64;
        let (xv, xp) = (x0 + f * (x1 - x0), MARGIN_LEFT + f * plot_w);
        let _ = writeln!(
            s,
            r#"<line class="tick" x1="{xp:.2}" y1="{bottom}" x2="{xp:.2}" y2="{:.2}" stroke="black"/>"#,
            bottom + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{xp:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            bottom + 18.0,
            tick_label(xv)
        );
        let (yv, yp) = (primary.0 + f * (primary.1 - primary.0), bottom - f * plot_h);
        let _ = writeln!(
            s,
            r#"<line class="tick" x1="{:.2}" y1="{yp:.2}" x2="{MARGIN_LEFT}" y2="{yp:.2}" stroke="black"/>"#,
            MARGIN_LEFT - 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 8.0,
            yp + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="18" font-size="13" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );
    for (i, ser) in series.iter().take(COLORS.len()).enumerate() {
        let (lo, hi) = range(&ser.y);
        let points: Vec<String> = x
            .iter()
            .zip(&ser.y)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(&a, &b)| format!("{:.2},{:.2}", px(a), bottom - (b - lo) / (hi - lo) * plot_h))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            COLORS[i],
            points.join(" ")
        );
        let legend = if i == 0 {
            escape(&ser.label)
        } else {
            format!("{} [{} .. {}]", escape(&ser.label), tick_label(lo), tick_label(hi))
        };
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" fill="{}">{legend}</text>"#,
            MARGIN_LEFT + 10.0,
            MARGIN_TOP + 14.0 * (i + 1) as f64,
            COLORS[i]
        );
    }
    s.push_str("</svg>\n");
    s
}
