//! Self-contained SVG charts: line/scatter plots with axes, ticks and an
//! annotation line. Output is deterministic for a fixed input.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    DivVsR,
    LogLog,
    QVsS,
}

impl PlotKind {
    pub fn parse(text: &str) -> Option<PlotKind> {
        match text {
            "div_vs_r" => Some(PlotKind::DivVsR),
            "loglog" => Some(PlotKind::LogLog),
            "q_vs_s" => Some(PlotKind::QVsS),
            _ => None,
        }
    }
}

#[derive(Debug)]
pub enum PlotError {
    TooFewPoints(usize),
}

impl std::fmt::Display for PlotError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlotError::TooFewPoints(n) => write!(f, "plot needs >= 2 points, got {n}"),
        }
    }
}

/// Data for one chart.
#[derive(Debug, Clone)]
pub struct Series {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    /// One line of context, e.g. a fitted exponent or a verdict.
    pub annotation: String,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 62.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;

fn fmt(v: f64) -> String {
    let s = format!("{v:.2}");
    // Trim trailing zeros for stable, compact labels.
    let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s
    }
}

/// Renders the series as a standalone SVG document.
pub fn render_svg(series: &Series) -> Result<String, PlotError> {
    if series.points.len() < 2 {
        return Err(PlotError::TooFewPoints(series.points.len()));
    }
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &series.points {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    if (max_x - min_x).abs() < 1e-12 {
        max_x = min_x + 1.0;
    }
    if (max_y - min_y).abs() < 1e-12 {
        max_y = min_y + 1.0;
    }
    // A little headroom on the y axis.
    let pad_y = 0.06 * (max_y - min_y);
    let (lo_y, hi_y) = (min_y - pad_y, max_y + pad_y);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - min_x) / (max_x - min_x) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (1.0 - (y - lo_y) / (hi_y - lo_y)) * plot_h;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{x}" y="20" font-family="monospace" font-size="14" text-anchor="middle">{}</text>"#,
        xml_escape(&series.title),
        x = WIDTH / 2.0
    )
    .unwrap();

    // Axes.
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_h;
    writeln!(
        svg,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#,
        x1 = MARGIN_LEFT + plot_w
    )
    .unwrap();
    writeln!(
        svg,
        r#"<line x1="{x0}" y1="{y1}" x2="{x0}" y2="{y0}" stroke="black"/>"#,
        y1 = MARGIN_TOP
    )
    .unwrap();

    // Ticks.
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = min_x + t * (max_x - min_x);
        let xp = sx(xv);
        writeln!(svg, r#"<line x1="{xp}" y1="{y0}" x2="{xp}" y2="{y}" stroke="black"/>"#, y = y0 + 4.0)
            .unwrap();
        writeln!(
            svg,
            r#"<text x="{xp}" y="{y}" font-family="monospace" font-size="11" text-anchor="middle">{}</text>"#,
            fmt(xv),
            y = y0 + 17.0
        )
        .unwrap();
        let yv = lo_y + t * (hi_y - lo_y);
        let yp = sy(yv);
        writeln!(svg, r#"<line x1="{x}" y1="{yp}" x2="{x0}" y2="{yp}" stroke="black"/>"#, x = x0 - 4.0)
            .unwrap();
        writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-family="monospace" font-size="11" text-anchor="end">{}</text>"#,
            fmt(yv),
            x = x0 - 7.0,
            y = yp + 4.0
        )
        .unwrap();
    }

    // Axis labels.
    writeln!(
        svg,
        r#"<text x="{x}" y="{y}" font-family="monospace" font-size="12" text-anchor="middle">{}</text>"#,
        xml_escape(&series.x_label),
        x = MARGIN_LEFT + plot_w / 2.0,
        y = HEIGHT - 12.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="14" y="{y}" font-family="monospace" font-size="12" text-anchor="middle" transform="rotate(-90 14 {y})">{}</text>"#,
        xml_escape(&series.y_label),
        y = MARGIN_TOP + plot_h / 2.0
    )
    .unwrap();

    // Polyline and markers.
    let mut pts = String::new();
    for &(x, y) in &series.points {
        write!(pts, "{:.2},{:.2} ", sx(x), sy(y)).unwrap();
    }
    writeln!(
        svg,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
        pts.trim_end()
    )
    .unwrap();
    for &(x, y) in &series.points {
        writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#,
            sx(x),
            sy(y)
        )
        .unwrap();
    }

    if !series.annotation.is_empty() {
        writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-family="monospace" font-size="12" text-anchor="end">{}</text>"#,
            xml_escape(&series.annotation),
            x = WIDTH - MARGIN_RIGHT - 4.0,
            y = MARGIN_TOP + 14.0
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series() -> Series {
        Series {
            title: "divergence".into(),
            x_label: "r".into(),
            y_label: "Div(r)".into(),
            points: vec![(4.0, 8.0), (8.0, 20.0), (12.0, 32.0)],
            annotation: "exponent 1.19".into(),
        }
    }

    #[test]
    fn renders_deterministically() {
        let a = render_svg(&series()).unwrap();
        let b = render_svg(&series()).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
        assert!(a.contains("Div(r)"));
        assert!(a.contains("exponent 1.19"));
        assert!(a.contains("polyline"));
    }

    #[test]
    fn rejects_single_point() {
        let mut s = series();
        s.points.truncate(1);
        assert!(matches!(render_svg(&s), Err(PlotError::TooFewPoints(1))));
    }

    #[test]
    fn escapes_markup() {
        let mut s = series();
        s.annotation = "a<b & c>d".into();
        let svg = render_svg(&s).unwrap();
        assert!(svg.contains("a&lt;b &amp; c&gt;d"));
    }
}
