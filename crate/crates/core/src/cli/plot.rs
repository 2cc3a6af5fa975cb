use std::fmt::Write;

use crate::eval::ForecastReport;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn points(values: &[f64], lo: f64, hi: f64) -> String {
    let n = values.len();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let step = if n > 1 {
        (WIDTH - 2.0 * MARGIN) / (n - 1) as f64
    } else {
        0.0
    };
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = MARGIN + step * i as f64;
            let y = HEIGHT - MARGIN - (v - lo) / span * (HEIGHT - 2.0 * MARGIN);
            format!("{x:.2},{y:.2}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Actual and predicted closes as a standalone SVG line chart.
pub fn render_svg(report: &ForecastReport) -> String {
    let actual: Vec<f64> = report.rows.iter().map(|r| r.actual).collect();
    let predicted: Vec<f64> = report.rows.iter().map(|r| r.predicted).collect();
    let (lo, hi) = actual
        .iter()
        .chain(&predicted)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
    let first = report
        .rows
        .first()
        .map(|r| r.date.to_string())
        .unwrap_or_default();
    let last = report
        .rows
        .last()
        .map(|r| r.date.to_string())
        .unwrap_or_default();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="25" text-anchor="middle" font-family="sans-serif" font-size="16">{} {}: predicted vs actual close</text>"#,
        WIDTH / 2.0,
        report.symbol,
        report.model.name().to_uppercase()
    );
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{x0},{y0} L{x0},{y1} L{x1},{y1}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for (y, v) in [(y1, lo), (y0, hi)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.2}</text>"#,
            x0 - 4.0,
            y + 4.0
        );
    }
    for (x, anchor, label) in [(x0, "start", &first), (x1, "end", &last)] {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{label}</text>"#,
            y1 + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<polyline id="actual" fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
        points(&actual, lo, hi)
    );
    let _ = writeln!(
        s,
        r#"<polyline id="predicted" fill="none" stroke="darkorange" stroke-width="2" stroke-dasharray="6 3" points="{}"/>"#,
        points(&predicted, lo, hi)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="steelblue">actual</text>"#,
        x1 - 110.0,
        y0 + 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="darkorange">predicted</text>"#,
        x1 - 60.0,
        y0 + 12.0
    );
    s.push_str("</svg>\n");
    s
}
