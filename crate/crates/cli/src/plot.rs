//! Minimal SVG convergence plots.

use std::fmt::Write;

use crate::eval::BenchmarkCurves;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Median curves with a shaded 40th-60th percentile band per algorithm.
pub fn convergence_svg(bc: &BenchmarkCurves) -> String {
    let n = bc.curves.iter().map(|c| c.median.len()).max().unwrap_or(1).max(2);
    let values = bc.curves.iter().flat_map(|c| c.p40.iter().chain(&c.p60).chain(&c.median)).copied();
    let (mut lo, mut hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let px = |t: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * t as f64 / (n - 1) as f64;
    let py = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{} ({})</text>"#,
        WIDTH / 2.0,
        escape(&bc.benchmark),
        bc.metric
    );
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" stroke="black" fill="none"/>"#);
    let _ = writeln!(s, r#"<text x="{x0}" y="{}" text-anchor="middle">1</text>"#, y0 + 16.0);
    let _ = writeln!(s, r#"<text x="{x1}" y="{}" text-anchor="middle">{n}</text>"#, y0 + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">trial</text>"#, WIDTH / 2.0, y0 + 32.0);
    let _ = writeln!(s, r#"<text x="{}" y="{y0}" text-anchor="end">{lo:.3}</text>"#, x0 - 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{hi:.3}</text>"#, x0 - 4.0, y1 + 4.0);

    for (i, c) in bc.curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut band = String::new();
        for (t, v) in c.p60.iter().enumerate() {
            let _ = write!(band, "{:.2},{:.2} ", px(t), py(*v));
        }
        for (t, v) in c.p40.iter().enumerate().rev() {
            let _ = write!(band, "{:.2},{:.2} ", px(t), py(*v));
        }
        let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.trim_end());
        let line: Vec<String> = c.median.iter().enumerate().map(|(t, v)| format!("{:.2},{:.2}", px(t), py(*v))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#,
            x1 - 110.0,
            escape(&c.algorithm)
        );
    }
    s.push_str("</svg>\n");
    s
}
