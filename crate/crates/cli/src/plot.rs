//! Deterministic SVG event-study plots: point estimates with 95% error bars.

use std::fmt::Write as _;
use std::path::Path;

use firstnature::{Error, Result};

const Z95: f64 = 1.959_963_984_540_054;
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLOURS: [&str; 4] = ["#1f4e79", "#b03a2e", "#1e8449", "#7d3c98"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    /// (year, estimate, se)
    pub points: Vec<(i32, f64, f64)>,
}

pub fn event_plot_svg(title: &str, series: &[Series]) -> String {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1) = (i32::MAX, i32::MIN);
    let (mut y0, mut y1) = (0.0f64, 0.0f64);
    for &(year, b, se) in pts {
        x0 = x0.min(year);
        x1 = x1.max(year);
        if b.is_finite() && se.is_finite() {
            y0 = y0.min(b - Z95 * se);
            y1 = y1.max(b + Z95 * se);
        }
    }
    if x0 > x1 {
        (x0, x1) = (0, 1);
    }
    if x0 == x1 {
        x1 = x0 + 1;
    }
    if y0 == y1 {
        (y0, y1) = (-1.0, 1.0);
    }
    let pad = (y1 - y0) * 0.08;
    let (y0, y1) = (y0 - pad, y1 + pad);
    let sx = |year: i32| MARGIN + (year - x0) as f64 / (x1 - x0) as f64 * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| HEIGHT - MARGIN - (v - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        s,
        r##"<line x1="{MARGIN}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
        sy(0.0),
        WIDTH - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{:.2}" stroke="black"/>"#,
        HEIGHT - MARGIN
    );
    for k in 0..=4 {
        let v = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{v:.3}</text>"#,
            MARGIN - 6.0,
            sy(v) + 4.0
        );
    }
    let mut years: Vec<i32> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    years.sort_unstable();
    years.dedup();
    for y in &years {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.1}" text-anchor="middle">{y}</text>"#,
            sx(*y),
            HEIGHT - MARGIN + 16.0
        );
    }
    let offset = 6.0;
    for (k, ser) in series.iter().enumerate() {
        let colour = COLOURS[k % COLOURS.len()];
        let dx = (k as f64 - (series.len() as f64 - 1.0) / 2.0) * offset;
        for &(year, b, se) in &ser.points {
            if !b.is_finite() {
                continue;
            }
            let x = sx(year) + dx;
            if se.is_finite() && se > 0.0 {
                let _ = writeln!(
                    s,
                    r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{colour}"/>"#,
                    sy(b - Z95 * se),
                    sy(b + Z95 * se)
                );
            }
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#, sy(b));
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" fill="{colour}">{}</text>"#,
            WIDTH - MARGIN - 120.0,
            MARGIN + 14.0 * k as f64,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_event_plot(path: &Path, title: &str, series: &[Series]) -> Result<()> {
    std::fs::write(path, event_plot_svg(title, series)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_deterministic() {
        let s = vec![Series {
            label: "affected".into(),
            points: vec![(1787, 0.01, 0.02), (1801, 0.0, 0.0), (1901, 0.25, 0.03)],
        }];
        let a = event_plot_svg("population", &s);
        assert_eq!(a, event_plot_svg("population", &s));
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert_eq!(a.matches("<circle").count(), 3);
    }
}
