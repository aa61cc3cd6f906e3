//! Minimal self-contained SVG line charts.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub dashed: bool,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 62.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 46.0;
const LEGEND_H: f64 = 22.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_bounds(lo: f64, hi: f64) -> (f64, f64) {
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if (hi - lo).abs() < 1e-12 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

/// Lay `panels` out in a grid of `columns` and render them with a shared
/// x-axis label. A log10 x-axis is used when every x value is positive.
pub fn render(panels: &[Panel], columns: usize, x_label: &str) -> String {
    let columns = columns.max(1);
    let rows = panels.len().div_ceil(columns).max(1);
    let width = PANEL_W * columns as f64;
    let height = PANEL_H * rows as f64 + LEGEND_H;

    let xs: Vec<f64> = panels
        .iter()
        .flat_map(|p| p.series.iter().flat_map(|s| s.points.iter().map(|pt| pt.0)))
        .collect();
    let log_x = !xs.is_empty() && xs.iter().all(|&x| x > 0.0);
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let x_lo = xs.iter().map(|&x| tx(x)).fold(f64::INFINITY, f64::min);
    let x_hi = xs.iter().map(|&x| tx(x)).fold(f64::NEG_INFINITY, f64::max);
    let (x_lo, x_hi) = if x_lo.is_finite() && x_hi > x_lo {
        (x_lo, x_hi)
    } else {
        nice_bounds(x_lo, x_hi)
    };
    let x_ticks: Vec<(f64, String)> = {
        let decades: Vec<f64> = if log_x {
            (x_lo.ceil() as i64..=x_hi.floor() as i64).map(|k| k as f64).collect()
        } else {
            Vec::new()
        };
        if decades.len() >= 2 {
            decades.into_iter().map(|k| (k, format!("1e{k}"))).collect()
        } else {
            (0..=4)
                .map(|k| {
                    let t = x_lo + (x_hi - x_lo) * k as f64 / 4.0;
                    let label = if log_x { format_tick(10f64.powf(t)) } else { format_tick(t) };
                    (t, label)
                })
                .collect()
        }
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    for (i, panel) in panels.iter().enumerate() {
        let ox = PANEL_W * (i % columns) as f64;
        let oy = PANEL_H * (i / columns) as f64;
        let (px, py) = (ox + MARGIN_L, oy + MARGIN_T);
        let (pw, ph) = (
            PANEL_W - MARGIN_L - MARGIN_R,
            PANEL_H - MARGIN_T - MARGIN_B,
        );

        let ys: Vec<f64> = panel
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .filter(|y| y.is_finite())
            .collect();
        let y_lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let y_hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (y_lo, y_hi) = nice_bounds(y_lo, y_hi);
        let sx = |x: f64| px + (tx(x) - x_lo) / (x_hi - x_lo) * pw;
        let sy = |y: f64| py + ph - (y - y_lo) / (y_hi - y_lo) * ph;

        let _ = writeln!(
            svg,
            r#"<rect x="{px:.1}" y="{py:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-weight="bold">{}</text>"#,
            px + pw / 2.0,
            oy + 20.0,
            escape(&panel.title)
        );
        for k in 0..=4 {
            let y = y_lo + (y_hi - y_lo) * k as f64 / 4.0;
            let yy = sy(y);
            let _ = writeln!(
                svg,
                r##"<line x1="{px:.1}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
                px + pw,
                px - 4.0,
                yy + 4.0,
                format_tick(y)
            );
        }
        for (t, label) in &x_ticks {
            let xx = px + (t - x_lo) / (x_hi - x_lo) * pw;
            let _ = writeln!(
                svg,
                r#"<text x="{xx:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#,
                py + ph + 16.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px + pw / 2.0,
            py + ph + 34.0,
            escape(x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text transform="translate({:.1},{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            ox + 14.0,
            py + ph / 2.0,
            escape(&panel.y_label)
        );

        for s in &panel.series {
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|p| p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            if pts.is_empty() {
                continue;
            }
            let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
                pts.join(" "),
                s.color
            );
        }
    }

    // Legend from the first panel's series.
    if let Some(first) = panels.first() {
        let y = height - 8.0;
        let mut x = 10.0;
        for s in &first.series {
            let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-width="2"{dash}/><text x="{:.1}" y="{y:.1}">{}</text>"#,
                y - 4.0,
                x + 24.0,
                y - 4.0,
                s.color,
                x + 28.0,
                escape(&s.label)
            );
            x += 40.0 + 7.0 * s.label.len() as f64;
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    }
}
