//! Scatter plots as plain SVG.

use std::fmt::Write as _;

use ndarray::ArrayView2;

pub const SIZE: f64 = 600.0;
const MARGIN: f64 = 20.0;

/// Categorical palette; components beyond its length wrap around.
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#bcbd22", "#17becf", "#7f7f7f",
];

pub fn color(component: usize) -> &'static str {
    PALETTE[component % PALETTE.len()]
}

/// True data in gray under generated samples coloured by component.
/// Only the first two coordinates are drawn. The view is fit to the true data.
pub fn scatter_svg(truth: ArrayView2<f64>, samples: ArrayView2<f64>, components: &[usize], title: &str) -> String {
    let (lo, hi) = bounds(truth);
    let span = [(hi[0] - lo[0]).max(1e-9), (hi[1] - lo[1]).max(1e-9)];
    let inner = SIZE - 2.0 * MARGIN;
    let project = |x: f64, y: f64| {
        (
            MARGIN + (x - lo[0]) / span[0] * inner,
            SIZE - MARGIN - (y - lo[1]) / span[1] * inner,
        )
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(svg, r##"<g fill="#b0b0b0" fill-opacity="0.5">"##);
    for r in truth.rows() {
        let (x, y) = project(r[0], second(&r));
        let _ = writeln!(svg, r#"<circle cx="{x:.1}" cy="{y:.1}" r="1.5"/>"#);
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g fill-opacity="0.7">"#);
    for (r, &c) in samples.rows().into_iter().zip(components) {
        let (x, y) = project(r[0], second(&r));
        if !(x.is_finite() && y.is_finite()) || !(-SIZE..2.0 * SIZE).contains(&x) || !(-SIZE..2.0 * SIZE).contains(&y) {
            continue;
        }
        let _ = writeln!(svg, r#"<circle cx="{x:.1}" cy="{y:.1}" r="1.5" fill="{}"/>"#, color(c));
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="13">{}</text>"#,
        MARGIN - 5.0,
        escape(title)
    );
    svg.push_str("</svg>\n");
    svg
}

fn second(r: &ndarray::ArrayView1<f64>) -> f64 {
    if r.len() > 1 {
        r[1]
    } else {
        0.0
    }
}

fn bounds(x: ArrayView2<f64>) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for r in x.rows() {
        for c in 0..2 {
            let v = if c == 0 { r[0] } else { second(&r) };
            lo[c] = lo[c].min(v);
            hi[c] = hi[c].max(v);
        }
    }
    for c in 0..2 {
        if !lo[c].is_finite() {
            lo[c] = -1.0;
            hi[c] = 1.0;
        }
        let pad = 0.05 * (hi[c] - lo[c]);
        lo[c] -= pad;
        hi[c] += pad;
    }
    (lo, hi)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
