//! Minimal SVG line charts for evaluation curves.

use std::fmt::Write;

use scenegraph_vad::eval::{Criterion, EvalResult};

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

fn axis_label(c: Criterion) -> &'static str {
    match c {
        Criterion::Frame => "false positive rate",
        Criterion::Rbdc | Criterion::Tbdc => "false positive regions per frame",
    }
}

fn y_label(c: Criterion) -> &'static str {
    match c {
        Criterion::Frame => "true positive rate",
        Criterion::Rbdc => "region detection rate",
        Criterion::Tbdc => "track detection rate",
    }
}

/// Render one curve on the unit square as a standalone SVG document.
pub fn curve_svg(result: &EvalResult) -> String {
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + x.clamp(0.0, 1.0) * plot_w;
    let sy = |y: f64| HEIGHT - MARGIN - y.clamp(0.0, 1.0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{} AUC = {:.4}</text>"#,
        WIDTH / 2.0,
        result.criterion.to_string().to_uppercase(),
        result.auc
    );
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{x}" y1="{y0}" x2="{x}" y2="{y1}" stroke="#ddd"/><line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="#ddd"/>"##,
            x = sx(v),
            y = sy(v),
            x0 = sx(0.0),
            x1 = sx(1.0),
            y0 = sy(0.0),
            y1 = sy(1.0),
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{v}</text><text x="{}" y="{}" text-anchor="end">{v}</text>"#,
            sx(v),
            sy(0.0) + 16.0,
            sx(0.0) - 6.0,
            sy(v) + 4.0,
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{}" y="{}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#,
        sx(0.0),
        sy(1.0)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0,
        axis_label(result.criterion)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        y_label(result.criterion)
    );
    let points: Vec<String> = result
        .curve
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
        points.join(" ")
    );
    svg.push_str("</svg>\n");
    svg
}
