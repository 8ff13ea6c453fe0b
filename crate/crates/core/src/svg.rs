//! Minimal SVG rendering of ROC curves.

use std::fmt::Write;

use crate::eval::RocCurve;

const WIDTH: f64 = 520.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 20.0;
const PLOT: f64 = 400.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn px(fpr: f64) -> f64 {
    LEFT + fpr * PLOT
}

fn py(tpr: f64) -> f64 {
    TOP + (1.0 - tpr) * PLOT
}

fn polyline(points: impl Iterator<Item = (f64, f64)>) -> String {
    let mut s = String::new();
    for (i, (x, y)) in points.enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:.2},{:.2}", px(x), py(y));
    }
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Axes, chance diagonal, one polyline per named curve and a legend with
/// each curve's AUROC. An optional mean curve is drawn dashed in black.
pub fn roc_svg<F>(title: &str, curves: &[(String, &RocCurve<F>)], mean: Option<(&[f64], &[f64], f64)>) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="14" text-anchor="middle">{}</text>"#,
        LEFT + PLOT / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{PLOT}" height="{PLOT}" fill="none" stroke="black"/>"#
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.1}</text>"#,
            px(v),
            TOP + PLOT + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
            LEFT - 6.0,
            py(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">False positive rate</text>"#,
        LEFT + PLOT / 2.0,
        TOP + PLOT + 36.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">True positive rate</text>"#,
        TOP + PLOT / 2.0,
        TOP + PLOT / 2.0
    );
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 4"/>"#,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );

    let mut legend = Vec::new();
    for (i, (name, c)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            polyline(c.points.iter().map(|p| (p.fpr, p.tpr)))
        );
        legend.push((color, format!("{} (AUROC {:.3})", escape(name), c.auroc), ""));
    }
    if let Some((fpr, tpr, auroc)) = mean {
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="black" stroke-width="2" stroke-dasharray="6 3" points="{}"/>"#,
            polyline(fpr.iter().copied().zip(tpr.iter().copied()))
        );
        legend.push(("black", format!("mean (AUROC {auroc:.3})"), r#" stroke-dasharray="6 3""#));
    }
    let x0 = LEFT + PLOT * 0.45;
    let y0 = TOP + PLOT - 10.0 - 16.0 * legend.len() as f64;
    for (i, (color, label, dash)) in legend.iter().enumerate() {
        let y = y0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"{dash}/>"#,
            x0 + 20.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{label}</text>"#, x0 + 26.0, y + 4.0);
    }
    s.push_str("</svg>\n");
    s
}
