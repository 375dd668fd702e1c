//! Static infogram scatter with the shaded L-zone.

use std::fmt::Write;

use admissible_core::infogram::Infogram;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 48.0;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render(ig: &Infogram) -> String {
    let plot = SIZE - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + x * plot;
    let py = |y: f64| SIZE - MARGIN - y * plot;
    let (tx, ty) = (ig.config.threshold_x, ig.config.threshold_y);
    let net_label = if ig.protected.is_some() { "safety index" } else { "net information" };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    // vertical and horizontal arms of the L
    let _ = writeln!(
        s,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#f4c7c3" opacity="0.7"/>"##,
        px(0.0),
        py(1.0),
        tx * plot,
        plot
    );
    let _ = writeln!(
        s,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#f4c7c3" opacity="0.7"/>"##,
        px(0.0),
        py(ty),
        plot,
        ty * plot
    );
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{plot}" height="{plot}" fill="none" stroke="black"/>"#
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{tick}</text>"#, px(tick), SIZE - MARGIN + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{tick}</text>"#, MARGIN - 6.0, py(tick) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">relevance</text>"#, SIZE / 2.0, SIZE - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{net_label}</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    );
    for p in &ig.points {
        let colour = if p.admissible { "#1a7f37" } else { "#9a9a9a" };
        let (x, y) = (px(p.relevance), py(p.net_info));
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{colour}"/>"#);
        if p.admissible {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 6.0, y - 4.0, escape(&p.feature));
        }
    }
    s.push_str("</svg>\n");
    s
}
