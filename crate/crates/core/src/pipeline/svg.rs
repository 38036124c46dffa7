//! Minimal SVG scatter plot of the 2D map.

use std::fmt::Write as _;

const SIZE: f64 = 800.0;
const MARGIN: f64 = 40.0;
const LEGEND_WIDTH: f64 = 200.0;

const PALETTE: [&str; 20] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
];
const RETAINED: &str = "#1f77b4";
const REMOVED: &str = "#d0d0d0";

/// What to color the points by, already resolved to per-point values.
pub enum ColorValues<'a> {
    Region(&'a [usize]),
    Retained(&'a [bool]),
    /// Continuous score in `[0, 1]` with the labels of its two ends.
    Score { values: &'a [f64], low: &'a str, high: &'a str },
}

pub fn region_color(region: usize) -> &'static str {
    PALETTE[region % PALETTE.len()]
}

/// Blue to red through light grey.
pub fn score_color(s: f64) -> String {
    let lo = [59.0, 76.0, 192.0];
    let mid = [221.0, 221.0, 221.0];
    let hi = [180.0, 4.0, 38.0];
    let s = s.clamp(0.0, 1.0);
    let (a, b, t) = if s < 0.5 { (lo, mid, s * 2.0) } else { (mid, hi, s * 2.0 - 1.0) };
    let c: Vec<u8> = (0..3).map(|i| (a[i] + (b[i] - a[i]) * t).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Renders one `<circle>` per point inside `<g id="points">`, plus a legend.
pub fn render_scatter(title: &str, doc_ids: &[String], xy: &[[f64; 2]], colors: &ColorValues<'_>) -> String {
    let (mut min, mut max) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in xy {
        for a in 0..2 {
            min[a] = min[a].min(p[a]);
            max[a] = max[a].max(p[a]);
        }
    }
    let span = (0..2).map(|a| (max[a] - min[a]).max(1e-12)).fold(0.0, f64::max);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let to_px = |p: &[f64; 2]| {
        (
            MARGIN + (p[0] - min[0]) * scale,
            SIZE - MARGIN - (p[1] - min[1]) * scale,
        )
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = SIZE + LEGEND_WIDTH,
        h = SIZE
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="16">{}</text>"#,
        escape(title)
    );
    let _ = writeln!(svg, r#"<g id="points">"#);
    // Removed points first so retained ones stay visible on top.
    let mut order: Vec<usize> = (0..xy.len()).collect();
    if let ColorValues::Retained(flags) = colors {
        order.sort_by_key(|&i| flags[i]);
    }
    for i in order {
        let (x, y) = to_px(&xy[i]);
        let fill = match colors {
            ColorValues::Region(r) => region_color(r[i]).to_owned(),
            ColorValues::Retained(f) => (if f[i] { RETAINED } else { REMOVED }).to_owned(),
            ColorValues::Score { values, .. } => score_color(values[i]),
        };
        let _ = writeln!(
            svg,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="{fill}" fill-opacity="0.8" data-doc="{}"/>"#,
            escape(&doc_ids[i])
        );
    }
    let _ = writeln!(svg, "</g>");

    let mut legend: Vec<(String, String)> = Vec::new();
    match colors {
        ColorValues::Region(r) => {
            let k = r.iter().copied().max().map_or(0, |m| m + 1);
            legend.extend((0..k).map(|i| (region_color(i).to_owned(), format!("region {i}"))));
        }
        ColorValues::Retained(_) => {
            legend.push((RETAINED.to_owned(), "retained".into()));
            legend.push((REMOVED.to_owned(), "removed".into()));
        }
        ColorValues::Score { low, high, .. } => {
            legend.push((score_color(0.0), format!("0: {low}")));
            legend.push((score_color(0.5), "0.5".into()));
            legend.push((score_color(1.0), format!("1: {high}")));
        }
    }
    let _ = writeln!(svg, r#"<g id="legend" font-family="sans-serif" font-size="12">"#);
    for (row, (fill, label)) in legend.iter().enumerate() {
        let y = MARGIN + 18.0 * row as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{x}" y="{y}" width="10" height="10" fill="{fill}"/><text x="{tx}" y="{ty}">{}</text>"#,
            escape(label),
            x = SIZE + 10.0,
            tx = SIZE + 26.0,
            ty = y + 9.0
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    svg
}
