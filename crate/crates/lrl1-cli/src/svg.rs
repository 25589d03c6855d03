//! Minimal SVG output: line plots with a log-scale y axis, and a heat grid.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Polylines of log10(y) against x; non-positive or non-finite y are dropped.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|&(x, y)| x.is_finite() && y > 0.0 && y.is_finite())
        .map(|(x, y)| (x, y.log10()))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (0.0, 1.0, -1.0, 0.0);
    if !pts.is_empty() {
        x0 = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        x1 = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        y0 = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor();
        y1 = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil();
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    // One tick per decade.
    let mut e = y0 as i64;
    let step = (((y1 - y0) / 8.0).ceil() as i64).max(1);
    while e as f64 <= y1 {
        let y = sy(e as f64);
        let _ = writeln!(out, r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{e}</text>"#, LEFT - 6.0, y + 4.0);
        e += step;
    }
    for i in 0..=4 {
        let x = x0 + (x1 - x0) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(x),
            TOP + ph + 16.0,
            trim(x)
        );
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(ylabel)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|&&(x, y)| x.is_finite() && y > 0.0 && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y.log10())))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, path.join(" "));
        }
        if series.len() <= 8 {
            let ly = TOP + 14.0 + 16.0 * i as f64;
            let _ = writeln!(out, r#"<text x="{:.1}" y="{ly:.1}" text-anchor="end" fill="{color}">{}</text>"#, LEFT + pw - 8.0, escape(&s.label));
        }
    }
    out.push_str("</svg>\n");
    out
}

fn trim(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e9 {
        format!("{}", x as i64)
    } else {
        format!("{x:.3}")
    }
}

pub struct Cell {
    pub label: String,
    /// Index into the class palette.
    pub class: usize,
    /// Shading strength in [0, 1].
    pub weight: f64,
}

/// Rows × columns of labelled cells colored by class.
pub fn heat_grid(title: &str, row_labels: &[String], col_labels: &[String], cells: &[Vec<Cell>], legend: &[&str]) -> String {
    let cw = 130.0;
    let ch = 44.0;
    let left = 120.0;
    let top = 60.0;
    let w = left + cw * col_labels.len() as f64 + 20.0;
    let h = top + ch * row_labels.len() as f64 + 40.0 + 18.0 * legend.len() as f64;
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    for (j, c) in col_labels.iter().enumerate() {
        let x = left + cw * (j as f64 + 0.5);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, top - 8.0, escape(c));
    }
    for (i, r) in row_labels.iter().enumerate() {
        let y = top + ch * i as f64;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, left - 8.0, y + ch / 2.0 + 4.0, escape(r));
        for (j, cell) in cells.get(i).map(|v| v.as_slice()).unwrap_or(&[]).iter().enumerate() {
            let x = left + cw * j as f64;
            let color = PALETTE[cell.class % PALETTE.len()];
            let _ = writeln!(
                out,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{cw}" height="{ch}" fill="{color}" fill-opacity="{:.3}" stroke="white"/>"#,
                0.15 + 0.85 * cell.weight.clamp(0.0, 1.0)
            );
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, x + cw / 2.0, y + ch / 2.0 + 4.0, escape(&cell.label));
        }
    }
    let ly0 = top + ch * row_labels.len() as f64 + 24.0;
    for (i, l) in legend.iter().enumerate() {
        let y = ly0 + 18.0 * i as f64;
        let _ = writeln!(out, r#"<rect x="{left}" y="{:.1}" width="12" height="12" fill="{}"/>"#, y - 10.0, PALETTE[i % PALETTE.len()]);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{y:.1}">{}</text>"#, left + 18.0, escape(l));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_drops_nonpositive() {
        let s = Series { label: "a<b".into(), points: vec![(0.0, 1.0), (1.0, 0.0), (2.0, 1e-3)] };
        let svg = line_plot("t", "x", "y", &[s]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn heat_grid_has_cells() {
        let cells = vec![vec![Cell { label: "x".into(), class: 0, weight: 1.0 }, Cell { label: "y".into(), class: 1, weight: 0.5 }]];
        let svg = heat_grid("t", &["r".into()], &["a".into(), "b".into()], &cells, &["A", "B"]);
        assert_eq!(svg.matches("fill-opacity").count(), 2);
    }
}
