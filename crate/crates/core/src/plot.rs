// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dependency-free SVG output for heatmaps and PCA scatter plots.

use std::fmt::Write;

use crate::tensor::HeatmapStats;

const CELL: f64 = 28.0;
const MARGIN: f64 = 48.0;

/// Blue–white–red, saturating at `±limit`.
fn diverging(x: f64, limit: f64) -> String {
    let t = if limit > 0.0 { (x / limit).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = (255.0 * (1.0 - t.abs())).round() as u8;
    if t >= 0.0 {
        format!("rgb(255,{fade},{fade})")
    } else {
        format!("rgb({fade},{fade},255)")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Layers run down the rows, token positions across the columns.
pub fn heatmap_svg(stats: &HeatmapStats) -> String {
    let (layers, tokens) = stats.shape();
    let w = 2.0 * MARGIN + tokens as f64 * CELL;
    let h = 2.0 * MARGIN + layers as f64 * CELL;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="20" font-size="12">{} ({}), limit ±{:.4}</text>"#,
        escape(&stats.slice.to_string()),
        stats.ctype,
        stats.robust_limit
    );
    for (l, row) in stats.grid.iter().enumerate() {
        let y = MARGIN + l as f64 * CELL;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">L{l}</text>"#, MARGIN - 4.0, y + CELL * 0.6);
        for (t, v) in row.iter().enumerate() {
            let x = MARGIN + t as f64 * CELL;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}"><title>L{l} T{} {v:e}</title></rect>"#,
                diverging(*v, stats.robust_limit),
                t + 1
            );
        }
    }
    for t in 0..tokens {
        let x = MARGIN + (t as f64 + 0.5) * CELL;
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">T{}</text>"#, h - MARGIN + 14.0, t + 1);
    }
    s.push_str("</svg>\n");
    s
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Scatter of `(group, [x, y])` points, coloured by group index.
pub fn scatter_svg(title: &str, groups: &[String], points: &[(usize, [f64; 2])]) -> String {
    let size = 360.0;
    let (w, h) = (size + 2.0 * MARGIN + 140.0, size + 2.0 * MARGIN);
    let bound = |k: usize| {
        let lo = points.iter().map(|p| p.1[k]).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p.1[k]).fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() && hi > lo {
            (lo, hi)
        } else {
            (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0)
        }
    };
    let ((x0, x1), (y0, y1)) = (bound(0), bound(1));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="20" font-size="12">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{size}" height="{size}" fill="none" stroke="#999"/>"##
    );
    for (g, p) in points {
        let cx = MARGIN + (p[0] - x0) / (x1 - x0) * size;
        let cy = MARGIN + size - (p[1] - y0) / (y1 - y0) * size;
        let _ = writeln!(
            s,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{}" fill-opacity="0.8"/>"#,
            PALETTE[g % PALETTE.len()]
        );
    }
    for (g, name) in groups.iter().enumerate() {
        let y = MARGIN + 14.0 * g as f64;
        let x = MARGIN + size + 16.0;
        let _ = writeln!(s, r#"<circle cx="{x}" cy="{}" r="4" fill="{}"/>"#, y + 4.0, PALETTE[g % PALETTE.len()]);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x + 8.0, y + 8.0, escape(name));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">PC1</text>"#, MARGIN + size / 2.0, h - 16.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">PC2</text>"#,
        MARGIN + size / 2.0,
        MARGIN + size / 2.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{ComponentType, SliceId};

    #[test]
    fn colours_saturate_at_the_limit() {
        assert_eq!(diverging(0.0, 1.0), "rgb(255,255,255)");
        assert_eq!(diverging(5.0, 1.0), "rgb(255,0,0)");
        assert_eq!(diverging(-1.0, 1.0), "rgb(0,0,255)");
        assert_eq!(diverging(3.0, 0.0), "rgb(255,255,255)");
    }

    #[test]
    fn heatmap_has_one_rect_per_cell() {
        let stats = HeatmapStats {
            slice: SliceId::new("a<b", "c"),
            ctype: ComponentType::Res,
            grid: vec![vec![0.1, -0.2, 0.0]; 2],
            robust_limit: 0.2,
            n_examples: 4,
        };
        let svg = heatmap_svg(&stats);
        assert_eq!(svg.matches("<rect").count(), 6);
        assert!(svg.contains("a&lt;b"));
    }

    #[test]
    fn scatter_handles_degenerate_ranges() {
        let svg = scatter_svg("t", &["a".into()], &[(0, [1.0, 1.0]), (0, [1.0, 1.0])]);
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(!svg.contains("NaN"));
    }
}
