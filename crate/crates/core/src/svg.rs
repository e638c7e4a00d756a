//! Minimal standalone SVG figures: scatter plots, histograms and hull overlays.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 50.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let (x0, x1) = bounds(xs);
        let (y0, y1) = bounds(ys);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

fn axes(out: &mut String, f: &Frame, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN,
        m = MARGIN
    );
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    for (v, anchor_x, anchor_y, align) in [
        (f.x0, f.px(f.x0), H - MARGIN + 15.0, "start"),
        (f.x1, f.px(f.x1), H - MARGIN + 15.0, "end"),
    ] {
        let _ = writeln!(out, r#"<text x="{anchor_x:.1}" y="{anchor_y:.1}" text-anchor="{align}">{v:.3}</text>"#);
    }
    for (v, y) in [(f.y0, f.py(f.y0)), (f.y1, f.py(f.y1) + 10.0)] {
        let _ = writeln!(out, r#"<text x="{:.1}" y="{y:.1}" text-anchor="end">{v:.3}</text>"#, MARGIN - 4.0);
    }
}

/// Scatter plot; optionally with the identity line (paired values) and a
/// dashed least-squares line given as (slope, intercept).
pub fn scatter(
    points: &[(f64, f64)],
    title: &str,
    xlabel: &str,
    ylabel: &str,
    identity: bool,
    fit: Option<(f64, f64)>,
) -> String {
    let mut f = Frame::new(points.iter().map(|p| p.0), points.iter().map(|p| p.1));
    if identity {
        let lo = f.x0.min(f.y0);
        let hi = f.x1.max(f.y1);
        f = Frame { x0: lo, x1: hi, y0: lo, y1: hi };
    }
    let mut out = String::new();
    header(&mut out, W, H);
    axes(&mut out, &f, title, xlabel, ylabel);
    if identity {
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888"/>"##,
            f.px(f.x0),
            f.py(f.x0),
            f.px(f.x1),
            f.py(f.x1)
        );
    }
    for &(x, y) in points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f77b4" fill-opacity="0.7"/>"##,
            f.px(x),
            f.py(y)
        );
    }
    if let Some((slope, intercept)) = fit {
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="red" stroke-dasharray="6,4"/>"#,
            f.px(f.x0),
            f.py(slope * f.x0 + intercept),
            f.px(f.x1),
            f.py(slope * f.x1 + intercept)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Histogram with `bins` equal-width bins over the data range.
pub fn histogram(values: &[f64], bins: usize, title: &str, xlabel: &str) -> String {
    let bins = bins.max(1);
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let (lo, hi) = bounds(finite.iter().copied());
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in &finite {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let max = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    let f = Frame { x0: lo, x1: hi, y0: 0.0, y1: max * 1.05 };
    let mut out = String::new();
    header(&mut out, W, H);
    axes(&mut out, &f, title, xlabel, "count");
    for (i, &c) in counts.iter().enumerate() {
        let x0 = lo + i as f64 * width;
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4" stroke="white"/>"##,
            f.px(x0),
            f.py(c as f64),
            f.px(x0 + width) - f.px(x0),
            f.py(0.0) - f.py(c as f64)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One panel of a hull overlay: light contour polylines and the hull outline.
pub struct HullPanel<'a> {
    pub title: String,
    pub contours: Vec<&'a [[f64; 2]]>,
    pub hull: &'a [[f64; 2]],
}

/// Side-by-side panels in image coordinates (y grows downwards); the darker
/// closed line is the convex hull.
pub fn hull_overlay(panels: &[HullPanel<'_>], image_w: f64, image_h: f64) -> String {
    let pw = 260.0;
    let scale = (pw - 20.0) / image_w.max(1.0);
    let ph = image_h * scale + 40.0;
    let mut out = String::new();
    header(&mut out, pw * panels.len().max(1) as f64, ph);
    for (k, panel) in panels.iter().enumerate() {
        let ox = k as f64 * pw + 10.0;
        let oy = 30.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="18" text-anchor="middle">{}</text>"#, ox + (pw - 20.0) / 2.0, escape(&panel.title));
        let _ = writeln!(
            out,
            r##"<rect x="{ox:.1}" y="{oy:.1}" width="{:.1}" height="{:.1}" fill="#f4f4f4" stroke="#ccc"/>"##,
            image_w * scale,
            image_h * scale
        );
        for c in &panel.contours {
            let pts: Vec<String> = c
                .iter()
                .map(|[x, y]| format!("{:.2},{:.2}", ox + x * scale, oy + y * scale))
                .collect();
            let _ = writeln!(
                out,
                r##"<polyline points="{}" fill="none" stroke="#9ecae1" stroke-width="0.5" stroke-opacity="0.5"/>"##,
                pts.join(" ")
            );
        }
        if !panel.hull.is_empty() {
            let pts: Vec<String> = panel
                .hull
                .iter()
                .map(|[x, y]| format!("{:.2},{:.2}", ox + x * scale, oy + y * scale))
                .collect();
            let _ = writeln!(
                out,
                r##"<polygon points="{}" fill="none" stroke="#08306b" stroke-width="2"/>"##,
                pts.join(" ")
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figures_are_well_formed() {
        let pts = [(1.0, 2.0), (2.0, 3.5), (3.0, 2.5)];
        let s = scatter(&pts, "t", "x", "y", true, Some((0.5, 1.0)));
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<circle").count(), 3);
        assert!(s.contains("stroke-dasharray"));
        let h = histogram(&[0.1, 0.2, 0.2, 0.9], 4, "h", "x");
        assert_eq!(h.matches("<rect").count(), 2 + 4);
        let hull = [[0.0, 0.0], [4.0, 0.0], [2.0, 3.0]];
        let contour = [[1.0, 2.0], [2.0, 3.5]];
        let o = hull_overlay(
            &[HullPanel { title: "modal".into(), contours: vec![&contour[..]], hull: &hull }],
            10.0,
            8.0,
        );
        assert!(o.contains("<polygon") && o.contains("<polyline"));
    }
}
