//! Minimal line plots written as standalone SVG.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 64.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Reference line spanning the plot at fixed `x` (vertical) or `y` (horizontal).
#[derive(Clone, Debug)]
pub enum Guide {
    Vertical { x: f64, label: String },
    Horizontal { y: f64, label: String },
}

#[derive(Clone, Debug, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub guides: Vec<Guide>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Self::default()
        }
    }

    pub fn series(mut self, label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        self.series.push(Series {
            label: label.into(),
            points,
        });
        self
    }

    pub fn guide(mut self, g: Guide) -> Self {
        self.guides.push(g);
        self
    }

    /// Data ranges over all finite points and guides, padded by 4%.
    pub fn ranges(&self) -> ((f64, f64), (f64, f64)) {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in self.series.iter().flat_map(|s| s.points.iter()) {
            if x.is_finite() && y.is_finite() {
                x0 = x0.min(*x);
                x1 = x1.max(*x);
                y0 = y0.min(*y);
                y1 = y1.max(*y);
            }
        }
        for g in &self.guides {
            match g {
                Guide::Vertical { x, .. } => {
                    x0 = x0.min(*x);
                    x1 = x1.max(*x);
                }
                Guide::Horizontal { y, .. } => {
                    y0 = y0.min(*y);
                    y1 = y1.max(*y);
                }
            }
        }
        (padded(x0, x1), padded(y0, y1))
    }

    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.ranges();
        let (w, h) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
        let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * w;
        let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * h;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(out, "<title>{}</title>", escape(&self.title));
        let _ = writeln!(out, "<desc>x-range: [{x0:.17e}, {x1:.17e}] y-range: [{y0:.17e}, {y1:.17e}]</desc>");
        let _ = writeln!(out, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);
        let _ = writeln!(
            out,
            r##"<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{h}" fill="none" stroke="#000000"/>"##
        );
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{fx:.3}</text>"#,
                px(fx),
                HEIGHT - MARGIN + 16.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{fy:.3}</text>"#,
                MARGIN - 6.0,
                py(fy) + 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text class="x-label" x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{}</text>"#,
            MARGIN + w / 2.0,
            HEIGHT - 18.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text class="y-label" x="18" y="{:.2}" font-size="14" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            MARGIN + h / 2.0,
            MARGIN + h / 2.0,
            escape(&self.y_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="15" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            MARGIN / 2.0,
            escape(&self.title)
        );
        for g in &self.guides {
            let (xa, ya, xb, yb, label) = match g {
                Guide::Vertical { x, label } => (px(*x), py(y0), px(*x), py(y1), label),
                Guide::Horizontal { y, label } => (px(x0), py(*y), px(x1), py(*y), label),
            };
            let _ = writeln!(
                out,
                r##"<line class="guide" x1="{xa:.2}" y1="{ya:.2}" x2="{xb:.2}" y2="{yb:.2}" stroke="#555555" stroke-dasharray="4 3"><title>{}</title></line>"##,
                escape(label)
            );
        }
        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
                pts.join(" "),
                escape(&s.label)
            );
            let ly = MARGIN + 14.0 + 14.0 * k as f64;
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{ly:.2}" font-size="11" fill="{color}">{}</text>"#,
                WIDTH - MARGIN - 150.0,
                escape(&s.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}
