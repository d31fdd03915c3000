//! Deterministic SVG 1.1 plots of curves and point sets in the plane.
//!
//! Drawing happens in world coordinates with `y` negated, so the `viewBox`
//! is the (flipped) viewport itself. All numbers are printed with six
//! decimals.

use std::fmt::Write as _;

use planar_flow::Complex64;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Viewport {
    /// Bounding box of all points, widened by 5% of its extent on each side.
    pub fn fit(items: &[Item]) -> Option<Viewport> {
        let mut pts = items
            .iter()
            .flat_map(|i| i.points().iter())
            .filter(|p| p.re.is_finite() && p.im.is_finite());
        let first = pts.next()?;
        let mut v = Viewport {
            x_min: first.re,
            x_max: first.re,
            y_min: first.im,
            y_max: first.im,
        };
        for p in pts {
            v.x_min = v.x_min.min(p.re);
            v.x_max = v.x_max.max(p.re);
            v.y_min = v.y_min.min(p.im);
            v.y_max = v.y_max.max(p.im);
        }
        let pad = |lo: f64, hi: f64| {
            let w = hi - lo;
            if w > 0.0 {
                0.05 * w
            } else {
                0.05 * lo.abs().max(1.0)
            }
        };
        let (px, py) = (pad(v.x_min, v.x_max), pad(v.y_min, v.y_max));
        Some(Viewport {
            x_min: v.x_min - px,
            x_max: v.x_max + px,
            y_min: v.y_min - py,
            y_max: v.y_max + py,
        })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Polyline { points: Vec<Complex64>, label: String },
    Points { points: Vec<Complex64>, label: String },
}

impl Item {
    pub fn points(&self) -> &[Complex64] {
        match self {
            Item::Polyline { points, .. } | Item::Points { points, .. } => points,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Style {
    /// Stroke width in screen pixels.
    pub stroke_width: f64,
    /// Point radius as a fraction of the viewport width.
    pub point_radius: f64,
    pub colors: Vec<String>,
    pub axes: bool,
    /// Rendered width in pixels; the height follows the aspect ratio.
    pub pixel_width: f64,
}

impl Default for Style {
    fn default() -> Self {
        Style {
            stroke_width: 1.5,
            point_radius: 0.004,
            colors: ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            axes: true,
            pixel_width: 800.0,
        }
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn render_svg(items: &[Item], viewport: Option<Viewport>, style: &Style) -> Result<String, CliError> {
    if items.is_empty() || items.iter().all(|i| i.points().is_empty()) {
        return Err(CliError::Config("nothing to render: no curves or points".into()));
    }
    let v = match viewport {
        Some(v) => v,
        None => Viewport::fit(items).ok_or_else(|| CliError::Config("nothing to render: no finite points".into()))?,
    };
    if !(v.width() > 0.0 && v.height() > 0.0) {
        return Err(CliError::Config("viewport must have positive width and height".into()));
    }
    let px_h = style.pixel_width * v.height() / v.width();
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.6}" height="{:.6}" viewBox="{:.6} {:.6} {:.6} {:.6}">"#,
        style.pixel_width,
        px_h,
        v.x_min,
        -v.y_max,
        v.width(),
        v.height()
    );
    if style.axes {
        let _ = writeln!(
            s,
            r##"<g stroke="#888888" stroke-width="1" vector-effect="non-scaling-stroke">"##
        );
        if v.y_min <= 0.0 && 0.0 <= v.y_max {
            let _ = writeln!(
                s,
                r#"<line x1="{:.6}" y1="0.000000" x2="{:.6}" y2="0.000000" vector-effect="non-scaling-stroke"/>"#,
                v.x_min, v.x_max
            );
        }
        if v.x_min <= 0.0 && 0.0 <= v.x_max {
            let _ = writeln!(
                s,
                r#"<line x1="0.000000" y1="{:.6}" x2="0.000000" y2="{:.6}" vector-effect="non-scaling-stroke"/>"#,
                -v.y_max, -v.y_min
            );
        }
        let _ = writeln!(s, "</g>");
    }
    let r = style.point_radius * v.width();
    for (k, item) in items.iter().enumerate() {
        let color = &style.colors[k % style.colors.len()];
        match item {
            Item::Polyline { points, label } => {
                let coords: Vec<String> = points
                    .iter()
                    .filter(|p| p.re.is_finite() && p.im.is_finite())
                    .map(|p| format!("{:.6},{:.6}", p.re, -p.im))
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="{:.6}" vector-effect="non-scaling-stroke" data-label="{}" points="{}"/>"#,
                    style.stroke_width,
                    esc(label),
                    coords.join(" ")
                );
            }
            Item::Points { points, label } => {
                let _ = writeln!(s, r#"<g fill="{color}" data-label="{}">"#, esc(label));
                for p in points.iter().filter(|p| p.re.is_finite() && p.im.is_finite()) {
                    let _ = writeln!(s, r#"<circle cx="{:.6}" cy="{:.6}" r="{r:.6}"/>"#, p.re, -p.im);
                }
                let _ = writeln!(s, "</g>");
            }
        }
    }
    let _ = writeln!(s, "</svg>");
    Ok(s)
}
