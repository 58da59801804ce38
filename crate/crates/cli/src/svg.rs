//! Minimal SVG writer over the fixed window [-10, 10]².
//!
//! Coordinates are printed with three decimals so output bytes depend
//! only on the drawn geometry.

use std::fmt::Write as _;

use grafting_core::moebius::Complex;

const HALF_WIDTH: f64 = 10.0;
const PIXELS: f64 = 800.0;
const SCALE: f64 = PIXELS / (2.0 * HALF_WIDTH);

pub struct Svg {
    body: String,
}

// Fixed precision without a negative zero.
fn num(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

fn to_screen(z: Complex) -> (f64, f64) {
    ((z.re + HALF_WIDTH) * SCALE, (HALF_WIDTH - z.im) * SCALE)
}

fn visible(z: Complex, margin: f64) -> bool {
    z.is_finite() && z.re.abs() <= HALF_WIDTH + margin && z.im.abs() <= HALF_WIDTH + margin
}

impl Svg {
    pub fn new() -> Self {
        Svg { body: String::new() }
    }

    /// Circle in model coordinates; circles entirely outside the window
    /// are dropped.
    pub fn circle(&mut self, center: Complex, radius: f64, stroke: &str, fill: &str) {
        if !radius.is_finite() || !visible(center, radius) {
            return;
        }
        let (x, y) = to_screen(center);
        let _ = writeln!(
            self.body,
            r#"<circle cx="{}" cy="{}" r="{}" stroke="{stroke}" fill="{fill}" stroke-width="1"/>"#,
            num(x),
            num(y),
            num(radius * SCALE)
        );
    }

    /// Small square marker, kept distinct from circles.
    pub fn point(&mut self, z: Complex, color: &str) {
        if !visible(z, 0.0) {
            return;
        }
        let (x, y) = to_screen(z);
        let _ = writeln!(self.body, r#"<rect x="{}" y="{}" width="2" height="2" fill="{color}"/>"#, num(x - 1.0), num(y - 1.0));
    }

    pub fn line(&mut self, a: Complex, b: Complex, stroke: &str) {
        if !visible(a, HALF_WIDTH) || !visible(b, HALF_WIDTH) {
            return;
        }
        let ((x1, y1), (x2, y2)) = (to_screen(a), to_screen(b));
        let _ = writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}" stroke-width="1"/>"#,
            num(x1),
            num(y1),
            num(x2),
            num(y2)
        );
    }

    /// Closed polyline; segments through infinity are skipped by
    /// breaking the path.
    pub fn polygon(&mut self, points: &[Complex], stroke: &str) {
        let mut d = String::new();
        let mut pen_down = false;
        for &z in points {
            if !visible(z, HALF_WIDTH) {
                pen_down = false;
                continue;
            }
            let (x, y) = to_screen(z);
            let _ = write!(d, "{}{} {} ", if pen_down { "L" } else { "M" }, num(x), num(y));
            pen_down = true;
        }
        if !d.is_empty() {
            let _ = writeln!(self.body, r#"<path d="{}" stroke="{stroke}" fill="none" stroke-width="1"/>"#, d.trim_end());
        }
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{p}\" height=\"{p}\" viewBox=\"0 0 {p} {p}\">\n<rect width=\"{p}\" height=\"{p}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            p = PIXELS
        )
    }
}

/// Stroke color for nesting depth `k`, cycling through a fixed palette.
pub fn depth_color(k: usize) -> &'static str {
    const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];
    PALETTE[k % PALETTE.len()]
}
