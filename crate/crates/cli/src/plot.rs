//! Static SVG plot of `value / |ln ε|` against `|ln ε|`.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// `(|ln ε|, value / |ln ε|)`.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub series: Vec<Series>,
    /// Predicted asymptote, drawn as a horizontal line.
    pub asymptote: Option<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|&s| s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(t);
        t += step;
    }
    out
}

const COLORS: [&str; 4] = ["#1f77b4", "#2ca02c", "#9467bd", "#8c564b"];

impl Plot {
    pub fn render(&self) -> String {
        let pts = self.series.iter().flat_map(|s| s.points.iter().copied());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if let Some(a) = self.asymptote {
            y0 = y0.min(a);
            y1 = y1.max(a);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        y0 = y0.min(0.0);
        let pad = 0.05 * (y1 - y0).max(1e-9);
        y1 += pad;
        let xpad = 0.03 * (x1 - x0).max(1e-9);
        x0 -= xpad;
        x1 += xpad;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
        let sy = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#).unwrap();
        writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
        writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&self.title)).unwrap();
        let (bx0, bx1, by0, by1) = (sx(x0), sx(x1), sy(y0), sy(y1));
        writeln!(s, r#"<rect x="{bx0:.2}" y="{by1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, bx1 - bx0, by0 - by1).unwrap();
        for t in nice_ticks(x0, x1, 8) {
            let x = sx(t);
            writeln!(s, r#"<line x1="{x:.2}" y1="{by0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, by0 + 5.0, by0 + 18.0, fmt_tick(t)).unwrap();
        }
        for t in nice_ticks(y0, y1, 6) {
            let y = sy(t);
            writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{bx0:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, bx0 - 5.0, bx0 - 8.0, y + 4.0, fmt_tick(t)).unwrap();
        }
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">|ln ε|</text>"#, (bx0 + bx1) / 2.0, H - 12.0).unwrap();
        writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">value / |ln ε|</text>"#, (by0 + by1) / 2.0, (by0 + by1) / 2.0).unwrap();
        let mut legend_y = TOP + 14.0;
        if let Some(a) = self.asymptote {
            let y = sy(a);
            writeln!(s, r##"<line x1="{bx0:.2}" y1="{y:.2}" x2="{bx1:.2}" y2="{y:.2}" stroke="#d62728" stroke-dasharray="6 4"/>"##).unwrap();
            writeln!(s, r##"<text x="{:.2}" y="{legend_y:.2}" fill="#d62728">predicted {}</text>"##, bx0 + 10.0, fmt_tick(a)).unwrap();
            legend_y += 16.0;
        }
        for (k, ser) in self.series.iter().enumerate() {
            let c = COLORS[k % COLORS.len()];
            let path: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}"/>"#, path.join(" ")).unwrap();
            for &(x, y) in &ser.points {
                writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, sx(x), sy(y)).unwrap();
            }
            writeln!(s, r#"<text x="{:.2}" y="{legend_y:.2}" fill="{c}">{}</text>"#, bx0 + 10.0, escape(&ser.label)).unwrap();
            legend_y += 16.0;
        }
        s.push_str("</svg>\n");
        s
    }
}

fn fmt_tick(t: f64) -> String {
    let r = (t * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}
