//! Minimal SVG writer. Every number drawn as text goes through
//! [`Svg::number`], which logs it; [`Svg::finish`] returns the drawing and
//! a CSV of exactly those strings.

use std::fmt::Write as _;

pub struct Svg {
    width: f64,
    height: f64,
    body: String,
    shown: Vec<(String, String)>,
}

/// Escapes text for an XML text node or attribute.
fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Coordinates are written with two decimals so output is byte-stable.
fn c(v: f64) -> String {
    format!("{v:.2}")
}

#[derive(Clone, Copy)]
pub enum Anchor {
    Start,
    Middle,
    End,
}

impl Anchor {
    fn as_str(self) -> &'static str {
        match self {
            Anchor::Start => "start",
            Anchor::Middle => "middle",
            Anchor::End => "end",
        }
    }
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Svg { width, height, body: String::new(), shown: Vec::new() }
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}"/>"#,
            c(x),
            c(y),
            c(w.max(0.0)),
            c(h.max(0.0))
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}" stroke-width="1"/>"#,
            c(x1),
            c(y1),
            c(x2),
            c(y2)
        );
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], stroke: &str) {
        let pts: Vec<String> = points.iter().map(|&(x, y)| format!("{},{}", c(x), c(y))).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{}" cy="{}" r="{}" fill="{fill}"/>"#, c(x), c(y), c(r));
    }

    /// A pie slice from angle `a0` to `a1` (radians, clockwise from 12 o'clock).
    pub fn wedge(&mut self, cx: f64, cy: f64, r: f64, a0: f64, a1: f64, fill: &str) {
        if a1 - a0 >= std::f64::consts::TAU - 1e-12 {
            self.circle(cx, cy, r, fill);
            return;
        }
        let p = |a: f64| (cx + r * a.sin(), cy - r * a.cos());
        let (x0, y0) = p(a0);
        let (x1, y1) = p(a1);
        let large = u8::from(a1 - a0 > std::f64::consts::PI);
        let _ = writeln!(
            self.body,
            r#"<path d="M {} {} L {} {} A {} {} 0 {large} 1 {} {} Z" fill="{fill}"/>"#,
            c(cx),
            c(cy),
            c(x0),
            c(y0),
            c(r),
            c(r),
            c(x1),
            c(y1)
        );
    }

    /// Non-numeric text such as titles and feature keys.
    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: Anchor, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" font-size="{size}" text-anchor="{}">{}</text>"#,
            c(x),
            c(y),
            anchor.as_str(),
            esc(s)
        );
    }

    /// Draws a formatted number and logs it under `label`.
    pub fn number(&mut self, x: f64, y: f64, size: f64, anchor: Anchor, label: &str, shown: String) {
        self.text(x, y, size, anchor, &shown);
        self.shown.push((label.to_string(), shown));
    }

    /// Logs a value that is drawn as geometry rather than text.
    pub fn record(&mut self, label: &str, shown: String) {
        self.shown.push((label.to_string(), shown));
    }

    /// The SVG document and its companion CSV (`label,value`).
    pub fn finish(self) -> (String, String) {
        let svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = c(self.width),
            h = c(self.height),
        );
        let mut csv = String::from("label,value\n");
        for (label, value) in self.shown {
            let _ = writeln!(csv, "{label},{value}");
        }
        (svg, csv)
    }
}

/// Blue-to-red ramp for `t` in [0, 1].
pub fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (40.0 + 200.0 * t).round() as u8;
    let b = (240.0 - 200.0 * t).round() as u8;
    format!("#{r:02x}40{b:02x}")
}

/// Fixed colour per series index.
pub fn palette(i: usize) -> &'static str {
    const P: [&str; 8] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f"];
    P[i % P.len()]
}

/// The strings inside `<text>` elements, for checking an SVG against its CSV.
pub fn text_nodes(svg: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = svg;
    while let Some(start) = rest.find("<text") {
        let after = &rest[start..];
        let open_end = after.find('>').expect("closed tag");
        let close = after.find("</text>").expect("closed text");
        out.push(
            after[open_end + 1..close]
                .replace("&lt;", "<")
                .replace("&gt;", ">")
                .replace("&quot;", "\"")
                .replace("&amp;", "&"),
        );
        rest = &after[close + 7..];
    }
    out
}
