//! Self-contained SVG scatter plots on a log-rate axis.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 7] = [
    "#1a9850", "#66bd63", "#a6d96a", "#fee08b", "#fdae61", "#f46d43", "#d73027",
];

pub struct Point {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
}

pub struct Line {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Plot {
    pub title: String,
    pub y_label: String,
    pub log_y: bool,
    /// Fixed y range; derived from the data when absent.
    pub y_range: Option<(f64, f64)>,
    pub points: Vec<Point>,
    pub lines: Vec<Line>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            (lo, hi) = (lo.floor(), hi.ceil().max(lo.floor() + 1.0));
        } else {
            let pad = ((hi - lo) * 0.05).max(1e-9);
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self { lo, hi, log }
    }

    fn fixed(lo: f64, hi: f64, log: bool) -> Self {
        if log {
            Self { lo: lo.log10(), hi: hi.log10(), log }
        } else {
            Self { lo, hi, log }
        }
    }

    fn unit(&self, v: f64) -> Option<f64> {
        if self.log && v <= 0.0 || !v.is_finite() {
            return None;
        }
        let v = if self.log { v.log10() } else { v };
        Some((v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            (a..=b)
                .map(|e| (10f64.powi(e), format_tick(10f64.powi(e))))
                .collect()
        } else {
            (0..=5)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 5.0;
                    (v, format_tick(v))
                })
                .collect()
        }
    }
}

fn format_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.0e}")
    } else {
        format!("{}", (v * 1000.0).round() / 1000.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render(plot: &Plot) -> String {
    let xs = plot
        .points
        .iter()
        .map(|p| p.x)
        .chain(plot.lines.iter().flat_map(|l| l.points.iter().map(|p| p.0)));
    let x = Axis::fit(xs, true);
    let y = match plot.y_range {
        Some((lo, hi)) => Axis::fixed(lo, hi, plot.log_y),
        None => Axis::fit(
            plot.points
                .iter()
                .map(|p| p.y)
                .chain(plot.lines.iter().flat_map(|l| l.points.iter().map(|p| p.1))),
            plot.log_y,
        ),
    };
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |v: f64| x.unit(v).map(|u| LEFT + u * pw);
    let py = |v: f64| y.unit(v).map(|u| TOP + (1.0 - u.clamp(0.0, 1.0)) * ph);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&plot.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (v, label) in x.ticks() {
        if let Some(cx) = px(v) {
            let _ = writeln!(
                s,
                r##"<line x1="{cx:.1}" y1="{TOP}" x2="{cx:.1}" y2="{:.1}" stroke="#ddd"/><text x="{cx:.1}" y="{:.1}" text-anchor="middle">{label}</text>"##,
                TOP + ph,
                TOP + ph + 18.0
            );
        }
    }
    for (v, label) in y.ticks() {
        if let Some(cy) = py(v) {
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{cy:.1}" x2="{:.1}" y2="{cy:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                cy + 4.0
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">predicted rate</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&plot.y_label)
    );

    for (i, line) in plot.lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = line
            .points
            .iter()
            .filter_map(|&(a, b)| Some(format!("{:.1},{:.1}", px(a)?, py(b)?)))
            .collect();
        if coords.len() > 1 {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                coords.join(" ")
            );
        }
        let ly = TOP + 14.0 + i as f64 * 16.0;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&line.label)
        );
    }

    let max_weight = plot
        .points
        .iter()
        .map(|p| p.weight)
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for p in &plot.points {
        if let (Some(cx), Some(cy)) = (px(p.x), py(p.y)) {
            let r = 3.0 + 12.0 * (p.weight / max_weight).max(0.0).sqrt();
            let _ = writeln!(
                s,
                r##"<circle cx="{cx:.1}" cy="{cy:.1}" r="{r:.1}" fill="#3060c0" fill-opacity="0.45" stroke="#203070"/>"##
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
