//! Minimal standalone SVG charts on a fixed 800×500 canvas.

use std::fmt::Write;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 64.0;
const TICKS: usize = 5;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
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

/// Short tick label.
fn tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64) -> Self {
        if !(lo.is_finite() && hi.is_finite()) {
            return Self { lo: 0.0, hi: 1.0 };
        }
        if hi > lo {
            Self { lo, hi }
        } else {
            Self {
                lo: lo - 0.5,
                hi: hi + 0.5,
            }
        }
    }

    fn frac(&self, v: f64) -> f64 {
        ((v - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }
}

struct Canvas {
    out: String,
    x: Axis,
    y: Axis,
}

impl Canvas {
    fn new(title: &str, x_label: &str, y_label: &str, x: Axis, y: Axis) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{:.2}" y="24" text-anchor="middle" font-size="16">{}</text>
<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>
<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            WIDTH / 2.0,
            escape(title),
            LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
            HEIGHT - 16.0,
            escape(x_label),
            TOP + (HEIGHT - TOP - BOTTOM) / 2.0,
            TOP + (HEIGHT - TOP - BOTTOM) / 2.0,
            escape(y_label),
        );
        Self { out, x, y }
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + self.x.frac(v) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - self.y.frac(v) * (HEIGHT - TOP - BOTTOM)
    }

    fn axes(&mut self, x_ticks: bool) {
        let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
        let _ = writeln!(
            self.out,
            r##"<polyline points="{x0:.2},{y1:.2} {x0:.2},{y0:.2} {x1:.2},{y0:.2}" fill="none" stroke="#333"/>"##
        );
        for i in 0..=TICKS {
            let f = i as f64 / TICKS as f64;
            let yv = self.y.lo + f * (self.y.hi - self.y.lo);
            let y = self.py(yv);
            let _ = writeln!(
                self.out,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                x0 - 5.0,
                x0 - 8.0,
                y + 4.0,
                tick(yv)
            );
            if x_ticks {
                let xv = self.x.lo + f * (self.x.hi - self.x.lo);
                let x = self.px(xv);
                let _ = writeln!(
                    self.out,
                    r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                    y0 + 5.0,
                    y0 + 20.0,
                    tick(xv)
                );
            }
        }
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str) {
        let coords: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        if coords.is_empty() {
            return;
        }
        let _ = writeln!(
            self.out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
    }

    fn legend(&mut self, names: &[&str]) {
        for (i, name) in names.iter().enumerate() {
            let y = TOP + 8.0 + 18.0 * i as f64;
            let x = WIDTH - RIGHT - 160.0;
            let _ = writeln!(
                self.out,
                r#"<rect x="{x:.2}" y="{:.2}" width="12" height="12" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                y - 10.0,
                PALETTE[i % PALETTE.len()],
                x + 18.0,
                y,
                escape(name)
            );
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Bars over `edges` (one more edge than counts) with an optional overlay
/// curve given in count units.
pub fn histogram(title: &str, x_label: &str, edges: &[f64], counts: &[u64], overlay: Option<&[(f64, f64)]>) -> String {
    let top = counts.iter().copied().max().unwrap_or(0) as f64;
    let over_top = overlay.map_or(0.0, |o| o.iter().map(|p| p.1).filter(|v| v.is_finite()).fold(0.0, f64::max));
    let x = Axis::new(*edges.first().unwrap_or(&0.0), *edges.last().unwrap_or(&1.0));
    // A near-degenerate mixture component can spike far above the bars.
    let y_top = if top > 0.0 { top.max(over_top.min(1.5 * top)) } else { over_top.max(1.0) };
    let y = Axis::new(0.0, y_top * 1.05);
    let mut c = Canvas::new(title, x_label, "count", x, y);
    c.axes(true);
    for (i, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let (x0, x1) = (c.px(edges[i]), c.px(edges[i + 1]));
        let y0 = c.py(n as f64);
        let _ = writeln!(
            c.out,
            r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="#3182bd" stroke-width="0.5"/>"##,
            (x1 - x0).max(0.0),
            HEIGHT - BOTTOM - y0
        );
    }
    if let Some(o) = overlay {
        c.polyline(o, PALETTE[1]);
    }
    c.finish()
}

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// One polyline per series; `log_y` plots log10 of positive values.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>], log_y: bool) -> String {
    let tf = |v: f64| if log_y { if v > 0.0 { v.log10() } else { f64::NAN } } else { v };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| s.points.iter().map(|&(x, y)| (x, tf(y))).collect())
        .collect();
    let finite = || pts.iter().flatten().filter(|(x, y)| x.is_finite() && y.is_finite());
    let (xl, xh) = finite().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (yl, yh) = finite().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let y_label = if log_y { format!("log10 {y_label}") } else { y_label.to_string() };
    let mut c = Canvas::new(title, x_label, &y_label, Axis::new(xl, xh), Axis::new(yl, yh));
    c.axes(true);
    for (i, p) in pts.iter().enumerate() {
        c.polyline(p, PALETTE[i % PALETTE.len()]);
    }
    c.legend(&series.iter().map(|s| s.name).collect::<Vec<_>>());
    c.finish()
}

/// Points as circles with an optional fitted line `y = slope·x + intercept`.
pub fn scatter(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)], fit: Option<(f64, f64)>) -> String {
    let ok: Vec<(f64, f64)> = points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    let (xl, xh) = ok.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (yl, yh) = ok.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let mut c = Canvas::new(title, x_label, y_label, Axis::new(xl, xh), Axis::new(yl, yh));
    c.axes(true);
    if let Some((m, b)) = fit {
        if ok.len() >= 2 {
            c.polyline(&[(xl, m * xl + b), (xh, m * xh + b)], PALETTE[1]);
        }
    }
    for &(x, y) in &ok {
        let _ = writeln!(
            c.out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{}"/>"#,
            c.px(x),
            c.py(y),
            PALETTE[0]
        );
    }
    c.finish()
}

/// Labeled vertical bars; missing values leave a gap with an "n/a" label.
pub fn bar_chart(title: &str, y_label: &str, bars: &[(&str, Option<f64>)]) -> String {
    let vals = bars.iter().filter_map(|b| b.1).filter(|v| v.is_finite());
    let lo = vals.clone().fold(0.0, f64::min);
    let hi = vals.fold(0.0, f64::max);
    let mut c = Canvas::new(title, "", y_label, Axis::new(0.0, 1.0), Axis::new(lo, if hi > lo { hi * 1.05 } else { lo + 1.0 }));
    c.axes(false);
    let slot = (WIDTH - LEFT - RIGHT) / bars.len().max(1) as f64;
    let base = c.py(0.0);
    for (i, (label, v)) in bars.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let _ = writeln!(
            c.out,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            HEIGHT - BOTTOM + 20.0,
            escape(label)
        );
        match v.filter(|v| v.is_finite()) {
            Some(v) => {
                let y = c.py(v);
                let _ = writeln!(
                    c.out,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/><text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                    cx - slot * 0.3,
                    y.min(base),
                    slot * 0.6,
                    (y - base).abs(),
                    PALETTE[i % PALETTE.len()],
                    y.min(base) - 6.0,
                    tick(v)
                );
            }
            None => {
                let _ = writeln!(c.out, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">n/a</text>"#, base - 6.0);
            }
        }
    }
    c.finish()
}
