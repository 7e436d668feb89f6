//! Minimal SVG emission: scatter plots for spectra and log-log plots for
//! convergence studies. Output is a pure function of the input data.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    /// Smallest range holding all values, padded by 5% on each side.
    pub fn covering(values: impl IntoIterator<Item = f64>) -> Range {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.into_iter().filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Range { min: -1.0, max: 1.0 };
        }
        let span = hi - lo;
        let pad = if span > 0.0 { 0.05 * span } else { 0.5 * lo.abs().max(1.0) };
        Range { min: lo - pad, max: hi + pad }
    }

    pub fn union(self, other: Range) -> Range {
        Range { min: self.min.min(other.min), max: self.max.max(other.max) }
    }

    fn map(&self, v: f64, from: f64, to: f64) -> f64 {
        from + (v - self.min) / (self.max - self.min) * (to - from)
    }
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Roughly five round tick positions inside the range.
fn ticks(r: Range) -> Vec<f64> {
    let raw = (r.max - r.min) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (r.min / step - 1e-9).ceil() as i64;
    let last = (r.max / step + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x: Range,
    y: Range,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x.map(x, LEFT, WIDTH - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        self.y.map(y, HEIGHT - BOTTOM, TOP)
    }
}

fn header(s: &mut String, title: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, escape(title));
}

/// Axes box, ticks and labels. `tick_label` maps a tick in plot coordinates
/// to its printed text.
fn axes(s: &mut String, f: &Frame, xlabel: &str, ylabel: &str, xt: &[f64], yt: &[f64], tick_label: impl Fn(f64) -> String) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(s, r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);
    for &t in xt {
        let x = f.px(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, y0 + 18.0, tick_label(t));
    }
    for &t in yt {
        let y = f.py(t);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, y + 4.0, tick_label(t));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 18.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn legend(s: &mut String, labels: &[(String, &str)]) {
    for (k, (label, color)) in labels.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * k as f64;
        let x = WIDTH - RIGHT + 15.0;
        let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="4" fill="{color}"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x + 10.0, y + 4.0, escape(label));
    }
}

/// Scatter plot of several point sets, one color each. Axis ranges default to
/// the data extent.
pub fn scatter(title: &str, xlabel: &str, ylabel: &str, series: &[Series], x: Option<Range>, y: Option<Range>) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let f = Frame {
        x: x.unwrap_or_else(|| Range::covering(all().map(|p| p.0))),
        y: y.unwrap_or_else(|| Range::covering(all().map(|p| p.1))),
    };
    let mut s = String::new();
    header(&mut s, title);
    axes(&mut s, &f, xlabel, ylabel, &ticks(f.x), &ticks(f.y), fmt_tick);
    if f.x.min < 0.0 && f.x.max > 0.0 {
        let x0 = f.px(0.0);
        let _ = writeln!(s, r##"<line x1="{x0:.2}" y1="{TOP}" x2="{x0:.2}" y2="{}" stroke="#999" stroke-dasharray="4 3"/>"##, HEIGHT - BOTTOM);
    }
    if f.y.min < 0.0 && f.y.max > 0.0 {
        let y0 = f.py(0.0);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y0:.2}" x2="{}" y2="{y0:.2}" stroke="#999" stroke-dasharray="4 3"/>"##, WIDTH - RIGHT);
    }
    let mut labels = Vec::new();
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        labels.push((ser.label.clone(), color));
        let _ = writeln!(s, r#"<g fill="{color}" fill-opacity="0.8">"#);
        for &(px, py) in &ser.points {
            let inside = (f.x.min..=f.x.max).contains(&px) && (f.y.min..=f.y.max).contains(&py);
            if inside {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5"/>"#, f.px(px), f.py(py));
            }
        }
        let _ = writeln!(s, "</g>");
    }
    legend(&mut s, &labels);
    s.push_str("</svg>\n");
    s
}

/// Log-log plot of `(h, err)` samples with a polyline through them and an
/// optional annotation.
pub fn loglog(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64)], note: &str) -> String {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(h, e)| *h > 0.0 && *e > 0.0)
        .map(|(h, e)| (h.log10(), e.log10()))
        .collect();
    let decades = |r: Range| Range { min: r.min.floor(), max: r.max.ceil().max(r.min.floor() + 1.0) };
    let f = Frame {
        x: decades(Range::covering(pts.iter().map(|p| p.0))),
        y: decades(Range::covering(pts.iter().map(|p| p.1))),
    };
    let dec = |r: Range| ((r.min as i64)..=(r.max as i64)).map(|k| k as f64).collect::<Vec<_>>();
    let mut s = String::new();
    header(&mut s, title);
    axes(&mut s, &f, xlabel, ylabel, &dec(f.x), &dec(f.y), |t| format!("1e{t}"));
    let color = PALETTE[0];
    if pts.len() > 1 {
        let path: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", f.px(p.0), f.py(p.1))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.join(" "));
    }
    for p in &pts {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#, f.px(p.0), f.py(p.1));
    }
    if !note.is_empty() {
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, WIDTH - RIGHT + 10.0, TOP + 14.0, escape(note));
    }
    s.push_str("</svg>\n");
    s
}
