//! Self-contained SVG 1.1 charts: lines, scatter points and heatmaps.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 460.0;
const LEFT: f64 = 78.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 58.0;
const MAX_POINTS: usize = 4000;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Line,
    Scatter,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub mark: Mark,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone)]
pub struct Heatmap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Cell centres along x.
    pub xs: Vec<f64>,
    /// Cell centres along y.
    pub ys: Vec<f64>,
    /// `values[j][i]` belongs to `(xs[i], ys[j])`.
    pub values: Vec<Vec<f64>>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn extent(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn tick_step(lo: f64, hi: f64, n: f64) -> f64 {
    let raw = (hi - lo) / n;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f < 1.5 {
        1.0
    } else if f < 3.0 {
        2.0
    } else if f < 7.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let step = tick_step(lo, hi, 6.0);
    let prec = (-step.log10().floor()).clamp(0.0, 8.0) as usize;
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step && out.len() < 50 {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    (out, prec)
}

/// Axis range widened to tick boundaries.
fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let step = tick_step(lo, hi, 6.0);
    ((lo / step).floor() * step, (hi / step).ceil() * step)
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }
    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn header(svg: &mut String, title: &str) {
    let _ = write!(
        svg,
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"26\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        (LEFT + W - RIGHT) / 2.0,
        esc(title)
    );
}

fn axes(svg: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(svg, "<rect x=\"{x0}\" y=\"{y0}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>", x1 - x0, y1 - y0);
    let (xt, xp) = ticks(f.x.0, f.x.1);
    for t in xt {
        let px = f.px(t);
        let _ = writeln!(
            svg,
            "<line x1=\"{px:.2}\" y1=\"{y1}\" x2=\"{px:.2}\" y2=\"{}\" stroke=\"#333\"/><text x=\"{px:.2}\" y=\"{}\" text-anchor=\"middle\">{t:.xp$}</text>",
            y1 + 5.0,
            y1 + 19.0
        );
    }
    let (yt, yp) = ticks(f.y.0, f.y.1);
    for t in yt {
        let py = f.py(t);
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{py:.2}\" x2=\"{x0}\" y2=\"{py:.2}\" stroke=\"#333\"/><text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{t:.yp$}</text>",
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(svg, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", (x0 + x1) / 2.0, H - 16.0, esc(x_label));
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0})\">{1}</text>",
        (y0 + y1) / 2.0,
        esc(y_label)
    );
}

impl Chart {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series: Vec::new() }
    }

    pub fn line(mut self, label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        self.series.push(Series { label: label.into(), points, mark: Mark::Line });
        self
    }

    pub fn scatter(mut self, label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        self.series.push(Series { label: label.into(), points, mark: Mark::Scatter });
        self
    }

    pub fn to_svg(&self) -> String {
        let all = || self.series.iter().flat_map(|s| s.points.iter());
        let (xl, xh) = extent(all().map(|p| p.0));
        let (yl, yh) = extent(all().map(|p| p.1));
        let f = Frame { x: padded(xl, xh), y: padded(yl, yh) };
        let mut svg = String::new();
        header(&mut svg, &self.title);
        axes(&mut svg, &f, &self.x_label, &self.y_label);
        for (k, s) in self.series.iter().enumerate() {
            let colour = PALETTE[k % PALETTE.len()];
            let stride = s.points.len().div_ceil(MAX_POINTS).max(1);
            let pts: Vec<&(f64, f64)> = s
                .points
                .iter()
                .enumerate()
                .filter(|(i, _)| i % stride == 0 || *i + 1 == s.points.len())
                .map(|(_, p)| p)
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .collect();
            match s.mark {
                Mark::Line => {
                    let _ = write!(svg, "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.4\" points=\"");
                    for p in &pts {
                        let _ = write!(svg, "{:.2},{:.2} ", f.px(p.0), f.py(p.1));
                    }
                    svg.push_str("\"/>\n");
                }
                Mark::Scatter => {
                    for p in &pts {
                        let _ = writeln!(svg, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.2\" fill=\"{colour}\"/>", f.px(p.0), f.py(p.1));
                    }
                }
            }
            let ly = TOP + 12.0 + 18.0 * k as f64;
            let lx = W - RIGHT + 14.0;
            let _ = writeln!(
                svg,
                "<rect x=\"{lx}\" y=\"{}\" width=\"14\" height=\"4\" fill=\"{colour}\"/><text x=\"{}\" y=\"{}\">{}</text>",
                ly - 4.0,
                lx + 20.0,
                ly + 2.0,
                esc(&s.label)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn colour_at(u: f64) -> String {
    // perceptually ordered ramp, dark blue to yellow
    const STOPS: [(f64, f64, f64); 5] =
        [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let u = u.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let k = (u.floor() as usize).min(STOPS.len() - 2);
    let w = u - k as f64;
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let c = |x: f64, y: f64| (x + w * (y - x)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(a.0, b.0), c(a.1, b.1), c(a.2, b.2))
}

fn edges(c: &[f64]) -> Vec<f64> {
    match c.len() {
        0 => vec![0.0, 1.0],
        1 => vec![c[0] - 0.5, c[0] + 0.5],
        n => {
            let mut e = vec![c[0] - 0.5 * (c[1] - c[0])];
            for k in 0..n - 1 {
                e.push(0.5 * (c[k] + c[k + 1]));
            }
            e.push(c[n - 1] + 0.5 * (c[n - 1] - c[n - 2]));
            e
        }
    }
}

impl Heatmap {
    pub fn to_svg(&self) -> String {
        let ex = edges(&self.xs);
        let ey = edges(&self.ys);
        let f = Frame { x: (ex[0], *ex.last().unwrap()), y: (ey[0], *ey.last().unwrap()) };
        let (lo, hi) = extent(self.values.iter().flatten().copied());
        let mut svg = String::new();
        header(&mut svg, &self.title);
        for (j, row) in self.values.iter().enumerate().take(self.ys.len()) {
            for (i, &v) in row.iter().enumerate().take(self.xs.len()) {
                let fill = if v.is_finite() { colour_at((v - lo) / (hi - lo)) } else { "#bbbbbb".to_string() };
                let (x0, x1) = (f.px(ex[i]), f.px(ex[i + 1]));
                let (y0, y1) = (f.py(ey[j + 1]), f.py(ey[j]));
                let _ = writeln!(
                    svg,
                    "<rect x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\"><title>{}</title></rect>",
                    x1 - x0,
                    y1 - y0,
                    crate::output::num(v)
                );
            }
        }
        axes(&mut svg, &f, &self.x_label, &self.y_label);
        // colour bar
        let (bx, bw, by0, by1) = (W - RIGHT + 24.0, 18.0, TOP, H - BOTTOM);
        let n = 48;
        for k in 0..n {
            let u0 = k as f64 / n as f64;
            let y = by1 - (u0 + 1.0 / n as f64) * (by1 - by0);
            let _ = writeln!(
                svg,
                "<rect x=\"{bx}\" y=\"{y:.2}\" width=\"{bw}\" height=\"{:.2}\" fill=\"{}\"/>",
                (by1 - by0) / n as f64 + 0.5,
                colour_at(u0 + 0.5 / n as f64)
            );
        }
        let (bt, bp) = ticks(lo, hi);
        for t in bt {
            let y = by1 - (t - lo) / (hi - lo) * (by1 - by0);
            let _ = writeln!(svg, "<text x=\"{}\" y=\"{:.2}\">{t:.bp$}</text>", bx + bw + 6.0, y + 4.0);
        }
        svg.push_str("</svg>\n");
        svg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_range() {
        let (t, p) = ticks(0.0, 1.0);
        assert_eq!(t.first(), Some(&0.0));
        assert!((t.last().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(p, 1);
    }

    #[test]
    fn chart_is_deterministic_and_closed() {
        let c = Chart::new("a<b", "x", "y").line("s", vec![(0.0, 1.0), (1.0, 2.0)]).scatter("p", vec![(0.5, 1.5)]);
        let s = c.to_svg();
        assert_eq!(s, c.to_svg());
        assert!(s.contains("a&lt;b") && s.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn heatmap_cells() {
        let h = Heatmap {
            title: "h".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            xs: vec![1.0, 2.0],
            ys: vec![0.0, 1.0, 2.0],
            values: vec![vec![0.0, 1.0], vec![2.0, f64::NAN], vec![4.0, 5.0]],
        };
        let s = h.to_svg();
        assert_eq!(s.matches("<title>").count(), 6);
        assert!(s.contains("#bbbbbb"));
    }
}
