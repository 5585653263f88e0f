//! Minimal deterministic SVG plotting: line charts, uncertainty bands, and
//! histogram bars, composed into fixed-size panels.
//!
//! Output is plain SVG text with coordinates rounded to two decimals, so a
//! rerun with the same data produces identical bytes.

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 56.0;
const MARGIN_R: f64 = 14.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 42.0;

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (0.01..10000.0).contains(&a) {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        if s.is_empty() { "0".to_string() } else { s }
    } else {
        format!("{v:.1e}")
    }
}

/// One chart panel with data ranges mapped to pixel space.
pub struct Panel {
    title: String,
    x_label: String,
    y_label: String,
    x_range: (f64, f64),
    y_range: (f64, f64),
    shapes: Vec<String>,
}

impl Panel {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Panel {
        Panel {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            x_range: (0.0, 1.0),
            y_range: (0.0, 1.0),
            shapes: Vec::new(),
        }
    }

    /// Sets the data ranges; pads a degenerate range so division stays sane.
    pub fn ranges(mut self, x: (f64, f64), y: (f64, f64)) -> Panel {
        let pad = |(lo, hi): (f64, f64)| {
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, lo + 0.5)
            }
        };
        self.x_range = pad(x);
        self.y_range = pad(y);
        self
    }

    fn px(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        MARGIN_L + (x - lo) / (hi - lo) * (PANEL_W - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        PANEL_H - MARGIN_B - (y - lo) / (hi - lo) * (PANEL_H - MARGIN_T - MARGIN_B)
    }

    pub fn line(&mut self, points: &[(f64, f64)], color: &str, width: f64, dashed: bool) {
        if points.is_empty() {
            return;
        }
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(self.px(x)), fmt(self.py(y))))
            .collect();
        let dash = if dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        self.shapes.push(format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"{dash}/>",
            coords.join(" ")
        ));
    }

    /// Filled band between two curves sharing the same x grid.
    pub fn band(&mut self, xs: &[f64], lo: &[f64], hi: &[f64], fill: &str, opacity: f64) {
        if xs.is_empty() {
            return;
        }
        let mut pts = Vec::with_capacity(xs.len() * 2);
        for (x, y) in xs.iter().zip(hi) {
            pts.push(format!("{},{}", fmt(self.px(*x)), fmt(self.py(*y))));
        }
        for (x, y) in xs.iter().zip(lo).rev() {
            pts.push(format!("{},{}", fmt(self.px(*x)), fmt(self.py(*y))));
        }
        self.shapes.push(format!(
            "<polygon points=\"{}\" fill=\"{fill}\" fill-opacity=\"{opacity}\" stroke=\"none\"/>",
            pts.join(" ")
        ));
    }

    /// Histogram bars given (left, right, height) triples.
    pub fn bars(&mut self, bins: &[(f64, f64, f64)], fill: &str) {
        let base = self.py(0.0f64.max(self.y_range.0));
        for &(l, r, h) in bins {
            let x = self.px(l);
            let w = (self.px(r) - x).max(0.1);
            let y = self.py(h);
            self.shapes.push(format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\" \
                 fill-opacity=\"0.75\" stroke=\"none\"/>",
                fmt(x),
                fmt(y),
                fmt(w),
                fmt((base - y).max(0.0))
            ));
        }
    }

    fn ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
        (0..=count)
            .map(|i| lo + (hi - lo) * i as f64 / count as f64)
            .collect()
    }

    fn render_at(&self, index: usize, ox: f64, oy: f64) -> String {
        let mut out = String::new();
        out.push_str(&format!("<g transform=\"translate({},{})\">\n", fmt(ox), fmt(oy)));
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"white\" stroke=\"#444\"/>\n",
            fmt(MARGIN_L),
            fmt(MARGIN_T),
            fmt(PANEL_W - MARGIN_L - MARGIN_R),
            fmt(PANEL_H - MARGIN_T - MARGIN_B)
        ));
        for x in Self::ticks(self.x_range.0, self.x_range.1, 4) {
            let px = self.px(x);
            out.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#444\"/>\n",
                fmt(px),
                fmt(PANEL_H - MARGIN_B),
                fmt(PANEL_H - MARGIN_B + 4.0)
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                fmt(px),
                fmt(PANEL_H - MARGIN_B + 16.0),
                fmt_tick(x)
            ));
        }
        for y in Self::ticks(self.y_range.0, self.y_range.1, 4) {
            let py = self.py(y);
            out.push_str(&format!(
                "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"#444\"/>\n",
                fmt(py),
                fmt(MARGIN_L - 4.0),
                fmt(MARGIN_L)
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
                fmt(MARGIN_L - 7.0),
                fmt(py + 4.0),
                fmt_tick(y)
            ));
        }
        // clip shapes to the plot area
        out.push_str(&format!(
            "<clipPath id=\"clip{index}\"><rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/></clipPath>\n",
            fmt(MARGIN_L),
            fmt(MARGIN_T),
            fmt(PANEL_W - MARGIN_L - MARGIN_R),
            fmt(PANEL_H - MARGIN_T - MARGIN_B)
        ));
        out.push_str(&format!("<g clip-path=\"url(#clip{index})\">\n"));
        for s in &self.shapes {
            out.push_str(s);
            out.push('\n');
        }
        out.push_str("</g>\n");
        out.push_str(&format!(
            "<text x=\"{}\" y=\"18\" font-size=\"13\" text-anchor=\"middle\" font-weight=\"bold\">{}</text>\n",
            fmt((MARGIN_L + PANEL_W - MARGIN_R) / 2.0),
            self.title
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            fmt((MARGIN_L + PANEL_W - MARGIN_R) / 2.0),
            fmt(PANEL_H - 8.0),
            self.x_label
        ));
        out.push_str(&format!(
            "<text x=\"14\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" \
             transform=\"rotate(-90 14 {})\">{}</text>\n",
            fmt(PANEL_H / 2.0),
            fmt(PANEL_H / 2.0),
            self.y_label
        ));
        out.push_str("</g>\n");
        out
    }
}

/// Lays out panels in a row-major grid and wraps them in an SVG document.
pub fn render_grid(panels: &[Panel], columns: usize) -> String {
    assert!(columns >= 1);
    let rows = panels.len().div_ceil(columns);
    let width = PANEL_W * columns.min(panels.len().max(1)) as f64;
    let height = PANEL_H * rows as f64;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">\n",
    );
    for (i, p) in panels.iter().enumerate() {
        let ox = (i % columns) as f64 * PANEL_W;
        let oy = (i / columns) as f64 * PANEL_H;
        out.push_str(&p.render_at(i, ox, oy));
    }
    out.push_str("</svg>\n");
    out
}

/// Standard normal density curve, for histogram overlays.
pub fn std_normal_curve(lo: f64, hi: f64, points: usize) -> Vec<(f64, f64)> {
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    (0..=points)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / points as f64;
            (x, norm * (-0.5 * x * x).exp())
        })
        .collect()
}
