//! Minimal SVG output: line charts and dendrograms.

use std::fmt::Write;

use unidim::Dendrogram;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLOURS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(
        out,
        r#"<rect width="100%" height="100%" fill="white"/><text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }
    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn draw(&self, out: &mut String, xlabel: &str, ylabel: &str, x_ticks: bool) {
        let (x0, y0) = (MARGIN, HEIGHT - MARGIN);
        let _ = write!(
            out,
            r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{MARGIN}" stroke="black"/>"#,
            WIDTH - MARGIN
        );
        for k in 0..=4 {
            let v = self.y.0 + (self.y.1 - self.y.0) * k as f64 / 4.0;
            let _ = write!(
                out,
                r#"<text x="{}" y="{}" text-anchor="end">{v:.2}</text>"#,
                x0 - 4.0,
                self.py(v) + 4.0
            );
            if x_ticks {
                let u = self.x.0 + (self.x.1 - self.x.0) * k as f64 / 4.0;
                let _ = write!(
                    out,
                    r#"<text x="{}" y="{}" text-anchor="middle">{u:.2}</text>"#,
                    self.px(u),
                    y0 + 14.0
                );
            }
        }
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text><text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 12.0,
            escape(xlabel),
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(ylabel)
        );
    }
}

/// Line chart of named `(x, y)` series.
pub fn line_chart(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let axes = Axes {
        x: range(series.iter().flat_map(|s| s.1.iter().map(|p| p.0))),
        y: range(series.iter().flat_map(|s| s.1.iter().map(|p| p.1))),
    };
    let mut out = String::new();
    header(&mut out, title);
    axes.draw(&mut out, xlabel, ylabel, true);
    for (k, (name, points)) in series.iter().enumerate() {
        let colour = COLOURS[k % COLOURS.len()];
        let path: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", axes.px(x), axes.py(y)))
            .collect();
        let _ = write!(
            out,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
            WIDTH - MARGIN + 4.0,
            MARGIN + 14.0 * k as f64,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Dendrogram with leaves along the bottom and merge heights upwards.
pub fn dendrogram(title: &str, d: &Dendrogram) -> String {
    let n = d.leaves();
    let heights: Vec<f64> = (0..d.merges.len()).map(|k| d.height(k)).collect();
    let (lo, hi) = range(heights.iter().copied().chain(std::iter::once(0.0)));
    let axes = Axes {
        x: (0.0, (n.max(2) - 1) as f64),
        y: (lo.min(0.0), hi),
    };

    // leaf order from a left-to-right walk of the tree
    fn walk(d: &Dendrogram, id: usize, out: &mut Vec<usize>) {
        let n = d.leaves();
        if id < n {
            out.push(id);
        } else {
            let m = &d.merges[id - n];
            walk(d, m.left, out);
            walk(d, m.right, out);
        }
    }
    let mut leaves = Vec::with_capacity(n);
    if d.merges.is_empty() {
        leaves.extend(0..n);
    } else {
        walk(d, n + d.merges.len() - 1, &mut leaves);
    }
    let mut x = vec![0.0; n + d.merges.len()];
    let mut y = vec![0.0; n + d.merges.len()];
    for (pos, &leaf) in leaves.iter().enumerate() {
        x[leaf] = pos as f64;
    }

    let mut out = String::new();
    header(&mut out, title);
    axes.draw(&mut out, "", "height", false);
    for (k, m) in d.merges.iter().enumerate() {
        let id = n + k;
        y[id] = heights[k];
        x[id] = 0.5 * (x[m.left] + x[m.right]);
        let (xl, xr) = (axes.px(x[m.left]), axes.px(x[m.right]));
        let top = axes.py(y[id]);
        let _ = write!(
            out,
            r#"<polyline fill="none" stroke="black" points="{xl:.2},{:.2} {xl:.2},{top:.2} {xr:.2},{top:.2} {xr:.2},{:.2}"/>"#,
            axes.py(y[m.left]),
            axes.py(y[m.right])
        );
    }
    for &leaf in &leaves {
        let (px, py) = (axes.px(x[leaf]), HEIGHT - MARGIN + 12.0);
        let _ = write!(
            out,
            r#"<text x="{px:.2}" y="{py:.2}" text-anchor="end" transform="rotate(-45 {px:.2} {py:.2})">{}</text>"#,
            escape(&d.labels[leaf])
        );
    }
    out.push_str("</svg>\n");
    out
}
