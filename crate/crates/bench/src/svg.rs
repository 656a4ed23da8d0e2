//! Minimal SVG line plots: polylines, axes and tick labels.

use std::fmt::Write as _;

const W: f64 = 720.0;
const H: f64 = 440.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 160.0, 40.0, 50.0); // left, right, top, bottom
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Horizontal reference lines.
    pub hlines: Vec<(String, f64)>,
    /// Single highlighted points.
    pub markers: Vec<(String, f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(t);
        t += step;
    }
    out
}

impl Plot {
    pub fn render(&self) -> String {
        let xs = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).chain(self.markers.iter().map(|m| m.1));
        let ys = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .chain(self.hlines.iter().map(|h| h.1))
            .chain(self.markers.iter().map(|m| m.2));
        let finite = |it: &mut dyn Iterator<Item = f64>| it.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (mut x0, mut x1) = finite(&mut { xs });
        let (mut y0, mut y1) = finite(&mut { ys });
        if !x0.is_finite() {
            (x0, x1) = (0.0, 1.0);
        }
        if !y0.is_finite() {
            (y0, y1) = (0.0, 1.0);
        }
        if x1 - x0 <= 0.0 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 <= 0.0 {
            (y0, y1) = (y0 - 0.5, y1 + 0.5);
        }
        let pad = 0.05 * (y1 - y0);
        let (y0, y1) = (y0 - pad, y1 + pad);
        let (l, r, t, b) = MARGIN;
        let px = |x: f64| l + (x - x0) / (x1 - x0) * (W - l - r);
        let py = |y: f64| H - b - (y - y0) / (y1 - y0) * (H - t - b);

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, (l + W - r) / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<line x1="{l}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - b, W - r, H - b);
        let _ = writeln!(s, r#"<line x1="{l}" y1="{t}" x2="{l}" y2="{}" stroke="black"/>"#, H - b);
        for tx in ticks(x0, x1) {
            let _ = writeln!(s, r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/><text x="{0}" y="{3}" text-anchor="middle">{4}</text>"#, px(tx), H - b, H - b + 5.0, H - b + 18.0, fmt(tx));
        }
        for ty in ticks(y0, y1) {
            let _ = writeln!(s, r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/><text x="{3}" y="{4}" text-anchor="end">{5}</text>"#, l - 5.0, py(ty), l, l - 8.0, py(ty) + 4.0, fmt(ty));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (l + W - r) / 2.0, H - 12.0, escape(&self.x_label));
        let _ = writeln!(s, r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#, (t + H - b) / 2.0, escape(&self.y_label));

        let mut legend = Vec::new();
        let mut k = 0;
        for series in &self.series {
            let color = COLORS[k % COLORS.len()];
            k += 1;
            let pts: Vec<String> = series.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
            legend.push((series.name.as_str(), color, false));
        }
        for (name, y) in &self.hlines {
            let color = COLORS[k % COLORS.len()];
            k += 1;
            let _ = writeln!(s, r#"<line x1="{l}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="{color}" stroke-dasharray="6 4"/>"#, py(*y), W - r);
            legend.push((name.as_str(), color, false));
        }
        for (name, x, y) in &self.markers {
            let color = COLORS[k % COLORS.len()];
            k += 1;
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="{color}"/>"#, px(*x), py(*y));
            legend.push((name.as_str(), color, true));
        }
        for (i, (name, color, dot)) in legend.iter().enumerate() {
            let y = t + 10.0 + 20.0 * i as f64;
            let x = W - r + 12.0;
            if *dot {
                let _ = writeln!(s, r#"<circle cx="{}" cy="{y}" r="5" fill="{color}"/>"#, x + 10.0);
            } else {
                let _ = writeln!(s, r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#, x + 20.0);
            }
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x + 26.0, y + 4.0, escape(name));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn fmt(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_all_elements() {
        let plot = Plot {
            title: "a < b".into(),
            x_label: "time (s)".into(),
            y_label: "LL".into(),
            series: vec![Series { name: "hmc".into(), points: vec![(0.0, 1.0), (1.0, 2.0), (2.0, 1.5)] }],
            hlines: vec![("baseline".into(), 0.5)],
            markers: vec![("glasso".into(), 1.5, 1.2)],
        };
        let svg = plot.render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("<circle"));
        assert!(svg.contains("a &lt; b"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn degenerate_ranges_do_not_panic() {
        let plot = Plot { title: String::new(), x_label: String::new(), y_label: String::new(), series: vec![Series { name: "c".into(), points: vec![(1.0, 3.0)] }], hlines: vec![], markers: vec![] };
        assert!(plot.render().contains("polyline"));
        assert_eq!(ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
    }
}
