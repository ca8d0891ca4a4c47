//! A small self-contained SVG line-plot writer: log-scaled x axis, linear y,
//! one polyline per series and an optional dashed reference level.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// (label, points (x, y)); x must be positive.
    pub series: Vec<(String, Vec<(f64, f64)>)>,
    pub reference: Option<(String, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round step for about `target` ticks over `span`.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

impl Plot {
    pub fn render(&self) -> String {
        let points = || self.series.iter().flat_map(|(_, p)| p.iter()).filter(|(x, y)| *x > 0.0 && y.is_finite());
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in points() {
            x0 = x0.min(x.log10());
            x1 = x1.max(x.log10());
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if let Some((_, r)) = &self.reference {
            y0 = y0.min(*r);
            y1 = y1.max(*r);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 < 1e-9 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        let pad = ((y1 - y0) * 0.08).max(1e-9 * y1.abs().max(1.0));
        y0 -= pad;
        y1 += pad;

        let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
        let sx = |x: f64| LEFT + (x.log10() - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(s, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);

        // decade ticks on x
        for e in (x0.ceil() as i32)..=(x1.floor() as i32) {
            let x = sx(10f64.powi(e));
            let _ = writeln!(
                s,
                r##"<line x1="{x:.1}" y1="{TOP}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{e}</text>"##,
                TOP + ph,
                TOP + ph + 18.0
            );
        }
        let step = nice_step(y1 - y0, 5.0);
        let mut t = (y0 / step).ceil() * step;
        while t <= y1 {
            let y = sy(t);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                y + 4.0,
                format_tick(t, step)
            );
            t += step;
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        let legend_x = LEFT + pw + 16.0;
        let mut legend_y = TOP + 10.0;
        if let Some((label, r)) = &self.reference {
            let y = sy(*r);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#000" stroke-dasharray="6 4"/>"##,
                LEFT + pw
            );
            let _ = writeln!(
                s,
                r##"<line x1="{legend_x:.1}" y1="{legend_y:.1}" x2="{:.1}" y2="{legend_y:.1}" stroke="#000" stroke-dasharray="6 4"/><text x="{:.1}" y="{:.1}">{}</text>"##,
                legend_x + 24.0,
                legend_x + 30.0,
                legend_y + 4.0,
                escape(label)
            );
            legend_y += 20.0;
        }
        for (i, (label, pts)) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let path: Vec<String> = pts
                .iter()
                .filter(|(x, y)| *x > 0.0 && y.is_finite())
                .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
            for p in &path {
                let (x, y) = p.split_once(',').expect("formatted as x,y");
                let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>"#);
            }
            let _ = writeln!(
                s,
                r#"<line x1="{legend_x:.1}" y1="{legend_y:.1}" x2="{:.1}" y2="{legend_y:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                legend_x + 24.0,
                legend_x + 30.0,
                legend_y + 4.0,
                escape(label)
            );
            legend_y += 20.0;
        }
        s.push_str("</svg>\n");
        s
    }
}

fn format_tick(v: f64, step: f64) -> String {
    let digits = (-step.log10().floor()).max(0.0) as usize;
    let v = if v.abs() < step * 1e-9 { 0.0 } else { v };
    format!("{v:.digits$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Plot {
        Plot {
            title: "F <vs> a".into(),
            x_label: "a".into(),
            y_label: "F".into(),
            series: vec![
                ("aperture 0.5".into(), vec![(1.0, 0.5), (0.1, 0.9), (0.01, 0.99)]),
                ("aperture 2".into(), vec![(1.0, 0.3), (0.1, 0.8), (0.01, 0.98)]),
            ],
            reference: Some(("limit".into(), 1.0)),
        }
    }

    #[test]
    fn renders_every_series_and_escapes_text() {
        let svg = sample().render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 6);
        assert!(svg.contains("F &lt;vs&gt; a"));
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains(">1e-2<"));
    }

    #[test]
    fn rendering_is_deterministic_and_survives_flat_data() {
        assert_eq!(sample().render(), sample().render());
        let flat = Plot { series: vec![("c".into(), vec![(0.5, 2.0), (0.25, 2.0)])], reference: None, ..sample() };
        assert!(!flat.render().contains("NaN"));
    }

    #[test]
    fn nice_steps() {
        assert!((nice_step(1.0, 5.0) - 0.2).abs() < 1e-12);
        assert!((nice_step(0.03, 5.0) - 0.005).abs() < 1e-12);
        assert_eq!(format_tick(0.25, 0.05), "0.25");
        assert_eq!(format_tick(3.0, 1.0), "3");
    }
}
