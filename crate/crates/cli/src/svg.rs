//! Minimal hand-written SVG line charts: mean lines with optional quantile
//! bands over a (optionally log-scaled) x axis.

use std::fmt::Write;

/// `(x, mean, optional (lower, upper) band)`; non-finite points are skipped.
pub type Point = (f64, f64, Option<(f64, f64)>);

pub struct Series {
    pub name: String,
    pub color: &'static str,
    pub points: Vec<Point>,
}

pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Compact tick label.
fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// About five round ticks covering `[lo, hi]`.
fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

impl LineChart {
    pub fn render(&self) -> String {
        let pts = || {
            self.series
                .iter()
                .flat_map(|s| s.points.iter())
                .filter(|(x, y, _)| x.is_finite() && y.is_finite() && (!self.log_x || *x > 0.0))
        };
        let tx = |x: f64| if self.log_x { x.log10() } else { x };
        let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y, band) in pts() {
            x_lo = x_lo.min(tx(x));
            x_hi = x_hi.max(tx(x));
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
            if let Some((l, u)) = band {
                if l.is_finite() && u.is_finite() {
                    y_lo = y_lo.min(l);
                    y_hi = y_hi.max(u);
                }
            }
        }
        if !x_lo.is_finite() {
            (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
        }
        if x_hi - x_lo < 1e-12 {
            x_lo -= 0.5;
            x_hi += 0.5;
        }
        if y_hi - y_lo < 1e-12 {
            let pad = y_lo.abs().max(1.0) * 0.05;
            y_lo -= pad;
            y_hi += pad;
        }
        let pad = 0.05 * (y_hi - y_lo);
        let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        let px = |x: f64| LEFT + (tx(x) - x_lo) / (x_hi - x_lo) * plot_w;
        let py = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + plot_w / 2.0,
            escape(&self.title)
        );

        // Grid and ticks.
        let x_ticks: Vec<f64> = if self.log_x {
            (x_lo.ceil() as i64..=x_hi.floor() as i64).map(|k| 10f64.powi(k as i32)).collect()
        } else {
            linear_ticks(x_lo, x_hi)
        };
        for x in x_ticks {
            let gx = px(x);
            let label = if self.log_x {
                format!("1e{}", x.log10().round() as i64)
            } else {
                tick_label(x)
            };
            let _ = writeln!(
                out,
                r##"<line x1="{gx:.2}" y1="{TOP}" x2="{gx:.2}" y2="{:.2}" stroke="#e0e0e0"/><text x="{gx:.2}" y="{:.2}" text-anchor="middle">{label}</text>"##,
                TOP + plot_h,
                TOP + plot_h + 18.0
            );
        }
        for y in linear_ticks(y_lo, y_hi) {
            let gy = py(y);
            let _ = writeln!(
                out,
                r##"<line x1="{LEFT}" y1="{gy:.2}" x2="{:.2}" y2="{gy:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT + plot_w,
                LEFT - 6.0,
                gy + 4.0,
                tick_label(y)
            );
        }
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + plot_w / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + plot_h / 2.0,
            TOP + plot_h / 2.0,
            escape(&self.y_label)
        );

        for (k, s) in self.series.iter().enumerate() {
            let valid: Vec<_> = s
                .points
                .iter()
                .filter(|(x, y, _)| x.is_finite() && y.is_finite() && (!self.log_x || *x > 0.0))
                .collect();
            let band: Vec<_> = valid
                .iter()
                .filter_map(|(x, _, b)| b.filter(|(l, u)| l.is_finite() && u.is_finite()).map(|(l, u)| (*x, l, u)))
                .collect();
            if band.len() >= 2 {
                let mut d = String::new();
                for (i, (x, _, u)) in band.iter().enumerate() {
                    let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, px(*x), py(*u));
                }
                for (x, l, _) in band.iter().rev() {
                    let _ = write!(d, "L{:.2},{:.2} ", px(*x), py(*l));
                }
                let _ = writeln!(
                    out,
                    r#"<path d="{}Z" fill="{}" fill-opacity="0.18" stroke="none"/>"#,
                    d,
                    s.color
                );
            }
            if !valid.is_empty() {
                let coords: Vec<String> = valid.iter().map(|(x, y, _)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
                    coords.join(" "),
                    s.color
                );
            }
            let ly = TOP + 16.0 + 20.0 * k as f64;
            let lx = LEFT + plot_w + 14.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                lx + 22.0,
                s.color,
                lx + 28.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart(log_x: bool) -> LineChart {
        LineChart {
            title: "a < b".into(),
            x_label: "eps".into(),
            y_label: "value".into(),
            log_x,
            series: vec![Series {
                name: "S".into(),
                color: "#1f77b4",
                points: vec![(1e-3, 1.0, Some((0.5, 1.5))), (1e-1, 2.0, Some((1.5, 2.5))), (1.0, f64::NAN, None)],
            }],
        }
    }

    #[test]
    fn renders_well_formed_document() {
        let svg = chart(true).render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("<path"));
        assert!(svg.contains(">1e-2<"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn empty_chart_renders() {
        let mut c = chart(false);
        c.series[0].points.clear();
        let svg = c.render();
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn ticks_are_round() {
        let ticks = linear_ticks(0.0, 1.0);
        let labels: Vec<String> = ticks.iter().map(|t| tick_label(*t)).collect();
        assert_eq!(labels, ["0", "0.2", "0.4", "0.6", "0.8", "1"]);
    }
}
