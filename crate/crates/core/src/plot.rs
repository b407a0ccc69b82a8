//! Static SVG line plots.
//!
//! Output is a pure function of the input: coordinates are written with a
//! fixed number of decimals so the same data always yields the same bytes.

use std::fmt::Write as _;

use crate::error::{Error, Result};

const PALETTE: [&str; 6] = ["#1f5fbf", "#c8322d", "#2b8a3e", "#7a4fb5", "#d9822b", "#4d4d4d"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Series {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { label: label.into(), x, y }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub width: u32,
    pub height: u32,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self { width: 640, height: 400, title: String::new(), x_label: "x".into(), y_label: String::new() }
    }
}

impl PlotStyle {
    pub fn titled(title: impl Into<String>) -> Self {
        Self { title: title.into(), ..Self::default() }
    }
}

struct Frame {
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x_range.0) / (self.x_range.1 - self.x_range.0) * (self.right - self.left)
    }

    fn py(&self, y: f64) -> f64 {
        self.bottom - (y - self.y_range.0) / (self.y_range.1 - self.y_range.0) * (self.bottom - self.top)
    }
}

/// Renders `series` as polylines inside a labelled frame.
pub fn emit_plot(series: &[Series], style: &PlotStyle) -> Result<String> {
    if series.is_empty() {
        return Err(Error::param("plot needs at least one series"));
    }
    for s in series {
        if s.x.is_empty() || s.x.len() != s.y.len() {
            return Err(Error::param(format!("series `{}` is empty or has mismatched lengths", s.label)));
        }
        if s.x.iter().chain(&s.y).any(|v| !v.is_finite()) {
            return Err(Error::param(format!("series `{}` contains non-finite values", s.label)));
        }
    }
    if style.width < 200 || style.height < 150 {
        return Err(Error::param("plot must be at least 200x150"));
    }

    let x_range = padded(series.iter().flat_map(|s| s.x.iter().copied()), 0.0);
    let y_range = padded(series.iter().flat_map(|s| s.y.iter().copied()), 0.05);
    let (w, h) = (style.width as f64, style.height as f64);
    let frame = Frame { left: 64.0, right: w - 120.0, top: 36.0, bottom: h - 48.0, x_range, y_range };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">"#,
        style.width, style.height, style.width, style.height
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        frame.left,
        frame.top,
        frame.right - frame.left,
        frame.bottom - frame.top
    );

    for k in 0..=4 {
        let fx = x_range.0 + (x_range.1 - x_range.0) * k as f64 / 4.0;
        let px = frame.px(fx);
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            frame.bottom,
            frame.bottom + 5.0,
            frame.bottom + 18.0,
            tick(fx)
        );
        let fy = y_range.0 + (y_range.1 - y_range.0) * k as f64 / 4.0;
        let py = frame.py(fy);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            frame.left - 5.0,
            frame.left,
            frame.left - 8.0,
            py + 4.0,
            tick(fy)
        );
    }

    if !style.title.is_empty() {
        let _ = writeln!(svg, r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(&style.title));
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (frame.left + frame.right) / 2.0,
        h - 12.0,
        escape(&style.x_label)
    );
    if !style.y_label.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (frame.top + frame.bottom) / 2.0,
            (frame.top + frame.bottom) / 2.0,
            escape(&style.y_label)
        );
    }

    for (k, s) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let dash = if k >= PALETTE.len() { r#" stroke-dasharray="6 3""# } else { "" };
        let points: Vec<String> = s.x.iter().zip(&s.y).map(|(x, y)| format!("{:.2},{:.2}", frame.px(*x), frame.py(*y))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5"{dash} points="{}"/>"#, points.join(" "));
        let ly = frame.top + 8.0 + 18.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            frame.right + 10.0,
            frame.right + 30.0,
            frame.right + 36.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Parses a CSV whose first column is the abscissa and whose remaining
/// columns are series named by the header.
pub fn series_from_csv(text: &str) -> Result<Vec<Series>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(malformed)?.clone();
    if header.len() < 2 {
        return Err(Error::MalformedCsv("need an abscissa and at least one data column".into()));
    }
    let mut series: Vec<Series> = header.iter().skip(1).map(|name| Series::new(name, Vec::new(), Vec::new())).collect();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(malformed)?;
        let parsed: Vec<f64> = record
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| Error::MalformedCsv(format!("row {}: bad number {c:?}", row + 1))))
            .collect::<Result<_>>()?;
        for (s, y) in series.iter_mut().zip(&parsed[1..]) {
            s.x.push(parsed[0]);
            s.y.push(*y);
        }
    }
    if series[0].x.is_empty() {
        return Err(Error::MalformedCsv("no data rows".into()));
    }
    Ok(series)
}

fn malformed(e: csv::Error) -> Error {
    Error::MalformedCsv(e.to_string())
}

pub fn emit_plot_from_csv(text: &str, style: &PlotStyle) -> Result<String> {
    emit_plot(&series_from_csv(text)?, style)
}

fn padded(values: impl Iterator<Item = f64>, pad: f64) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = hi - lo;
    if span <= f64::EPSILON * hi.abs().max(1.0) {
        let half = 0.5 * lo.abs().max(1.0);
        return (lo - half, hi + half);
    }
    (lo - pad * span, hi + pad * span)
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".to_string()
        } else {
            s.to_string()
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> Vec<Series> {
        let x: Vec<f64> = (0..5).map(|i| i as f64 * 0.5).collect();
        vec![
            Series::new("rho", x.clone(), vec![1.0, 0.5, 0.0, 0.0, 0.0]),
            Series::new("eta", x.clone(), vec![0.0, 0.0, 0.0, 0.5, 1.0]),
            Series::new("sigma", x, vec![1.0, 0.5, 0.0, 0.5, 1.0]),
        ]
    }

    #[test]
    fn three_series_give_three_polylines() {
        let svg = emit_plot(&three(), &PlotStyle::titled("t = 1")).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains(">sigma</text>"));
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(emit_plot(&[], &PlotStyle::default()).is_err());
        assert!(emit_plot(&[Series::new("a", vec![], vec![])], &PlotStyle::default()).is_err());
        assert!(matches!(series_from_csv(""), Err(Error::MalformedCsv(_))));
        assert!(matches!(series_from_csv("x,a\n1,2\n3"), Err(Error::MalformedCsv(_))));
        assert!(matches!(series_from_csv("x,a\n1,zz\n"), Err(Error::MalformedCsv(_))));
        assert!(matches!(series_from_csv("x,a\n"), Err(Error::MalformedCsv(_))));
    }

    #[test]
    fn same_input_same_bytes() {
        let a = emit_plot(&three(), &PlotStyle::default()).unwrap();
        let b = emit_plot(&three(), &PlotStyle::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_series_still_plots() {
        let s = Series::new("c", vec![0.0, 1.0], vec![2.0, 2.0]);
        let svg = emit_plot(&[s], &PlotStyle::default()).unwrap();
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn csv_roundtrip() {
        let s = series_from_csv("x,rho,eta\n0,1,2\n1,3,4\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].label, "eta");
        assert_eq!(s[1].y, vec![2.0, 4.0]);
    }

    #[test]
    fn ticks_are_compact() {
        assert_eq!(tick(0.5), "0.5");
        assert_eq!(tick(-0.0), "0");
        assert_eq!(tick(2.0), "2");
        assert_eq!(tick(1.5e-6), "1.50e-6");
    }
}
