//! Plain-text inputs and outputs: CSV tables and SVG curves.
//!
//! Input CSV files may contain blank lines and `#` comments. A first row
//! that does not parse as numbers is taken as the header.

use std::fmt::Write as _;

use crate::dynamics::{Ensemble, Particle};
use crate::error::{ModelError, Result};
use crate::measure::DensityGrid;
use crate::params::ModelParams;

fn parse_err(line: usize, reason: impl Into<String>) -> ModelError {
    ModelError::Parse {
        line,
        reason: reason.into(),
    }
}

/// Numeric rows of a CSV text with their 1-based line numbers.
pub fn parse_numeric_rows(text: &str, width: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::new();
    let mut seen_data = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = body.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if values.len() != width {
                    return Err(parse_err(
                        line,
                        format!("expected {width} fields, found {}", values.len()),
                    ));
                }
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    return Err(parse_err(line, format!("non-finite value {v}")));
                }
                seen_data = true;
                rows.push((line, values));
            }
            Err(_) if !seen_data && rows.is_empty() && fields.len() == width => {
                // header row
                seen_data = true;
            }
            Err(_) => {
                let bad = fields.iter().find(|f| f.parse::<f64>().is_err()).unwrap_or(&"");
                return Err(parse_err(line, format!("cannot parse `{bad}` as a number")));
            }
        }
    }
    Ok(rows)
}

/// Reads `x1,x2,x3` rows into an ensemble, sorted by maturity.
pub fn read_ensemble_csv(text: &str, params: &ModelParams) -> Result<Ensemble> {
    let rows = parse_numeric_rows(text, 3)?;
    if rows.is_empty() {
        return Err(parse_err(0, "no particle rows"));
    }
    let ybar = params.asymptotic_maturity();
    for (line, r) in &rows {
        if !(r[2] > 0.0) {
            return Err(parse_err(*line, format!("mass {} must be positive", r[2])));
        }
        if !(0.0..ybar).contains(&r[1]) {
            return Err(parse_err(*line, format!("maturity {} outside [0, {ybar})", r[1])));
        }
    }
    let mut rows = rows;
    rows.sort_by(|a, b| a.1[1].total_cmp(&b.1[1]));
    for w in rows.windows(2) {
        if w[0].1[1] == w[1].1[1] {
            return Err(parse_err(
                w[1].0,
                format!("maturity {} repeats the value on line {}", w[1].1[1], w[0].0),
            ));
        }
    }
    let particles = rows.iter().map(|(_, r)| Particle::new(r[0], r[1], r[2])).collect();
    Ensemble::new(*params, particles)
}

/// Reads a density grid over `[0, 1] x [0, ys]`: a `nx,ny,ys` header, a line
/// with those three numbers, then `nx` rows of `ny` values (row `i` is
/// `x = i / (nx - 1)`, column `j` is `y = j ys / (ny - 1)`).
pub fn read_density_csv(text: &str, params: &ModelParams) -> Result<DensityGrid> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let fields = |line: usize, body: &str| -> Result<Vec<f64>> {
        body.split(',')
            .map(str::trim)
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(v) => Err(parse_err(line, format!("non-finite value {v}"))),
                Err(_) => Err(parse_err(line, format!("cannot parse `{f}` as a number"))),
            })
            .collect()
    };
    let (line, header) = lines.next().ok_or_else(|| parse_err(0, "empty density file"))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names != ["nx", "ny", "ys"] {
        return Err(parse_err(line, format!("expected header `nx,ny,ys`, found `{header}`")));
    }
    let (line, dims) = lines.next().ok_or_else(|| parse_err(line, "missing grid dimensions"))?;
    let dims = fields(line, dims)?;
    if dims.len() != 3 {
        return Err(parse_err(line, format!("expected 3 fields, found {}", dims.len())));
    }
    let count = |v: f64, name: &str| -> Result<usize> {
        if v.fract() != 0.0 || !(2.0..=1e6).contains(&v) {
            return Err(parse_err(line, format!("{name} = {v} is not an integer in [2, 1000000]")));
        }
        Ok(v as usize)
    };
    let (nx, ny) = (count(dims[0], "nx")?, count(dims[1], "ny")?);
    if (dims[2] - params.ys).abs() > 1e-12 * params.ys.abs().max(1.0) {
        return Err(parse_err(line, format!("grid ys = {} differs from the model ys = {}", dims[2], params.ys)));
    }
    let mut values = Vec::with_capacity(nx * ny);
    let mut rows = 0;
    let mut last = line;
    for (line, body) in lines {
        last = line;
        if rows == nx {
            return Err(parse_err(line, format!("more than nx = {nx} rows")));
        }
        let row = fields(line, body)?;
        if row.len() != ny {
            return Err(parse_err(line, format!("expected {ny} fields, found {}", row.len())));
        }
        if let Some(v) = row.iter().find(|&&v| v < 0.0) {
            return Err(parse_err(line, format!("density {v} is negative")));
        }
        values.extend(row);
        rows += 1;
    }
    if rows != nx {
        return Err(parse_err(last, format!("expected {nx} rows, found {rows}")));
    }
    DensityGrid::new(nx, ny, params.ys, values)
}

/// Formats a float so that it round-trips and prints identically on every run.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v:e}")
    }
}

/// A CSV table with string cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn push_f64(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| fmt_f64(v)).collect());
    }

    /// CSV text; every preamble line is written as a `#` comment.
    pub fn to_csv(&self, preamble: &[String]) -> String {
        let mut out = String::new();
        for line in preamble {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// A curve for [`svg_plot`].
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f5fbf", "#2a9d3a", "#c23b22", "#8a4fbf", "#d08a00", "#444444"];

fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Line plot with optional vertical markers.
pub fn svg_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    verticals: &[f64],
    preamble: &[String],
) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (90.0, 20.0, 40.0, 60.0);
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        let pad = y0.abs().max(1.0) * 0.05;
        y0 -= pad;
        y1 += pad;
    }
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let sy = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    for line in preamble {
        let _ = writeln!(out, "<!-- {} -->", line.replace("--", "- -"));
    }
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        h - bottom,
        w - right,
        h - bottom
    );
    let _ = writeln!(
        out,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#,
        h - bottom
    );
    for t in ticks(x0, x1, 5) {
        let x = sx(t);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            h - bottom,
            h - bottom + 5.0,
            h - bottom + 18.0,
            tick_label(t)
        );
    }
    for t in ticks(y0, y1, 5) {
        let y = sy(t);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            left - 5.0,
            left - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        (left + w - right) / 2.0,
        h - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0,
        escape(y_label)
    );
    for &v in verticals.iter().filter(|v| (x0..=x1).contains(*v)) {
        let x = sx(v);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{}" stroke="#888888" stroke-dasharray="5,4"/>"##,
            h - bottom
        );
    }
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            left + 10.0,
            top + 14.0 * (k + 1) as f64,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
