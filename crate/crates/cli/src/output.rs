//! Artifact writers: JSON result envelopes, CSV tables, SVG line plots.
//!
//! Everything here is deterministic: no timestamps (the envelope field
//! is always null by policy), sorted JSON maps, fixed float formatting.
//! Identical inputs produce identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Output directory plus the --format selection. With no --format every
/// artifact (CSV + JSON + SVG) is written; "csv" or "json" narrows to
/// that family.
pub struct OutputSet {
    pub dir: PathBuf,
    pub format: Option<Format>,
}

impl OutputSet {
    pub fn new(dir: &Path, format: Option<Format>) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(OutputSet {
            dir: dir.to_path_buf(),
            format,
        })
    }

    pub fn want_csv(&self) -> bool {
        matches!(self.format, None | Some(Format::Csv))
    }

    pub fn want_json(&self) -> bool {
        matches!(self.format, None | Some(Format::Json))
    }

    pub fn want_svg(&self) -> bool {
        self.format.is_none()
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
        f.write_all(bytes)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }

    /// CSV with a one-line header; every value in `{:e}` form.
    pub fn write_csv(
        &mut self,
        name: &str,
        header: &str,
        rows: &[Vec<f64>],
    ) -> Result<(), CliError> {
        if !self.want_csv() {
            return Ok(());
        }
        let cols = header.split(',').count();
        let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), cols, "row width mismatch in {name}");
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    text.push(',');
                }
                text.push_str(&format!("{v:e}"));
            }
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_json(&mut self, name: &str, envelope: &Envelope) -> Result<(), CliError> {
        if !self.want_json() {
            return Ok(());
        }
        let mut bytes = serde_json::to_vec_pretty(envelope)
            .map_err(|e| CliError::Io(format!("serialize {name}: {e}")))?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    pub fn write_svg(&mut self, name: &str, plot: &LinePlot) -> Result<(), CliError> {
        if !self.want_svg() {
            return Ok(());
        }
        self.write_bytes(name, plot.render().as_bytes())
    }
}

/// Result envelope shared by every command. `timestamp` is always null
/// so that reruns are byte-identical; provenance notes carry the
/// assumptions instead.
#[derive(Serialize)]
pub struct Envelope {
    pub schema: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub timestamp: Option<()>,
    pub provenance: Vec<String>,
    pub results: serde_json::Value,
}

impl Envelope {
    pub fn new(command: &str, config_hash: &str, seed: u64) -> Self {
        Envelope {
            schema: crate::config::SCHEMA_VERSION,
            tool: "tripletlab",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            timestamp: None,
            provenance: Vec::new(),
            results: serde_json::Value::Null,
        }
    }
}

// ---------------------------------------------------------------- CSV in

/// Read a spectrum CSV (header `field_t,freq_hz,signal`) into
/// (field, freq, signal) triples. Errors carry 1-based line numbers.
pub fn read_spectrum_csv(path: &Path) -> Result<Vec<(f64, f64, f64)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == "field_t,freq_hz,signal" => {}
        Some((_, h)) => {
            return Err(CliError::Data(format!(
                "{} row 1: header must be \"field_t,freq_hz,signal\", got {h:?}",
                path.display()
            )))
        }
        None => {
            return Err(CliError::Data(format!("{} is empty", path.display())));
        }
    }
    for (idx, line) in lines {
        let row_no = idx + 1; // 1-based, header = row 1
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(CliError::Data(format!(
                "{} row {row_no}: expected 3 comma-separated values, got {}",
                path.display(),
                parts.len()
            )));
        }
        let mut vals = [0.0f64; 3];
        for (k, p) in parts.iter().enumerate() {
            vals[k] = p.trim().parse().map_err(|_| {
                CliError::Data(format!(
                    "{} row {row_no}: {p:?} is not a number",
                    path.display()
                ))
            })?;
        }
        rows.push((vals[0], vals[1], vals[2]));
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!(
            "{} has a header but no data rows",
            path.display()
        )));
    }
    Ok(rows)
}

// ------------------------------------------------------------------ SVG

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];
const W: f64 = 860.0;
const H: f64 = 520.0;
const ML: f64 = 78.0;
const MR: f64 = 24.0;
const MT: f64 = 40.0;
const MB: f64 = 56.0;

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (0.001..10000.0).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Tick positions: decades when log, else ~6 "nice" steps (1/2/5 grid).
fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let a = lo.log10().floor() as i64;
        let b = hi.log10().ceil() as i64;
        let step = (((b - a) as f64) / 8.0).ceil().max(1.0) as i64;
        return (a..=b)
            .step_by(step as usize)
            .map(|k| 10f64.powi(k as i32))
            .filter(|t| *t >= lo * 0.999 && *t <= hi * 1.001)
            .collect();
    }
    let span = hi - lo;
    if span <= 0.0 {
        return vec![lo];
    }
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm <= 1.0 {
        mag
    } else if norm <= 2.0 {
        2.0 * mag
    } else if norm <= 5.0 {
        5.0 * mag
    } else {
        10.0 * mag
    };
    let first = (lo / step).ceil() * step;
    let mut out = Vec::new();
    let mut t = first;
    while t <= hi + step * 1e-9 {
        out.push(t);
        t += step;
    }
    out
}

impl LinePlot {
    pub fn render(&self) -> String {
        let (mut xlo, mut xhi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
        let usable = |v: f64, log: bool| v.is_finite() && (!log || v > 0.0);
        for s in &self.series {
            for &(x, y) in &s.points {
                if usable(x, self.log_x) && usable(y, self.log_y) {
                    xlo = xlo.min(x);
                    xhi = xhi.max(x);
                    ylo = ylo.min(y);
                    yhi = yhi.max(y);
                }
            }
        }
        if !xlo.is_finite() {
            xlo = 0.0;
            xhi = 1.0;
            ylo = 0.0;
            yhi = 1.0;
        }
        if xlo == xhi {
            xhi = xlo + 1.0;
        }
        if ylo == yhi {
            yhi = ylo + 1.0;
            if self.log_y {
                yhi = ylo * 10.0;
            }
        }
        // A little vertical headroom on linear axes.
        if !self.log_y {
            let pad = 0.06 * (yhi - ylo);
            ylo -= pad;
            yhi += pad;
        }

        let tx = |x: f64| -> f64 {
            let u = if self.log_x {
                (x.log10() - xlo.log10()) / (xhi.log10() - xlo.log10())
            } else {
                (x - xlo) / (xhi - xlo)
            };
            ML + u * (W - ML - MR)
        };
        let ty = |y: f64| -> f64 {
            let u = if self.log_y {
                (y.log10() - ylo.log10()) / (yhi.log10() - ylo.log10())
            } else {
                (y - ylo) / (yhi - ylo)
            };
            H - MB - u * (H - MT - MB)
        };

        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
             viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\">\n"
        ));
        svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
            (ML + W - MR) / 2.0,
            xml_escape(&self.title)
        ));

        for t in ticks(xlo, xhi, self.log_x) {
            let x = tx(t);
            svg.push_str(&format!(
                "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
                 stroke=\"#dddddd\"/>\n",
                MT,
                H - MB
            ));
            svg.push_str(&format!(
                "<text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                H - MB + 16.0,
                fmt_num(t)
            ));
        }
        for t in ticks(ylo, yhi, self.log_y) {
            let y = ty(t);
            svg.push_str(&format!(
                "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
                 stroke=\"#dddddd\"/>\n",
                ML,
                W - MR
            ));
            svg.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
                ML - 6.0,
                y + 4.0,
                fmt_num(t)
            ));
        }
        svg.push_str(&format!(
            "<rect x=\"{ML}\" y=\"{MT}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" \
             stroke=\"#333333\"/>\n",
            W - ML - MR,
            H - MT - MB
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
            (ML + W - MR) / 2.0,
            H - 12.0,
            xml_escape(&self.x_label)
        ));
        svg.push_str(&format!(
            "<text x=\"18\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" \
             transform=\"rotate(-90 18 {:.2})\">{}</text>\n",
            (MT + H - MB) / 2.0,
            (MT + H - MB) / 2.0,
            xml_escape(&self.y_label)
        ));

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let mut pts = String::new();
            for &(x, y) in &s.points {
                if usable(x, self.log_x) && usable(y, self.log_y) {
                    pts.push_str(&format!("{:.2},{:.2} ", tx(x), ty(y)));
                }
            }
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                pts.trim_end()
            ));
            if self.series.len() > 1 || !s.label.is_empty() {
                let ly = MT + 16.0 + 16.0 * i as f64;
                svg.push_str(&format!(
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n",
                    W - MR - 150.0,
                    ly - 9.0
                ));
                svg.push_str(&format!(
                    "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{}</text>\n",
                    W - MR - 136.0,
                    ly,
                    xml_escape(&s.label)
                ));
            }
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
