//! Plain-text histogram and overlay files.
//!
//! Histogram files carry `# key: value` header lines followed by
//! `time_ns,counts` rows:
//!
//! ```text
//! # id: qd017
//! # dipole: X
//! # lattice_a_nm: 280
//! # wavelength_nm: 969.2
//! # rep_period_ns: 200
//! # location: in_crystal
//! # bin_width_ns: 0.2
//! time_ns,counts
//! 0,41
//! 0.2,39
//! ```
//!
//! `bin_width_ns` is optional; without it the width is taken from the first
//! two rows. `lattice_a_nm` may be omitted for reference dots.

use std::fmt::Write as _;
use std::path::Path;

use probekit::ldos::{Dipole, Location, TheoryCurve};
use probekit::synth::DecayHistogram;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: malformed header: {msg}")]
    MalformedHeader { line: usize, msg: String },
    #[error("missing header key '{0}'")]
    MissingHeader(&'static str),
    #[error("line {line}: non-uniform bins: {msg}")]
    NonUniformBins { line: usize, msg: String },
    #[error("line {line}: negative count {value}")]
    NegativeCount { line: usize, value: f64 },
    #[error("line {line}: malformed row: {msg}")]
    MalformedRow { line: usize, msg: String },
    #[error("no data rows")]
    Empty,
    #[error("invalid overlay: {0}")]
    Overlay(String),
}

/// Header metadata of one decay curve.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramMeta {
    pub id: String,
    pub dipole: Dipole,
    pub lattice_a: Option<f64>,
    pub wavelength: f64,
    pub rep_period: f64,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramFile {
    pub meta: HistogramMeta,
    pub hist: DecayHistogram,
}

fn read(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_histogram(path: &Path) -> Result<HistogramFile, FormatError> {
    parse_histogram(&read(path)?)
}

fn header_value(line: &str, lineno: usize) -> Result<Option<(String, String)>, FormatError> {
    let body = line.trim_start_matches('#').trim();
    if body.is_empty() {
        return Ok(None);
    }
    match body.split_once(':') {
        Some((k, v)) if !k.trim().is_empty() => Ok(Some((k.trim().to_string(), v.trim().to_string()))),
        _ => Err(FormatError::MalformedHeader {
            line: lineno,
            msg: format!("expected '# key: value', got '{line}'"),
        }),
    }
}

fn parse_number(v: &str, key: &str, line: usize) -> Result<f64, FormatError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(x),
        _ => Err(FormatError::MalformedHeader {
            line,
            msg: format!("{key} must be a positive number, got '{v}'"),
        }),
    }
}

pub fn parse_histogram(text: &str) -> Result<HistogramFile, FormatError> {
    let mut id = None;
    let mut dipole = None;
    let mut lattice_a = None;
    let mut wavelength = None;
    let mut rep_period = None;
    let mut location = None;
    let mut bin_width = None;
    let mut rows: Vec<(usize, f64, f64)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if !rows.is_empty() {
                continue;
            }
            let Some((key, value)) = header_value(line, lineno)? else {
                continue;
            };
            let bad = |msg: String| FormatError::MalformedHeader { line: lineno, msg };
            match key.as_str() {
                "id" if !value.is_empty() => id = Some(value),
                "dipole" => dipole = Some(value.parse::<Dipole>().map_err(bad)?),
                "location" => location = Some(value.parse::<Location>().map_err(bad)?),
                "lattice_a_nm" => lattice_a = Some(parse_number(&value, &key, lineno)?),
                "wavelength_nm" => wavelength = Some(parse_number(&value, &key, lineno)?),
                "rep_period_ns" => rep_period = Some(parse_number(&value, &key, lineno)?),
                "bin_width_ns" => bin_width = Some(parse_number(&value, &key, lineno)?),
                "id" => return Err(bad("empty id".into())),
                _ => {}
            }
            continue;
        }
        if rows.is_empty() && line.starts_with("time_ns") {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let (Some(t), Some(c), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(FormatError::MalformedRow {
                line: lineno,
                msg: "expected two comma-separated columns".into(),
            });
        };
        let parse = |s: &str, what: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| FormatError::MalformedRow {
                    line: lineno,
                    msg: format!("invalid {what} '{s}'"),
                })
        };
        let (t, c) = (parse(t, "time")?, parse(c, "count")?);
        if c < 0.0 {
            return Err(FormatError::NegativeCount { line: lineno, value: c });
        }
        rows.push((lineno, t, c));
    }

    let meta = HistogramMeta {
        id: id.ok_or(FormatError::MissingHeader("id"))?,
        dipole: dipole.ok_or(FormatError::MissingHeader("dipole"))?,
        wavelength: wavelength.ok_or(FormatError::MissingHeader("wavelength_nm"))?,
        rep_period: rep_period.ok_or(FormatError::MissingHeader("rep_period_ns"))?,
        location: location.ok_or(FormatError::MissingHeader("location"))?,
        lattice_a,
    };
    if meta.location == Location::InCrystal && meta.lattice_a.is_none() {
        return Err(FormatError::MissingHeader("lattice_a_nm"));
    }

    if rows.is_empty() {
        return Err(FormatError::Empty);
    }
    let t0 = rows[0].1;
    let width = match bin_width {
        Some(w) => w,
        None if rows.len() >= 2 => rows[1].1 - t0,
        None => {
            return Err(FormatError::NonUniformBins {
                line: rows[0].0,
                msg: "a single row needs a bin_width_ns header".into(),
            })
        }
    };
    if !(width > 0.0) {
        return Err(FormatError::NonUniformBins {
            line: rows[1].0,
            msg: "time column must increase".into(),
        });
    }
    for (j, &(lineno, t, _)) in rows.iter().enumerate() {
        let expected = t0 + j as f64 * width;
        if (t - expected).abs() > 1e-6 * width {
            return Err(FormatError::NonUniformBins {
                line: lineno,
                msg: format!("time {t} where {expected} was expected"),
            });
        }
    }
    let counts = rows.into_iter().map(|r| r.2).collect();
    let hist = DecayHistogram::new(t0, width, counts).map_err(|e| FormatError::MalformedRow {
        line: 0,
        msg: e.to_string(),
    })?;
    Ok(HistogramFile { meta, hist })
}

/// Serializes a histogram; parsing the result gives back identical counts
/// and bin layout.
pub fn write_histogram(meta: &HistogramMeta, hist: &DecayHistogram) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# id: {}", meta.id);
    let _ = writeln!(s, "# dipole: {}", meta.dipole);
    if let Some(a) = meta.lattice_a {
        let _ = writeln!(s, "# lattice_a_nm: {a}");
    }
    let _ = writeln!(s, "# wavelength_nm: {}", meta.wavelength);
    let _ = writeln!(s, "# rep_period_ns: {}", meta.rep_period);
    let _ = writeln!(s, "# location: {}", meta.location);
    let _ = writeln!(s, "# bin_width_ns: {}", hist.bin_width);
    s.push_str("time_ns,counts\n");
    for (j, c) in hist.counts.iter().enumerate() {
        let _ = writeln!(s, "{},{}", hist.bin_start(j), c);
    }
    s
}

pub fn read_overlay(path: &Path) -> Result<TheoryCurve, FormatError> {
    parse_overlay(&read(path)?)
}

/// Two-column `norm_freq,ldos_ratio` file with a `# dipole: X|Y` header.
pub fn parse_overlay(text: &str) -> Result<TheoryCurve, FormatError> {
    let mut dipole = None;
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some((k, v)) = header_value(line, lineno)? {
                if k == "dipole" {
                    dipole = Some(v.parse::<Dipole>().map_err(|msg| FormatError::MalformedHeader { line: lineno, msg })?);
                }
            }
            continue;
        }
        if points.is_empty() && line.starts_with("norm_freq") {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| FormatError::MalformedRow { line: lineno, msg: e.to_string() })?;
        let [f, v] = vals[..] else {
            return Err(FormatError::MalformedRow {
                line: lineno,
                msg: "expected two comma-separated columns".into(),
            });
        };
        points.push((f, v));
    }
    let dipole = dipole.ok_or(FormatError::MissingHeader("dipole"))?;
    TheoryCurve::new(dipole, points).map_err(|e| FormatError::Overlay(e.to_string()))
}

pub fn write_overlay(curve: &TheoryCurve) -> String {
    let mut s = format!("# dipole: {}\nnorm_freq,ldos_ratio\n", curve.dipole);
    for (f, v) in &curve.points {
        let _ = writeln!(s, "{f},{v}");
    }
    s
}
