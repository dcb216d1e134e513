//! Measurement ingestion: one-port Touchstone files and CSV sweeps.
//!
//! Both readers produce [`BasebandSamples`] on a validated uniform frequency
//! grid; the inferred sweep uses an intermediate frequency of zero, which is
//! the phase convention the rest of the pipeline assumes for recorded data.

use num_complex::Complex64;
use sparse_mut_core::forward_model::{BasebandSamples, FrequencySweep};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

/// Largest tolerated grid deviation, relative to the frequency step.
pub const GRID_UNIFORMITY_REL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed option line: {reason}")]
    MalformedOptionLine { path: String, reason: String },
    #[error("{path}: only S-parameter data is supported, found '{found}'")]
    UnsupportedParameter { path: String, found: String },
    #[error("{path}, line {line}: {reason}")]
    BadDataLine {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{path}: frequencies are not strictly increasing at row {row}")]
    NonMonotone { path: String, row: usize },
    #[error("{path}: frequency grid deviates from uniform by {deviation:.3e} steps (tolerance {tolerance:.1e}); re-run with --resample to interpolate")]
    NonUniformGrid {
        path: String,
        deviation: f64,
        tolerance: f64,
    },
    #[error("{path}: duplicate frequency {frequency} Hz")]
    DuplicateFrequency { path: String, frequency: f64 },
    #[error("{path}: missing column '{column}'")]
    MissingColumn { path: String, column: String },
    #[error("{path}, row {row}: non-finite value in column '{column}'")]
    NonFiniteCell {
        path: String,
        row: usize,
        column: String,
    },
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("MUT and reference sweeps are incompatible: {0}")]
    IncompatibleSweeps(String),
}

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn invalid(path: &Path, reason: impl Into<String>) -> IngestError {
    IngestError::Invalid {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// How the two value columns of a CSV sweep are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvKind {
    RealImag,
    MagnitudePhaseDeg,
}

/// Column names for CSV ingestion.
#[derive(Debug, Clone)]
pub struct ColumnSpec {
    pub frequency: String,
    pub a: String,
    pub b: String,
    pub kind: CsvKind,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            frequency: "freq_hz".into(),
            a: "re".into(),
            b: "im".into(),
            kind: CsvKind::RealImag,
        }
    }
}

/// A MUT sweep and its metal-plate reference on the same frequency grid.
#[derive(Debug, Clone)]
pub struct MeasurementPair {
    pub mut_sweep: BasebandSamples,
    pub reference_sweep: BasebandSamples,
    pub metadata: BTreeMap<String, String>,
}

impl MeasurementPair {
    /// Loads and validates a MUT/reference file pair. File type is picked by
    /// extension: `.s1p`/`.snp` parse as Touchstone, everything else as CSV.
    /// Touchstone comment lines of the form `! key: value` (instrument,
    /// date, sample label and the like) land in the metadata map.
    pub fn load(
        mut_path: &Path,
        ref_path: &Path,
        columns: &ColumnSpec,
        resample: bool,
    ) -> Result<Self, IngestError> {
        let mut_sweep = ingest_auto(mut_path, columns, resample)?;
        let reference_sweep = ingest_auto(ref_path, columns, resample)?;
        if !mut_sweep
            .sweep()
            .compatible_with(reference_sweep.sweep(), 1e-9)
        {
            return Err(IngestError::IncompatibleSweeps(format!(
                "MUT grid starts {} Hz step {} Hz with {} points; reference starts {} Hz step {} Hz with {} points",
                mut_sweep.sweep().f0(),
                mut_sweep.sweep().delta_f(),
                mut_sweep.sweep().n_steps(),
                reference_sweep.sweep().f0(),
                reference_sweep.sweep().delta_f(),
                reference_sweep.sweep().n_steps(),
            )));
        }
        let mut metadata = BTreeMap::new();
        metadata.insert("mut_path".into(), mut_path.display().to_string());
        metadata.insert("reference_path".into(), ref_path.display().to_string());
        for (prefix, path) in [("mut", mut_path), ("reference", ref_path)] {
            for (key, value) in comment_annotations(path) {
                metadata.insert(format!("{prefix}_{key}"), value);
            }
        }
        Ok(Self {
            mut_sweep,
            reference_sweep,
            metadata,
        })
    }
}

/// Pulls `! key: value` annotations out of a Touchstone file's comments.
fn comment_annotations(path: &Path) -> Vec<(String, String)> {
    let Ok(text) = fs::read_to_string(path) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for line in text.lines() {
        let Some(comment) = line.trim_start().strip_prefix('!') else {
            continue;
        };
        if let Some((key, value)) = comment.split_once(':') {
            let key: String = key
                .trim()
                .to_ascii_lowercase()
                .chars()
                .map(|c| if c.is_whitespace() { '_' } else { c })
                .collect();
            let value = value.trim();
            if !key.is_empty()
                && !value.is_empty()
                && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            {
                out.push((key, value.to_string()));
            }
        }
    }
    out
}

fn ingest_auto(
    path: &Path,
    columns: &ColumnSpec,
    resample: bool,
) -> Result<BasebandSamples, IngestError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("s1p") || ext.eq_ignore_ascii_case("snp") => {
            ingest_touchstone(path, resample)
        }
        _ => ingest_csv(path, columns, resample),
    }
}

/// Validates an ascending (frequency, value) list against a uniform grid and
/// assembles the sweep, resampling by linear interpolation when permitted.
fn finish_grid(
    path: &Path,
    points: Vec<(f64, Complex64)>,
    resample: bool,
) -> Result<BasebandSamples, IngestError> {
    if points.len() < 2 {
        return Err(invalid(path, "need at least two frequency points"));
    }
    let n = points.len();
    let f0 = points[0].0;
    let step = (points[n - 1].0 - f0) / (n - 1) as f64;
    if step <= 0.0 || step.is_nan() {
        return Err(invalid(path, "zero frequency span"));
    }
    let deviation = points
        .iter()
        .enumerate()
        .map(|(i, (f, _))| (f - (f0 + i as f64 * step)).abs() / step)
        .fold(0.0f64, f64::max);

    let values: Vec<Complex64> = if deviation <= GRID_UNIFORMITY_REL_TOL {
        points.iter().map(|&(_, v)| v).collect()
    } else if !resample {
        return Err(IngestError::NonUniformGrid {
            path: path.display().to_string(),
            deviation,
            tolerance: GRID_UNIFORMITY_REL_TOL,
        });
    } else {
        (0..n)
            .map(|i| {
                let f = f0 + i as f64 * step;
                interpolate(&points, f)
            })
            .collect()
    };

    let sweep = FrequencySweep::new(f0, step, n, 0.0).map_err(|e| invalid(path, e.to_string()))?;
    BasebandSamples::new(values, sweep).map_err(|e| invalid(path, e.to_string()))
}

fn interpolate(points: &[(f64, Complex64)], f: f64) -> Complex64 {
    match points.binary_search_by(|(pf, _)| pf.partial_cmp(&f).unwrap()) {
        Ok(i) => points[i].1,
        Err(i) => {
            if i == 0 {
                points[0].1
            } else if i >= points.len() {
                points[points.len() - 1].1
            } else {
                let (fa, va) = points[i - 1];
                let (fb, vb) = points[i];
                let t = (f - fa) / (fb - fa);
                va + (vb - va) * t
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TouchstoneFormat {
    Ri,
    Ma,
    Db,
}

/// Reads a one-port Touchstone (.s1p) file in RI, MA or DB format.
pub fn ingest_touchstone(path: &Path, resample: bool) -> Result<BasebandSamples, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let display = path.display().to_string();

    let mut option: Option<(f64, TouchstoneFormat)> = None;
    let mut points: Vec<(f64, Complex64)> = Vec::new();

    for (line_no, raw) in text.lines().enumerate() {
        let line = match raw.find('!') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if option.is_some() {
                return Err(IngestError::MalformedOptionLine {
                    path: display,
                    reason: "more than one option line".into(),
                });
            }
            option = Some(parse_option_line(path, rest)?);
            continue;
        }
        let Some((unit_scale, format)) = option else {
            return Err(IngestError::MalformedOptionLine {
                path: display,
                reason: "data before the option line".into(),
            });
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(IngestError::BadDataLine {
                path: display,
                line: line_no + 1,
                reason: format!(
                    "expected 3 columns for one-port data, found {}",
                    fields.len()
                ),
            });
        }
        let parse = |s: &str| -> Result<f64, IngestError> {
            s.parse::<f64>().map_err(|_| IngestError::BadDataLine {
                path: path.display().to_string(),
                line: line_no + 1,
                reason: format!("cannot parse '{s}' as a number"),
            })
        };
        let freq = parse(fields[0])? * unit_scale;
        let a = parse(fields[1])?;
        let b = parse(fields[2])?;
        if !freq.is_finite() || !a.is_finite() || !b.is_finite() {
            return Err(IngestError::BadDataLine {
                path: display,
                line: line_no + 1,
                reason: "non-finite value".into(),
            });
        }
        let value = match format {
            TouchstoneFormat::Ri => Complex64::new(a, b),
            TouchstoneFormat::Ma => Complex64::from_polar(a, b.to_radians()),
            TouchstoneFormat::Db => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
        };
        if let Some(last) = points.last() {
            if freq <= last.0 {
                return Err(IngestError::NonMonotone {
                    path: display,
                    row: points.len() + 1,
                });
            }
        }
        points.push((freq, value));
    }

    if option.is_none() {
        return Err(IngestError::MalformedOptionLine {
            path: display,
            reason: "missing option line".into(),
        });
    }
    finish_grid(path, points, resample)
}

fn parse_option_line(path: &Path, rest: &str) -> Result<(f64, TouchstoneFormat), IngestError> {
    let display = path.display().to_string();
    // Defaults per Touchstone v1: GHz, S-parameters, MA, R 50.
    let mut unit_scale = 1e9;
    let mut format = TouchstoneFormat::Ma;
    let mut tokens = rest.split_whitespace().peekable();
    while let Some(tok) = tokens.next() {
        match tok.to_ascii_uppercase().as_str() {
            "HZ" => unit_scale = 1.0,
            "KHZ" => unit_scale = 1e3,
            "MHZ" => unit_scale = 1e6,
            "GHZ" => unit_scale = 1e9,
            "S" => {}
            "Y" | "Z" | "G" | "H" => {
                return Err(IngestError::UnsupportedParameter {
                    path: display,
                    found: tok.into(),
                })
            }
            "RI" => format = TouchstoneFormat::Ri,
            "MA" => format = TouchstoneFormat::Ma,
            "DB" => format = TouchstoneFormat::Db,
            "R" => {
                let value = tokens
                    .next()
                    .ok_or_else(|| IngestError::MalformedOptionLine {
                        path: display.clone(),
                        reason: "'R' without a resistance value".into(),
                    })?;
                value
                    .parse::<f64>()
                    .map_err(|_| IngestError::MalformedOptionLine {
                        path: display.clone(),
                        reason: format!("bad reference resistance '{value}'"),
                    })?;
            }
            other => {
                return Err(IngestError::MalformedOptionLine {
                    path: display,
                    reason: format!("unknown token '{other}'"),
                })
            }
        }
    }
    Ok((unit_scale, format))
}

/// Writes samples as a one-port Touchstone file in Hz/RI format.
pub fn write_s1p(
    path: &Path,
    samples: &BasebandSamples,
    comments: &[String],
) -> std::io::Result<()> {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "! {c}");
    }
    let _ = writeln!(out, "# Hz S RI R 50");
    let sweep = samples.sweep();
    for (i, v) in samples.values().iter().enumerate() {
        let f = sweep.f0() + i as f64 * sweep.delta_f();
        let _ = writeln!(out, "{f:.6} {:.16e} {:.16e}", v.re, v.im);
    }
    fs::write(path, out)
}

/// Reads a CSV sweep. Rows may arrive in any order; they are sorted by
/// frequency before validation.
pub fn ingest_csv(
    path: &Path,
    columns: &ColumnSpec,
    resample: bool,
) -> Result<BasebandSamples, IngestError> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| invalid(path, e.to_string()))?;

    let headers = reader
        .headers()
        .map_err(|e| invalid(path, e.to_string()))?
        .clone();
    let find = |name: &str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| IngestError::MissingColumn {
                path: display.clone(),
                column: name.into(),
            })
    };
    let fi = find(&columns.frequency)?;
    let ai = find(&columns.a)?;
    let bi = find(&columns.b)?;

    let mut points: Vec<(f64, Complex64)> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| invalid(path, e.to_string()))?;
        let cell = |idx: usize, name: &str| -> Result<f64, IngestError> {
            let raw = record.get(idx).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| IngestError::NonFiniteCell {
                path: path.display().to_string(),
                row: row_no + 2,
                column: name.into(),
            })?;
            if !v.is_finite() {
                return Err(IngestError::NonFiniteCell {
                    path: path.display().to_string(),
                    row: row_no + 2,
                    column: name.into(),
                });
            }
            Ok(v)
        };
        let f = cell(fi, &columns.frequency)?;
        let a = cell(ai, &columns.a)?;
        let b = cell(bi, &columns.b)?;
        let value = match columns.kind {
            CsvKind::RealImag => Complex64::new(a, b),
            CsvKind::MagnitudePhaseDeg => Complex64::from_polar(a, b.to_radians()),
        };
        points.push((f, value));
    }

    points.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    for pair in points.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(IngestError::DuplicateFrequency {
                path: display,
                frequency: pair[0].0,
            });
        }
    }
    finish_grid(path, points, resample)
}
