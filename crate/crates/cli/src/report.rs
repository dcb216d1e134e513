//! Run reports: a versioned JSON schema, a flat CSV view and a readable text
//! rendering, plus optional plot-ready trace dumps.
//!
//! Serialization is deterministic: field order is fixed by the struct
//! definitions, maps are ordered, and no timestamps enter the report, so a
//! seeded run emits byte-identical output.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// Schema identifier embedded in every JSON report.
pub const REPORT_SCHEMA: &str = "sparse-mut/1";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub schema: String,
    /// Which front end produced the report: "characterize" or "synth".
    pub command: String,
    pub config: ConfigEcho,
    pub inputs: Vec<InputRecord>,
    pub methods: Vec<MethodRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
}

impl RunReport {
    /// True when at least one requested method produced an estimate; drives
    /// the process exit code.
    pub fn any_ok(&self) -> bool {
        self.methods.iter().any(|m| m.ok)
    }
}

/// Full configuration echo for reproducibility.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConfigEcho {
    pub methods: Vec<String>,
    /// Sparsity levels actually attempted ("sweep" lists them all).
    pub s0_mode: String,
    pub s0_levels: Vec<usize>,
    pub epsilon: f64,
    pub max_iters: usize,
    pub window: String,
    pub pad_factor: usize,
    pub l_keep: usize,
    pub tau_mg_divisor: u32,
    pub tau_w_policy: String,
    pub step2_order: String,
    pub step2_residual: String,
    pub step2_refit: bool,
    pub seed: u64,
    pub resample: bool,
    pub parallel: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InputRecord {
    pub role: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub sha256: String,
    pub n_steps: usize,
    pub f0_hz: f64,
    pub delta_f_hz: f64,
    pub f_if_hz: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ComplexRecord {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AtomRecord {
    pub delay_s: f64,
    pub amplitude: ComplexRecord,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EstimateRecord {
    pub epsilon_real: f64,
    pub tan_delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thickness_m: Option<f64>,
    pub reflection_coefficient: ComplexRecord,
    pub front_delay_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub back_delay_s: Option<f64>,
    /// False when the recovered permittivity fell below 1.
    pub physical: bool,
    pub residual_energy: f64,
    pub support_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harmonicity: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct S0Run {
    pub s0: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MethodRecord {
    pub method: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen_s0: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub s0_runs: Vec<S0Run>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residual_trace: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations_run: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<AtomRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MethodDelta {
    pub method: String,
    pub abs_epsilon_error: f64,
    pub abs_tan_delta_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_thickness_error: Option<f64>,
    pub support_size: usize,
}

/// Ground truth and per-method deltas, present for synthetic runs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GroundTruth {
    pub epsilon_real: f64,
    pub tan_delta: f64,
    pub thickness_m: f64,
    pub standoff_m: f64,
    pub n_bounces: usize,
    pub true_reflections: usize,
    pub noise_variance: f64,
    pub on_grid: bool,
    pub deltas: Vec<MethodDelta>,
}

/// Output format for [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Text,
}

/// Renders the report in the requested format.
pub fn render_report(report: &RunReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Text => render_text(report),
    }
}

/// Writes the rendered report to `out` (a path or stdout for `None`).
pub fn emit_report(report: &RunReport, format: ReportFormat, out: Option<&Path>) -> io::Result<()> {
    let rendered = render_report(report, format);
    match out {
        Some(path) => fs::write(path, rendered),
        None => {
            use io::Write;
            io::stdout().write_all(rendered.as_bytes())
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn render_csv(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(
        "method,ok,epsilon_real,tan_delta,thickness_m,reflection_re,reflection_im,front_delay_s,back_delay_s,chosen_s0,residual_energy,support_size,harmonicity,converged,iterations,physical,error\n",
    );
    for m in &report.methods {
        let e = m.estimate.as_ref();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            m.method,
            m.ok,
            fmt_opt(e.map(|e| e.epsilon_real)),
            fmt_opt(e.map(|e| e.tan_delta)),
            fmt_opt(e.and_then(|e| e.thickness_m)),
            fmt_opt(e.map(|e| e.reflection_coefficient.re)),
            fmt_opt(e.map(|e| e.reflection_coefficient.im)),
            fmt_opt(e.map(|e| e.front_delay_s)),
            fmt_opt(e.and_then(|e| e.back_delay_s)),
            m.chosen_s0.map(|s| s.to_string()).unwrap_or_default(),
            fmt_opt(e.map(|e| e.residual_energy)),
            e.map(|e| e.support_size.to_string()).unwrap_or_default(),
            fmt_opt(e.and_then(|e| e.harmonicity)),
            m.converged.map(|c| c.to_string()).unwrap_or_default(),
            m.iterations_run.map(|i| i.to_string()).unwrap_or_default(),
            e.map(|e| e.physical.to_string()).unwrap_or_default(),
            m.error.as_deref().unwrap_or("").replace(',', ";"),
        );
    }
    out
}

fn render_text(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sparse-mut report ({})", report.command);
    for input in &report.inputs {
        let _ = writeln!(
            out,
            "  {}: {} points, {:.6} GHz start, {:.3} MHz step [{}]",
            input.role,
            input.n_steps,
            input.f0_hz / 1e9,
            input.delta_f_hz / 1e6,
            &input.sha256[..16.min(input.sha256.len())],
        );
    }
    if let Some(gt) = &report.ground_truth {
        let _ = writeln!(
            out,
            "  ground truth: eps' = {:.4}, tan d = {:.4}, d = {:.4} mm{}",
            gt.epsilon_real,
            gt.tan_delta,
            gt.thickness_m * 1e3,
            if gt.on_grid { " (grid-aligned)" } else { "" },
        );
    }
    for m in &report.methods {
        let _ = writeln!(out, "method {}", m.method.to_uppercase());
        match (&m.estimate, &m.error) {
            (Some(e), _) => {
                let _ = writeln!(
                    out,
                    "  eps' = {:.4}   tan d = {:.4}   thickness = {}",
                    e.epsilon_real,
                    e.tan_delta,
                    e.thickness_m
                        .map(|t| format!("{:.4} mm", t * 1e3))
                        .unwrap_or_else(|| "n/a".into()),
                );
                let _ = writeln!(
                    out,
                    "  R = {:.4} {:+.4}j   front delay = {:.2} ps   support = {}   residual = {:.3e}{}",
                    e.reflection_coefficient.re,
                    e.reflection_coefficient.im,
                    e.front_delay_s * 1e12,
                    e.support_size,
                    e.residual_energy,
                    if e.physical { "" } else { "   [non-physical]" },
                );
                if let Some(h) = e.harmonicity {
                    let _ = writeln!(out, "  harmonicity = {h:.2}");
                }
                if let Some(s0) = m.chosen_s0 {
                    let _ = writeln!(out, "  chosen s0 = {s0}");
                }
            }
            (None, Some(err)) => {
                let _ = writeln!(out, "  failed: {err}");
            }
            (None, None) => {
                let _ = writeln!(out, "  no result");
            }
        }
    }
    if let Some(gt) = &report.ground_truth {
        for d in &gt.deltas {
            let _ = writeln!(
                out,
                "delta {}: |d eps'| = {:.4}, |d tan d| = {:.4}, thickness error = {}",
                d.method,
                d.abs_epsilon_error,
                d.abs_tan_delta_error,
                d.rel_thickness_error
                    .map(|r| format!("{:.2}%", r * 100.0))
                    .unwrap_or_else(|| "n/a".into()),
            );
        }
    }
    out
}

/// One plot-ready trace row set: delay, magnitude, phase.
pub fn write_trace_csv(path: &Path, rows: impl Iterator<Item = (f64, f64, f64)>) -> io::Result<()> {
    let mut out = String::from("delay_s,magnitude,phase\n");
    for (delay, magnitude, phase) in rows {
        let _ = writeln!(out, "{delay},{magnitude},{phase}");
    }
    fs::write(path, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_report() -> RunReport {
        RunReport {
            schema: REPORT_SCHEMA.into(),
            command: "synth".into(),
            config: ConfigEcho {
                methods: vec!["fd".into()],
                s0_mode: "sweep".into(),
                s0_levels: (2..=8).collect(),
                epsilon: 1e-2,
                max_iters: 10,
                window: "none".into(),
                pad_factor: 4,
                l_keep: 512,
                tau_mg_divisor: 50,
                tau_w_policy: "half-grid".into(),
                step2_order: "decreasing-magnitude".into(),
                step2_residual: "leave-one-out".into(),
                step2_refit: false,
                seed: 0,
                resample: false,
                parallel: false,
            },
            inputs: vec![],
            methods: vec![],
            ground_truth: None,
        }
    }

    #[test]
    fn empty_methods_report_is_valid_json() {
        let report = minimal_report();
        let text = render_report(&report, ReportFormat::Json);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["schema"], REPORT_SCHEMA);
        assert!(value["methods"].as_array().unwrap().is_empty());
    }

    #[test]
    fn json_round_trip_is_structurally_equal() {
        let mut report = minimal_report();
        report.methods.push(MethodRecord {
            method: "du".into(),
            ok: true,
            error: None,
            estimate: Some(EstimateRecord {
                epsilon_real: 2.6,
                tan_delta: 0.0044,
                thickness_m: Some(3.3e-3),
                reflection_coefficient: ComplexRecord {
                    re: -0.2344,
                    im: 0.001,
                },
                front_delay_s: 3.3e-10,
                back_delay_s: Some(3.66e-10),
                physical: true,
                residual_energy: 1.2e-5,
                support_size: 2,
                harmonicity: Some(1.0),
            }),
            chosen_s0: Some(2),
            s0_runs: vec![S0Run {
                s0: 2,
                residual_energy: Some(1.2e-5),
                error: None,
            }],
            residual_trace: vec![0.3, 1.2e-5],
            iterations_run: Some(2),
            converged: Some(true),
            atoms: vec![AtomRecord {
                delay_s: 3.3e-10,
                amplitude: ComplexRecord {
                    re: 0.2344,
                    im: -0.001,
                },
                magnitude: 0.2344,
            }],
        });
        let text = render_report(&report, ReportFormat::Json);
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn csv_has_one_row_per_method_plus_header() {
        let mut report = minimal_report();
        for name in ["fd", "du", "l2"] {
            report.methods.push(MethodRecord {
                method: name.into(),
                ok: false,
                error: Some("synthetic failure".into()),
                estimate: None,
                chosen_s0: None,
                s0_runs: vec![],
                residual_trace: vec![],
                iterations_run: None,
                converged: None,
                atoms: vec![],
            });
        }
        let text = render_report(&report, ReportFormat::Csv);
        assert_eq!(text.lines().count(), 4);
    }
}
