//! Command reports and their JSON and CSV renderings.
//!
//! JSON reports are objects `{schema_version, command, config, result}`.
//! The `model` command emits its operator document directly so that the
//! output can be fed back through `--op`. CSV column sets are fixed per
//! command and listed in the `*_COLUMNS` constants.

use std::collections::BTreeMap;

use serde::Serialize;
use topo1d::homotopy::{PathKind, PathReport, SampleMetrics, StageRecord};
use topo1d::index::{IndexValue, Route};
use topo1d::io::{serialize_document, OperatorDocument, SCHEMA_VERSION};
use topo1d::symmetry::{AzClass, RelationLabel};

use crate::config::{OutputFormat, RunConfig};

pub const CLASSIFY_COLUMNS: [&str; 5] = ["class", "declared_class", "matches_declared", "symmetry_tol", "hermiticity_residual"];
pub const INDEX_COLUMNS: [&str; 9] =
    ["invariant", "index", "route", "raw_trace", "ker_dim", "coker_dim", "tolerance", "cut", "resolution"];
pub const FLATTEN_COLUMNS: [&str; 4] = ["gap", "gap_tol", "unitarity_residual", "hermiticity_residual"];
pub const SAMPLE_COLUMNS: [&str; 5] = ["t", "unitarity", "symmetry", "gap", "index"];
pub const SWEEP_COLUMNS: [&str; 10] =
    ["model", "parameter", "value", "sites", "gap", "invariant", "index", "route", "tolerance", "status"];
pub const MODEL_COLUMNS: [&str; 5] = ["model", "sites", "fiber_dim", "declared_class", "gap"];

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: RunConfig,
    pub result: ReportBody,
}

impl Report {
    pub fn new(command: &'static str, config: &RunConfig, result: ReportBody) -> Self {
        Report { schema_version: SCHEMA_VERSION, command, config: config.clone(), result }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum ReportBody {
    Classify(ClassifyResult),
    Index(IndexReport),
    Flatten(FlattenResult),
    Path(PathResult),
    Sweep(SweepResult),
    Model(ModelResult),
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyResult {
    pub class: AzClass,
    pub declared_class: Option<AzClass>,
    pub matches_declared: Option<bool>,
    pub symmetry_tol: f64,
    pub hermiticity_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexReport {
    pub value: IndexValue,
    pub route: Route,
    pub raw_trace: Option<f64>,
    pub ker_dim: Option<usize>,
    pub coker_dim: Option<usize>,
    pub tolerance: f64,
    pub cut: i64,
    /// Momentum grid of the winding route.
    pub resolution: Option<usize>,
    pub relation: Option<RelationLabel>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlattenResult {
    pub gap: f64,
    pub gap_tol: f64,
    pub unitarity_residual: f64,
    pub hermiticity_residual: f64,
    pub operator: OperatorDocument,
}

/// Contour diagnostics of an endpoint in diagonal-plus-shift form.
#[derive(Debug, Clone, Serialize)]
pub struct ContourDiagnostics {
    pub quadrature: usize,
    pub error_estimate: f64,
    pub min_sigma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathResult {
    pub kind: PathKind,
    pub relation: Option<RelationLabel>,
    pub cut: i64,
    pub all_passed: bool,
    pub verification: PathReport,
    pub stages: Vec<StageRecord>,
    pub samples: Vec<SampleMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contour: Option<Vec<Option<ContourDiagnostics>>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub model: String,
    pub parameter: String,
    pub value: f64,
    pub sites: usize,
    pub gap: f64,
    pub invariant: String,
    pub index: Option<i64>,
    pub route: Route,
    pub tolerance: f64,
    /// `ok`, or the error that prevented the index.
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub model: String,
    pub parameter: String,
    pub fixed: BTreeMap<String, f64>,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelResult {
    pub model: String,
    pub gap: Option<f64>,
    pub document: OperatorDocument,
}

pub fn invariant_name(v: IndexValue) -> &'static str {
    match v {
        IndexValue::Z(_) => "z",
        IndexValue::Z2(_) => "z2",
    }
}

pub fn index_number(v: IndexValue) -> i64 {
    match v {
        IndexValue::Z(k) => k,
        IndexValue::Z2(k) => k as i64,
    }
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Shortest round-trip rendering, as in the JSON output.
fn float(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite float")
    } else {
        x.to_string()
    }
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn sample_rows(samples: &[SampleMetrics]) -> Vec<Vec<String>> {
    samples
        .iter()
        .map(|s| {
            vec![
                float(s.t),
                float(s.unitarity),
                s.symmetry.map(float).unwrap_or_default(),
                float(s.gap),
                opt(s.index.map(index_number)),
            ]
        })
        .collect()
}

/// Renders a report. Output depends only on the report, so identical runs
/// give identical bytes.
pub fn emit_results(report: &Report, format: OutputFormat) -> Vec<u8> {
    match format {
        OutputFormat::Json => {
            let mut out = match &report.result {
                ReportBody::Model(m) => serialize_document(&m.document).unwrap_or_else(|e| error_json(&e.to_string())),
                _ => serde_json::to_vec_pretty(report).unwrap_or_else(|e| error_json(&e.to_string())),
            };
            if out.last() != Some(&b'\n') {
                out.push(b'\n');
            }
            out
        }
        OutputFormat::Csv => match &report.result {
            ReportBody::Classify(c) => csv_bytes(
                &CLASSIFY_COLUMNS,
                vec![vec![
                    c.class.name().to_string(),
                    opt(c.declared_class.map(|d| d.name())),
                    opt(c.matches_declared),
                    float(c.symmetry_tol),
                    float(c.hermiticity_residual),
                ]],
            ),
            ReportBody::Index(i) => csv_bytes(
                &INDEX_COLUMNS,
                vec![vec![
                    invariant_name(i.value).to_string(),
                    index_number(i.value).to_string(),
                    route_name(i.route).to_string(),
                    i.raw_trace.map(float).unwrap_or_default(),
                    opt(i.ker_dim),
                    opt(i.coker_dim),
                    float(i.tolerance),
                    i.cut.to_string(),
                    opt(i.resolution),
                ]],
            ),
            ReportBody::Flatten(f) => csv_bytes(
                &FLATTEN_COLUMNS,
                vec![vec![float(f.gap), float(f.gap_tol), float(f.unitarity_residual), float(f.hermiticity_residual)]],
            ),
            ReportBody::Path(p) => csv_bytes(&SAMPLE_COLUMNS, sample_rows(&p.samples)),
            ReportBody::Sweep(s) => csv_bytes(
                &SWEEP_COLUMNS,
                s.rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.model.clone(),
                            r.parameter.clone(),
                            float(r.value),
                            r.sites.to_string(),
                            float(r.gap),
                            r.invariant.clone(),
                            opt(r.index),
                            route_name(r.route).to_string(),
                            float(r.tolerance),
                            r.status.clone(),
                        ]
                    })
                    .collect(),
            ),
            ReportBody::Model(m) => {
                let w = m.document.window;
                csv_bytes(
                    &MODEL_COLUMNS,
                    vec![vec![
                        m.model.clone(),
                        (w.max - w.min).to_string(),
                        m.document.fiber_dim.to_string(),
                        opt(m.document.declared_class.map(|c| c.name())),
                        m.gap.map(float).unwrap_or_default(),
                    ]],
                )
            }
        },
    }
}

pub fn route_name(r: Route) -> &'static str {
    match r {
        Route::Trace => "trace",
        Route::Kernel => "kernel",
        Route::Winding => "winding",
    }
}

fn error_json(msg: &str) -> Vec<u8> {
    serde_json::to_vec(&serde_json::json!({ "schema_version": SCHEMA_VERSION, "error": msg })).unwrap_or_default()
}
