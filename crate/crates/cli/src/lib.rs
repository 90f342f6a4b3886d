//! Front end for the `topo1d` toolkit: argument model, dispatch to the core
//! operations and report emission.

pub mod config;
pub mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use topo1d::homotopy::{connect_saus, connect_unitaries, default_cut, sample_metrics, verify_path, HomotopyPath, PathKind};
use topo1d::index::{index_kernel, index_trace, index_winding, index_z2, index_z2_with_tol, ClassCheck, IndexResult, Route};
use topo1d::io::{
    parse_document, parse_operator, serialize_document, OperatorDocument, PathDocument, SymmetryDocument,
};
use topo1d::lattice::{half_line_projection, make_shift, Boundary, LatticeOperator, Window};
use topo1d::linalg::{self, CMat};
use topo1d::models::{disordered, kitaev_chain, ssh, ModelInstance};
use topo1d::spectral::{flatten, polar, spectral_gap};
use topo1d::stummel::{abr_connect, stummel_idempotents, ABRPair};
use topo1d::symmetry::{chiral_blocks, classify_az, default_symmetry_tol, AntiUnitary, RelationLabel, SymmetryTriple};
use topo1d::{Error, Result};

use config::{OutputFormat, RunConfig};
use report::{
    ClassifyResult, ContourDiagnostics, FlattenResult, IndexReport, ModelResult, PathResult, Report, ReportBody,
    SweepResult, SweepRow,
};

#[derive(Parser, Debug, Clone)]
#[command(name = "topo1d", version, about = "Indices, classification and homotopies of 1D lattice operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Primary tolerance of the command: symmetry tolerance for classify,
    /// kernel tolerance for index, gap tolerance for flatten, sweep and path.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Samples along constructed paths, endpoints included.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Contour nodes for the diagonal-plus-shift idempotents; momentum grid
    /// of the winding route.
    #[arg(long, global = true)]
    pub quadrature: Option<usize>,
    /// Seed for disorder realizations.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RouteArg {
    Trace,
    Kernel,
    Winding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PathKindArg {
    Unitary,
    Sau,
    Abr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelName {
    Ssh,
    Kitaev,
    Shift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Cyclic,
    Open,
}

fn parse_relation(s: &str) -> std::result::Result<RelationLabel, String> {
    RelationLabel::parse(s).ok_or_else(|| {
        let names: Vec<&str> = RelationLabel::ALL.iter().map(|r| r.name()).collect();
        format!("unknown relation {s:?}; expected one of {}", names.join(", "))
    })
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Tenfold label of a self-adjoint operator.
    Classify {
        #[arg(long)]
        op: PathBuf,
        /// Symmetry document; defaults to the one embedded in the operator.
        #[arg(long)]
        sym: Option<PathBuf>,
    },
    /// Integer or Z2 index at a half-line cut.
    Index {
        #[arg(long)]
        op: PathBuf,
        #[arg(long)]
        sym: Option<PathBuf>,
        #[arg(long, value_enum)]
        route: Option<RouteArg>,
        /// First site of the half line; defaults to 1.
        #[arg(long, allow_negative_numbers = true)]
        cut: Option<i64>,
        /// Relation for a Z2 index (star_quaternionic or i_real).
        #[arg(long, value_parser = parse_relation)]
        relation: Option<RelationLabel>,
        /// Flatten a gapped Hamiltonian to `sgn H` first.
        #[arg(long)]
        flatten: bool,
    },
    /// Flat unitary `sgn H` of a gapped Hamiltonian.
    Flatten {
        #[arg(long)]
        op: PathBuf,
        /// Also write the flattened operator document here.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Construct and verify a path between two operators.
    Path {
        /// Start and end operators, in this order.
        #[arg(long, required = true, num_args = 1)]
        op: Vec<PathBuf>,
        #[arg(long)]
        sym: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PathKindArg::Unitary)]
        kind: PathKindArg,
        #[arg(long, value_parser = parse_relation)]
        relation: Option<RelationLabel>,
        #[arg(long, allow_negative_numbers = true)]
        cut: Option<i64>,
        /// Also write the sampled path document here.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Re-verify a saved path document.
    Verify {
        #[arg(long)]
        path: PathBuf,
    },
    /// Parameter sweep of a model: gap and index per point.
    Sweep {
        #[arg(long, value_enum)]
        model: ModelName,
        /// `name=start:stop:step`.
        #[arg(long, allow_hyphen_values = true)]
        param: String,
        /// Fixed parameters `name=value`.
        #[arg(long = "set", allow_hyphen_values = true)]
        set: Vec<String>,
        #[arg(long, default_value_t = 64)]
        sites: usize,
    },
    /// Emit a model operator document.
    Model {
        #[arg(long, value_enum)]
        name: ModelName,
        #[arg(long = "set", allow_hyphen_values = true)]
        set: Vec<String>,
        #[arg(long, default_value_t = 16)]
        sites: usize,
        #[arg(long, value_enum, default_value_t = BoundaryArg::Cyclic)]
        boundary: BoundaryArg,
        /// Banded entries instead of dense.
        #[arg(long)]
        banded: bool,
        /// Also write the model's symmetry document here.
        #[arg(long)]
        save_sym: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Classify { .. } => "classify",
            Command::Index { .. } => "index",
            Command::Flatten { .. } => "flatten",
            Command::Path { .. } => "path",
            Command::Verify { .. } => "verify",
            Command::Sweep { .. } => "sweep",
            Command::Model { .. } => "model",
        }
    }
}

/// Resolved configuration, with `--tol` routed to the command's primary
/// tolerance.
pub fn run_config(cli: &Cli) -> Result<RunConfig> {
    let g = &cli.global;
    let mut cfg = RunConfig { quadrature: g.quadrature, seed: g.seed, format: g.format, ..RunConfig::default() };
    if let Some(s) = g.samples {
        cfg.samples = s;
    }
    if let Some(t) = g.tol {
        match cli.command {
            Command::Classify { .. } => cfg.symmetry_tol = Some(t),
            Command::Index { .. } => cfg.kernel_tol = t,
            _ => cfg.gap_tol = t,
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_operator(path: &Path) -> Result<(OperatorDocument, LatticeOperator)> {
    let doc = parse_operator(&read(path)?)?;
    let op = doc.to_operator()?;
    Ok((doc, op))
}

/// Symmetry from `--sym`, else the one embedded in the operator document.
fn load_symmetry(sym: Option<&PathBuf>, doc: &OperatorDocument) -> Result<Option<SymmetryTriple>> {
    match sym {
        Some(p) => Ok(Some(parse_document::<SymmetryDocument>(&read(p)?)?.to_triple()?)),
        None => doc.symmetry_triple(),
    }
}

/// Anti-unitary carrying `relation`: particle-hole for the imaginary
/// relations, time reversal otherwise.
fn anti_unitary_for(sym: Option<&SymmetryTriple>, relation: RelationLabel) -> Result<Option<AntiUnitary>> {
    if relation == RelationLabel::Complex {
        return Ok(None);
    }
    let f = sym.and_then(|s| match relation {
        RelationLabel::IReal | RelationLabel::IQuaternionic => s.xi.clone(),
        _ => s.theta.clone(),
    });
    f.map(Some)
        .ok_or_else(|| Error::Usage(format!("the {} relation needs a symmetry document", relation.name())))
}

fn cut_for(cut: Option<i64>, w: &Window) -> i64 {
    cut.unwrap_or_else(|| default_cut(w))
}

pub fn run(cli: &Cli) -> Result<Report> {
    let cfg = run_config(cli)?;
    let body = match &cli.command {
        Command::Classify { op, sym } => classify(&cfg, op, sym.as_ref())?,
        Command::Index { op, sym, route, cut, relation, flatten } => {
            index(&cfg, op, sym.as_ref(), *route, *cut, *relation, *flatten, cli.global.tol)?
        }
        Command::Flatten { op, save } => flatten_cmd(&cfg, op, save.as_deref())?,
        Command::Path { op, sym, kind, relation, cut, save } => {
            path_cmd(&cfg, op, sym.as_ref(), *kind, *relation, *cut, save.as_deref())?
        }
        Command::Verify { path } => verify_cmd(path)?,
        Command::Sweep { model, param, set, sites } => sweep(&cfg, *model, param, set, *sites)?,
        Command::Model { name, set, sites, boundary, banded, save_sym } => {
            model_cmd(&cfg, *name, set, *sites, *boundary, *banded, save_sym.as_deref())?
        }
    };
    Ok(Report::new(cli.command.name(), &cfg, body))
}

/// Error for reports that were produced but record a failed check.
pub fn report_status(report: &Report) -> Result<()> {
    if let ReportBody::Path(p) = &report.result {
        if !p.all_passed {
            let names: Vec<&str> = p.verification.failures().iter().map(|c| c.name.as_str()).collect();
            return Err(Error::PathVerificationFailed(names.join(", ")));
        }
    }
    Ok(())
}

/// Output of a run: bytes for standard output (empty with `--out`) and the
/// status of the checks recorded in the report.
pub struct Execution {
    pub stdout: Vec<u8>,
    pub status: Result<()>,
}

/// Runs the command and writes the report to `--out` when given. Failed
/// checks do not suppress the report.
pub fn execute(cli: &Cli) -> Result<Execution> {
    let report = run(cli)?;
    let bytes = report::emit_results(&report, cli.global.format);
    let stdout = match &cli.global.out {
        Some(p) => {
            write(p, &bytes)?;
            Vec::new()
        }
        None => bytes,
    };
    Ok(Execution { stdout, status: report_status(&report) })
}

fn classify(cfg: &RunConfig, op: &Path, sym: Option<&PathBuf>) -> Result<ReportBody> {
    let (doc, h) = load_operator(op)?;
    let triple = load_symmetry(sym, &doc)?.unwrap_or_default();
    let tol = cfg.symmetry_tol.unwrap_or_else(|| default_symmetry_tol(&h));
    let class = classify_az(&h, &triple, tol)?;
    Ok(ReportBody::Classify(ClassifyResult {
        class,
        declared_class: doc.declared_class,
        matches_declared: doc.declared_class.map(|d| d == class),
        symmetry_tol: tol,
        hermiticity_residual: linalg::hermiticity_residual(h.matrix()),
    }))
}

/// `(l, S_l)` of a translation-invariant operator on a cyclic window.
fn symbol_of(op: &LatticeOperator) -> Result<Vec<(i64, CMat)>> {
    if op.window().boundary != Boundary::Cyclic {
        return Err(Error::Usage("the winding route needs a cyclic window".into()));
    }
    let tol = 1e-12 * op.norm().max(1.0);
    op.hoppings()
        .into_iter()
        .map(|(l, blocks)| {
            if blocks.iter().any(|b| linalg::max_abs(&(b - &blocks[0])) > tol) {
                return Err(Error::Usage(format!("the winding route needs translation invariance (offset {l})")));
            }
            Ok((l, blocks[0].clone()))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn index(
    cfg: &RunConfig,
    op: &Path,
    sym: Option<&PathBuf>,
    route: Option<RouteArg>,
    cut: Option<i64>,
    relation: Option<RelationLabel>,
    flat: bool,
    tol: Option<f64>,
) -> Result<ReportBody> {
    let (doc, mut a) = load_operator(op)?;
    if flat {
        a = flatten(&a, cfg.gap_tol)?;
    }
    let cut = cut_for(cut, &a.window());
    let lambda = half_line_projection(a.window(), a.fiber_dim(), cut)?;
    let z2 = relation.filter(|r| *r != RelationLabel::Complex);
    let mut resolution = None;
    let result: IndexResult = match (z2, route) {
        (Some(r), None | Some(RouteArg::Kernel)) => {
            let triple = load_symmetry(sym, &doc)?;
            let f = anti_unitary_for(triple.as_ref(), r)?.expect("non-complex relation");
            let class = ClassCheck { f, relation: r };
            match tol {
                Some(t) => index_z2_with_tol(&a, &lambda, &class, t)?,
                None => index_z2(&a, &lambda, &class)?,
            }
        }
        (Some(_), Some(other)) => {
            return Err(Error::Usage(format!("Z2 indices use the kernel route, not {other:?}")));
        }
        (None, None | Some(RouteArg::Trace)) => index_trace(&a, &lambda)?,
        (None, Some(RouteArg::Kernel)) => index_kernel(&a, &lambda, cfg.kernel_tol, true)?,
        (None, Some(RouteArg::Winding)) => {
            let m = cfg.winding_resolution();
            resolution = Some(m);
            index_winding(&symbol_of(&a)?, m)?
        }
    };
    Ok(ReportBody::Index(IndexReport {
        value: result.value,
        route: result.route,
        raw_trace: result.raw_trace,
        ker_dim: result.ker_dim,
        coker_dim: result.coker_dim,
        tolerance: result.tolerance_used,
        cut,
        resolution,
        relation: z2,
        notes: result.notes,
    }))
}

fn flatten_cmd(cfg: &RunConfig, op: &Path, save: Option<&Path>) -> Result<ReportBody> {
    let (doc, h) = load_operator(op)?;
    let u = flatten(&h, cfg.gap_tol)?;
    let mut out = OperatorDocument::dense(&u).with_class(doc.declared_class);
    out.symmetry = doc.symmetry.clone();
    if let Some(p) = save {
        write(p, &serialize_document(&out)?)?;
    }
    Ok(ReportBody::Flatten(FlattenResult {
        gap: spectral_gap(&h)?,
        gap_tol: cfg.gap_tol,
        unitarity_residual: linalg::unitarity_residual(u.matrix()),
        hermiticity_residual: linalg::hermiticity_residual(u.matrix()),
        operator: out,
    }))
}

fn contour_diagnostics(op: &LatticeOperator, m: usize) -> Option<ContourDiagnostics> {
    let pair = ABRPair::from_operator(op, 0.0).ok()?;
    let s = stummel_idempotents(&pair.a(), &pair.g(), m).ok()?;
    Some(ContourDiagnostics { quadrature: m, error_estimate: s.error_estimate, min_sigma: s.min_sigma })
}

fn path_result(path: &HomotopyPath, relation: Option<RelationLabel>) -> PathResult {
    let verification = verify_path(path);
    PathResult {
        kind: path.constraints.kind,
        relation,
        cut: path.constraints.cut,
        all_passed: verification.all_passed(),
        verification,
        stages: path.construction_log.clone(),
        samples: sample_metrics(path),
        contour: None,
    }
}

fn path_cmd(
    cfg: &RunConfig,
    ops: &[PathBuf],
    sym: Option<&PathBuf>,
    kind: PathKindArg,
    relation: Option<RelationLabel>,
    cut: Option<i64>,
    save: Option<&Path>,
) -> Result<ReportBody> {
    if ops.len() != 2 {
        return Err(Error::Usage(format!("path needs two --op files, got {}", ops.len())));
    }
    let (doc, a) = load_operator(&ops[0])?;
    let (_, b) = load_operator(&ops[1])?;
    let relation_used = relation.unwrap_or(RelationLabel::Complex);
    let triple = load_symmetry(sym, &doc)?;
    let f = anti_unitary_for(triple.as_ref(), relation_used)?;
    let cut = cut_for(cut, &a.window());
    let lambda = half_line_projection(a.window(), a.fiber_dim(), cut)?;
    let path = match kind {
        PathKindArg::Unitary => connect_unitaries(&a, &b, &lambda, f.as_ref(), relation_used, cfg.samples)?,
        PathKindArg::Sau => connect_saus(&a, &b, &lambda, f.as_ref(), relation_used, cfg.samples)?,
        PathKindArg::Abr => {
            if relation.is_some() {
                return Err(Error::Usage("diagonal-plus-shift paths take no relation".into()));
            }
            abr_connect(&a, &b, cfg.samples)?
        }
    };
    if let Some(p) = save {
        write(p, &serialize_document(&PathDocument::from_path(&path))?)?;
    }
    let mut result = path_result(&path, (kind != PathKindArg::Abr).then_some(relation_used));
    if kind == PathKindArg::Abr {
        let m = cfg.contour_quadrature();
        result.contour = Some(vec![contour_diagnostics(&a, m), contour_diagnostics(&b, m)]);
    }
    Ok(ReportBody::Path(result))
}

fn verify_cmd(file: &Path) -> Result<ReportBody> {
    let doc: PathDocument = parse_document(&read(file)?)?;
    let path = doc.to_path()?;
    let relation = path.constraints.symmetry.as_ref().map(|(_, r)| *r);
    let relation = match path.constraints.kind {
        PathKind::Invertible => relation,
        _ => Some(relation.unwrap_or(RelationLabel::Complex)),
    };
    Ok(ReportBody::Path(path_result(&path, relation)))
}

fn parse_assignment(s: &str) -> Result<(String, &str)> {
    let (k, v) = s.split_once('=').ok_or_else(|| Error::Usage(format!("expected name=value, got {s:?}")))?;
    Ok((k.trim().to_string(), v.trim()))
}

fn parse_number(s: &str, what: &str) -> Result<f64> {
    let x: f64 = s.parse().map_err(|_| Error::Usage(format!("{what}: {s:?} is not a number")))?;
    if !x.is_finite() {
        return Err(Error::Usage(format!("{what}: {s:?} is not finite")));
    }
    Ok(x)
}

/// Grid `start, start + step, ...` up to `stop` inclusive; empty when
/// `stop < start`.
pub fn parse_range(spec: &str) -> Result<(String, Vec<f64>)> {
    let (name, range) = parse_assignment(spec)?;
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Usage(format!("expected name=start:stop:step, got {spec:?}")));
    }
    let start = parse_number(parts[0], &name)?;
    let stop = parse_number(parts[1], &name)?;
    let step = parse_number(parts[2], &name)?;
    if step <= 0.0 {
        return Err(Error::Usage(format!("{name}: step must be positive")));
    }
    let count = if stop < start { 0 } else { ((stop - start) / step + 1e-9).floor() as usize + 1 };
    Ok((name, (0..count).map(|i| start + i as f64 * step).collect()))
}

fn model_defaults(model: ModelName) -> BTreeMap<String, f64> {
    let pairs: &[(&str, f64)] = match model {
        ModelName::Ssh => &[("v", 0.5), ("w", 1.0), ("disorder", 0.0)],
        ModelName::Kitaev => &[("mu", 1.0), ("t", 1.0), ("delta", 1.0), ("disorder", 0.0)],
        ModelName::Shift => &[("k", 1.0)],
    };
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn model_params(model: ModelName, set: &[String]) -> Result<BTreeMap<String, f64>> {
    let mut params = model_defaults(model);
    for s in set {
        let (k, v) = parse_assignment(s)?;
        let x = parse_number(v, &k)?;
        match params.get_mut(&k) {
            Some(slot) => *slot = x,
            None => return Err(unknown_parameter(model, &k)),
        }
    }
    Ok(params)
}

fn unknown_parameter(model: ModelName, name: &str) -> Error {
    let known: Vec<String> = model_defaults(model).into_keys().collect();
    Error::Usage(format!("unknown parameter {name:?}; known: {}", known.join(", ")))
}

fn build_model(model: ModelName, p: &BTreeMap<String, f64>, window: Window, seed: u64) -> Result<ModelInstance> {
    let base = match model {
        ModelName::Ssh => ssh(p["v"], p["w"], window)?,
        ModelName::Kitaev => kitaev_chain(p["mu"], p["t"], p["delta"], window)?,
        ModelName::Shift => return Err(Error::Usage("the shift is not a Hamiltonian model".into())),
    };
    match p.get("disorder") {
        Some(&d) if d != 0.0 => disordered(&base, d, seed),
        _ => Ok(base),
    }
}

/// Gap of one sweep point, and its index when the gap is open.
fn sweep_point(model: ModelName, inst: &ModelInstance, gap_tol: f64) -> Result<(f64, Result<IndexResult>)> {
    let h = &inst.hamiltonian;
    let gap = spectral_gap(h)?;
    if gap <= gap_tol {
        return Ok((gap, Err(Error::GapClosed(gap))));
    }
    let w = h.window();
    let index = match model {
        ModelName::Ssh => {
            let pi = inst.symmetry.pi.clone().expect("SSH carries a chiral symmetry");
            chiral_blocks(h, &pi).and_then(|s| {
                index_trace(&polar(&s), &half_line_projection(w, s.fiber_dim(), default_cut(&w))?)
            })
        }
        _ => flatten(h, gap_tol).and_then(|u| {
            let xi = inst.symmetry.xi.clone().expect("the Kitaev chain carries particle-hole symmetry");
            let lambda = half_line_projection(w, u.fiber_dim(), default_cut(&w))?;
            index_z2(&u, &lambda, &ClassCheck { f: xi, relation: RelationLabel::IReal })
        }),
    };
    Ok((gap, index))
}

fn sweep(cfg: &RunConfig, model: ModelName, param: &str, set: &[String], sites: usize) -> Result<ReportBody> {
    if model == ModelName::Shift {
        return Err(Error::Usage("the shift has no parameter sweep".into()));
    }
    let fixed = model_params(model, set)?;
    let (name, values) = parse_range(param)?;
    if !fixed.contains_key(&name) {
        return Err(unknown_parameter(model, &name));
    }
    let window = Window::centered(sites, Boundary::Cyclic)?;
    let model_name = model_label(model).to_string();
    let (invariant, route) = match model {
        ModelName::Ssh => ("z", Route::Trace),
        _ => ("z2", Route::Kernel),
    };
    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&value| {
            let mut p = fixed.clone();
            p.insert(name.clone(), value);
            let point = build_model(model, &p, window, cfg.seed).and_then(|inst| sweep_point(model, &inst, cfg.gap_tol));
            let (gap, index, tolerance, status) = match point {
                Ok((gap, Ok(r))) => (gap, Some(report::index_number(r.value)), r.tolerance_used, "ok".to_string()),
                Ok((gap, Err(e))) => (gap, None, cfg.gap_tol, e.to_string()),
                Err(e) => (f64::NAN, None, cfg.gap_tol, e.to_string()),
            };
            SweepRow {
                model: model_name.clone(),
                parameter: name.clone(),
                value,
                sites,
                gap,
                invariant: invariant.to_string(),
                index,
                route,
                tolerance,
                status,
            }
        })
        .collect();
    Ok(ReportBody::Sweep(SweepResult { model: model_name, parameter: name, fixed, rows }))
}

fn model_label(model: ModelName) -> &'static str {
    match model {
        ModelName::Ssh => "ssh",
        ModelName::Kitaev => "kitaev",
        ModelName::Shift => "shift",
    }
}

fn model_cmd(
    cfg: &RunConfig,
    name: ModelName,
    set: &[String],
    sites: usize,
    boundary: BoundaryArg,
    banded: bool,
    save_sym: Option<&Path>,
) -> Result<ReportBody> {
    let params = model_params(name, set)?;
    let boundary = match boundary {
        BoundaryArg::Cyclic => Boundary::Cyclic,
        BoundaryArg::Open => Boundary::Open,
    };
    let window = Window::centered(sites, boundary)?;
    let encode = |op: &LatticeOperator| if banded { OperatorDocument::banded(op) } else { OperatorDocument::dense(op) };
    let (doc, gap, triple) = if name == ModelName::Shift {
        let k = params["k"];
        if k.fract() != 0.0 {
            return Err(Error::Usage(format!("shift power must be an integer, got {k}")));
        }
        (encode(&make_shift(window, 1, k as i64)?), None, None)
    } else {
        let inst = build_model(name, &params, window, cfg.seed)?;
        let gap = spectral_gap(&inst.hamiltonian)?;
        let doc = encode(&inst.hamiltonian).with_symmetry(&inst.symmetry).with_class(Some(inst.declared_class));
        (doc, Some(gap), Some(inst.symmetry))
    };
    if let Some(p) = save_sym {
        let t = triple.ok_or_else(|| Error::Usage("the shift has no symmetry document".into()))?;
        write(p, &serialize_document(&SymmetryDocument::from_triple(&t))?)?;
    }
    Ok(ReportBody::Model(ModelResult { model: model_label(name).to_string(), gap, document: doc }))
}
