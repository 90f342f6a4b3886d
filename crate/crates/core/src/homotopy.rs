//! Constructive homotopies between local unitaries and between self-adjoint
//! unitaries, with a sample-wise verifier.
//!
//! Every path is assembled from named stages. A stage is a closed-form
//! family `s -> O(s)` on `[0, 1]`; the global sample budget is split across
//! stages in proportion to their operator-norm length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{self, ClassCheck, IndexValue};
use crate::lattice::{half_line_projection, Boundary, LatticeOperator, Window};
use crate::linalg::{self, CMat, C64};
use crate::spectral::{compress, split_indices};
use crate::symmetry::{self, AntiUnitary, RelationLabel};

pub const DEFAULT_SAMPLES: usize = 65;
pub const DEFAULT_GAP_FLOOR: f64 = 1e-3;
pub const DEFAULT_LOCALITY_BUDGET: f64 = 0.05;
pub const DEFAULT_CONTINUITY_BUDGET: f64 = 0.5;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;
const ENDPOINT_TOL: f64 = 1e-8;
/// Eigenphases this close to `pi` are treated as exactly `-1`.
const MINUS_ONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Unitary,
    Sau,
    Invertible,
}

#[derive(Debug, Clone)]
pub struct PathConstraints {
    pub kind: PathKind,
    pub symmetry: Option<(AntiUnitary, RelationLabel)>,
    pub expected_index: Option<IndexValue>,
    /// Cut of the half-line projection used for locality and index checks.
    pub cut: i64,
    pub gap_floor: f64,
    /// Allowed excess of the far-field commutator over the worse endpoint.
    pub locality_budget: f64,
    pub continuity_budget: f64,
    pub residual_tol: f64,
}

impl PathConstraints {
    pub fn new(kind: PathKind, cut: i64) -> Self {
        PathConstraints {
            kind,
            symmetry: None,
            expected_index: None,
            cut,
            gap_floor: DEFAULT_GAP_FLOOR,
            locality_budget: DEFAULT_LOCALITY_BUDGET,
            continuity_budget: DEFAULT_CONTINUITY_BUDGET,
            residual_tol: DEFAULT_RESIDUAL_TOL,
        }
    }

    pub fn with_symmetry(mut self, f: Option<&AntiUnitary>, relation: RelationLabel) -> Self {
        self.symmetry = f.map(|f| (f.clone(), relation));
        self
    }

    pub fn with_index(mut self, value: Option<IndexValue>) -> Self {
        self.expected_index = value;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone)]
pub struct HomotopyPath {
    pub samples: Vec<(f64, LatticeOperator)>,
    pub constraints: PathConstraints,
    pub construction_log: Vec<StageRecord>,
    /// Intended endpoints, checked by [`verify_path`] when present.
    pub endpoints: Option<(LatticeOperator, LatticeOperator)>,
}

impl HomotopyPath {
    pub fn start(&self) -> &LatticeOperator {
        &self.samples[0].1
    }

    pub fn end(&self) -> &LatticeOperator {
        &self.samples[self.samples.len() - 1].1
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same samples traversed backwards.
    pub fn reversed(&self) -> HomotopyPath {
        let samples = self.samples.iter().rev().map(|(t, o)| (1.0 - t, o.clone())).collect();
        let construction_log = self
            .construction_log
            .iter()
            .rev()
            .map(|r| StageRecord { name: format!("{} (reversed)", r.name), t_start: 1.0 - r.t_end, t_end: 1.0 - r.t_start })
            .collect();
        let endpoints = self.endpoints.as_ref().map(|(a, b)| (b.clone(), a.clone()));
        HomotopyPath { samples, constraints: self.constraints.clone(), construction_log, endpoints }
    }

    /// Joins `self` and `next` at their common endpoint, rescaling both to
    /// half of the unit interval.
    pub fn concat(&self, next: &HomotopyPath) -> Result<HomotopyPath> {
        let gap = linalg::norm2(&(self.end().matrix() - next.start().matrix()));
        if gap > ENDPOINT_TOL {
            return Err(Error::ShapeMismatch(format!("paths do not meet: joint gap {gap:.3e}")));
        }
        let mut samples: Vec<(f64, LatticeOperator)> = self.samples.iter().map(|(t, o)| (0.5 * t, o.clone())).collect();
        samples.extend(next.samples.iter().skip(1).map(|(t, o)| (0.5 + 0.5 * t, o.clone())));
        let mut construction_log: Vec<StageRecord> = self
            .construction_log
            .iter()
            .map(|r| StageRecord { name: r.name.clone(), t_start: 0.5 * r.t_start, t_end: 0.5 * r.t_end })
            .collect();
        construction_log.extend(next.construction_log.iter().map(|r| StageRecord {
            name: r.name.clone(),
            t_start: 0.5 + 0.5 * r.t_start,
            t_end: 0.5 + 0.5 * r.t_end,
        }));
        let endpoints = match (&self.endpoints, &next.endpoints) {
            (Some((a, _)), Some((_, b))) => Some((a.clone(), b.clone())),
            _ => None,
        };
        Ok(HomotopyPath { samples, constraints: self.constraints.clone(), construction_log, endpoints })
    }
}

/// `e^{i tau H}` for a fixed Hermitian `H`, diagonalized once.
#[derive(Clone)]
pub(crate) struct ExpFamily {
    q: CMat,
    vals: Vec<f64>,
}

impl ExpFamily {
    pub(crate) fn new(h: &CMat) -> Self {
        let (vals, q) = linalg::herm_eig(h);
        ExpFamily { q, vals }
    }

    pub(crate) fn at(&self, tau: f64) -> CMat {
        let d: Vec<C64> = self.vals.iter().map(|&x| C64::from_polar(1.0, tau * x)).collect();
        linalg::reassemble(&self.q, &d)
    }

    pub(crate) fn norm(&self) -> f64 {
        self.vals.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

pub(crate) struct Stage {
    pub(crate) name: String,
    pub(crate) length: f64,
    pub(crate) eval: Box<dyn Fn(f64) -> CMat>,
}

impl Stage {
    pub(crate) fn new(name: impl Into<String>, length: f64, eval: impl Fn(f64) -> CMat + 'static) -> Self {
        Stage { name: name.into(), length, eval: Box::new(eval) }
    }

    /// Length estimated from the variation over a few sample points.
    pub(crate) fn measured(name: impl Into<String>, eval: impl Fn(f64) -> CMat + 'static) -> Self {
        let pts = 16;
        let mut prev = eval(0.0);
        let mut len = 0.0;
        for j in 1..=pts {
            let cur = eval(j as f64 / pts as f64);
            len += linalg::norm2(&(&cur - &prev));
            prev = cur;
        }
        Stage::new(name, len, eval)
    }

    pub(crate) fn reversed(self) -> Self {
        let f = self.eval;
        Stage { name: format!("{} (reversed)", self.name), length: self.length, eval: Box::new(move |s| f(1.0 - s)) }
    }
}

/// `s -> e^{i(1-s)H} right`, running from `e^{iH} right` to `right`.
fn unwind_stage(name: &str, h: &CMat, right: CMat) -> Stage {
    let fam = ExpFamily::new(h);
    let len = fam.norm();
    Stage::new(name, len, move |s| fam.at(1.0 - s) * &right)
}

/// `s -> K_s U K_s^*` with `K_s = e^{isH}`.
fn conjugation_stage(name: &str, h: &CMat, u: CMat) -> Stage {
    let fam = ExpFamily::new(h);
    let len = 2.0 * fam.norm();
    Stage::new(name, len, move |s| {
        let k = fam.at(s);
        let m = &k * &u * k.adjoint();
        (&m + m.adjoint()) * linalg::r(0.5)
    })
}

fn split_intervals(lengths: &[f64], intervals: usize) -> Vec<usize> {
    let m = lengths.len();
    let total: f64 = lengths.iter().sum();
    let ideal: Vec<f64> = if total > 0.0 {
        lengths.iter().map(|l| intervals as f64 * l / total).collect()
    } else {
        vec![intervals as f64 / m as f64; m]
    };
    let mut alloc: Vec<usize> = ideal.iter().map(|x| (x.floor() as usize).max(1)).collect();
    while alloc.iter().sum::<usize>() > intervals {
        let j = (0..m).filter(|&j| alloc[j] > 1).max_by(|&a, &b| alloc[a].cmp(&alloc[b])).unwrap();
        alloc[j] -= 1;
    }
    while alloc.iter().sum::<usize>() < intervals {
        let j = (0..m)
            .max_by(|&a, &b| (ideal[a] - alloc[a] as f64).partial_cmp(&(ideal[b] - alloc[b] as f64)).unwrap())
            .unwrap();
        alloc[j] += 1;
    }
    alloc
}

pub(crate) fn assemble(
    window: Window,
    fiber_dim: usize,
    stages: Vec<Stage>,
    samples: usize,
    constraints: PathConstraints,
    endpoints: Option<(CMat, CMat)>,
) -> Result<HomotopyPath> {
    let mut stages: Vec<Stage> = stages;
    if stages.is_empty() {
        return Err(Error::InvalidParameter("a path needs at least one stage".into()));
    }
    if stages.iter().any(|s| s.length > 1e-13) {
        stages.retain(|s| s.length > 1e-13);
    } else {
        stages.truncate(1);
    }
    let intervals = samples.max(2).saturating_sub(1).max(stages.len());
    let lengths: Vec<f64> = stages.iter().map(|s| s.length).collect();
    let alloc = split_intervals(&lengths, intervals);
    let op = |m: CMat| LatticeOperator::new(window, fiber_dim, m);
    let mut out = Vec::with_capacity(intervals + 1);
    let mut log = Vec::with_capacity(stages.len());
    out.push((0.0, op((stages[0].eval)(0.0))?));
    let mut k = 0usize;
    for (stage, &n) in stages.iter().zip(&alloc) {
        let t0 = k as f64 / intervals as f64;
        for j in 1..=n {
            let t = (k + j) as f64 / intervals as f64;
            out.push((t, op((stage.eval)(j as f64 / n as f64))?));
        }
        k += n;
        log.push(StageRecord { name: stage.name.clone(), t_start: t0, t_end: k as f64 / intervals as f64 });
    }
    out.last_mut().unwrap().0 = 1.0;
    let endpoints = match endpoints {
        Some((a, b)) => Some((op(a)?, op(b)?)),
        None => None,
    };
    Ok(HomotopyPath { samples: out, constraints, construction_log: log, endpoints })
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Worst value over the samples (for index checks: number of deviating samples).
    pub worst: f64,
    pub worst_t: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathReport {
    pub samples: usize,
    pub checks: Vec<CheckOutcome>,
}

impl PathReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Distance from `x` to the nearest interface of the half-line projection:
/// the cut and, on cyclic windows, the wrap-around seam.
pub fn interface_distance(w: &Window, x: i64, cut: i64) -> usize {
    let d = if x >= cut { x - cut } else { cut - 1 - x } as usize;
    match w.boundary {
        Boundary::Cyclic => {
            let lo = w.site(0);
            let hi = w.site(w.sites() - 1);
            d.min((x - lo).min(hi - x) as usize)
        }
        Boundary::Open => d,
    }
}

/// Norm of the part of `[Lambda, O]` touching sites at distance at least a
/// quarter window from every interface. Small for operators whose coupling
/// across the cut decays.
pub fn far_commutator(o: &LatticeOperator, cut: i64) -> f64 {
    let w = o.window();
    let n = o.fiber_dim();
    let radius = (w.sites() / 4).max(1);
    let inside = |i: usize| w.site(i / n) >= cut;
    let far: Vec<usize> = (0..o.dim()).filter(|&i| interface_distance(&w, w.site(i / n), cut) >= radius).collect();
    if far.is_empty() {
        return 0.0;
    }
    let m = o.matrix();
    let dim = o.dim();
    let mut cols = linalg::zeros(dim, far.len());
    let mut rows = linalg::zeros(far.len(), dim);
    for (a, &j) in far.iter().enumerate() {
        for i in 0..dim {
            if inside(i) != inside(j) {
                cols[(i, a)] = m[(i, j)];
                rows[(a, i)] = m[(j, i)];
            }
        }
    }
    linalg::norm2(&cols).max(linalg::norm2(&rows))
}

fn index_of_sample(o: &LatticeOperator, lambda: &LatticeOperator, c: &PathConstraints, expected: IndexValue) -> Result<IndexValue> {
    match expected {
        IndexValue::Z(_) => {
            let u = if c.kind == PathKind::Invertible { crate::spectral::polar(o) } else { o.clone() };
            Ok(IndexValue::Z(index::index_trace(&u, lambda)?.z()))
        }
        IndexValue::Z2(_) => {
            let (f, relation) = c
                .symmetry
                .clone()
                .ok_or_else(|| Error::InvalidParameter("a Z2 index check needs a symmetry".into()))?;
            Ok(IndexValue::Z2(index::index_z2(o, lambda, &ClassCheck { f, relation })?.z2()))
        }
    }
}

struct Worst {
    value: f64,
    t: f64,
}

impl Worst {
    fn new() -> Self {
        Worst { value: f64::NEG_INFINITY, t: 0.0 }
    }

    fn push(&mut self, v: f64, t: f64) {
        if v > self.value || v.is_nan() {
            self.value = v;
            self.t = t;
        }
    }
}

fn outcome(name: &str, w: &Worst, threshold: f64, detail: impl Into<String>) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        passed: w.value <= threshold,
        worst: w.value,
        worst_t: w.t,
        threshold,
        detail: detail.into(),
    }
}

/// Sample-wise verification against the path's constraints.
pub fn verify_path(path: &HomotopyPath) -> PathReport {
    let c = &path.constraints;
    let mut checks = Vec::new();
    let n = path.samples.len();
    if n == 0 {
        checks.push(CheckOutcome {
            name: "samples".into(),
            passed: false,
            worst: 0.0,
            worst_t: 0.0,
            threshold: 1.0,
            detail: "empty path".into(),
        });
        return PathReport { samples: 0, checks };
    }

    let ts: Vec<f64> = path.samples.iter().map(|s| s.0).collect();
    let monotone = ts[0] == 0.0 && ts[n - 1] == 1.0 && ts.windows(2).all(|p| p[1] > p[0]);
    checks.push(CheckOutcome {
        name: "parameter".into(),
        passed: monotone,
        worst: 0.0,
        worst_t: 0.0,
        threshold: 0.0,
        detail: "t strictly increasing from 0 to 1".into(),
    });

    let mut kind = Worst::new();
    for (t, o) in &path.samples {
        let m = o.matrix();
        let v = match c.kind {
            PathKind::Unitary => linalg::unitarity_residual(m),
            PathKind::Sau => linalg::unitarity_residual(m).max(linalg::hermiticity_residual(m)),
            PathKind::Invertible => -linalg::min_singular(m),
        };
        kind.push(v, *t);
    }
    checks.push(match c.kind {
        PathKind::Unitary => outcome("unitarity", &kind, c.residual_tol, "max |U*U - 1|"),
        PathKind::Sau => outcome("self_adjoint_unitarity", &kind, c.residual_tol, "max of unitarity and hermiticity residuals"),
        PathKind::Invertible => {
            let mut o = outcome("invertibility", &kind, -c.gap_floor, "negated min singular value");
            o.worst = -o.worst;
            o.threshold = c.gap_floor;
            o
        }
    });

    if let Some((f, relation)) = &c.symmetry {
        let mut w = Worst::new();
        for (t, o) in &path.samples {
            let res = symmetry::check_relation(o, f, *relation).unwrap_or(f64::INFINITY);
            w.push(res / o.norm().max(1.0), *t);
        }
        checks.push(outcome("symmetry", &w, c.residual_tol, format!("{} relation residual", relation.name())));
    }

    let mut loc = Worst::new();
    for (t, o) in &path.samples {
        loc.push(far_commutator(o, c.cut), *t);
    }
    // Measured relative to the endpoints: a path may not delocalize beyond
    // the budget on top of the worse endpoint.
    let ends = far_commutator(&path.samples[0].1, c.cut).max(far_commutator(&path.samples[n - 1].1, c.cut));
    checks.push(outcome(
        "locality",
        &loc,
        c.locality_budget + ends,
        format!("far-field commutator with the half-line projection (endpoints {ends:.2e})"),
    ));

    if let Some(expected) = c.expected_index {
        let first = &path.samples[0].1;
        let lambda = half_line_projection(first.window(), first.fiber_dim(), c.cut);
        let mut bad = 0usize;
        let mut first_bad: Option<(f64, String)> = None;
        for (t, o) in &path.samples {
            let got = lambda.as_ref().map_err(Clone::clone).and_then(|l| index_of_sample(o, l, c, expected));
            let ok = matches!(&got, Ok(v) if *v == expected);
            if !ok {
                bad += 1;
                if first_bad.is_none() {
                    first_bad = Some((*t, format!("{got:?}")));
                }
            }
        }
        let (worst_t, detail) = first_bad.unwrap_or((0.0, format!("all samples equal {expected:?}")));
        checks.push(CheckOutcome { name: "index".into(), passed: bad == 0, worst: bad as f64, worst_t, threshold: 0.0, detail });
    }

    let mut cont = Worst::new();
    for p in path.samples.windows(2) {
        cont.push(linalg::norm2(&(p[1].1.matrix() - p[0].1.matrix())), p[1].0);
    }
    if n == 1 {
        cont.push(0.0, 0.0);
    }
    checks.push(outcome("continuity", &cont, c.continuity_budget, "max norm of consecutive differences"));

    if let Some((a, b)) = &path.endpoints {
        let mut w = Worst::new();
        w.push(linalg::norm2(&(path.start().matrix() - a.matrix())), 0.0);
        w.push(linalg::norm2(&(path.end().matrix() - b.matrix())), 1.0);
        checks.push(outcome("endpoints", &w, ENDPOINT_TOL, "distance of first and last samples to the targets"));
    }

    PathReport { samples: n, checks }
}

/// Diagnostics of a single path sample.
#[derive(Debug, Clone, Serialize)]
pub struct SampleMetrics {
    pub t: f64,
    /// Unitarity residual; for self-adjoint unitary paths the larger of the
    /// unitarity and hermiticity residuals.
    pub unitarity: f64,
    /// Relative relation residual, when the path carries a symmetry.
    pub symmetry: Option<f64>,
    /// Smallest singular value of the sample.
    pub gap: f64,
    /// Index at the path's cut, when the path carries an expected index.
    pub index: Option<IndexValue>,
}

/// Per-sample values behind the checks of [`verify_path`].
pub fn sample_metrics(path: &HomotopyPath) -> Vec<SampleMetrics> {
    let c = &path.constraints;
    let lambda = path
        .samples
        .first()
        .and_then(|(_, o)| half_line_projection(o.window(), o.fiber_dim(), c.cut).ok());
    path.samples
        .iter()
        .map(|(t, o)| {
            let m = o.matrix();
            let unitarity = match c.kind {
                PathKind::Sau => linalg::unitarity_residual(m).max(linalg::hermiticity_residual(m)),
                _ => linalg::unitarity_residual(m),
            };
            let symmetry = c
                .symmetry
                .as_ref()
                .map(|(f, r)| symmetry::check_relation(o, f, *r).unwrap_or(f64::INFINITY) / o.norm().max(1.0));
            let index = match (c.expected_index, &lambda) {
                (Some(e), Some(l)) => index_of_sample(o, l, c, e).ok(),
                _ => None,
            };
            SampleMetrics { t: *t, unitarity, symmetry, gap: linalg::min_singular(m), index }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Logarithms

/// Midpoint of the largest gap between consecutive eigenphases, and its width.
fn largest_gap(theta: &[f64]) -> (f64, f64) {
    if theta.is_empty() {
        return (std::f64::consts::PI, 2.0 * std::f64::consts::PI);
    }
    let mut t = theta.to_vec();
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tau = 2.0 * std::f64::consts::PI;
    let mut best = (t[0] + tau - t[t.len() - 1], t[t.len() - 1]);
    for p in t.windows(2) {
        if p[1] - p[0] > best.0 {
            best = (p[1] - p[0], p[0]);
        }
    }
    (best.1 + 0.5 * best.0, best.0)
}

/// Representative of `theta` in `(alpha - 2 pi, alpha]`.
fn wrap_below(theta: f64, alpha: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let mut x = theta;
    while x > alpha {
        x -= tau;
    }
    while x <= alpha - tau {
        x += tau;
    }
    x
}

fn hermitize(h: CMat) -> CMat {
    (&h + h.adjoint()) * linalg::r(0.5)
}

/// Hermitian `H` with `e^{iH} = Z`, branch cut in the largest spectral gap.
fn log_complex(z: &CMat) -> CMat {
    let (theta, q) = linalg::unitary_eig(z);
    let (alpha, _) = largest_gap(&theta);
    let vals: Vec<f64> = theta.iter().map(|&x| wrap_below(x, alpha)).collect();
    hermitize(linalg::reassemble_real(&q, &vals))
}

/// Hermitian `H` with `e^{iH} = Z` and `F H F^{-1} = -H`, for `Z` commuting
/// with `F`. The `-1` eigenspace is split into conjugate halves sent to `+pi`
/// and `-pi`.
fn log_symmetric(z: &CMat, f: &AntiUnitary) -> Result<CMat> {
    let pi = std::f64::consts::PI;
    let (theta, q) = linalg::unitary_eig(z);
    let cluster: Vec<usize> = (0..theta.len()).filter(|&j| pi - theta[j].abs() < MINUS_ONE_TOL).collect();
    let rest: Vec<usize> = (0..theta.len()).filter(|&j| pi - theta[j].abs() >= MINUS_ONE_TOL).collect();
    let qr = linalg::select_columns(&q, &rest);
    let vr: Vec<f64> = rest.iter().map(|&j| theta[j]).collect();
    let mut h = linalg::reassemble_real(&qr, &vr);
    if !cluster.is_empty() {
        let qc = linalg::select_columns(&q, &cluster);
        let kb = symmetry::kramers_basis(&qc, f)?;
        if f.square_sign() > 0 {
            let e = &kb.basis;
            if e.ncols() % 2 == 1 {
                return Err(Error::Obstructed(format!(
                    "odd-dimensional (-1)-eigenspace ({}) of a real orthogonal block",
                    e.ncols()
                )));
            }
            let s = linalg::r(std::f64::consts::FRAC_1_SQRT_2);
            for j in 0..e.ncols() / 2 {
                let u = (e.column(2 * j) + e.column(2 * j + 1) * linalg::I) * s;
                let ub = (e.column(2 * j) - e.column(2 * j + 1) * linalg::I) * s;
                h += (&u * u.adjoint() - &ub * ub.adjoint()) * linalg::r(pi);
            }
        } else {
            let (phi, jphi) = kb.halves();
            h += (&phi * phi.adjoint() - &jphi * jphi.adjoint()) * linalg::r(pi);
        }
    }
    let fh = f.conjugate_operator(&h)?;
    Ok(hermitize((h - fh) * linalg::r(0.5)))
}

/// Class-respecting logarithm of a unitary commuting with `F` (or of any
/// unitary for the complex class).
pub(crate) fn equivariant_log(z: &CMat, f: Option<&AntiUnitary>, relation: RelationLabel) -> Result<CMat> {
    match (relation, f) {
        (RelationLabel::Complex, _) => Ok(log_complex(z)),
        (RelationLabel::Real | RelationLabel::Quaternionic, Some(f)) => log_symmetric(z, f),
        (r, _) => Err(Error::UnsupportedClass(format!("no equivariant logarithm for the {} relation", r.name()))),
    }
}

fn relation_for(f: Option<&AntiUnitary>) -> RelationLabel {
    match f.map(|f| f.square_sign()) {
        None => RelationLabel::Complex,
        Some(s) if s > 0 => RelationLabel::Real,
        Some(_) => RelationLabel::Quaternionic,
    }
}

fn star_relation_for(f: &AntiUnitary) -> RelationLabel {
    if f.square_sign() > 0 {
        RelationLabel::StarReal
    } else {
        RelationLabel::StarQuaternionic
    }
}

/// Cut used when the caller supplies none: site 1 when inside the window.
pub fn default_cut(w: &Window) -> i64 {
    if w.check_cut(1).is_ok() {
        1
    } else {
        w.site(w.sites() / 2)
    }
}

fn check_unitary(u: &LatticeOperator) -> Result<()> {
    let res = linalg::unitarity_residual(u.matrix());
    if res > DEFAULT_RESIDUAL_TOL {
        return Err(Error::NotUnitary(res));
    }
    Ok(())
}

fn check_relation_tol(u: &LatticeOperator, f: &AntiUnitary, relation: RelationLabel) -> Result<()> {
    let res = symmetry::check_relation(u, f, relation)?;
    if res > DEFAULT_RESIDUAL_TOL * u.norm().max(1.0) {
        return Err(Error::RelationViolated(res));
    }
    Ok(())
}

/// Path from a unitary with a spectral gap to the identity along
/// `e^{i(1-t)H}`, `H` a class-respecting logarithm.
pub fn gapped_unitary_path(a: &LatticeOperator, f: Option<&AntiUnitary>, samples: usize) -> Result<HomotopyPath> {
    check_unitary(a)?;
    let relation = relation_for(f);
    if let Some(f) = f {
        check_relation_tol(a, f, relation)?;
    }
    let (theta, _) = linalg::unitary_eig(a.matrix());
    let (_, gap) = largest_gap(&theta);
    let resolution = 2.0 * std::f64::consts::PI / a.dim() as f64;
    if gap < 2.0 * resolution {
        return Err(Error::NoSpectralGap);
    }
    let h = equivariant_log(a.matrix(), f, relation)?;
    let stage = unwind_stage("logarithmic contraction", &h, linalg::eye(a.dim()));
    let cut = default_cut(&a.window());
    let expected = half_line_projection(a.window(), a.fiber_dim(), cut)
        .and_then(|l| index::index_trace(a, &l))
        .ok()
        .map(|r| r.value);
    let constraints = PathConstraints::new(PathKind::Unitary, cut).with_symmetry(f, relation).with_index(expected);
    assemble(a.window(), a.fiber_dim(), vec![stage], samples, constraints, Some((a.matrix().clone(), linalg::eye(a.dim()))))
}

/// `s -> V_s F V_s^* F^{-1}` with `V_s = e^{i(1-s)H}` and `e^{iH}` a square
/// root of `U`; `m` is the unitary part of `F` on the whole space.
pub(crate) struct StarKuiper {
    v: ExpFamily,
    m: CMat,
}

impl StarKuiper {
    pub(crate) fn new(u: &CMat, m: &CMat) -> Self {
        let (theta, q) = linalg::unitary_eig(u);
        let (alpha, _) = largest_gap(&theta);
        let half: Vec<f64> = theta.iter().map(|&x| 0.5 * wrap_below(x, alpha)).collect();
        let h = hermitize(linalg::reassemble_real(&q, &half));
        StarKuiper { v: ExpFamily::new(&h), m: m.clone() }
    }

    pub(crate) fn at(&self, s: f64) -> CMat {
        let v = self.v.at(1.0 - s);
        &v * &self.m * v.transpose() * self.m.adjoint()
    }

    pub(crate) fn length(&self) -> f64 {
        2.0 * self.v.norm()
    }
}

/// Path from a unitary with `U F = F U^*` to the identity through unitaries
/// with the same relation.
pub fn star_kuiper_path(u: &LatticeOperator, f: &AntiUnitary, samples: usize) -> Result<HomotopyPath> {
    check_unitary(u)?;
    let relation = star_relation_for(f);
    check_relation_tol(u, f, relation)?;
    let sk = StarKuiper::new(u.matrix(), &f.full(u.window().sites()));
    let len = sk.length();
    let stage = Stage::new("star square-root contraction", len, move |s| sk.at(s));
    let cut = default_cut(&u.window());
    let expected = if relation == RelationLabel::StarQuaternionic {
        half_line_projection(u.window(), u.fiber_dim(), cut)
            .and_then(|l| index::index_z2(u, &l, &ClassCheck { f: f.clone(), relation }))
            .ok()
            .map(|r| r.value)
    } else {
        None
    };
    let constraints = PathConstraints::new(PathKind::Unitary, cut).with_symmetry(Some(f), relation).with_index(expected);
    assemble(u.window(), u.fiber_dim(), vec![stage], samples, constraints, Some((u.matrix().clone(), linalg::eye(u.dim()))))
}

// ---------------------------------------------------------------------------
// Factorization and unitary paths

/// Places a block living on `idx` into a `dim x dim` zero matrix.
pub(crate) fn embed(block: &CMat, idx: &[usize], dim: usize) -> CMat {
    let mut out = linalg::zeros(dim, dim);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            out[(i, j)] = block[(a, b)];
        }
    }
    out
}

/// Reflection `1 - 2 e e^*` in a conjugation-fixed vector at the first site of
/// a half (in half coordinates).
fn fixed_reflection(dim: usize, offset: usize, f: &AntiUnitary) -> Result<CMat> {
    let n = f.fiber_dim();
    let fixed = symmetry::kramers_basis(&linalg::eye(n), f)?.basis;
    let mut e = linalg::zeros(dim, 1);
    for k in 0..n {
        e[(offset + k, 0)] = fixed[(k, 0)];
    }
    Ok(linalg::eye(dim) - &e * e.adjoint() * linalg::r(2.0))
}

pub(crate) struct Factorization {
    pub a: CMat,
    pub b_out: CMat,
    pub b_in: CMat,
    pub inside: Vec<usize>,
    pub outside: Vec<usize>,
}

impl Factorization {
    pub(crate) fn b(&self) -> CMat {
        let dim = self.inside.len() + self.outside.len();
        embed(&self.b_out, &self.outside, dim) + embed(&self.b_in, &self.inside, dim)
    }
}

fn factor_matrix(
    um: &CMat,
    lambda: &LatticeOperator,
    f: Option<&AntiUnitary>,
    relation: RelationLabel,
    fix_determinants: bool,
) -> Result<Factorization> {
    let (inside, outside) = split_indices(lambda);
    let mut b_out = symmetry::extend_to_unitary_matrix(&compress(um, &outside), f, relation)?;
    let mut b_in = symmetry::extend_to_unitary_matrix(&compress(um, &inside), f, relation)?;
    if fix_determinants && relation == RelationLabel::Real {
        let f = f.ok_or_else(|| Error::InvalidAntiUnitary("real relation needs an anti-unitary".into()))?;
        let n = f.fiber_dim();
        if linalg::determinant(&b_out).re < 0.0 {
            // The outside half ends at the cut: reflect at its last site.
            let r = fixed_reflection(outside.len(), outside.len() - n, f)?;
            b_out = r * b_out;
        }
        if linalg::determinant(&b_in).re < 0.0 {
            let r = fixed_reflection(inside.len(), 0, f)?;
            b_in = r * b_in;
        }
    }
    let mut fac = Factorization { a: linalg::zeros(0, 0), b_out, b_in, inside, outside };
    fac.a = um * fac.b().adjoint();
    Ok(fac)
}

fn check_index_zero(u: &LatticeOperator, lambda: &LatticeOperator, f: Option<&AntiUnitary>, relation: RelationLabel) -> Result<()> {
    use RelationLabel::*;
    match relation {
        Complex | Real | Quaternionic => {
            let k = index::index_trace(u, lambda)?.z();
            if k != 0 {
                return Err(Error::IndexNonzero(k));
            }
        }
        StarQuaternionic => {
            let f = f.ok_or_else(|| Error::InvalidAntiUnitary("star relation needs an anti-unitary".into()))?;
            if index::index_z2(u, lambda, &ClassCheck { f: f.clone(), relation })?.z2() == 1 {
                return Err(Error::OddZ2Index);
            }
        }
        StarReal => {}
        IReal | IQuaternionic => {
            return Err(Error::UnsupportedClass(format!("factorization is for unitaries, not the {} relation", relation.name())))
        }
    }
    Ok(())
}

/// `U = A B` with `[Lambda, B] = 0` and `1 - A` localized at the cut. For
/// real and quaternionic relations both factors commute with `F`; for the
/// star relations `B` keeps the relation and `A` satisfies it with respect
/// to `B F`.
pub fn factorize_local_unitary(
    u: &LatticeOperator,
    lambda: &LatticeOperator,
    f: Option<&AntiUnitary>,
    relation: RelationLabel,
) -> Result<(LatticeOperator, LatticeOperator)> {
    u.check_shape(lambda)?;
    check_unitary(u)?;
    if let Some(f) = f {
        check_relation_tol(u, f, relation)?;
    }
    check_index_zero(u, lambda, f, relation)?;
    let fac = factor_matrix(u.matrix(), lambda, f, relation, false)?;
    let b = fac.b();
    Ok((u.like(fac.a), u.like(b)))
}

fn lambda_cut(lambda: &LatticeOperator) -> Result<i64> {
    index::cut_of(lambda)
}

/// Stages from `U` to the identity for a star relation with even invariant.
fn star_stages(u: &LatticeOperator, lambda: &LatticeOperator, f: &AntiUnitary, relation: RelationLabel) -> Result<Vec<Stage>> {
    let fac = factor_matrix(u.matrix(), lambda, Some(f), relation, false)?;
    let n = f.fiber_dim();
    let b = fac.b();
    let dim = u.dim();
    let twisted = &b * f.full(u.window().sites());
    let sk_a = StarKuiper::new(&fac.a, &twisted);
    let len_a = sk_a.length();
    let b_copy = b.clone();
    let stage_a = Stage::new("star contraction of the cut factor", len_a, move |s| sk_a.at(s) * &b_copy);
    let sk_out = StarKuiper::new(&fac.b_out, &f.full(fac.outside.len() / n));
    let sk_in = StarKuiper::new(&fac.b_in, &f.full(fac.inside.len() / n));
    let len_b = sk_out.length().max(sk_in.length());
    let (inside, outside) = (fac.inside.clone(), fac.outside.clone());
    let stage_b = Stage::new("star contraction per half", len_b, move |s| {
        embed(&sk_out.at(s), &outside, dim) + embed(&sk_in.at(s), &inside, dim)
    });
    Ok(vec![stage_a, stage_b])
}

/// Path from `U` to `V` through local unitaries of one symmetry class with
/// constant invariant.
pub fn connect_unitaries(
    u: &LatticeOperator,
    v: &LatticeOperator,
    lambda: &LatticeOperator,
    f: Option<&AntiUnitary>,
    relation: RelationLabel,
    samples: usize,
) -> Result<HomotopyPath> {
    use RelationLabel::*;
    u.check_shape(v)?;
    u.check_shape(lambda)?;
    check_unitary(u)?;
    check_unitary(v)?;
    if relation != Complex {
        let f = f.ok_or_else(|| Error::InvalidAntiUnitary(format!("relation {} needs an anti-unitary", relation.name())))?;
        if let Some(sign) = relation.required_sign() {
            if f.square_sign() != sign {
                return Err(Error::ClassMismatch(format!("relation {} needs F^2 = {sign}", relation.name())));
            }
        }
        check_relation_tol(u, f, relation)?;
        check_relation_tol(v, f, relation)?;
    }
    let cut = lambda_cut(lambda)?;
    let dim = u.dim();
    let window = u.window();
    let n = u.fiber_dim();
    let endpoints = Some((u.matrix().clone(), v.matrix().clone()));
    match relation {
        Complex | Real | Quaternionic => {
            let iu = index::index_trace(u, lambda)?.z();
            let iv = index::index_trace(v, lambda)?.z();
            if iu != iv {
                return Err(Error::IndexMismatch { left: iu, right: iv });
            }
            let w = u.matrix() * v.matrix().adjoint();
            if relation == Real && linalg::determinant(&w).re < 0.0 {
                return Err(Error::Obstructed(
                    "U V^* has determinant -1 on the finite window; no real path exists at this truncation".into(),
                ));
            }
            let fac = factor_matrix(&w, lambda, f, relation, true)?;
            let ha = equivariant_log(&fac.a, f, relation)?;
            let hb = embed(&equivariant_log(&fac.b_out, f, relation)?, &fac.outside, dim)
                + embed(&equivariant_log(&fac.b_in, f, relation)?, &fac.inside, dim);
            let bv = fac.b() * v.matrix();
            let stages = vec![
                unwind_stage("contract the cut factor", &ha, bv),
                unwind_stage("contract the half blocks", &hb, v.matrix().clone()),
            ];
            let constraints =
                PathConstraints::new(PathKind::Unitary, cut).with_symmetry(f, relation).with_index(Some(IndexValue::Z(iu)));
            assemble(window, n, stages, samples, constraints, endpoints)
        }
        StarReal | StarQuaternionic => {
            let f = f.expect("checked above");
            let mut expected = None;
            if relation == StarQuaternionic {
                let cc = ClassCheck { f: f.clone(), relation };
                let zu = index::index_z2(u, lambda, &cc)?.z2();
                let zv = index::index_z2(v, lambda, &cc)?.z2();
                if zu != zv {
                    return Err(Error::IndexMismatch { left: zu as i64, right: zv as i64 });
                }
                if zu == 1 {
                    return Err(Error::UnsupportedClass(
                        "connecting odd star-quaternionic unitaries is not implemented".into(),
                    ));
                }
                expected = Some(IndexValue::Z2(0));
            }
            let mut stages = star_stages(u, lambda, f, relation)?;
            let back = star_stages(v, lambda, f, relation)?;
            stages.extend(back.into_iter().rev().map(Stage::reversed));
            let constraints = PathConstraints::new(PathKind::Unitary, cut).with_symmetry(Some(f), relation).with_index(expected);
            assemble(window, n, stages, samples, constraints, endpoints)
        }
        IReal | IQuaternionic => Err(Error::UnsupportedClass(format!(
            "{} describes self-adjoint unitaries; use connect_saus",
            relation.name()
        ))),
    }
}

// ---------------------------------------------------------------------------
// Self-adjoint unitaries

/// Eigenvalues of a half compression below this modulus form its near-kernel.
const NEAR_KERNEL: f64 = 0.1;
/// Smallest admissible singular value of `(U + V) / 2`.
pub const G_FLOOR: f64 = 1e-6;

/// Relation of the unitaries that conjugate within a class of self-adjoint
/// unitaries: they commute with `F` in every case.
fn commuting_relation(relation: RelationLabel) -> Result<RelationLabel> {
    use RelationLabel::*;
    match relation {
        Complex => Ok(Complex),
        Real | IReal => Ok(Real),
        Quaternionic | IQuaternionic => Ok(Quaternionic),
        StarReal | StarQuaternionic => {
            Err(Error::UnsupportedClass(format!("{} is a relation for unitaries, not self-adjoint unitaries", relation.name())))
        }
    }
}

fn is_odd(relation: RelationLabel) -> bool {
    matches!(relation, RelationLabel::IReal | RelationLabel::IQuaternionic)
}

fn columns_where(q: &CMat, vals: &[f64], pred: impl Fn(f64) -> bool) -> CMat {
    let idx: Vec<usize> = (0..vals.len()).filter(|&j| pred(vals[j])).collect();
    linalg::select_columns(q, &idx)
}

/// Eigenvectors of a Hermitian matrix with eigenvalue above 1/2, below -1/2,
/// and in between.
fn sign_clusters(h: &CMat) -> (CMat, CMat, CMat) {
    let (vals, q) = linalg::herm_eig(h);
    (
        columns_where(&q, &vals, |x| x > 0.5),
        columns_where(&q, &vals, |x| x < -0.5),
        columns_where(&q, &vals, |x| x.abs() <= 0.5),
    )
}

/// Orthonormal `F`-adapted basis of `span(b)` ordered by decreasing weight
/// `<v, diag(w) v>`. For quaternionic `F` only the first member `phi` of
/// each Kramers pair `(phi, F phi)` is returned.
fn weighted_basis(b: &CMat, w: &[f64], f: Option<&AntiUnitary>) -> Result<(CMat, Vec<f64>)> {
    let k = b.ncols();
    if k == 0 {
        return Ok((b.clone(), vec![]));
    }
    let diag = |m: &CMat| -> CMat {
        let mut out = m.clone();
        for (i, wi) in w.iter().enumerate() {
            let mut row = out.row_mut(i);
            row *= linalg::r(*wi);
        }
        out
    };
    let weight = |v: &CMat| -> f64 { (v.adjoint() * diag(v))[(0, 0)].re };
    match f {
        None => {
            let (vals, q) = linalg::herm_eig(&(b.adjoint() * diag(b)));
            let order: Vec<usize> = (0..k).rev().collect();
            Ok((b * linalg::select_columns(&q, &order), order.iter().map(|&j| vals[j]).collect()))
        }
        Some(f) if f.square_sign() > 0 => {
            let fixed = symmetry::kramers_basis(b, f)?.basis;
            let m = fixed.adjoint() * diag(&fixed);
            let re = nalgebra::DMatrix::<f64>::from_fn(k, k, |i, j| 0.5 * (m[(i, j)].re + m[(j, i)].re));
            let eig = re.symmetric_eigen();
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &c| eig.eigenvalues[c].partial_cmp(&eig.eigenvalues[a]).unwrap());
            let rot = CMat::from_fn(k, k, |i, j| linalg::r(eig.eigenvectors[(i, order[j])]));
            Ok((fixed * rot, order.iter().map(|&j| eig.eigenvalues[j]).collect()))
        }
        Some(f) => {
            let (vals, q) = linalg::herm_eig(&(b.adjoint() * diag(b)));
            let n = b.nrows();
            let mut chosen = linalg::zeros(n, 0);
            let mut firsts = linalg::zeros(n, 0);
            let mut weights = Vec::new();
            for j in (0..k).rev() {
                if chosen.ncols() >= k {
                    break;
                }
                let v: CMat = b * q.columns(j, 1);
                let r = &v - &chosen * (chosen.adjoint() * &v);
                let nr = r.norm();
                if nr < 0.5 {
                    continue;
                }
                let phi: CMat = r / linalg::r(nr);
                let jphi = f.apply(&phi)?;
                weights.push(weight(&phi));
                firsts = linalg::hstack(&firsts, &phi);
                chosen = linalg::hstack(&linalg::hstack(&chosen, &phi), &jphi);
            }
            let _ = vals;
            Ok((firsts, weights))
        }
    }
}

fn direct_distance(x: i64, cut: i64) -> usize {
    (if x >= cut { x - cut } else { cut - 1 - x }) as usize
}

/// 1 on sites nearer the cut than the wrap-around seam, 0 elsewhere.
fn cut_side(w: &Window, n: usize, cut: i64, idx: &[usize]) -> Vec<f64> {
    idx.iter()
        .map(|&i| {
            let x = w.site(i / n);
            if interface_distance(w, x, cut) == direct_distance(x, cut) && direct_distance(x, cut) < w.sites() / 4 {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// `e^{-d}` with `d` the distance to the cut.
fn cut_proximity(w: &Window, n: usize, cut: i64, idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| (-(direct_distance(w.site(i / n), cut) as f64)).exp()).collect()
}

fn embed_rows(m: &CMat, idx: &[usize], dim: usize) -> CMat {
    let mut out = linalg::zeros(dim, m.ncols());
    for (a, &i) in idx.iter().enumerate() {
        out.set_row(i, &m.row(a));
    }
    out
}

fn restrict_rows(m: &CMat, idx: &[usize]) -> CMat {
    CMat::from_fn(idx.len(), m.ncols(), |a, j| m[(idx[a], j)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Interface {
    Cut,
    Wrap,
}

/// Lambda-diagonal self-adjoint unitary attached to `U`, plus the unpaired
/// zero modes coupling the halves in the odd imaginary-real case.
struct DiagonalForm {
    v: CMat,
    /// `(interface, eta, xi)` with `eta` outside, `xi = Omega eta` inside (full length).
    couplings: Vec<(Interface, CMat, CMat)>,
}

struct Halves<'a> {
    window: Window,
    n: usize,
    cut: i64,
    inside: &'a [usize],
    outside: &'a [usize],
}

fn signum_with(x: f64, zero: f64) -> f64 {
    if x.abs() < NEAR_KERNEL {
        zero
    } else {
        x.signum()
    }
}

fn diagonal_form(um: &CMat, h: &Halves, f: Option<&AntiUnitary>, relation: RelationLabel) -> Result<DiagonalForm> {
    let dim = um.nrows();
    let x = compress(um, h.outside);
    let y = compress(um, h.inside);
    let (lx, qx) = linalg::herm_eig(&x);
    let (ly, qy) = linalg::herm_eig(&y);
    if !is_odd(relation) {
        let vx: Vec<f64> = lx.iter().map(|&l| signum_with(l, 1.0)).collect();
        let vy: Vec<f64> = ly.iter().map(|&l| signum_with(l, -1.0)).collect();
        let v = embed(&linalg::reassemble_real(&qx, &vx), h.outside, dim)
            + embed(&linalg::reassemble_real(&qy, &vy), h.inside, dim);
        return Ok(DiagonalForm { v, couplings: vec![] });
    }
    let f = f.ok_or_else(|| Error::InvalidAntiUnitary(format!("relation {} needs an anti-unitary", relation.name())))?;
    let off = |vals: &[f64], q: &CMat| -> CMat {
        let s: Vec<f64> = vals.iter().map(|&l| signum_with(l, 0.0)).collect();
        linalg::reassemble_real(q, &s)
    };
    let kx = columns_where(&qx, &lx, |l| l.abs() < NEAR_KERNEL);
    let ky = columns_where(&qy, &ly, |l| l.abs() < NEAR_KERNEL);
    if kx.ncols() != ky.ncols() {
        return Err(Error::Obstructed(format!(
            "near-kernels of the two compressions differ in size ({} vs {})",
            kx.ncols(),
            ky.ncols()
        )));
    }
    let side = cut_side(&h.window, h.n, h.cut, h.outside);
    let (basis, weights) = weighted_basis(&kx, &side, Some(f))?;
    let half = h.outside.len();
    let mut d = linalg::zeros(half, half);
    let mut etas: Vec<(Interface, CMat)> = Vec::new();
    let s2 = linalg::r(std::f64::consts::FRAC_1_SQRT_2);
    let cut_cols: Vec<usize> = (0..basis.ncols()).filter(|&j| weights[j] > 0.5).collect();
    let wrap_cols: Vec<usize> = (0..basis.ncols()).filter(|&j| weights[j] <= 0.5).collect();
    for (iface, cols) in [(Interface::Cut, cut_cols), (Interface::Wrap, wrap_cols)] {
        let c = linalg::select_columns(&basis, &cols);
        if f.square_sign() > 0 {
            let mut m = c.ncols();
            if m % 2 == 1 {
                // Keep the most interface-bound vector unpaired.
                let j = if iface == Interface::Cut { 0 } else { m - 1 };
                etas.push((iface, c.columns(j, 1).into_owned()));
                let rest: Vec<usize> = (0..m).filter(|&k| k != j).collect();
                let c2 = linalg::select_columns(&c, &rest);
                m -= 1;
                for p in 0..m / 2 {
                    let phi = (c2.column(2 * p) + c2.column(2 * p + 1) * linalg::I) * s2;
                    let psi = (c2.column(2 * p) - c2.column(2 * p + 1) * linalg::I) * s2;
                    d += &phi * phi.adjoint() - &psi * psi.adjoint();
                }
            } else {
                for p in 0..m / 2 {
                    let phi = (c.column(2 * p) + c.column(2 * p + 1) * linalg::I) * s2;
                    let psi = (c.column(2 * p) - c.column(2 * p + 1) * linalg::I) * s2;
                    d += &phi * phi.adjoint() - &psi * psi.adjoint();
                }
            }
        } else {
            let jc = f.apply(&c)?;
            d += &c * c.adjoint() - &jc * jc.adjoint();
        }
    }
    let v_out = off(&lx, &qx) + &d;
    let a = crate::spectral::submatrix(um, h.outside, h.inside);
    let t = ky.adjoint() * a.adjoint() * &kx;
    if kx.ncols() > 0 {
        let smin = linalg::min_singular(&t);
        if smin < 0.1 {
            return Err(Error::GDegenerate(smin));
        }
    }
    let omega = &ky * linalg::polar_part(&t, 0.0) * kx.adjoint();
    let v_in = off(&ly, &qy) - &omega * &d * omega.adjoint();
    let mut v = embed(&v_out, h.outside, dim) + embed(&v_in, h.inside, dim);
    let mut couplings = Vec::new();
    for (iface, eta) in etas {
        let xi = &omega * &eta;
        let eta_full = embed_rows(&eta, h.outside, dim);
        let xi_full = embed_rows(&xi, h.inside, dim);
        v += &eta_full * xi_full.adjoint() + &xi_full * eta_full.adjoint();
        couplings.push((iface, eta_full, xi_full));
    }
    Ok(DiagonalForm { v: hermitize(v), couplings })
}

/// Hermitian `H` with `e^{iH} U e^{-iH} = V` for self-adjoint unitaries with
/// `(U + V) / 2` invertible: `e^{iH}` is the principal square root of `V U`.
fn direct_rotation(u: &CMat, v: &CMat) -> Result<CMat> {
    let g = (u + v) * linalg::r(0.5);
    let smin = linalg::min_singular(&g);
    if smin < G_FLOOR {
        return Err(Error::GDegenerate(smin));
    }
    let (theta, q) = linalg::unitary_eig(&(v * u));
    let half: Vec<f64> = theta.iter().map(|x| 0.5 * x).collect();
    Ok(hermitize(linalg::reassemble_real(&q, &half)))
}

fn f_odd_part(h: CMat, f: Option<&AntiUnitary>) -> Result<CMat> {
    match f {
        Some(f) => {
            let fh = f.conjugate_operator(&h)?;
            Ok(hermitize((h - fh) * linalg::r(0.5)))
        }
        None => Ok(h),
    }
}

/// Class-respecting unitary `W` with `W V W^* = Vt` for Hermitian `V`, `Vt`
/// with spectra in `{-1, 1}` (and a zero cluster matched by `zero_map`).
fn match_clusters(
    v: &CMat,
    vt: &CMat,
    f: Option<&AntiUnitary>,
    relation: RelationLabel,
    zero_map: Option<CMat>,
) -> Result<CMat> {
    let (p, m, z) = sign_clusters(v);
    let (pt, mt, zt) = sign_clusters(vt);
    if p.ncols() != pt.ncols() || m.ncols() != mt.ncols() || z.ncols() != zt.ncols() {
        return Err(Error::KernelDimMismatch(format!(
            "eigenspace dimensions (+1, -1, 0): ({}, {}, {}) vs ({}, {}, {})",
            p.ncols(),
            m.ncols(),
            z.ncols(),
            pt.ncols(),
            mt.ncols(),
            zt.ncols()
        )));
    }
    let comm = commuting_relation(relation)?;
    let mut w = if is_odd(relation) {
        let f = f.ok_or_else(|| Error::InvalidAntiUnitary("imaginary relations need an anti-unitary".into()))?;
        let zpl = symmetry::aligned(&pt, &p);
        let zmi = f.conjugate_operator(&zpl)?;
        zpl + zmi
    } else {
        symmetry::matching_isometry(&p, &pt, f, comm)? + symmetry::matching_isometry(&m, &mt, f, comm)?
    };
    if z.ncols() > 0 {
        match zero_map {
            Some(zm) => w += zm,
            None => w += symmetry::matching_isometry(&z, &zt, f, comm)?,
        }
    }
    Ok(w)
}

/// Unitary `W` commuting with the class structure such that `U = W^* Ut W`.
pub fn match_eigenspaces(
    u: &LatticeOperator,
    ut: &LatticeOperator,
    f: Option<&AntiUnitary>,
    relation: RelationLabel,
) -> Result<LatticeOperator> {
    u.check_shape(ut)?;
    crate::spectral::check_sau(u, DEFAULT_RESIDUAL_TOL)?;
    crate::spectral::check_sau(ut, DEFAULT_RESIDUAL_TOL)?;
    commuting_relation(relation)?;
    if relation != RelationLabel::Complex {
        let f = f.ok_or_else(|| Error::InvalidAntiUnitary(format!("relation {} needs an anti-unitary", relation.name())))?;
        check_relation_tol(u, f, relation)?;
        check_relation_tol(ut, f, relation)?;
    }
    for (name, op) in [("first", u), ("second", ut)] {
        let (p, m, _) = sign_clusters(op.matrix());
        if p.ncols() == 0 || m.ncols() == 0 {
            return Err(Error::TrivialEigenspace(format!("{name} operator has dimensions (+1: {}, -1: {})", p.ncols(), m.ncols())));
        }
    }
    let f = if relation == RelationLabel::Complex { None } else { f };
    let w = match_clusters(u.matrix(), ut.matrix(), f, relation, None)?;
    Ok(u.like(w))
}

/// Moves `count` eigenvectors across the cut: `+1` vectors of the `src` half
/// are rotated onto `-1` vectors of the `dst` half. Returns the Hermitian
/// generator of the rotation (a quarter turn).
/// With `partnered`, the `F` images are rotated along (`F` swaps the two
/// eigenspaces in the odd classes, so this exchanges one pair per half).
fn transfer_generator(
    v: &CMat,
    h: &Halves,
    src: &[usize],
    dst: &[usize],
    count: usize,
    f: Option<&AntiUnitary>,
    partnered: bool,
) -> Result<CMat> {
    let dim = v.nrows();
    let quaternionic = partnered || f.map(|f| f.square_sign() < 0).unwrap_or(false);
    if quaternionic && !partnered && count % 2 == 1 {
        return Err(Error::Obstructed("odd transfer count in a quaternionic class".into()));
    }
    let k = if partnered { count } else if quaternionic { count / 2 } else { count };
    let basis_f = if partnered { None } else { f };
    let (p_src, _, _) = sign_clusters(&compress(v, src));
    let (_, m_dst, _) = sign_clusters(&compress(v, dst));
    let (e, _) = weighted_basis(&p_src, &cut_proximity(&h.window, h.n, h.cut, src), basis_f)?;
    let (g, _) = weighted_basis(&m_dst, &cut_proximity(&h.window, h.n, h.cut, dst), basis_f)?;
    if e.ncols() < k || g.ncols() < k {
        return Err(Error::Obstructed(format!("not enough eigenvectors to move {count} across the cut")));
    }
    let e = embed_rows(&e.columns(0, k).into_owned(), src, dim);
    let g = embed_rows(&g.columns(0, k).into_owned(), dst, dim);
    let mut x = &g * e.adjoint() - &e * g.adjoint();
    if quaternionic {
        let f = f.ok_or_else(|| Error::InvalidAntiUnitary("partnered transfer needs an anti-unitary".into()))?;
        let je = f.apply(&e)?;
        let jg = f.apply(&g)?;
        x += &jg * je.adjoint() - &je * jg.adjoint();
    }
    // e^{i H} = e^{(pi/2) X}
    Ok(hermitize(x * linalg::c(0.0, -std::f64::consts::FRAC_PI_2)))
}

fn half_dims(v: &CMat, idx: &[usize]) -> usize {
    sign_clusters(&compress(v, idx)).0.ncols()
}

enum HalfMatching {
    Found(CMat, CMat),
    /// Both halves need an orientation-reversing map (odd imaginary-real class).
    BothReversed,
}

/// Per-half matching `M` with `M V M^* = Vt`, both Lambda-diagonal up to the
/// odd couplings.
fn half_matching(
    v: &DiagonalForm,
    vt: &DiagonalForm,
    h: &Halves,
    f: Option<&AntiUnitary>,
    relation: RelationLabel,
) -> Result<HalfMatching> {
    let dim = v.v.nrows();
    let mut signs: Vec<f64> = Vec::new();
    if v.couplings.len() != vt.couplings.len()
        || v.couplings.iter().zip(&vt.couplings).any(|(a, b)| a.0 != b.0)
    {
        return Err(Error::Obstructed(format!(
            "unpaired zero modes differ: {:?} vs {:?}",
            v.couplings.iter().map(|c| c.0).collect::<Vec<_>>(),
            vt.couplings.iter().map(|c| c.0).collect::<Vec<_>>()
        )));
    }
    for (a, b) in v.couplings.iter().zip(&vt.couplings) {
        let ov = (b.1.adjoint() * &a.1)[(0, 0)].re;
        signs.push(if ov < 0.0 { -1.0 } else { 1.0 });
    }
    let comm = commuting_relation(relation)?;
    let build = |signs: &[f64]| -> Result<(CMat, CMat)> {
        let mut zero_out = linalg::zeros(h.outside.len(), h.outside.len());
        let mut zero_in = linalg::zeros(h.inside.len(), h.inside.len());
        for ((a, b), s) in v.couplings.iter().zip(&vt.couplings).zip(signs) {
            zero_out += restrict_rows(&b.1, h.outside) * restrict_rows(&a.1, h.outside).adjoint() * linalg::r(*s);
            zero_in += restrict_rows(&b.2, h.inside) * restrict_rows(&a.2, h.inside).adjoint() * linalg::r(*s);
        }
        let zo = (!v.couplings.is_empty()).then_some(zero_out);
        let zi = (!v.couplings.is_empty()).then_some(zero_in);
        let m_out = match_clusters(&compress(&v.v, h.outside), &compress(&vt.v, h.outside), f, relation, zo)?;
        let m_in = match_clusters(&compress(&v.v, h.inside), &compress(&vt.v, h.inside), f, relation, zi)?;
        Ok((m_out, m_in))
    };
    let (mut m_out, mut m_in) = build(&signs)?;
    if comm == RelationLabel::Real {
        let f = f.expect("real classes carry an anti-unitary");
        let neg = |m: &CMat| linalg::determinant(m).re < 0.0;
        if is_odd(relation) {
            if neg(&m_out) && neg(&m_in) {
                if signs.is_empty() {
                    return Ok(HalfMatching::BothReversed);
                }
                let last = signs.len() - 1;
                signs[last] = -signs[last];
                (m_out, m_in) = build(&signs)?;
            }
            if neg(&m_out) || neg(&m_in) {
                return Err(Error::Obstructed(
                    "matching unitaries of the halves have opposite determinant signs on this window".into(),
                ));
            }
        } else {
            for (m, idx) in [(&mut m_out, h.outside), (&mut m_in, h.inside)] {
                if neg(m) {
                    let (p, mi, _) = sign_clusters(&compress(&v.v, idx));
                    let cluster = if p.ncols() > 0 { p } else { mi };
                    let (e, _) = weighted_basis(&cluster, &cut_proximity(&h.window, h.n, h.cut, idx), Some(f))?;
                    let e = e.columns(0, 1).into_owned();
                    *m = &*m * (linalg::eye(idx.len()) - &e * e.adjoint() * linalg::r(2.0));
                }
            }
        }
    }
    let _ = dim;
    Ok(HalfMatching::Found(m_out, m_in))
}

/// Path between two Lambda-non-trivial self-adjoint unitaries of one class.
pub fn connect_saus(
    u: &LatticeOperator,
    ut: &LatticeOperator,
    lambda: &LatticeOperator,
    f: Option<&AntiUnitary>,
    relation: RelationLabel,
    samples: usize,
) -> Result<HomotopyPath> {
    use crate::spectral::{check_sau, lambda_nontriviality_check, NONTRIVIALITY_TOL};
    u.check_shape(ut)?;
    u.check_shape(lambda)?;
    check_sau(u, DEFAULT_RESIDUAL_TOL)?;
    check_sau(ut, DEFAULT_RESIDUAL_TOL)?;
    let comm = commuting_relation(relation)?;
    let f = if relation == RelationLabel::Complex { None } else { f };
    if relation != RelationLabel::Complex {
        let f = f.ok_or_else(|| Error::InvalidAntiUnitary(format!("relation {} needs an anti-unitary", relation.name())))?;
        if let Some(sign) = relation.required_sign() {
            if f.square_sign() != sign {
                return Err(Error::ClassMismatch(format!("relation {} needs F^2 = {sign}", relation.name())));
            }
        }
        check_relation_tol(u, f, relation)?;
        check_relation_tol(ut, f, relation)?;
    }
    for (name, op) in [("first", u), ("second", ut)] {
        let rep = lambda_nontriviality_check(op, lambda, NONTRIVIALITY_TOL)?;
        if !rep.nontrivial {
            return Err(Error::NotLambdaNontrivial(format!(
                "{name} operator: left (+{}, -{}), right (+{}, -{}), floor {}",
                rep.left_plus, rep.left_minus, rep.right_plus, rep.right_minus, rep.floor
            )));
        }
    }
    let mut expected = None;
    if relation == RelationLabel::IReal {
        let cc = ClassCheck { f: f.unwrap().clone(), relation };
        let zl = index::index_z2(u, lambda, &cc)?.z2();
        let zr = index::index_z2(ut, lambda, &cc)?.z2();
        if zl != zr {
            return Err(Error::Z2Mismatch { left: zl, right: zr });
        }
        expected = Some(IndexValue::Z2(zl));
    }
    if !is_odd(relation) {
        let tl = linalg::trace(u.matrix()).re.round() as i64;
        let tr = linalg::trace(ut.matrix()).re.round() as i64;
        if tl != tr {
            return Err(Error::Obstructed(format!("traces differ on the finite window ({tl} vs {tr})")));
        }
    }
    let cut = lambda_cut(lambda)?;
    let constraints = PathConstraints::new(PathKind::Sau, cut).with_symmetry(f, relation).with_index(expected);
    let endpoints = Some((u.matrix().clone(), ut.matrix().clone()));
    if linalg::norm2(&(u.matrix() - ut.matrix())) < 1.0 {
        // Nearby endpoints: the spectrum of Ut U stays off -1 by a fixed
        // margin, so its principal logarithm is local.
        let h = direct_rotation(u.matrix(), ut.matrix())?;
        let stage = conjugation_stage("direct rotation", &h, u.matrix().clone());
        return assemble(u.window(), u.fiber_dim(), vec![stage], samples, constraints, endpoints);
    }
    let (inside, outside) = split_indices(lambda);
    let halves = Halves { window: u.window(), n: u.fiber_dim(), cut, inside: &inside, outside: &outside };
    let um = u.matrix();
    let utm = ut.matrix();
    let dv = diagonal_form(um, &halves, f, relation)?;
    let mut dvt = diagonal_form(utm, &halves, f, relation)?;
    dvt.v = hermitize(dvt.v);

    let mut stages = Vec::new();
    let ha = f_odd_part(direct_rotation(um, &dv.v)?, f)?;
    stages.push(conjugation_stage("rotate onto the Lambda-diagonal form", &ha, um.clone()));

    let mut dv = dv;
    if !is_odd(relation) {
        let d = half_dims(&dv.v, &outside) as i64 - half_dims(&dvt.v, &outside) as i64;
        if d != 0 {
            let (src, dst) = if d > 0 { (&outside, &inside) } else { (&inside, &outside) };
            let ht = transfer_generator(&dv.v, &halves, src, dst, d.unsigned_abs() as usize, f, false)?;
            stages.push(conjugation_stage("transfer eigenvectors across the cut", &ht, dv.v.clone()));
            let r = linalg::expi_herm(&ht);
            dv.v = hermitize(&r * &dv.v * r.adjoint());
        }
    }

    let (m_out, m_in) = match half_matching(&dv, &dvt, &halves, f, relation)? {
        HalfMatching::Found(a, b) => (a, b),
        HalfMatching::BothReversed => {
            let ht = transfer_generator(&dv.v, &halves, &outside, &inside, 1, f, true)?;
            stages.push(conjugation_stage("exchange a partnered pair across the cut", &ht, dv.v.clone()));
            let r = linalg::expi_herm(&ht);
            dv.v = hermitize(&r * &dv.v * r.adjoint());
            match half_matching(&dv, &dvt, &halves, f, relation)? {
                HalfMatching::Found(a, b) => (a, b),
                HalfMatching::BothReversed => {
                    return Err(Error::Obstructed("orientation of the halves could not be repaired".into()))
                }
            }
        }
    };
    let dim = u.dim();
    let m = embed(&m_out, &outside, dim) + embed(&m_in, &inside, dim);
    let res = linalg::norm2(&(&m * &dv.v * m.adjoint() - &dvt.v));
    if res > 1e-8 {
        return Err(Error::Obstructed(format!("eigenspace matching residual {res:.3e}")));
    }
    let hm = embed(&equivariant_log(&m_out, f, comm)?, &outside, dim) + embed(&equivariant_log(&m_in, f, comm)?, &inside, dim);
    stages.push(conjugation_stage("match eigenspaces per half", &hm, dv.v.clone()));

    let hc = f_odd_part(direct_rotation(utm, &dvt.v)?, f)?;
    stages.push(conjugation_stage("rotate from the Lambda-diagonal form", &hc, utm.clone()).reversed());

    assemble(u.window(), u.fiber_dim(), stages, samples, constraints, endpoints)
}

/// Unitaries `V`, `W` with `U = V^* Ut W` and `W J = J V` for two partial
/// isometries satisfying `U J = J U^*` with kernels and cokernels of one
/// common dimension.
pub fn intertwine_partial_isometries(
    u: &LatticeOperator,
    ut: &LatticeOperator,
    j: &AntiUnitary,
) -> Result<(LatticeOperator, LatticeOperator)> {
    u.check_shape(ut)?;
    if j.square_sign() > 0 {
        return Err(Error::InvalidAntiUnitary("intertwining needs a quaternionic anti-unitary".into()));
    }
    let um = u.matrix();
    let utm = ut.matrix();
    let tol = 1e-8 * linalg::norm2(um).max(linalg::norm2(utm)).max(1.0);
    let ker = linalg::right_null(um, tol);
    let coker = linalg::right_null(&um.adjoint(), tol);
    let kert = linalg::right_null(utm, tol);
    let cokert = linalg::right_null(&utm.adjoint(), tol);
    let dims = [ker.ncols(), coker.ncols(), kert.ncols(), cokert.ncols()];
    if dims.iter().any(|&d| d != dims[0]) {
        return Err(Error::KernelDimMismatch(format!(
            "dim ker/coker: {}/{} vs {}/{}",
            dims[0], dims[1], dims[2], dims[3]
        )));
    }
    let xi = j.apply(&ker)?;
    let xit = j.apply(&kert)?;
    let v1 = &xit * xi.adjoint();
    let w1 = &kert * ker.adjoint();
    let comp = linalg::range_basis(&um.adjoint(), tol);
    let compt = linalg::range_basis(&utm.adjoint(), tol);
    let k = symmetry::kramers_basis_with(&comp, -1, &|m| j.apply(&(um * m)))?;
    let kt = symmetry::kramers_basis_with(&compt, -1, &|m| j.apply(&(utm * m)))?;
    let (phi, psi) = k.halves();
    let (phit, psit) = kt.halves();
    let w2 = &phit * psi.adjoint() - &psit * phi.adjoint();
    let w = w1 + &w2;
    let v = v1 + utm * &w2 * um.adjoint();
    Ok((u.like(v), u.like(w)))
}
