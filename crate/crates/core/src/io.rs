//! Versioned JSON documents for operators, symmetry data and homotopy paths.
//!
//! Complex numbers are `[re, im]` pairs. Dense matrices are row-major nested
//! arrays in the site-major ordering of [`LatticeOperator`]. The banded form
//! lists, per offset `l`, the blocks `A_{x+l, x}` for every site `x` of the
//! window in increasing order.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homotopy::{HomotopyPath, PathConstraints, PathKind, StageRecord};
use crate::index::IndexValue;
use crate::lattice::{Boundary, LatticeOperator, Window};
use crate::linalg::{self, CMat};
use crate::symmetry::{AntiUnitary, AzClass, RelationLabel, SymmetryTriple};

pub const SCHEMA_VERSION: u32 = 1;

pub type DenseMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub min: i64,
    /// Exclusive.
    pub max: i64,
    pub boundary: Boundary,
}

impl From<Window> for WindowSpec {
    fn from(w: Window) -> Self {
        WindowSpec { min: w.min_site, max: w.max_site, boundary: w.boundary }
    }
}

impl WindowSpec {
    pub fn to_window(self) -> Result<Window> {
        Window::new(self.min, self.max, self.boundary)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub offset: i64,
    pub blocks: Vec<DenseMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entries {
    Dense(DenseMatrix),
    Banded(Vec<Band>),
}

/// Fiber matrices of the symmetry operators: `V` for an anti-unitary
/// `V o conj`, and the chiral unitary itself.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetrySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<DenseMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<DenseMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<DenseMatrix>,
}

impl SymmetrySpec {
    pub fn from_triple(sym: &SymmetryTriple) -> Self {
        SymmetrySpec {
            theta: sym.theta.as_ref().map(|f| dense_from_matrix(f.unitary_part())),
            xi: sym.xi.as_ref().map(|f| dense_from_matrix(f.unitary_part())),
            pi: sym.pi.as_ref().map(dense_from_matrix),
        }
    }

    pub fn to_triple(&self) -> Result<SymmetryTriple> {
        let anti = |m: &Option<DenseMatrix>, name: &str| -> Result<Option<AntiUnitary>> {
            m.as_ref().map(|m| AntiUnitary::new(matrix_from_dense(m, &format!("symmetry.{name}"))?)).transpose()
        };
        Ok(SymmetryTriple {
            theta: anti(&self.theta, "theta")?,
            xi: anti(&self.xi, "xi")?,
            pi: self.pi.as_ref().map(|m| matrix_from_dense(m, "symmetry.pi")).transpose()?,
        })
    }
}

/// Standalone symmetry file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryDocument {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<DenseMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<DenseMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<DenseMatrix>,
}

impl SymmetryDocument {
    pub fn from_triple(sym: &SymmetryTriple) -> Self {
        let s = SymmetrySpec::from_triple(sym);
        SymmetryDocument { schema_version: SCHEMA_VERSION, theta: s.theta, xi: s.xi, pi: s.pi }
    }

    pub fn to_triple(&self) -> Result<SymmetryTriple> {
        SymmetrySpec { theta: self.theta.clone(), xi: self.xi.clone(), pi: self.pi.clone() }.to_triple()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDocument {
    pub schema_version: u32,
    pub window: WindowSpec,
    pub fiber_dim: usize,
    pub entries: Entries,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<SymmetrySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_class: Option<AzClass>,
}

impl OperatorDocument {
    pub fn dense(op: &LatticeOperator) -> Self {
        OperatorDocument { entries: Entries::Dense(dense_from_matrix(op.matrix())), ..Self::header(op) }
    }

    /// Banded form listing only the offsets with a nonzero block.
    pub fn banded(op: &LatticeOperator) -> Self {
        let bands = op
            .hoppings()
            .into_iter()
            .map(|(offset, blocks)| Band { offset, blocks: blocks.iter().map(dense_from_matrix).collect() })
            .collect();
        OperatorDocument { entries: Entries::Banded(bands), ..Self::header(op) }
    }

    fn header(op: &LatticeOperator) -> Self {
        OperatorDocument {
            schema_version: SCHEMA_VERSION,
            window: op.window().into(),
            fiber_dim: op.fiber_dim(),
            entries: Entries::Dense(Vec::new()),
            symmetry: None,
            declared_class: None,
        }
    }

    pub fn with_symmetry(mut self, sym: &SymmetryTriple) -> Self {
        self.symmetry = Some(SymmetrySpec::from_triple(sym));
        self
    }

    pub fn with_class(mut self, class: Option<AzClass>) -> Self {
        self.declared_class = class;
        self
    }

    /// Dense operator; banded entries are summed into a zero operator in
    /// document order.
    pub fn to_operator(&self) -> Result<LatticeOperator> {
        let window = self.window.to_window()?;
        let n = self.fiber_dim;
        if n == 0 {
            return Err(Error::MalformedEntries("fiber_dim: must be positive".into()));
        }
        let dim = window.sites() * n;
        match &self.entries {
            Entries::Dense(rows) => {
                let m = matrix_from_dense(rows, "entries.dense")?;
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(Error::MalformedEntries(format!(
                        "entries.dense: {}x{} matrix, expected {dim}x{dim}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                LatticeOperator::new(window, n, m)
            }
            Entries::Banded(bands) => {
                let mut hops = Vec::with_capacity(bands.len());
                for (bi, band) in bands.iter().enumerate() {
                    if band.blocks.len() != window.sites() {
                        return Err(Error::MalformedEntries(format!(
                            "entries.banded[{bi}].blocks: {} blocks, expected one per site ({})",
                            band.blocks.len(),
                            window.sites()
                        )));
                    }
                    let mut blocks = Vec::with_capacity(band.blocks.len());
                    for (si, b) in band.blocks.iter().enumerate() {
                        let loc = format!("entries.banded[{bi}].blocks[{si}]");
                        let m = matrix_from_dense(b, &loc)?;
                        if m.nrows() != n || m.ncols() != n {
                            return Err(Error::MalformedEntries(format!(
                                "{loc}: {}x{} block, expected {n}x{n}",
                                m.nrows(),
                                m.ncols()
                            )));
                        }
                        blocks.push(m);
                    }
                    hops.push((band.offset, blocks));
                }
                LatticeOperator::from_hoppings(window, n, &hops)
            }
        }
    }

    pub fn symmetry_triple(&self) -> Result<Option<SymmetryTriple>> {
        self.symmetry.as_ref().map(SymmetrySpec::to_triple).transpose()
    }
}

pub fn dense_from_matrix(m: &CMat) -> DenseMatrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

/// Matrix from nested rows; `location` prefixes error messages.
pub fn matrix_from_dense(rows: &DenseMatrix, location: &str) -> Result<CMat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(Error::MalformedEntries(format!("{location}: empty matrix")));
    }
    let mut m = linalg::zeros(r, c);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(Error::MalformedEntries(format!("{location}[{i}]: {} entries, expected {c}", row.len())));
        }
        for (j, z) in row.iter().enumerate() {
            if !z[0].is_finite() || !z[1].is_finite() {
                return Err(Error::MalformedEntries(format!("{location}[{i}][{j}]: non-finite value")));
            }
            m[(i, j)] = linalg::c(z[0], z[1]);
        }
    }
    Ok(m)
}

/// Parses a versioned document. Syntax errors report line and column;
/// structural errors report the JSON path of the offending field.
pub fn parse_document<T: DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| {
        Error::MalformedEntries(format!("line {}, column {}: {e}", e.line(), e.column()))
    })?;
    match value.get("schema_version") {
        None => return Err(Error::SchemaMismatch("missing schema_version".into())),
        Some(v) if v.as_u64() != Some(SCHEMA_VERSION as u64) => {
            return Err(Error::SchemaMismatch(format!("schema_version {v}, expected {SCHEMA_VERSION}")))
        }
        Some(_) => {}
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path.starts_with("entries") || path.starts_with("samples") {
            Error::MalformedEntries(format!("{path}: {inner}"))
        } else {
            Error::SchemaMismatch(format!("{path}: {inner}"))
        }
    })
}

/// Compact JSON with a trailing newline. Non-finite values are rejected
/// since JSON cannot carry them.
pub fn serialize_document<T: Serialize>(doc: &T) -> Result<Vec<u8>> {
    let value = serde_json::to_value(doc).map_err(|e| Error::MalformedEntries(e.to_string()))?;
    if let Some(loc) = first_null_number(&value, String::new()) {
        return Err(Error::MalformedEntries(format!("{loc}: non-finite value")));
    }
    let mut out = serde_json::to_vec(&value).map_err(|e| Error::MalformedEntries(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// serde_json maps NaN and infinities to null; complex pairs are the only
/// place a null can appear inside an array of numbers.
fn first_null_number(v: &serde_json::Value, at: String) -> Option<String> {
    match v {
        serde_json::Value::Array(items) => {
            if items.iter().any(|x| x.is_number()) && items.iter().any(|x| x.is_null()) {
                return Some(at);
            }
            items.iter().enumerate().find_map(|(i, x)| first_null_number(x, format!("{at}[{i}]")))
        }
        serde_json::Value::Object(map) => map.iter().find_map(|(k, x)| {
            let at = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
            first_null_number(x, at)
        }),
        _ => None,
    }
}

pub fn parse_operator(bytes: &[u8]) -> Result<OperatorDocument> {
    let doc: OperatorDocument = parse_document(bytes)?;
    doc.to_operator()?;
    doc.symmetry_triple()?;
    Ok(doc)
}

pub fn serialize_operator(doc: &OperatorDocument) -> Result<Vec<u8>> {
    serialize_document(doc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSymmetry {
    pub f: DenseMatrix,
    pub relation: RelationLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSample {
    pub t: f64,
    pub operator: OperatorDocument,
}

/// A sampled homotopy with the constraints it is verified against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathDocument {
    pub schema_version: u32,
    pub kind: PathKind,
    pub cut: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<PathSymmetry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_index: Option<IndexValue>,
    pub gap_floor: f64,
    pub locality_budget: f64,
    pub continuity_budget: f64,
    pub residual_tol: f64,
    pub stages: Vec<StageRecord>,
    pub samples: Vec<PathSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoints: Option<[OperatorDocument; 2]>,
}

impl PathDocument {
    pub fn from_path(path: &HomotopyPath) -> Self {
        let c = &path.constraints;
        PathDocument {
            schema_version: SCHEMA_VERSION,
            kind: c.kind,
            cut: c.cut,
            symmetry: c
                .symmetry
                .as_ref()
                .map(|(f, relation)| PathSymmetry { f: dense_from_matrix(f.unitary_part()), relation: *relation }),
            expected_index: c.expected_index,
            gap_floor: c.gap_floor,
            locality_budget: c.locality_budget,
            continuity_budget: c.continuity_budget,
            residual_tol: c.residual_tol,
            stages: path.construction_log.clone(),
            samples: path.samples.iter().map(|(t, o)| PathSample { t: *t, operator: OperatorDocument::dense(o) }).collect(),
            endpoints: path.endpoints.as_ref().map(|(a, b)| [OperatorDocument::dense(a), OperatorDocument::dense(b)]),
        }
    }

    pub fn to_path(&self) -> Result<HomotopyPath> {
        let symmetry = match &self.symmetry {
            Some(s) => Some((AntiUnitary::new(matrix_from_dense(&s.f, "symmetry.f")?)?, s.relation)),
            None => None,
        };
        let mut constraints = PathConstraints::new(self.kind, self.cut).with_index(self.expected_index);
        constraints.symmetry = symmetry;
        constraints.gap_floor = self.gap_floor;
        constraints.locality_budget = self.locality_budget;
        constraints.continuity_budget = self.continuity_budget;
        constraints.residual_tol = self.residual_tol;
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.operator
                    .to_operator()
                    .map(|o| (s.t, o))
                    .map_err(|e| Error::MalformedEntries(format!("samples[{i}]: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some((_, first)) = samples.first() {
            if let Some((i, _)) = samples.iter().enumerate().find(|(_, (_, o))| !o.same_shape(first)) {
                return Err(Error::MalformedEntries(format!("samples[{i}]: shape differs from the first sample")));
            }
        }
        let endpoints = match &self.endpoints {
            Some([a, b]) => Some((a.to_operator()?, b.to_operator()?)),
            None => None,
        };
        Ok(HomotopyPath { samples, constraints, construction_log: self.stages.clone(), endpoints })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_shift;

    #[test]
    fn dense_round_trip_is_bit_exact() {
        let w = Window::cyclic(6);
        let mut m = linalg::zeros(12, 12);
        for i in 0..12 {
            for j in 0..12 {
                m[(i, j)] = linalg::c((i as f64 * 0.1 + 1.0 / 3.0) / (j as f64 + 0.7), -1e-300 * j as f64);
            }
        }
        m[(0, 1)] = linalg::c(-0.0, f64::MIN_POSITIVE);
        let op = LatticeOperator::new(w, 2, m).unwrap();
        let doc = OperatorDocument::dense(&op);
        let back = parse_operator(&serialize_operator(&doc).unwrap()).unwrap();
        assert_eq!(back, doc);
        let a = op.matrix();
        let b = back.to_operator().unwrap();
        for (x, y) in a.iter().zip(b.matrix().iter()) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }

    #[test]
    fn banded_shift_expands_to_permutation() {
        let w = Window::cyclic(5);
        let r = make_shift(w, 1, 1).unwrap();
        let doc = OperatorDocument::banded(&r);
        match &doc.entries {
            Entries::Banded(b) => assert_eq!(b.len(), 1),
            Entries::Dense(_) => panic!("expected banded entries"),
        }
        let back = parse_operator(&serialize_operator(&doc).unwrap()).unwrap().to_operator().unwrap();
        assert_eq!(back.matrix(), r.matrix());
    }

    #[test]
    fn corrupted_json_reports_location() {
        let doc = OperatorDocument::dense(&LatticeOperator::identity(Window::cyclic(3), 1));
        let mut bytes = serialize_operator(&doc).unwrap();
        bytes.truncate(bytes.len() / 2);
        match parse_operator(&bytes) {
            Err(Error::MalformedEntries(msg)) => assert!(msg.contains("line 1, column"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
