//! Integer and Z2 indices: trace and kernel routes, symbol winding, Schur
//! complement probe and edge indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeOperator, Window};
use crate::linalg::{self, CMat, C64};
use crate::spectral::{compress, split_indices, submatrix};
use crate::symmetry::{check_relation, AntiUnitary, RelationLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexValue {
    Z(i64),
    Z2(u8),
}

impl IndexValue {
    pub fn as_z(self) -> Option<i64> {
        match self {
            IndexValue::Z(v) => Some(v),
            IndexValue::Z2(_) => None,
        }
    }

    pub fn as_z2(self) -> Option<u8> {
        match self {
            IndexValue::Z2(v) => Some(v),
            IndexValue::Z(v) => Some(v.rem_euclid(2) as u8),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Trace,
    Kernel,
    Winding,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexResult {
    pub value: IndexValue,
    pub raw_trace: Option<f64>,
    pub ker_dim: Option<usize>,
    pub coker_dim: Option<usize>,
    pub tolerance_used: f64,
    pub route: Route,
    /// Conventions applied and consistency diagnostics.
    pub notes: Vec<String>,
}

impl IndexResult {
    pub fn z(&self) -> i64 {
        self.value.as_z().expect("integer index")
    }

    pub fn z2(&self) -> u8 {
        self.value.as_z2().expect("index")
    }
}

/// Threshold on the distance of the raw trace from an integer.
pub const TRACE_INTEGER_TOL: f64 = 0.1;
/// Default relative singular-value tolerance of the kernel route.
pub const KERNEL_TOL: f64 = 1e-6;
/// Relative singular-value tolerance of the Z2 route.
pub const Z2_TOL: f64 = 0.5;

/// Cut site of a half-line projection, checking that it is one.
pub fn cut_of(lambda: &LatticeOperator) -> Result<i64> {
    let w = lambda.window();
    let n = lambda.fiber_dim();
    let m = lambda.matrix();
    let mut cut = None;
    for (i, x) in w.site_list().enumerate() {
        let on = m[(i * n, i * n)].re > 0.5;
        if on && cut.is_none() {
            cut = Some(x);
        }
    }
    let cut = cut.ok_or_else(|| Error::ShapeMismatch("projection has empty range".into()))?;
    let expect = crate::lattice::half_line_projection(w, n, cut)
        .map_err(|_| Error::ShapeMismatch("not a half-line projection".into()))?;
    if expect.matrix() != m {
        return Err(Error::ShapeMismatch("not a half-line projection".into()));
    }
    Ok(cut)
}

/// Sites that enter the restricted trace: `[cut - S/4, cut + S/4)`.
pub fn trace_region(w: &Window, cut: i64) -> Vec<usize> {
    let q = (w.sites() / 4) as i64;
    w.site_list().enumerate().filter(|(_, x)| *x >= cut - q && *x < cut + q).map(|(i, _)| i).collect()
}

fn check_unitary(u: &LatticeOperator) -> Result<()> {
    let res = linalg::unitarity_residual(u.matrix());
    if res > 1e-8 {
        return Err(Error::NotUnitary(res));
    }
    Ok(())
}

/// Raw restricted trace of `Lambda - U^* Lambda U`.
pub fn raw_index_trace(u: &LatticeOperator, lambda: &LatticeOperator) -> Result<f64> {
    u.check_shape(lambda)?;
    let cut = cut_of(lambda)?;
    let um = u.matrix();
    let d = lambda.matrix() - um.adjoint() * lambda.matrix() * um;
    let n = u.fiber_dim();
    let raw: f64 = trace_region(&u.window(), cut)
        .into_iter()
        .flat_map(|i| (0..n).map(move |f| i * n + f))
        .map(|k| d[(k, k)].re)
        .sum();
    Ok(raw)
}

/// `ind = Tr(Lambda - U^* Lambda U)` restricted to sites within `S/4` of the cut.
pub fn index_trace(u: &LatticeOperator, lambda: &LatticeOperator) -> Result<IndexResult> {
    check_unitary(u)?;
    let raw = raw_index_trace(u, lambda)?;
    let rounded = raw.round();
    if (raw - rounded).abs() >= TRACE_INTEGER_TOL {
        return Err(Error::NonIntegerTrace { raw });
    }
    Ok(IndexResult {
        value: IndexValue::Z(rounded as i64),
        raw_trace: Some(raw),
        ker_dim: None,
        coker_dim: None,
        tolerance_used: TRACE_INTEGER_TOL,
        route: Route::Trace,
        notes: vec!["trace restricted to sites within S/4 of the cut".into()],
    })
}

/// Indicator (as index list into `im Lambda`) of the half of `im Lambda`
/// adjacent to the cut.
fn near_half(w: &Window, n: usize, cut: i64, inside: &[usize]) -> Vec<usize> {
    let len = (w.max_site - cut) as usize;
    let half = (len / 2).max(1) as i64;
    inside
        .iter()
        .enumerate()
        .filter(|(_, &k)| {
            let x = w.site(k / n);
            x >= cut && x < cut + half
        })
        .map(|(a, _)| a)
        .collect()
}

/// Number of directions in the span of `basis` whose mass on `near` exceeds
/// one half.
pub fn edge_count(basis: &CMat, near: &[usize]) -> usize {
    if basis.ncols() == 0 {
        return 0;
    }
    let rows = linalg::select_columns(&basis.transpose(), near).transpose();
    let mass = rows.adjoint() * rows;
    linalg::herm_eig(&mass).0.iter().filter(|&&m| m > 0.5).count()
}

struct Compression {
    block: CMat,
    near: Vec<usize>,
}

fn compression(a: &LatticeOperator, lambda: &LatticeOperator) -> Result<Compression> {
    a.check_shape(lambda)?;
    let cut = cut_of(lambda)?;
    let (inside, _) = split_indices(lambda);
    let block = compress(a.matrix(), &inside);
    let near = near_half(&a.window(), a.fiber_dim(), cut, &inside);
    Ok(Compression { block, near })
}

/// Near-kernel spaces of a square block: `(ker, coker, total_ker, total_coker)`.
fn near_kernels(block: &CMat, tol: f64) -> (CMat, CMat) {
    let (u, s, v) = linalg::svd_full(block);
    let idx: Vec<usize> = (0..s.len()).filter(|&j| s[j] < tol).collect();
    (linalg::select_columns(&v, &idx), linalg::select_columns(&u, &idx))
}

/// `dim ker - dim coker` of the compression of `A` to `im Lambda`.
/// `tol` is relative to `||A||`.
pub fn index_kernel(a: &LatticeOperator, lambda: &LatticeOperator, tol: f64, edge_filter: bool) -> Result<IndexResult> {
    let c = compression(a, lambda)?;
    let abs_tol = tol * a.norm().max(f64::MIN_POSITIVE);
    let (ker, coker) = near_kernels(&c.block, abs_tol);
    let (k, ck) = if edge_filter {
        (edge_count(&ker, &c.near), edge_count(&coker, &c.near))
    } else {
        (ker.ncols(), coker.ncols())
    };
    let mut notes = vec![format!("near-kernel: singular values below {abs_tol:.3e}")];
    if edge_filter {
        notes.push(format!("edge filter kept {k} of {} kernel and {ck} of {} cokernel directions", ker.ncols(), coker.ncols()));
    }
    Ok(IndexResult {
        value: IndexValue::Z(k as i64 - ck as i64),
        raw_trace: None,
        ker_dim: Some(k),
        coker_dim: Some(ck),
        tolerance_used: abs_tol,
        route: Route::Kernel,
        notes,
    })
}

#[derive(Debug, Clone)]
pub struct ClassCheck {
    pub f: AntiUnitary,
    pub relation: RelationLabel,
}

/// Edge-filtered kernel parity of the compression of a star-quaternionic
/// unitary or an imaginary-real self-adjoint unitary.
pub fn index_z2(a: &LatticeOperator, lambda: &LatticeOperator, class: &ClassCheck) -> Result<IndexResult> {
    index_z2_with_tol(a, lambda, class, Z2_TOL)
}

pub fn index_z2_with_tol(a: &LatticeOperator, lambda: &LatticeOperator, class: &ClassCheck, tol: f64) -> Result<IndexResult> {
    let m = a.matrix();
    let unit = linalg::unitarity_residual(m);
    let herm = linalg::hermiticity_residual(m);
    match class.relation {
        RelationLabel::StarQuaternionic if unit <= 1e-8 => {}
        RelationLabel::IReal if unit <= 1e-8 && herm <= 1e-8 => {}
        RelationLabel::StarQuaternionic | RelationLabel::IReal => return Err(Error::NotUnitaryOrSau),
        other => {
            return Err(Error::ClassMismatch(format!("Z2 index needs star_quaternionic or i_real, got {}", other.name())))
        }
    }
    let sym_tol = 1e-8 * a.norm().max(1.0);
    let res = check_relation(a, &class.f, class.relation)?;
    if res >= sym_tol {
        return Err(Error::SymmetryViolated(res));
    }
    let c = compression(a, lambda)?;
    let abs_tol = tol * a.norm();
    let (ker, _) = near_kernels(&c.block, abs_tol);
    let k = edge_count(&ker, &c.near);
    let total = ker.ncols();
    let mut notes = vec![format!("near-kernel: singular values below {abs_tol:.3e}, edge filtered")];
    if total % 2 == 1 {
        notes.push(format!("warning: total near-kernel dimension {total} is odd"));
    } else {
        notes.push(format!("total near-kernel dimension {total} (even)"));
    }
    Ok(IndexResult {
        value: IndexValue::Z2((k % 2) as u8),
        raw_trace: None,
        ker_dim: Some(k),
        coker_dim: None,
        tolerance_used: abs_tol,
        route: Route::Kernel,
        notes,
    })
}

/// `S(k) = sum_l S_l e^{ikl}`.
pub fn symbol_at(hoppings: &[(i64, CMat)], k: f64) -> CMat {
    let n = hoppings[0].1.nrows();
    let mut s = linalg::zeros(n, n);
    for (l, m) in hoppings {
        s += m * C64::from_polar(1.0, k * *l as f64);
    }
    s
}

/// Winding number of `det S(k)` over `M` uniform momenta.
pub fn winding_symbol(hoppings: &[(i64, CMat)], resolution: usize) -> Result<i64> {
    if hoppings.is_empty() || resolution < 3 {
        return Err(Error::ShapeMismatch("need a non-empty symbol and at least 3 momenta".into()));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let dets: Vec<(f64, C64)> = (0..resolution)
        .map(|j| {
            let k = two_pi * j as f64 / resolution as f64;
            (k, linalg::determinant(&symbol_at(hoppings, k)))
        })
        .collect();
    let scale = dets.iter().map(|(_, d)| d.norm()).fold(0.0, f64::max);
    for &(k, d) in &dets {
        if d.norm() <= 1e-12 * scale.max(1.0) {
            return Err(Error::SingularSymbol { k, det_abs: d.norm() });
        }
    }
    let mut total = 0.0;
    for j in 0..resolution {
        let a = dets[j].1;
        let b = dets[(j + 1) % resolution].1;
        total += (b / a).arg();
    }
    let raw = total / two_pi;
    let rounded = raw.round();
    if (raw - rounded).abs() > 0.1 {
        return Err(Error::NonIntegerWinding { raw });
    }
    Ok(rounded as i64)
}

/// `ind = -winding(det S(k))`.
pub fn index_winding(hoppings: &[(i64, CMat)], resolution: usize) -> Result<IndexResult> {
    let w = winding_symbol(hoppings, resolution)?;
    Ok(IndexResult {
        value: IndexValue::Z(-w),
        raw_trace: None,
        ker_dim: None,
        coker_dim: None,
        tolerance_used: 0.1,
        route: Route::Winding,
        notes: vec![format!("{resolution} momenta")],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchurProbe {
    pub rank_z: usize,
    pub parity_ok: bool,
    pub ker_t: usize,
    /// `dim ker T - rank Z`.
    pub ker_s_predicted: usize,
    pub z_singular_values: Vec<f64>,
}

/// Schur complement of `S` with respect to the kernel/range splitting of `T`.
pub fn schur_parity_probe(t: &LatticeOperator, s: &LatticeOperator, f: &AntiUnitary, relation: RelationLabel) -> Result<SchurProbe> {
    t.check_shape(s)?;
    match relation {
        RelationLabel::StarQuaternionic | RelationLabel::IReal => {}
        other => return Err(Error::ClassMismatch(format!("probe needs star_quaternionic or i_real, got {}", other.name()))),
    }
    let sym_tol = 1e-8 * t.norm().max(1.0);
    for op in [t, s] {
        let res = check_relation(op, f, relation)?;
        if res >= sym_tol {
            return Err(Error::SymmetryViolated(res));
        }
    }
    let tm = t.matrix();
    let sm = s.matrix();
    let tol = 1e-8 * t.norm().max(1.0);
    let (u, sv, v) = linalg::svd_full(tm);
    let dim = tm.nrows();
    let small: Vec<usize> = (0..dim).filter(|&j| sv[j] <= tol).collect();
    let big: Vec<usize> = (0..dim).filter(|&j| sv[j] > tol).collect();
    let a = linalg::select_columns(&v, &small);
    let b = linalg::select_columns(&v, &big);
    let cc = linalg::select_columns(&u, &small);
    let d = linalg::select_columns(&u, &big);
    let sigma_min = big.iter().map(|&j| sv[j]).fold(f64::INFINITY, f64::min);
    let pert = linalg::norm2(&(sm - tm));
    if !big.is_empty() && pert >= sigma_min {
        return Err(Error::PerturbationTooLarge(format!("||S - T|| = {pert:.3e} >= {sigma_min:.3e}")));
    }
    let s_ca = cc.adjoint() * sm * &a;
    let z = if big.is_empty() {
        s_ca
    } else {
        let s_cb = cc.adjoint() * sm * &b;
        let s_db = d.adjoint() * sm * &b;
        let s_da = d.adjoint() * sm * &a;
        let inv = linalg::inverse(&s_db).ok_or_else(|| Error::PerturbationTooLarge("S_DB singular".into()))?;
        s_ca - s_cb * inv * s_da
    };
    let zs = linalg::singular_values(&z);
    let rank_z = zs.iter().filter(|&&x| x > tol).count();
    Ok(SchurProbe {
        rank_z,
        parity_ok: rank_z % 2 == 0,
        ker_t: small.len(),
        ker_s_predicted: small.len() - rank_z.min(small.len()),
        z_singular_values: zs,
    })
}

#[derive(Debug, Clone)]
pub enum EdgeClass {
    /// Chiral class: index of the chiral block in the frame of `pi`.
    Aiii { pi: CMat },
    /// Particle-hole only: zero-mode parity.
    D,
    /// Time reversal with square -1 and particle-hole: Kramers-pair parity.
    Diii,
}

/// Index of a Hamiltonian on an open window whose left end is the physical
/// edge. Near-zero modes (relative to `||H||`) are kept when their mass lies
/// mostly in the left half.
pub fn edge_index(h_edge: &LatticeOperator, class: &EdgeClass, tol: f64) -> Result<IndexResult> {
    let w = h_edge.window();
    if w.boundary != crate::lattice::Boundary::Open {
        return Err(Error::InvalidWindow("edge index needs an open window".into()));
    }
    let herm = linalg::hermiticity_residual(h_edge.matrix());
    if herm > 1e-8 * h_edge.norm().max(1.0) {
        return Err(Error::NotSelfAdjoint(herm));
    }
    let abs_tol = tol * h_edge.norm().max(f64::MIN_POSITIVE);
    let left = |n: usize| -> Vec<usize> {
        let half = (w.sites() / 2) as i64;
        (0..w.sites() * n).filter(|&k| w.site(k / n) < w.min_site + half).collect()
    };
    let check_localized = |basis: &CMat, near: &[usize]| -> Result<()> {
        if basis.ncols() == 0 {
            return Ok(());
        }
        let rows = linalg::select_columns(&basis.transpose(), near).transpose();
        let mass = linalg::herm_eig(&(rows.adjoint() * rows)).0;
        if let Some(m) = mass.iter().find(|&&m| m > 0.1 && m < 0.9) {
            return Err(Error::NotEssentiallyGapped(format!("near-zero mode with edge mass {m:.3}")));
        }
        Ok(())
    };
    match class {
        EdgeClass::Aiii { pi } => {
            let s = crate::symmetry::chiral_blocks(h_edge, pi)?;
            let n = s.fiber_dim();
            let (ker, coker) = near_kernels(s.matrix(), abs_tol);
            if ker.ncols() + coker.ncols() > 4 * n {
                return Err(Error::NotEssentiallyGapped(format!("{} near-zero modes", ker.ncols() + coker.ncols())));
            }
            let near = left(n);
            check_localized(&ker, &near)?;
            check_localized(&coker, &near)?;
            let k = edge_count(&ker, &near);
            let ck = edge_count(&coker, &near);
            Ok(IndexResult {
                value: IndexValue::Z(k as i64 - ck as i64),
                raw_trace: None,
                ker_dim: Some(k),
                coker_dim: Some(ck),
                tolerance_used: abs_tol,
                route: Route::Kernel,
                notes: vec!["chiral block, left-edge filtered".into()],
            })
        }
        EdgeClass::D | EdgeClass::Diii => {
            let n = h_edge.fiber_dim();
            let (vals, q) = linalg::herm_eig(h_edge.matrix());
            let idx: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].abs() < abs_tol).collect();
            if idx.len() > 4 * n {
                return Err(Error::NotEssentiallyGapped(format!("{} near-zero modes", idx.len())));
            }
            let zero = linalg::select_columns(&q, &idx);
            let near = left(n);
            check_localized(&zero, &near)?;
            let count = edge_count(&zero, &near);
            let value = match class {
                EdgeClass::D => count % 2,
                _ => (count / 2) % 2,
            };
            Ok(IndexResult {
                value: IndexValue::Z2(value as u8),
                raw_trace: None,
                ker_dim: Some(count),
                coker_dim: None,
                tolerance_used: abs_tol,
                route: Route::Kernel,
                notes: vec!["zero modes, left-edge filtered".into()],
            })
        }
    }
}

/// Direct kernel dimension by SVD with an absolute tolerance.
pub fn kernel_dim(m: &CMat, tol: f64) -> usize {
    let s = linalg::singular_values(m);
    let zero_extra = m.ncols().saturating_sub(s.len());
    s.iter().filter(|&&x| x <= tol).count() + zero_extra
}

/// Compression of `A` to the index set of a half-line projection, returned
/// together with the index list.
pub fn lambda_compression(a: &LatticeOperator, lambda: &LatticeOperator) -> Result<(CMat, Vec<usize>)> {
    a.check_shape(lambda)?;
    let (inside, _) = split_indices(lambda);
    Ok((submatrix(a.matrix(), &inside, &inside), inside))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{half_line_projection, make_shift};
    use crate::linalg::r;

    #[test]
    fn shift_indices() {
        let w = Window::cyclic(32);
        let lam = half_line_projection(w, 1, 1).unwrap();
        for k in -5..=5 {
            let u = make_shift(w, 1, k).unwrap();
            assert_eq!(index_trace(&u, &lam).unwrap().z(), -k);
            assert_eq!(index_kernel(&u, &lam, KERNEL_TOL, true).unwrap().z(), -k);
        }
    }

    #[test]
    fn identity_has_zero_index() {
        let w = Window::cyclic(16);
        let lam = half_line_projection(w, 2, 1).unwrap();
        let one = LatticeOperator::identity(w, 2);
        assert_eq!(index_trace(&one, &lam).unwrap().z(), 0);
        let r = index_kernel(&one, &lam, KERNEL_TOL, false).unwrap();
        assert_eq!((r.ker_dim, r.coker_dim), (Some(0), Some(0)));
    }

    #[test]
    fn shift_kernel_route_counts() {
        let w = Window::cyclic(16);
        let lam = half_line_projection(w, 1, 1).unwrap();
        let u = make_shift(w, 1, 1).unwrap();
        let r = index_kernel(&u, &lam, KERNEL_TOL, true).unwrap();
        assert_eq!((r.ker_dim, r.coker_dim), (Some(0), Some(1)));
        let raw = index_kernel(&u, &lam, KERNEL_TOL, false).unwrap();
        assert_eq!((raw.ker_dim, raw.coker_dim), (Some(1), Some(1)));
    }

    #[test]
    fn non_unitary_rejected() {
        let w = Window::cyclic(8);
        let lam = half_line_projection(w, 1, 1).unwrap();
        let a = LatticeOperator::identity(w, 1).scale(r(2.0));
        assert!(matches!(index_trace(&a, &lam), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn shift_symbol_winding() {
        let one = CMat::from_element(1, 1, r(1.0));
        assert_eq!(winding_symbol(&[(1, one.clone())], 64).unwrap(), 1);
        assert_eq!(winding_symbol(&[(0, one.clone())], 64).unwrap(), 0);
        let sing = [(0, one.clone()), (1, -one)];
        assert!(matches!(winding_symbol(&sing, 64), Err(Error::SingularSymbol { .. })));
    }

    #[test]
    fn schur_probe_trivial() {
        let w = Window::cyclic(4);
        let f = AntiUnitary::quaternionic(1);
        // 1 (x) i sigma_y is antisymmetric times V: a star-quaternionic operator
        // with empty kernel.
        let t = LatticeOperator::identity(w, 2);
        let p = schur_parity_probe(&t, &t, &f, RelationLabel::StarQuaternionic).unwrap();
        assert_eq!(p.rank_z, 0);
        assert!(p.parity_ok);
    }
}
