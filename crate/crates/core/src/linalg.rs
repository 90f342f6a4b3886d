//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

// The complex SVD shipped with nalgebra loses accuracy on rank-deficient
// input, so singular value decompositions are computed by one-sided Jacobi.
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

/// Singular value decomposition with singular values sorted in descending order.
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

pub fn svd(m: &CMat) -> Svd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Svd { u: zeros(rows, 0), s: vec![], v: zeros(cols, 0) };
    }
    if rows < cols {
        let t = svd(&m.adjoint());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    let (w, v) = hestenes(m);
    let k = cols;
    let norms: Vec<f64> = (0..k).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut uo = zeros(rows, k);
    let mut vo = zeros(cols, k);
    let mut so = Vec::with_capacity(k);
    let mut live = 0;
    for (j, &i) in order.iter().enumerate() {
        vo.set_column(j, &v.column(i));
        so.push(norms[i]);
        if norms[i] > 0.0 {
            uo.set_column(j, &(w.column(i) / r(norms[i])));
            live += 1;
        }
    }
    if live < k {
        let filled = complete_basis(&uo.columns(0, live).into_owned(), rows);
        uo.columns_mut(live, k - live).copy_from(&filled.columns(live, k - live));
    }
    Svd { u: uo, s: so, v: vo }
}

/// One-sided Jacobi iteration on the columns of `a` (rows >= cols).
/// Returns `(A V, V)` with mutually orthogonal columns of `A V`.
fn hestenes(a: &CMat) -> (CMat, CMat) {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = eye(n);
    let eps = f64::EPSILON;
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (alpha, beta, gamma) = {
                    let ws = w.as_slice();
                    let ci = &ws[i * m..(i + 1) * m];
                    let cj = &ws[j * m..(j + 1) * m];
                    let mut al = 0.0;
                    let mut be = 0.0;
                    let mut ga = C64::new(0.0, 0.0);
                    for k in 0..m {
                        al += ci[k].norm_sqr();
                        be += cj[k].norm_sqr();
                        ga += ci[k].conj() * cj[k];
                    }
                    (al, be, ga)
                };
                let g = gamma.norm();
                if g == 0.0 || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(w.as_mut_slice(), m, i, j, c, s, phase);
                rotate_columns(v.as_mut_slice(), n, i, j, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }
    (w, v)
}

/// `a_i <- c a_i - s conj(phase) a_j`, `a_j <- s a_i + c conj(phase) a_j`.
fn rotate_columns(data: &mut [C64], m: usize, i: usize, j: usize, c: f64, s: f64, phase: C64) {
    let ph = phase.conj();
    let (lo, hi) = data.split_at_mut(j * m);
    let ci = &mut lo[i * m..(i + 1) * m];
    let cj = &mut hi[..m];
    for k in 0..m {
        let a = ci[k];
        let b = cj[k] * ph;
        ci[k] = a * c - b * s;
        cj[k] = a * s + b * c;
    }
}

/// Full left and right singular bases (square unitary factors), with the
/// singular values padded by zeros.
pub fn svd_full(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (rows, cols) = m.shape();
    let d = svd(m);
    let u = complete_basis(&d.u, rows);
    let v = complete_basis(&d.v, cols);
    let mut s = d.s.clone();
    s.resize(rows.max(cols), 0.0);
    (u, s, v)
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    svd(m).s
}

/// Spectral (largest singular value) norm, from the top eigenvalue of the
/// smaller Gram matrix.
pub fn norm2(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let scale = max_abs(m);
    if scale == 0.0 {
        return 0.0;
    }
    let a = m / r(scale);
    let g = if a.nrows() >= a.ncols() { a.adjoint() * &a } else { &a * a.adjoint() };
    let top = herm_eig(&g).0.last().copied().unwrap_or(0.0);
    top.max(0.0).sqrt() * scale
}

pub fn min_singular(m: &CMat) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Hermitian eigendecomposition with ascending eigenvalues.
pub fn herm_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (vec![], zeros(0, 0));
    }
    let h = (m + m.adjoint()) * r(0.5);
    let dec = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        dec.eigenvalues[a]
            .partial_cmp(&dec.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut q = zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (j, &i) in order.iter().enumerate() {
        q.set_column(j, &dec.eigenvectors.column(i));
        vals.push(dec.eigenvalues[i]);
    }
    (vals, q)
}

/// Eigendecomposition of a normal matrix. The Hermitian combination
/// `Re M + c Im M` shares the eigenvectors of `M`; groups of nearly equal
/// eigenvalues are re-split with a different `c`.
pub fn normal_eig(m: &CMat) -> (Vec<C64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (vec![], zeros(0, 0));
    }
    let q = normal_basis(m, 0);
    let d = q.adjoint() * m * &q;
    ((0..n).map(|i| d[(i, i)]).collect(), q)
}

fn normal_basis(m: &CMat, depth: usize) -> CMat {
    const MIX: [f64; 3] = [0.618_033_988_749_895, -1.324_717_957_244_746, std::f64::consts::E];
    let re = (m + m.adjoint()) * r(0.5);
    let im = (m - m.adjoint()) * c(0.0, -0.5);
    let (mu, mut q) = herm_eig(&(re + im * r(MIX[depth])));
    if depth + 1 == MIX.len() {
        return q;
    }
    let scale = max_abs(m).max(1.0);
    let mut start = 0;
    while start < mu.len() {
        let mut end = start + 1;
        while end < mu.len() && mu[end] - mu[end - 1] < 1e-5 * scale {
            end += 1;
        }
        if end - start > 1 {
            let qg = q.columns(start, end - start).into_owned();
            let block = qg.adjoint() * m * &qg;
            let sub = normal_basis(&block, depth + 1);
            q.columns_mut(start, end - start).copy_from(&(qg * sub));
        }
        start = end;
    }
    q
}

/// Eigendecomposition of a unitary: eigenphases in (-pi, pi] and eigenvectors.
pub fn unitary_eig(u: &CMat) -> (Vec<f64>, CMat) {
    let (vals, q) = normal_eig(u);
    (vals.iter().map(|z| z.arg()).collect(), q)
}

/// Q diag(f) Q^*.
pub fn reassemble(q: &CMat, diag: &[C64]) -> CMat {
    let mut scaled = q.clone();
    for (j, d) in diag.iter().enumerate() {
        let mut col = scaled.column_mut(j);
        col *= *d;
    }
    scaled * q.adjoint()
}

pub fn reassemble_real(q: &CMat, diag: &[f64]) -> CMat {
    let d: Vec<C64> = diag.iter().map(|&x| r(x)).collect();
    reassemble(q, &d)
}

/// Projection onto the column span of an orthonormal matrix.
pub fn projector(basis: &CMat) -> CMat {
    basis * basis.adjoint()
}

/// Columns spanning the numerical range of `m` (orthonormal).
pub fn range_basis(m: &CMat, tol: f64) -> CMat {
    let d = svd(m);
    let k = d.s.iter().filter(|&&s| s > tol).count();
    d.u.columns(0, k).into_owned()
}

/// Orthonormal basis of the right null space (singular values below `tol`).
pub fn right_null(m: &CMat, tol: f64) -> CMat {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return eye(cols);
    }
    let (_, s, v) = svd_full(m);
    let idx: Vec<usize> = (0..cols).filter(|&j| s.get(j).copied().unwrap_or(0.0) < tol).collect();
    select_columns(&v, &idx)
}

/// Orthonormal basis of the left null space (cokernel).
pub fn left_null(m: &CMat, tol: f64) -> CMat {
    right_null(&m.adjoint(), tol)
}

pub fn select_columns(m: &CMat, idx: &[usize]) -> CMat {
    let mut out = zeros(m.nrows(), idx.len());
    for (j, &i) in idx.iter().enumerate() {
        out.set_column(j, &m.column(i));
    }
    out
}

pub fn hstack(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// Extends orthonormal columns to a full orthonormal basis of C^n.
pub fn complete_basis(cols: &CMat, n: usize) -> CMat {
    let k = cols.ncols();
    if k >= n {
        return cols.clone();
    }
    let p = eye(n) - projector(cols);
    let (vals, q) = herm_eig(&p);
    let idx: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.5).collect();
    let extra = select_columns(&q, &idx);
    hstack(cols, &extra.columns(0, n - k).into_owned())
}

/// Modified Gram-Schmidt with reorthogonalisation. Columns whose residual
/// norm drops below `tol` are discarded.
pub fn orthonormalize(m: &CMat, tol: f64) -> CMat {
    let mut basis: Vec<CVec> = Vec::new();
    for j in 0..m.ncols() {
        let mut v: CVec = m.column(j).into_owned();
        for _ in 0..2 {
            for b in &basis {
                let coef = b.dotc(&v);
                v -= b * coef;
            }
        }
        let nv = v.norm();
        if nv > tol {
            basis.push(v / r(nv));
        }
    }
    let mut out = zeros(m.nrows(), basis.len());
    for (j, b) in basis.iter().enumerate() {
        out.set_column(j, b);
    }
    out
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let mut out = zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut(a.shape(), b.shape()).copy_from(b);
    out
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[r(0.0), r(1.0), r(1.0), r(0.0)])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[r(0.0), c(0.0, -1.0), c(0.0, 1.0), r(0.0)])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[r(1.0), r(0.0), r(0.0), r(-1.0)])
}

/// i sigma_y, the standard quaternionic structure matrix.
pub fn i_sigma_y() -> CMat {
    CMat::from_row_slice(2, 2, &[r(0.0), r(1.0), r(-1.0), r(0.0)])
}

pub fn unitarity_residual(u: &CMat) -> f64 {
    let n = u.ncols();
    norm2(&(u.adjoint() * u - eye(n))).max(norm2(&(u * u.adjoint() - eye(u.nrows()))))
}

pub fn hermiticity_residual(h: &CMat) -> f64 {
    norm2(&(h - h.adjoint()))
}

/// Polar part with the kernel convention `ker pol(A) = ker A`; singular values
/// at or below `tol` are treated as zero.
pub fn polar_part(a: &CMat, tol: f64) -> CMat {
    let d = svd(a);
    let k = d.s.iter().filter(|&&s| s > tol).count();
    let u = d.u.columns(0, k);
    let v = d.v.columns(0, k);
    u * v.adjoint()
}

/// exp(i K) for Hermitian K.
pub fn expi_herm(k: &CMat) -> CMat {
    let (vals, q) = herm_eig(k);
    let d: Vec<C64> = vals.iter().map(|&x| C64::from_polar(1.0, x)).collect();
    reassemble(&q, &d)
}

/// Hermitian square root of a positive semidefinite matrix.
pub fn sqrt_psd(m: &CMat) -> CMat {
    let (vals, q) = herm_eig(m);
    let d: Vec<f64> = vals.iter().map(|&x| x.max(0.0).sqrt()).collect();
    reassemble_real(&q, &d)
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

pub fn determinant(m: &CMat) -> C64 {
    m.clone().determinant()
}
