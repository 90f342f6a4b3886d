//! Eigen-decompositions, flattening, polar parts, gaps and spectral cuts.

use crate::error::{Error, Result};
use crate::lattice::LatticeOperator;
use crate::linalg::{self, CMat};

#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
    pub gap_at_zero: f64,
}

fn herm_check(h: &LatticeOperator) -> Result<()> {
    let res = linalg::hermiticity_residual(h.matrix());
    if res > 1e-8 * h.norm().max(1.0) {
        return Err(Error::NotSelfAdjoint(res));
    }
    Ok(())
}

pub fn spectral_data(h: &LatticeOperator) -> Result<SpectralData> {
    herm_check(h)?;
    let (vals, q) = linalg::herm_eig(h.matrix());
    let gap = vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    Ok(SpectralData { eigenvalues: vals, eigenvectors: q, gap_at_zero: gap })
}

/// `f(H)` for self-adjoint `H`.
pub fn herm_function(h: &LatticeOperator, f: impl Fn(f64) -> f64) -> Result<LatticeOperator> {
    let sd = spectral_data(h)?;
    let d: Vec<f64> = sd.eigenvalues.iter().map(|&x| f(x)).collect();
    Ok(h.like(linalg::reassemble_real(&sd.eigenvectors, &d)))
}

/// `sgn(H)`.
pub fn flatten(h: &LatticeOperator, gap_tol: f64) -> Result<LatticeOperator> {
    let sd = spectral_data(h)?;
    if sd.gap_at_zero <= gap_tol {
        return Err(Error::GapClosed(sd.gap_at_zero));
    }
    let d: Vec<f64> = sd.eigenvalues.iter().map(|&x| x.signum()).collect();
    let u = linalg::reassemble_real(&sd.eigenvectors, &d);
    Ok(h.like((&u + u.adjoint()) * linalg::r(0.5)))
}

/// Polar part with `ker pol(A) = ker A`, singular values below `1e-8 ||A||`
/// counted as zero.
pub fn polar(a: &LatticeOperator) -> LatticeOperator {
    let tol = 1e-8 * a.norm();
    a.like(linalg::polar_part(a.matrix(), tol))
}

pub fn spectral_gap(h: &LatticeOperator) -> Result<f64> {
    herm_check(h)?;
    let vals = linalg::herm_eig(h.matrix()).0;
    Ok(vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min))
}

/// Minimum distance of the spectrum from the cut; used as the default `delta`.
pub const CUT_MARGIN: f64 = 1e-6;

/// `chi_{(lambda0, inf)}(P_ess)`.
pub fn spectral_cut_projection(p_ess: &LatticeOperator, lambda0: f64) -> Result<LatticeOperator> {
    spectral_cut_projection_with_margin(p_ess, lambda0, CUT_MARGIN)
}

pub fn spectral_cut_projection_with_margin(p_ess: &LatticeOperator, lambda0: f64, delta: f64) -> Result<LatticeOperator> {
    let sd = spectral_data(p_ess)?;
    if let Some(&bad) = sd.eigenvalues.iter().find(|&&x| (x - lambda0).abs() < delta) {
        return Err(Error::EigenvalueAtCut(bad));
    }
    let idx: Vec<usize> = (0..sd.eigenvalues.len()).filter(|&i| sd.eigenvalues[i] > lambda0).collect();
    let b = linalg::select_columns(&sd.eigenvectors, &idx);
    let q = linalg::projector(&b);
    Ok(p_ess.like((&q + q.adjoint()) * linalg::r(0.5)))
}

/// `(1 - t) H + t sgn(H)`.
pub fn flat_retraction(h: &LatticeOperator, t: f64) -> Result<LatticeOperator> {
    let sd = spectral_data(h)?;
    if sd.gap_at_zero <= 0.0 {
        return Err(Error::GapClosed(sd.gap_at_zero));
    }
    let d: Vec<f64> = sd.eigenvalues.iter().map(|&x| (1.0 - t) * x + t * x.signum()).collect();
    let m = linalg::reassemble_real(&sd.eigenvectors, &d);
    Ok(h.like((&m + m.adjoint()) * linalg::r(0.5)))
}

/// Projection onto the negative spectral subspace.
pub fn fermi_projection(h: &LatticeOperator) -> Result<LatticeOperator> {
    herm_function(h, |x| if x < 0.0 { 1.0 } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NontrivialityReport {
    /// Counts for the compression to `im(1 - Lambda)` (sites left of the cut).
    pub left_plus: usize,
    pub left_minus: usize,
    /// Counts for the compression to `im Lambda`.
    pub right_plus: usize,
    pub right_minus: usize,
    pub floor: usize,
    pub nontrivial: bool,
}

/// Eigenvalue tolerance for counting `+-1` eigenvalues of the compressions.
pub const NONTRIVIALITY_TOL: f64 = 1e-4;

pub fn default_nontriviality_floor(sites: usize) -> usize {
    (sites / 8).max(1)
}

pub fn check_sau(u: &LatticeOperator, tol: f64) -> Result<()> {
    let m = u.matrix();
    let res = linalg::hermiticity_residual(m).max(linalg::unitarity_residual(m));
    if res > tol {
        return Err(Error::NotSau(res));
    }
    Ok(())
}

pub fn lambda_nontriviality_check(u: &LatticeOperator, lambda: &LatticeOperator, tol: f64) -> Result<NontrivialityReport> {
    lambda_nontriviality_check_with_floor(u, lambda, tol, default_nontriviality_floor(u.window().sites()))
}

pub fn lambda_nontriviality_check_with_floor(
    u: &LatticeOperator,
    lambda: &LatticeOperator,
    tol: f64,
    floor: usize,
) -> Result<NontrivialityReport> {
    u.check_shape(lambda)?;
    check_sau(u, 1e-8)?;
    let (right, left) = split_indices(lambda);
    let count = |idx: &[usize]| {
        let block = compress(u.matrix(), idx);
        let vals = linalg::herm_eig(&block).0;
        let plus = vals.iter().filter(|&&x| (x - 1.0).abs() < tol).count();
        let minus = vals.iter().filter(|&&x| (x + 1.0).abs() < tol).count();
        (plus, minus)
    };
    let (right_plus, right_minus) = count(&right);
    let (left_plus, left_minus) = count(&left);
    let nontrivial = [left_plus, left_minus, right_plus, right_minus].iter().all(|&c| c >= floor);
    Ok(NontrivialityReport { left_plus, left_minus, right_plus, right_minus, floor, nontrivial })
}

/// Indices in `im Lambda` and in its complement for a diagonal projection.
pub fn split_indices(lambda: &LatticeOperator) -> (Vec<usize>, Vec<usize>) {
    let m = lambda.matrix();
    let inside: Vec<usize> = (0..m.nrows()).filter(|&i| m[(i, i)].re > 0.5).collect();
    let outside: Vec<usize> = (0..m.nrows()).filter(|&i| m[(i, i)].re <= 0.5).collect();
    (inside, outside)
}

/// Principal submatrix on `idx`.
pub fn compress(m: &CMat, idx: &[usize]) -> CMat {
    let mut out = linalg::zeros(idx.len(), idx.len());
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            out[(a, b)] = m[(i, j)];
        }
    }
    out
}

/// Submatrix with rows `rows` and columns `cols`.
pub fn submatrix(m: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    let mut out = linalg::zeros(rows.len(), cols.len());
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            out[(a, b)] = m[(i, j)];
        }
    }
    out
}
