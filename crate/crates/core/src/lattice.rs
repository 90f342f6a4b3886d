//! Finite windows of the integer lattice and dense operators on
//! `l2(window) (x) C^N`, stored site-major (site outer, fiber inner).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Cyclic,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub min_site: i64,
    /// Exclusive upper end.
    pub max_site: i64,
    pub boundary: Boundary,
}

impl Window {
    pub fn new(min_site: i64, max_site: i64, boundary: Boundary) -> Result<Self> {
        if max_site - min_site < 2 {
            return Err(Error::InvalidWindow(format!(
                "need at least two sites, got [{min_site}, {max_site})"
            )));
        }
        Ok(Window { min_site, max_site, boundary })
    }

    /// Window `[-S/2, S - S/2)`, which puts the default cut at 1 far from the
    /// cyclic seam.
    pub fn centered(sites: usize, boundary: Boundary) -> Result<Self> {
        let s = sites as i64;
        Window::new(-(s / 2), s - s / 2, boundary)
    }

    pub fn cyclic(sites: usize) -> Self {
        Window::centered(sites, Boundary::Cyclic).expect("at least two sites")
    }

    pub fn open(sites: usize) -> Self {
        Window::centered(sites, Boundary::Open).expect("at least two sites")
    }

    pub fn sites(&self) -> usize {
        (self.max_site - self.min_site) as usize
    }

    pub fn site(&self, idx: usize) -> i64 {
        self.min_site + idx as i64
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.min_site && x < self.max_site
    }

    pub fn index_of(&self, x: i64) -> Option<usize> {
        self.contains(x).then(|| (x - self.min_site) as usize)
    }

    pub fn site_list(&self) -> impl Iterator<Item = i64> {
        self.min_site..self.max_site
    }

    /// Lattice distance between two sites, wrapping on cyclic windows.
    pub fn distance(&self, x: i64, y: i64) -> usize {
        let d = (x - y).unsigned_abs() as usize;
        match self.boundary {
            Boundary::Cyclic => d.min(self.sites() - d),
            Boundary::Open => d,
        }
    }

    /// Distance of site `x` from the cut between `cut - 1` and `cut`,
    /// measured in half-integer positions rounded down.
    pub fn distance_to_cut(&self, x: i64, cut: i64) -> usize {
        let d = if x >= cut { x - cut } else { cut - 1 - x } as usize;
        match self.boundary {
            Boundary::Cyclic => d.min(self.sites().saturating_sub(d + 1)),
            Boundary::Open => d,
        }
    }

    pub fn check_cut(&self, cut: i64) -> Result<()> {
        if cut <= self.min_site || cut >= self.max_site {
            return Err(Error::CutOutsideWindow { cut, min: self.min_site, max: self.max_site });
        }
        Ok(())
    }

    /// Sub-window `[lo, hi)` with open boundary.
    pub fn sub(&self, lo: i64, hi: i64) -> Result<Window> {
        if lo < self.min_site || hi > self.max_site || hi - lo < 1 {
            return Err(Error::InvalidWindow(format!("sub-window [{lo}, {hi}) of {self:?}")));
        }
        Ok(Window { min_site: lo, max_site: hi, boundary: Boundary::Open })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeOperator {
    window: Window,
    fiber_dim: usize,
    entries: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalityResidual {
    pub commutator_norm: f64,
    /// `profile[d]` is the largest block norm at lattice distance `d`.
    pub decay_profile: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlgebraOp {
    Add,
    Multiply,
    Adjoint,
    Scale(C64),
    Norm,
    DirectSum,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlgebraValue {
    Operator(LatticeOperator),
    Real(f64),
}

impl LatticeOperator {
    pub fn new(window: Window, fiber_dim: usize, entries: CMat) -> Result<Self> {
        if fiber_dim == 0 {
            return Err(Error::ShapeMismatch("fiber dimension must be positive".into()));
        }
        let dim = window.sites() * fiber_dim;
        if entries.shape() != (dim, dim) {
            return Err(Error::ShapeMismatch(format!(
                "entries are {:?}, expected {dim}x{dim}",
                entries.shape()
            )));
        }
        for col in 0..dim {
            for row in 0..dim {
                let z = entries[(row, col)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        Ok(LatticeOperator { window, fiber_dim, entries })
    }

    /// Constructor for internal use when the shape is known to be right.
    pub(crate) fn from_parts(window: Window, fiber_dim: usize, entries: CMat) -> Self {
        debug_assert_eq!(entries.nrows(), window.sites() * fiber_dim);
        LatticeOperator { window, fiber_dim, entries }
    }

    pub fn identity(window: Window, fiber_dim: usize) -> Self {
        let n = window.sites() * fiber_dim;
        Self::from_parts(window, fiber_dim, linalg::eye(n))
    }

    pub fn zeros(window: Window, fiber_dim: usize) -> Self {
        let n = window.sites() * fiber_dim;
        Self::from_parts(window, fiber_dim, linalg::zeros(n, n))
    }

    /// `1 (x) block` : the same fiber matrix on every site.
    pub fn site_constant(window: Window, block: &CMat) -> Result<Self> {
        if block.nrows() != block.ncols() || block.nrows() == 0 {
            return Err(Error::ShapeMismatch("fiber block must be square".into()));
        }
        let n = block.nrows();
        Ok(Self::from_parts(window, n, linalg::kron(&linalg::eye(window.sites()), block)))
    }

    /// Site-diagonal operator with one fiber block per site (in window order).
    pub fn site_diagonal(window: Window, blocks: &[CMat]) -> Result<Self> {
        if blocks.len() != window.sites() {
            return Err(Error::ShapeMismatch(format!(
                "{} blocks for {} sites",
                blocks.len(),
                window.sites()
            )));
        }
        let n = blocks[0].nrows();
        let mut op = Self::zeros(window, n);
        for (i, b) in blocks.iter().enumerate() {
            if b.shape() != (n, n) {
                return Err(Error::ShapeMismatch("inconsistent fiber blocks".into()));
            }
            op.set_block_idx(i, i, b);
        }
        Ok(op)
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.entries
    }

    pub fn into_matrix(self) -> CMat {
        self.entries
    }

    /// Same window and fiber, new entries.
    pub fn with_matrix(&self, entries: CMat) -> Result<Self> {
        LatticeOperator::new(self.window, self.fiber_dim, entries)
    }

    pub(crate) fn like(&self, entries: CMat) -> Self {
        Self::from_parts(self.window, self.fiber_dim, entries)
    }

    pub fn same_shape(&self, other: &LatticeOperator) -> bool {
        self.window == other.window && self.fiber_dim == other.fiber_dim
    }

    pub fn check_shape(&self, other: &LatticeOperator) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{:?}/N={} vs {:?}/N={}",
                self.window, self.fiber_dim, other.window, other.fiber_dim
            )))
        }
    }

    /// Fiber block between window indices (not site labels).
    pub fn block_idx(&self, i: usize, j: usize) -> CMat {
        let n = self.fiber_dim;
        self.entries.view((i * n, j * n), (n, n)).into_owned()
    }

    pub fn set_block_idx(&mut self, i: usize, j: usize, b: &CMat) {
        let n = self.fiber_dim;
        self.entries.view_mut((i * n, j * n), (n, n)).copy_from(b);
    }

    /// Fiber block `A_{xy}` for site labels.
    pub fn block(&self, x: i64, y: i64) -> Option<CMat> {
        Some(self.block_idx(self.window.index_of(x)?, self.window.index_of(y)?))
    }

    pub fn adjoint(&self) -> Self {
        self.like(self.entries.adjoint())
    }

    pub fn conj(&self) -> Self {
        self.like(self.entries.conjugate())
    }

    pub fn transpose(&self) -> Self {
        self.like(self.entries.transpose())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(self.like(&self.entries + &other.entries))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(self.like(&self.entries - &other.entries))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(self.like(&self.entries * &other.entries))
    }

    pub fn scale(&self, z: C64) -> Self {
        self.like(&self.entries * z)
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        linalg::norm2(&self.entries)
    }

    /// Fiber-wise direct sum: at every site the fiber is `C^N1 (+) C^N2`.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.window != other.window {
            return Err(Error::ShapeMismatch("direct sum needs equal windows".into()));
        }
        let (n1, n2) = (self.fiber_dim, other.fiber_dim);
        let n = n1 + n2;
        let s = self.window.sites();
        let mut out = linalg::zeros(s * n, s * n);
        for i in 0..s {
            for j in 0..s {
                out.view_mut((i * n, j * n), (n1, n1)).copy_from(&self.block_idx(i, j));
                out.view_mut((i * n + n1, j * n + n1), (n2, n2)).copy_from(&other.block_idx(i, j));
            }
        }
        Ok(Self::from_parts(self.window, n, out))
    }

    /// Dispatcher over the elementary operations.
    pub fn algebra(&self, other: Option<&Self>, op: AlgebraOp) -> Result<AlgebraValue> {
        let need = || other.ok_or_else(|| Error::ShapeMismatch("binary operation needs two operands".into()));
        Ok(match op {
            AlgebraOp::Add => AlgebraValue::Operator(self.add(need()?)?),
            AlgebraOp::Multiply => AlgebraValue::Operator(self.mul(need()?)?),
            AlgebraOp::Adjoint => AlgebraValue::Operator(self.adjoint()),
            AlgebraOp::Scale(z) => AlgebraValue::Operator(self.scale(z)),
            AlgebraOp::Norm => AlgebraValue::Real(self.norm()),
            AlgebraOp::DirectSum => AlgebraValue::Operator(self.direct_sum(need()?)?),
        })
    }

    /// Compression onto the sites `[lo, hi)`, returned on an open sub-window.
    pub fn restrict(&self, lo: i64, hi: i64) -> Result<Self> {
        let sub = self.window.sub(lo, hi)?;
        let n = self.fiber_dim;
        let off = (lo - self.window.min_site) as usize * n;
        let len = sub.sites() * n;
        Ok(Self::from_parts(sub, n, self.entries.view((off, off), (len, len)).into_owned()))
    }

    /// Hopping decomposition: for each offset `l` the per-site blocks
    /// `A_{x+l, x}` indexed by the window position of `x`. Offsets are taken
    /// cyclically in `(-S/2, S/2]` on cyclic windows.
    pub fn hoppings(&self) -> Vec<(i64, Vec<CMat>)> {
        let s = self.window.sites() as i64;
        let offsets: Vec<i64> = match self.window.boundary {
            Boundary::Cyclic => ((-(s - 1) / 2)..=(s / 2)).collect(),
            Boundary::Open => (-(s - 1)..=(s - 1)).collect(),
        };
        let mut out = Vec::new();
        for l in offsets {
            let mut blocks = Vec::with_capacity(s as usize);
            let mut any = false;
            for xi in 0..s {
                let yi = xi + l;
                let yi = match self.window.boundary {
                    Boundary::Cyclic => yi.rem_euclid(s),
                    Boundary::Open => yi,
                };
                if yi < 0 || yi >= s {
                    blocks.push(linalg::zeros(self.fiber_dim, self.fiber_dim));
                    continue;
                }
                let b = self.block_idx(yi as usize, xi as usize);
                if linalg::max_abs(&b) > 0.0 {
                    any = true;
                }
                blocks.push(b);
            }
            if any {
                out.push((l, blocks));
            }
        }
        out
    }

    /// Largest offset with a block of norm above `tol`.
    pub fn hopping_range(&self, tol: f64) -> usize {
        self.hoppings()
            .iter()
            .filter(|(_, bs)| bs.iter().any(|b| linalg::max_abs(b) > tol))
            .map(|(l, _)| l.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Inverse of [`hoppings`]: `A = sum_l D_l R^l`.
    pub fn from_hoppings(window: Window, fiber_dim: usize, hops: &[(i64, Vec<CMat>)]) -> Result<Self> {
        let s = window.sites() as i64;
        let mut op = Self::zeros(window, fiber_dim);
        for (l, blocks) in hops {
            if blocks.len() != s as usize {
                return Err(Error::ShapeMismatch("one block per site expected".into()));
            }
            for xi in 0..s {
                let yi = xi + l;
                let yi = match window.boundary {
                    Boundary::Cyclic => yi.rem_euclid(s),
                    Boundary::Open => {
                        if yi < 0 || yi >= s {
                            continue;
                        }
                        yi
                    }
                };
                let cur = op.block_idx(yi as usize, xi as usize);
                op.set_block_idx(yi as usize, xi as usize, &(cur + &blocks[xi as usize]));
            }
        }
        Ok(op)
    }

    /// Translation-invariant operator `sum_l S_l (x) R^l`.
    pub fn from_symbol(window: Window, symbol: &[(i64, CMat)]) -> Result<Self> {
        let n = symbol.first().map(|(_, m)| m.nrows()).ok_or_else(|| Error::ShapeMismatch("empty symbol".into()))?;
        let hops: Vec<(i64, Vec<CMat>)> =
            symbol.iter().map(|(l, m)| (*l, vec![m.clone(); window.sites()])).collect();
        Self::from_hoppings(window, n, &hops)
    }
}

/// `R^k`: translation by `k` sites, identity on the fiber. Cyclic windows wrap
/// around (unitary); open windows truncate.
pub fn make_shift(window: Window, fiber_dim: usize, k: i64) -> Result<LatticeOperator> {
    let s = window.sites() as i64;
    if k.unsigned_abs() >= s as u64 {
        return Err(Error::WindowTooSmall(format!("|k| = {} with {} sites", k.abs(), s)));
    }
    if fiber_dim == 0 {
        return Err(Error::ShapeMismatch("fiber dimension must be positive".into()));
    }
    let n = fiber_dim;
    let mut m = linalg::zeros(window.sites() * n, window.sites() * n);
    for xi in 0..s {
        let yi = xi + k;
        let yi = match window.boundary {
            Boundary::Cyclic => yi.rem_euclid(s),
            Boundary::Open => {
                if yi < 0 || yi >= s {
                    continue;
                }
                yi
            }
        };
        for f in 0..n {
            m[(yi as usize * n + f, xi as usize * n + f)] = linalg::r(1.0);
        }
    }
    Ok(LatticeOperator::from_parts(window, n, m))
}

/// Projection onto the sites `x >= cut`.
pub fn half_line_projection(window: Window, fiber_dim: usize, cut: i64) -> Result<LatticeOperator> {
    window.check_cut(cut)?;
    let n = fiber_dim;
    let mut m = linalg::zeros(window.sites() * n, window.sites() * n);
    for (i, x) in window.site_list().enumerate() {
        if x >= cut {
            for f in 0..n {
                m[(i * n + f, i * n + f)] = linalg::r(1.0);
            }
        }
    }
    Ok(LatticeOperator::from_parts(window, n, m))
}

/// Keeps the site-diagonal fiber blocks and zeroes everything else.
pub fn diagonal_part(a: &LatticeOperator) -> LatticeOperator {
    let mut out = LatticeOperator::zeros(a.window, a.fiber_dim);
    for i in 0..a.window.sites() {
        out.set_block_idx(i, i, &a.block_idx(i, i));
    }
    out
}

/// Diagonal unitary with block `lambda^x 1_N` at site `x`.
pub fn position_modulation(window: Window, fiber_dim: usize, lambda: C64) -> Result<LatticeOperator> {
    if (lambda.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::NonUnitModulus(lambda.norm()));
    }
    let n = fiber_dim;
    let theta = lambda.arg();
    let mut m = linalg::zeros(window.sites() * n, window.sites() * n);
    for (i, x) in window.site_list().enumerate() {
        let z = C64::from_polar(1.0, theta * x as f64);
        for f in 0..n {
            m[(i * n + f, i * n + f)] = z;
        }
    }
    Ok(LatticeOperator::from_parts(window, n, m))
}

/// Commutator norm with a projection and the block decay profile.
pub fn locality_residual(a: &LatticeOperator, lambda: &LatticeOperator) -> Result<LocalityResidual> {
    a.check_shape(lambda)?;
    let comm = lambda.matrix() * a.matrix() - a.matrix() * lambda.matrix();
    let w = a.window;
    let s = w.sites();
    let max_d = match w.boundary {
        Boundary::Cyclic => s / 2,
        Boundary::Open => s - 1,
    };
    let mut profile = vec![0.0; max_d + 1];
    for i in 0..s {
        for j in 0..s {
            let d = w.distance(w.site(i), w.site(j));
            let b = a.block_idx(i, j);
            let nb = linalg::norm2(&b);
            if nb > profile[d] {
                profile[d] = nb;
            }
        }
    }
    Ok(LocalityResidual { commutator_norm: linalg::norm2(&comm), decay_profile: profile })
}

/// Fraction of the squared norm of `v` on sites within `radius` of the cut.
pub fn mass_near_cut(window: &Window, fiber_dim: usize, v: &crate::linalg::CVec, cut: i64, radius: usize) -> f64 {
    let total = v.norm_squared();
    if total == 0.0 {
        return 0.0;
    }
    let mut near = 0.0;
    for (i, x) in window.site_list().enumerate() {
        if window.distance_to_cut(x, cut) < radius {
            for f in 0..fiber_dim {
                near += v[i * fiber_dim + f].norm_sqr();
            }
        }
    }
    near / total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_zero_is_identity() {
        let w = Window::cyclic(16);
        let r0 = make_shift(w, 1, 0).unwrap();
        assert_eq!(r0, LatticeOperator::identity(w, 1));
    }

    #[test]
    fn cyclic_shift_is_permutation_with_wrap() {
        let w = Window::cyclic(16);
        let r1 = make_shift(w, 1, 1).unwrap();
        for i in 0..15 {
            assert_eq!(r1.matrix()[(i + 1, i)], linalg::r(1.0));
        }
        assert_eq!(r1.matrix()[(0, 15)], linalg::r(1.0));
        assert!(linalg::unitarity_residual(r1.matrix()) < 1e-14);
    }

    #[test]
    fn shift_too_large() {
        let w = Window::cyclic(8);
        assert!(matches!(make_shift(w, 1, 8), Err(Error::WindowTooSmall(_))));
        assert!(make_shift(w, 1, -7).is_ok());
    }

    #[test]
    fn open_shift_truncates() {
        let w = Window::open(6);
        let r1 = make_shift(w, 2, 1).unwrap();
        assert!(linalg::unitarity_residual(r1.matrix()) > 0.5);
        assert_eq!(linalg::trace(&(r1.matrix().adjoint() * r1.matrix())).re, 10.0);
    }

    #[test]
    fn projection_rank_and_idempotence() {
        let w = Window::cyclic(8);
        let p = half_line_projection(w, 2, 1).unwrap();
        let m = p.matrix();
        assert_eq!(m * m, *m);
        assert_eq!(linalg::trace(m).re, 2.0 * 3.0);
        assert!(matches!(half_line_projection(w, 2, -4), Err(Error::CutOutsideWindow { .. })));
        assert!(matches!(half_line_projection(w, 2, 4), Err(Error::CutOutsideWindow { .. })));
    }

    #[test]
    fn commutator_with_shift_has_rank_two() {
        let w = Window::cyclic(12);
        let p = half_line_projection(w, 1, 1).unwrap();
        let r1 = make_shift(w, 1, 1).unwrap();
        let comm = p.matrix() * r1.matrix() - r1.matrix() * p.matrix();
        let s = linalg::singular_values(&comm);
        assert!((s[0] - 1.0).abs() < 1e-12 && (s[1] - 1.0).abs() < 1e-12);
        assert!(s[2] < 1e-12);
    }

    #[test]
    fn diagonal_part_of_shift_vanishes() {
        let w = Window::cyclic(10);
        let r1 = make_shift(w, 2, 1).unwrap();
        assert_eq!(diagonal_part(&r1), LatticeOperator::zeros(w, 2));
    }

    #[test]
    fn modulation_conjugates_shift() {
        let s = 10;
        let w = Window::cyclic(s);
        let lam = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * 3.0 / s as f64);
        let u = position_modulation(w, 1, lam).unwrap();
        let r1 = make_shift(w, 1, 1).unwrap();
        let lhs = r1.adjoint().matrix() * u.matrix() * r1.matrix();
        let rhs = u.matrix() * lam;
        assert!(linalg::max_abs(&(lhs - rhs)) < 1e-12);
        assert!(matches!(position_modulation(w, 1, linalg::r(1.1)), Err(Error::NonUnitModulus(_))));
    }

    #[test]
    fn locality_profile_of_shift() {
        let w = Window::cyclic(12);
        let p = half_line_projection(w, 1, 1).unwrap();
        let r1 = make_shift(w, 1, 1).unwrap();
        let res = locality_residual(&r1, &p).unwrap();
        assert_eq!(res.decay_profile[1], 1.0);
        assert!(res.decay_profile.iter().enumerate().all(|(d, &v)| d == 1 || v == 0.0));
        let diag = LatticeOperator::identity(w, 1);
        assert_eq!(locality_residual(&diag, &p).unwrap().commutator_norm, 0.0);
    }

    #[test]
    fn hoppings_round_trip() {
        let w = Window::cyclic(9);
        let a = make_shift(w, 2, 2).unwrap().add(&make_shift(w, 2, -1).unwrap()).unwrap();
        let h = a.hoppings();
        let b = LatticeOperator::from_hoppings(w, 2, &h).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hopping_range(1e-12), 2);
    }

    #[test]
    fn direct_sum_blocks() {
        let w = Window::cyclic(5);
        let a = make_shift(w, 1, 1).unwrap();
        let b = make_shift(w, 1, -1).unwrap();
        let d = a.direct_sum(&b).unwrap();
        assert_eq!(d.fiber_dim(), 2);
        assert_eq!(d.block_idx(1, 0)[(0, 0)], linalg::r(1.0));
        assert_eq!(d.block_idx(0, 1)[(1, 1)], linalg::r(1.0));
    }
}
