//! Anti-unitary structures, operator relations, tenfold classification,
//! chiral blocks and equivariant bases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeOperator;
use crate::linalg::{self, CMat, CVec};

/// `F = V o conj`, acting site-diagonally with fiber unitary `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct AntiUnitary {
    unitary_part: CMat,
    square_sign: i8,
}

const AU_TOL: f64 = 1e-10;

impl AntiUnitary {
    pub fn new(v: CMat) -> Result<Self> {
        if v.nrows() != v.ncols() || v.nrows() == 0 {
            return Err(Error::InvalidAntiUnitary("fiber matrix must be square".into()));
        }
        let res = linalg::unitarity_residual(&v);
        if res > AU_TOL {
            return Err(Error::InvalidAntiUnitary(format!("not unitary (residual {res:.3e})")));
        }
        let sq = &v * v.conjugate();
        let n = v.nrows();
        let plus = linalg::norm2(&(&sq - linalg::eye(n)));
        let minus = linalg::norm2(&(&sq + linalg::eye(n)));
        let square_sign = if plus <= AU_TOL {
            1
        } else if minus <= AU_TOL {
            -1
        } else {
            return Err(Error::InvalidAntiUnitary("square is not +-1".into()));
        };
        Ok(AntiUnitary { unitary_part: v, square_sign })
    }

    /// Checks the square sign against an expectation.
    pub fn with_sign(v: CMat, sign: i8) -> Result<Self> {
        let f = Self::new(v)?;
        if f.square_sign != sign {
            return Err(Error::InvalidAntiUnitary(format!("square sign {} , expected {sign}", f.square_sign)));
        }
        Ok(f)
    }

    /// Plain complex conjugation on `C^n`.
    pub fn conjugation(n: usize) -> Self {
        AntiUnitary { unitary_part: linalg::eye(n), square_sign: 1 }
    }

    /// `(1_m (x) i sigma_y) o conj` on `C^{2m}`.
    pub fn quaternionic(m: usize) -> Self {
        AntiUnitary { unitary_part: linalg::kron(&linalg::eye(m), &linalg::i_sigma_y()), square_sign: -1 }
    }

    pub fn unitary_part(&self) -> &CMat {
        &self.unitary_part
    }

    pub fn square_sign(&self) -> i8 {
        self.square_sign
    }

    pub fn fiber_dim(&self) -> usize {
        self.unitary_part.nrows()
    }

    /// `1_S (x) V` for a window with `sites` sites.
    pub fn full(&self, sites: usize) -> CMat {
        linalg::kron(&linalg::eye(sites), &self.unitary_part)
    }

    fn sites_for(&self, len: usize) -> Result<usize> {
        let n = self.fiber_dim();
        if !len.is_multiple_of(n) {
            return Err(Error::ShapeMismatch(format!("length {len} not a multiple of fiber {n}")));
        }
        Ok(len / n)
    }

    /// `F` applied column-wise.
    pub fn apply(&self, m: &CMat) -> Result<CMat> {
        let s = self.sites_for(m.nrows())?;
        let n = self.fiber_dim();
        let mut out = linalg::zeros(m.nrows(), m.ncols());
        for site in 0..s {
            let blk = m.rows(site * n, n).conjugate();
            out.rows_mut(site * n, n).copy_from(&(&self.unitary_part * blk));
        }
        Ok(out)
    }

    pub fn apply_vec(&self, v: &CVec) -> Result<CVec> {
        let m = CMat::from_column_slice(v.len(), 1, v.as_slice());
        Ok(self.apply(&m)?.column(0).into_owned())
    }

    /// `F A F^{-1} = V conj(A) V^*`.
    pub fn conjugate_operator(&self, a: &CMat) -> Result<CMat> {
        let s = self.sites_for(a.nrows())?;
        let v = self.full(s);
        Ok(&v * a.conjugate() * v.adjoint())
    }

    /// `F1 F2` as a unitary fiber matrix `V1 conj(V2)`.
    pub fn compose(&self, other: &AntiUnitary) -> CMat {
        &self.unitary_part * other.unitary_part.conjugate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationLabel {
    Complex,
    Real,
    Quaternionic,
    StarReal,
    StarQuaternionic,
    IReal,
    IQuaternionic,
}

impl RelationLabel {
    pub const ALL: [RelationLabel; 7] = [
        RelationLabel::Complex,
        RelationLabel::Real,
        RelationLabel::Quaternionic,
        RelationLabel::StarReal,
        RelationLabel::StarQuaternionic,
        RelationLabel::IReal,
        RelationLabel::IQuaternionic,
    ];

    /// Square sign the anti-unitary must have, `None` for the complex label.
    pub fn required_sign(self) -> Option<i8> {
        use RelationLabel::*;
        match self {
            Complex => None,
            Real | StarReal | IReal => Some(1),
            Quaternionic | StarQuaternionic | IQuaternionic => Some(-1),
        }
    }

    pub fn name(self) -> &'static str {
        use RelationLabel::*;
        match self {
            Complex => "complex",
            Real => "real",
            Quaternionic => "quaternionic",
            StarReal => "star_real",
            StarQuaternionic => "star_quaternionic",
            IReal => "i_real",
            IQuaternionic => "i_quaternionic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|l| l.name() == s)
    }
}

/// Residual of the matrix identity expressing `relation` between `a` and `f`:
/// `AV = V conj(A)` (real, quaternionic), `AV = V A^T` (star) or
/// `AV = -V conj(A)` (imaginary). The complex label has no constraint.
pub fn check_relation_matrix(a: &CMat, f: &AntiUnitary, relation: RelationLabel) -> Result<f64> {
    use RelationLabel::*;
    if relation == Complex {
        return Ok(0.0);
    }
    let s = f.sites_for(a.nrows())?;
    if a.nrows() != a.ncols() {
        return Err(Error::ShapeMismatch("operator must be square".into()));
    }
    let v = f.full(s);
    let lhs = a * &v;
    let rhs = match relation {
        Real | Quaternionic => &v * a.conjugate(),
        StarReal | StarQuaternionic => &v * a.transpose(),
        IReal | IQuaternionic => -(&v * a.conjugate()),
        Complex => unreachable!(),
    };
    Ok(linalg::norm2(&(lhs - rhs)))
}

pub fn check_relation(a: &LatticeOperator, f: &AntiUnitary, relation: RelationLabel) -> Result<f64> {
    if relation != RelationLabel::Complex && f.fiber_dim() != a.fiber_dim() {
        return Err(Error::ShapeMismatch(format!(
            "anti-unitary on C^{} vs fiber {}",
            f.fiber_dim(),
            a.fiber_dim()
        )));
    }
    check_relation_matrix(a.matrix(), f, relation)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymmetryTriple {
    pub theta: Option<AntiUnitary>,
    pub xi: Option<AntiUnitary>,
    pub pi: Option<CMat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AzClass {
    A,
    AIII,
    AI,
    BDI,
    D,
    DIII,
    AII,
    CII,
    C,
    CI,
}

impl AzClass {
    pub const ALL: [AzClass; 10] = [
        AzClass::A,
        AzClass::AIII,
        AzClass::AI,
        AzClass::BDI,
        AzClass::D,
        AzClass::DIII,
        AzClass::AII,
        AzClass::CII,
        AzClass::C,
        AzClass::CI,
    ];

    /// `(Theta^2, Xi^2, chiral)` with 0 meaning absent.
    pub fn signature(self) -> (i8, i8, bool) {
        use AzClass::*;
        match self {
            A => (0, 0, false),
            AIII => (0, 0, true),
            AI => (1, 0, false),
            BDI => (1, 1, true),
            D => (0, 1, false),
            DIII => (-1, 1, true),
            AII => (-1, 0, false),
            CII => (-1, -1, true),
            C => (0, -1, false),
            CI => (1, -1, true),
        }
    }

    pub fn from_signature(theta: i8, xi: i8, chiral: bool) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.signature() == (theta, xi, chiral))
    }

    pub fn name(self) -> &'static str {
        use AzClass::*;
        match self {
            A => "A",
            AIII => "AIII",
            AI => "AI",
            BDI => "BDI",
            D => "D",
            DIII => "DIII",
            AII => "AII",
            CII => "CII",
            C => "C",
            CI => "CI",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.name().eq_ignore_ascii_case(s))
    }
}

/// `1e-8 * ||H||`, floored so that the zero operator still gets a positive tolerance.
pub fn default_symmetry_tol(h: &LatticeOperator) -> f64 {
    1e-8 * h.norm().max(1.0)
}

fn theta_residual(h: &CMat, f: &AntiUnitary) -> Result<f64> {
    check_relation_matrix(h, f, RelationLabel::Real)
}

fn xi_residual(h: &CMat, f: &AntiUnitary) -> Result<f64> {
    check_relation_matrix(h, f, RelationLabel::IReal)
}

fn pi_residual(h: &CMat, pi: &CMat) -> f64 {
    let s = h.nrows() / pi.nrows();
    let p = linalg::kron(&linalg::eye(s), pi);
    linalg::norm2(&(h * &p + &p * h))
}

fn check_pi(pi: &CMat) -> Result<()> {
    if pi.nrows() != pi.ncols() {
        return Err(Error::InconsistentSymmetryData("chiral operator must be square".into()));
    }
    let u = linalg::unitarity_residual(pi);
    let hres = linalg::hermiticity_residual(pi);
    if u > 1e-8 || hres > 1e-8 {
        return Err(Error::InconsistentSymmetryData(format!(
            "chiral operator must be a self-adjoint unitary (residuals {u:.1e}, {hres:.1e})"
        )));
    }
    Ok(())
}

/// Tenfold label of `h` given candidate symmetries. Symmetries whose residual
/// is not below `tol` are discarded; when exactly two of the three are
/// present the third is their product.
pub fn classify_az(h: &LatticeOperator, sym: &SymmetryTriple, tol: f64) -> Result<AzClass> {
    let hm = h.matrix();
    let herm = linalg::hermiticity_residual(hm);
    if herm >= tol {
        return Err(Error::NotSelfAdjoint(herm));
    }
    let n = h.fiber_dim();
    for f in [&sym.theta, &sym.xi].into_iter().flatten() {
        if f.fiber_dim() != n {
            return Err(Error::ShapeMismatch("anti-unitary fiber dimension".into()));
        }
    }
    if let Some(p) = &sym.pi {
        if p.nrows() != n {
            return Err(Error::ShapeMismatch("chiral operator fiber dimension".into()));
        }
        check_pi(p)?;
    }
    let mut theta = match &sym.theta {
        Some(f) if theta_residual(hm, f)? < tol => Some(f.clone()),
        _ => None,
    };
    let mut xi = match &sym.xi {
        Some(f) if xi_residual(hm, f)? < tol => Some(f.clone()),
        _ => None,
    };
    let mut pi = match &sym.pi {
        Some(p) if pi_residual(hm, p) < tol => Some(p.clone()),
        _ => None,
    };
    match (&theta, &xi, &pi) {
        (Some(t), Some(x), None) => {
            // Theta Xi is a unitary that anticommutes with H; it must be a
            // phase times a self-adjoint unitary.
            let prod = t.compose(x);
            let sq = &prod * &prod;
            let phase = linalg::trace(&sq) / linalg::r(n as f64);
            if (phase.norm() - 1.0).abs() > 1e-8 || linalg::norm2(&(&sq - linalg::eye(n) * phase)) > 1e-8 {
                return Err(Error::InconsistentSymmetryData("product of the anti-unitaries is not chiral".into()));
            }
            pi = Some(prod * phase.sqrt().inv());
        }
        (Some(t), None, Some(p)) => {
            let cand = AntiUnitary::new(p * t.unitary_part())?;
            if xi_residual(hm, &cand)? < tol {
                xi = Some(cand);
            }
        }
        (None, Some(x), Some(p)) => {
            let cand = AntiUnitary::new(p * x.unitary_part())?;
            if theta_residual(hm, &cand)? < tol {
                theta = Some(cand);
            }
        }
        (Some(t), Some(x), Some(p)) => {
            let prod = t.compose(x);
            let c = linalg::trace(&(p.adjoint() * &prod)) / linalg::r(n as f64);
            if (c.norm() - 1.0).abs() > 1e-6 || linalg::norm2(&(&prod - p * c)) > 1e-6 {
                return Err(Error::InconsistentSymmetryData(
                    "chiral operator is not the product of the anti-unitaries".into(),
                ));
            }
        }
        _ => {}
    }
    let ts = theta.as_ref().map_or(0, |f| f.square_sign());
    let xs = xi.as_ref().map_or(0, |f| f.square_sign());
    let chiral = pi.is_some();
    if ts != 0 && xs != 0 && !chiral {
        return Err(Error::InconsistentSymmetryData("both anti-unitaries without chiral symmetry".into()));
    }
    if chiral && (ts == 0) != (xs == 0) {
        return Err(Error::InconsistentSymmetryData(
            "chiral symmetry with exactly one anti-unitary that is not their product".into(),
        ));
    }
    AzClass::from_signature(ts, xs, chiral).ok_or_else(|| Error::InconsistentSymmetryData("no matching class".into()))
}

/// Orthonormal bases `(W_+, W_-)` of the `+1` and `-1` eigenspaces of a chiral
/// operator. Coordinate vectors are used when `pi` is diagonal.
pub fn chiral_frame(pi: &CMat) -> Result<(CMat, CMat)> {
    let n = pi.nrows();
    if n % 2 == 1 {
        return Err(Error::OddFiber(n));
    }
    check_pi(pi)?;
    let off_diag: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .map(|(i, j)| pi[(i, j)].norm())
        .fold(0.0, f64::max);
    let (plus, minus) = if off_diag == 0.0 {
        let p: Vec<usize> = (0..n).filter(|&i| pi[(i, i)].re > 0.0).collect();
        let m: Vec<usize> = (0..n).filter(|&i| pi[(i, i)].re < 0.0).collect();
        let e = linalg::eye(n);
        (linalg::select_columns(&e, &p), linalg::select_columns(&e, &m))
    } else {
        let (vals, q) = linalg::herm_eig(pi);
        let m: Vec<usize> = (0..n).filter(|&i| vals[i] < 0.0).collect();
        let p: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.0).collect();
        (linalg::select_columns(&q, &p), linalg::select_columns(&q, &m))
    };
    if plus.ncols() != minus.ncols() {
        return Err(Error::InconsistentSymmetryData(format!(
            "chiral eigenspaces have dimensions {} and {}",
            plus.ncols(),
            minus.ncols()
        )));
    }
    Ok((plus, minus))
}

/// Lower-left block `S` of `H = [[0, S^*], [S, 0]]` in the chiral frame, on the
/// half fiber.
pub fn chiral_blocks(h: &LatticeOperator, pi: &CMat) -> Result<LatticeOperator> {
    let n = h.fiber_dim();
    if n % 2 == 1 {
        return Err(Error::OddFiber(n));
    }
    if pi.nrows() != n {
        return Err(Error::ShapeMismatch("chiral operator fiber dimension".into()));
    }
    let (wp, wm) = chiral_frame(pi)?;
    let res = pi_residual(h.matrix(), pi);
    let tol = default_symmetry_tol(h);
    if res >= tol {
        return Err(Error::NotChiral(res));
    }
    let s = h.window().sites();
    let bp = linalg::kron(&linalg::eye(s), &wp);
    let bm = linalg::kron(&linalg::eye(s), &wm);
    let blk = bm.adjoint() * h.matrix() * bp;
    LatticeOperator::new(h.window(), n / 2, blk)
}

/// Reassembles `H` from a chiral block in the frame of `pi`.
pub fn chiral_assemble(s_block: &LatticeOperator, pi: &CMat) -> Result<LatticeOperator> {
    let (wp, wm) = chiral_frame(pi)?;
    let sites = s_block.window().sites();
    let bp = linalg::kron(&linalg::eye(sites), &wp);
    let bm = linalg::kron(&linalg::eye(sites), &wm);
    let s = s_block.matrix();
    let h = &bm * s * bp.adjoint() + &bp * s.adjoint() * bm.adjoint();
    LatticeOperator::new(s_block.window(), pi.nrows(), h)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pairing {
    /// Every basis vector is fixed by the anti-unitary.
    Fixed,
    /// Column `2i + 1` is `J` applied to column `2i`.
    Kramers(Vec<(usize, usize)>),
}

#[derive(Debug, Clone)]
pub struct KramersBasis {
    pub basis: CMat,
    pub pairing: Pairing,
}

impl KramersBasis {
    /// For the quaternionic case: `(Phi, J Phi)` with one column per pair.
    pub fn halves(&self) -> (CMat, CMat) {
        match &self.pairing {
            Pairing::Fixed => (self.basis.clone(), linalg::zeros(self.basis.nrows(), 0)),
            Pairing::Kramers(pairs) => {
                let a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
                let b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
                (linalg::select_columns(&self.basis, &a), linalg::select_columns(&self.basis, &b))
            }
        }
    }
}

/// Residual of `F`-invariance of the span of orthonormal columns.
pub fn invariance_residual(subspace: &CMat, f: &AntiUnitary) -> Result<f64> {
    let fs = f.apply(subspace)?;
    let proj = subspace * (subspace.adjoint() * &fs);
    Ok(linalg::norm2(&(fs - proj)))
}

/// Orthonormal basis of an `F`-invariant span adapted to `F`: fixed vectors
/// for `F^2 = 1`, Kramers pairs `(phi, J phi)` for `F^2 = -1`.
pub fn kramers_basis(subspace: &CMat, f: &AntiUnitary) -> Result<KramersBasis> {
    kramers_basis_with(subspace, f.square_sign(), &|m| f.apply(m))
}

/// [`kramers_basis`] for an antilinear map given by `apply`, isometric on the
/// span and squaring to `sign` there.
pub fn kramers_basis_with(subspace: &CMat, sign: i8, apply: &dyn Fn(&CMat) -> Result<CMat>) -> Result<KramersBasis> {
    let k = subspace.ncols();
    let fs = apply(subspace)?;
    let inv = linalg::norm2(&(&fs - subspace * (subspace.adjoint() * &fs)));
    if inv > 1e-8 {
        return Err(Error::NotInvariant(inv));
    }
    if k == 0 {
        let pairing = if sign > 0 { Pairing::Fixed } else { Pairing::Kramers(vec![]) };
        return Ok(KramersBasis { basis: subspace.clone(), pairing });
    }
    let apply_vec = |v: &CVec| -> Result<CVec> {
        let m = CMat::from_column_slice(v.len(), 1, v.as_slice());
        Ok(apply(&m)?.column(0).into_owned())
    };
    if sign > 0 {
        let plus = subspace + &fs;
        let minus = (subspace - &fs) * linalg::I;
        let cand = linalg::hstack(&plus, &minus);
        // Order candidates by norm so the Gram-Schmidt picks well-conditioned ones.
        let mut order: Vec<usize> = (0..cand.ncols()).collect();
        let norms: Vec<f64> = (0..cand.ncols()).map(|j| cand.column(j).norm()).collect();
        order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap());
        let ordered = linalg::select_columns(&cand, &order);
        let mut q = linalg::orthonormalize(&ordered, 1e-6);
        if q.ncols() != k {
            return Err(Error::NotInvariant(inv));
        }
        // Remove rounding drift off the fixed set.
        let fq = apply(&q)?;
        q = (&q + fq) * linalg::r(0.5);
        let mut q = linalg::orthonormalize(&q, 1e-6);
        let fq = apply(&q)?;
        q = (&q + fq) * linalg::r(0.5);
        Ok(KramersBasis { basis: q, pairing: Pairing::Fixed })
    } else {
        if k % 2 == 1 {
            return Err(Error::OddQuaternionicDimension(k));
        }
        let n = subspace.nrows();
        let mut cols: Vec<CVec> = Vec::with_capacity(k);
        let mut pairs = Vec::with_capacity(k / 2);
        let mut rest = subspace.clone();
        while cols.len() < k {
            let phi: CVec = rest.column(0).into_owned();
            let phi = &phi / linalg::r(phi.norm());
            let jphi = apply_vec(&phi)?;
            pairs.push((cols.len(), cols.len() + 1));
            cols.push(phi);
            cols.push(jphi);
            let mut done = linalg::zeros(n, cols.len());
            for (j, c) in cols.iter().enumerate() {
                done.set_column(j, c);
            }
            let p = linalg::eye(n) - linalg::projector(&done);
            let remaining = &p * subspace;
            if cols.len() < k {
                rest = linalg::range_basis(&remaining, 1e-6);
                if rest.ncols() != k - cols.len() {
                    return Err(Error::NotInvariant(inv));
                }
            }
        }
        let mut basis = linalg::zeros(n, k);
        for (j, c) in cols.iter().enumerate() {
            basis.set_column(j, c);
        }
        Ok(KramersBasis { basis, pairing: Pairing::Kramers(pairs) })
    }
}

/// `b W a^*` where `W` is the unitary closest to `b^* a` when the two spans
/// overlap well, so that coinciding kernel and cokernel give the identity.
pub(crate) fn aligned(b: &CMat, a: &CMat) -> CMat {
    let overlap = b.adjoint() * a;
    if a.ncols() > 0 && linalg::min_singular(&overlap) > 0.1 {
        b * linalg::polar_part(&overlap, 0.0) * a.adjoint()
    } else {
        b * a.adjoint()
    }
}

/// Class-compatible isometry from `ker` onto `coker` (both orthonormal,
/// equal dimension).
pub fn matching_isometry(ker: &CMat, coker: &CMat, f: Option<&AntiUnitary>, relation: RelationLabel) -> Result<CMat> {
    use RelationLabel::*;
    let d = ker.ncols();
    if coker.ncols() != d {
        return Err(Error::KernelCokernelMismatch { ker: d, coker: coker.ncols() });
    }
    let need_f = || {
        f.ok_or_else(|| Error::InvalidAntiUnitary(format!("relation {} needs an anti-unitary", relation.name())))
    };
    if let (Some(sign), Some(f)) = (relation.required_sign(), f) {
        if f.square_sign() != sign {
            return Err(Error::InvalidAntiUnitary(format!(
                "relation {} needs square sign {sign}",
                relation.name()
            )));
        }
    }
    Ok(match relation {
        Complex => aligned(coker, ker),
        Real => {
            let f = need_f()?;
            let a = kramers_basis(ker, f)?.basis;
            let b = kramers_basis(coker, f)?.basis;
            aligned(&b, &a)
        }
        Quaternionic => {
            let f = need_f()?;
            // Overlaps of two Kramers-ordered bases commute with the coordinate
            // quaternionic structure, and so does their polar part.
            let a = kramers_basis(ker, f)?.basis;
            let b = kramers_basis(coker, f)?.basis;
            aligned(&b, &a)
        }
        StarReal => {
            let f = need_f()?;
            f.apply(ker)? * ker.adjoint()
        }
        StarQuaternionic => {
            let f = need_f()?;
            if d % 2 == 1 {
                return Err(Error::OddKernelStarH(d));
            }
            let m = d / 2;
            let fk = f.apply(ker)?;
            let mut out = linalg::zeros(ker.nrows(), ker.nrows());
            for i in 0..m {
                out -= fk.column(i + m) * ker.column(i).adjoint();
                out += fk.column(i) * ker.column(i + m).adjoint();
            }
            out
        }
        IReal | IQuaternionic => {
            return Err(Error::UnsupportedClass(format!(
                "unitary extension is not defined for the {} relation",
                relation.name()
            )))
        }
    })
}

/// Unitary `Y` respecting `relation` that agrees with `pol(Z)` off the kernel
/// and maps `ker Z` onto `ker Z^*`.
pub fn extend_to_unitary(z: &LatticeOperator, f: Option<&AntiUnitary>, relation: RelationLabel) -> Result<LatticeOperator> {
    z.with_matrix(extend_to_unitary_matrix(z.matrix(), f, relation)?)
}

/// Matrix form of [`extend_to_unitary`]; `f` acts site-locally on any
/// multiple of its fiber.
pub fn extend_to_unitary_matrix(zm: &CMat, f: Option<&AntiUnitary>, relation: RelationLabel) -> Result<CMat> {
    let tol = 1e-8 * linalg::norm2(zm);
    let tol = if tol == 0.0 { 1e-8 } else { tol };
    let (u, s, v) = linalg::svd_full(zm);
    let dim = zm.nrows();
    let live: Vec<usize> = (0..dim).filter(|&j| s[j] > tol).collect();
    let dead: Vec<usize> = (0..dim).filter(|&j| s[j] <= tol).collect();
    let ul = linalg::select_columns(&u, &live);
    let vl = linalg::select_columns(&v, &live);
    let pol = ul * vl.adjoint();
    let ker = linalg::select_columns(&v, &dead);
    let coker = linalg::select_columns(&u, &dead);
    let m = matching_isometry(&ker, &coker, f, relation)?;
    Ok(pol + m)
}
