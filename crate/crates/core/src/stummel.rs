//! Diagonal-plus-shift operators `A + B R` with site-diagonal `A`, `B`:
//! contour idempotents, regrouping of sites into blocks, and deformation to
//! the normal form `D_perp + D R`.

use crate::error::{Error, Result};
use crate::homotopy::{assemble, HomotopyPath, PathConstraints, PathKind, Stage};
use crate::index::{self, IndexValue};
use crate::lattice::{half_line_projection, make_shift, Boundary, LatticeOperator, Window};
use crate::linalg::{self, CMat, C64};
use crate::spectral::polar;

pub const DEFAULT_QUADRATURE: usize = 64;
/// Relative floor for the smallest singular value of the pencil at a node.
pub const CIRCLE_MARGIN: f64 = 1e-8;

/// Pair of site-diagonal operators `A`, `B`, stored as per-site blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ABRPair {
    window: Window,
    fiber_dim: usize,
    a: Vec<CMat>,
    b: Vec<CMat>,
}

fn require_cyclic(w: &Window) -> Result<()> {
    if w.boundary != Boundary::Cyclic {
        return Err(Error::InvalidWindow("diagonal-plus-shift operators need a cyclic window".into()));
    }
    Ok(())
}

fn site_blocks(op: &LatticeOperator) -> Vec<CMat> {
    (0..op.window().sites()).map(|i| op.block_idx(i, i)).collect()
}

fn diagonal_op(window: Window, blocks: &[CMat]) -> Result<LatticeOperator> {
    LatticeOperator::site_diagonal(window, blocks)
}

/// Site-diagonal part, with off-diagonal blocks exactly zero.
pub fn delta(op: &LatticeOperator) -> LatticeOperator {
    diagonal_op(op.window(), &site_blocks(op)).expect("blocks taken from a valid operator")
}

impl ABRPair {
    /// Checks shapes and that `A + B R` is invertible with a relative margin.
    pub fn new(window: Window, a: Vec<CMat>, b: Vec<CMat>) -> Result<Self> {
        require_cyclic(&window)?;
        let s = window.sites();
        if a.len() != s || b.len() != s {
            return Err(Error::ShapeMismatch(format!("expected {s} blocks, got {} and {}", a.len(), b.len())));
        }
        let k = a[0].nrows();
        if a.iter().chain(&b).any(|m| m.shape() != (k, k)) || k == 0 {
            return Err(Error::ShapeMismatch("blocks must share one square shape".into()));
        }
        let pair = ABRPair { window, fiber_dim: k, a, b };
        let op = pair.operator();
        let smin = linalg::min_singular(op.matrix());
        if smin <= CIRCLE_MARGIN * op.norm().max(1.0) {
            return Err(Error::NotInvertible(smin));
        }
        Ok(pair)
    }

    /// From site-diagonal `A`, `B`; off-diagonal blocks must vanish exactly.
    pub fn from_operators(a: &LatticeOperator, b: &LatticeOperator) -> Result<Self> {
        a.check_shape(b)?;
        for (name, op) in [("A", a), ("B", b)] {
            let off = op.matrix() - delta(op).matrix();
            if linalg::max_abs(&off) > 0.0 {
                return Err(Error::NotAbrForm(format!("{name} is not site-diagonal")));
            }
        }
        ABRPair::new(a.window(), site_blocks(a), site_blocks(b))
    }

    /// Reads an operator of the form `A + B R`. Entries off the diagonal and
    /// the first lower block diagonal must not exceed `tol`.
    pub fn from_operator(op: &LatticeOperator, tol: f64) -> Result<Self> {
        require_cyclic(&op.window())?;
        let s = op.window().sites();
        let mut a = Vec::with_capacity(s);
        let mut b = Vec::with_capacity(s);
        for (l, blocks) in op.hoppings() {
            match l {
                0 => a = blocks,
                1 => {
                    // Block (x+1, x) of B R is B_{x+1}.
                    b = (0..s).map(|i| blocks[(i + s - 1) % s].clone()).collect();
                }
                _ => {
                    if blocks.iter().any(|m| linalg::max_abs(m) > tol) {
                        return Err(Error::NotAbrForm(format!("hopping at offset {l}")));
                    }
                }
            }
        }
        let n = op.fiber_dim();
        if a.is_empty() {
            a = vec![linalg::zeros(n, n); s];
        }
        if b.is_empty() {
            b = vec![linalg::zeros(n, n); s];
        }
        ABRPair::new(op.window(), a, b)
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn a_blocks(&self) -> &[CMat] {
        &self.a
    }

    pub fn b_blocks(&self) -> &[CMat] {
        &self.b
    }

    pub fn a(&self) -> LatticeOperator {
        diagonal_op(self.window, &self.a).expect("valid blocks")
    }

    pub fn b(&self) -> LatticeOperator {
        diagonal_op(self.window, &self.b).expect("valid blocks")
    }

    /// `G = B R`.
    pub fn g(&self) -> LatticeOperator {
        let r = make_shift(self.window, self.fiber_dim, 1).expect("cyclic shift");
        self.b().mul(&r).expect("same shape")
    }

    /// `A + B R`.
    pub fn operator(&self) -> LatticeOperator {
        abr_matrix(self.window, &self.a, &self.b)
    }
}

/// `A + B R` assembled from blocks without validation.
fn abr_matrix(window: Window, a: &[CMat], b: &[CMat]) -> LatticeOperator {
    let s = window.sites();
    let n = a[0].nrows();
    let mut m = linalg::zeros(s * n, s * n);
    for i in 0..s {
        m.view_mut((i * n, i * n), (n, n)).copy_from(&a[i]);
        let j = (i + s - 1) % s;
        let cur = m.view((i * n, j * n), (n, n)).into_owned();
        m.view_mut((i * n, j * n), (n, n)).copy_from(&(cur + &b[i]));
    }
    LatticeOperator::new(window, n, m).expect("consistent shape")
}

/// Contour idempotents `P = (1/2 pi i) oint S^{-1} G`, `Q = (1/2 pi i) oint G S^{-1}`
/// of the pencil `S = A + lambda G`, together with `K = (1/2 pi i) oint S^{-1}`.
#[derive(Debug, Clone)]
pub struct StummelIdempotents {
    pub p: LatticeOperator,
    pub q: LatticeOperator,
    pub k: LatticeOperator,
    /// `||P_M - P_{M/2}||`, the change from halving the node count.
    pub error_estimate: f64,
    /// Smallest singular value of the pencil over the nodes.
    pub min_sigma: f64,
}

/// Trapezoidal quadrature over the `m`-th roots of unity.
pub fn stummel_idempotents(a: &LatticeOperator, g: &LatticeOperator, m: usize) -> Result<StummelIdempotents> {
    a.check_shape(g)?;
    if m < 2 {
        return Err(Error::InvalidParameter(format!("need at least two quadrature nodes, got {m}")));
    }
    let dim = a.dim();
    let am = a.matrix();
    let gm = g.matrix();
    let scale = linalg::norm2(am).max(linalg::norm2(gm)).max(1.0);
    let mut p = linalg::zeros(dim, dim);
    let mut q = linalg::zeros(dim, dim);
    let mut k = linalg::zeros(dim, dim);
    let mut p_half = linalg::zeros(dim, dim);
    let mut min_sigma = f64::INFINITY;
    for node in 0..m {
        let lambda = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * node as f64 / m as f64);
        let s = am + gm * lambda;
        let sigma = linalg::min_singular(&s);
        min_sigma = min_sigma.min(sigma);
        if sigma <= CIRCLE_MARGIN * scale {
            return Err(Error::CircleNotInvertible { node, sigma });
        }
        let lu = s.clone().lu();
        let sinv = lu.try_inverse().ok_or(Error::CircleNotInvertible { node, sigma })?;
        let sg = &sinv * gm * lambda;
        if node % 2 == 0 {
            p_half += &sg;
        }
        p += sg;
        q += gm * &sinv * lambda;
        k += sinv * lambda;
    }
    let w = linalg::r(1.0 / m as f64);
    let p = p * w;
    let error_estimate = if m.is_multiple_of(2) { linalg::norm2(&(&p - p_half * linalg::r(2.0 / m as f64))) } else { f64::NAN };
    Ok(StummelIdempotents { p: a.like(p), q: a.like(q * w), k: a.like(k * w), error_estimate, min_sigma })
}

/// Site-diagonal idempotents of an invertible pair by the closed form:
/// `P = Delta(S^{-1} B R)`, `Q = Delta(B R S^{-1})`, `Pi = R P R^*` with
/// `S = A + B R`. Matches the quadrature whenever the node count is a
/// multiple of the window size.
#[derive(Debug, Clone)]
pub struct StummelDirect {
    pub p: LatticeOperator,
    pub q: LatticeOperator,
    pub pi: LatticeOperator,
    /// Common per-site rank of `P` and `Q`.
    pub rank: usize,
}

/// Per-site rank of an idempotent: eigenvalues of the site block above 1/2.
pub fn site_ranks(p: &LatticeOperator) -> Vec<usize> {
    site_blocks(p)
        .iter()
        .map(|blk| linalg::normal_eig(blk).0.iter().filter(|z| z.re > 0.5).count())
        .collect()
}

pub fn stummel_direct(pair: &ABRPair) -> Result<StummelDirect> {
    let s = pair.operator();
    let sinv = linalg::inverse(s.matrix()).ok_or(Error::NotInvertible(0.0))?;
    let g = pair.g();
    let p = delta(&s.like(&sinv * g.matrix()));
    let q = delta(&s.like(g.matrix() * &sinv));
    let r = make_shift(pair.window, pair.fiber_dim, 1)?;
    let pi = delta(&r.mul(&p)?.mul(&r.adjoint())?);
    let rp = site_ranks(&p);
    let rq = site_ranks(&q);
    if rp.iter().chain(&rq).any(|&x| x != rp[0]) {
        let mut all = rp.clone();
        all.extend(rq);
        return Err(Error::RankNotConstant(all));
    }
    Ok(StummelDirect { p, q, pi, rank: rp[0] })
}

/// Coarse window grouping `block` consecutive sites into one.
pub fn coarse_window(w: &Window, block: usize) -> Result<Window> {
    let l = block as i64;
    if block == 0 || !w.sites().is_multiple_of(block) || w.min_site.rem_euclid(l) != 0 {
        return Err(Error::NotDivisible { sites: w.sites(), block });
    }
    Window::new(w.min_site / l, w.max_site / l, w.boundary)
}

/// Regroups `block` consecutive sites into one site with fiber `N * block`.
/// The matrix is unchanged in the site-major ordering; only the bookkeeping
/// changes, so indices at block-aligned cuts are preserved.
pub fn redimerize(op: &LatticeOperator, block: usize) -> Result<LatticeOperator> {
    let coarse = coarse_window(&op.window(), block)?;
    let range = op.hopping_range(0.0);
    if range > block {
        return Err(Error::HoppingTooLong { range, block });
    }
    LatticeOperator::new(coarse, op.fiber_dim() * block, op.matrix().clone())
}

/// Inverse of [`redimerize`] onto `fine`.
pub fn undimerize(op: &LatticeOperator, fine: Window) -> Result<LatticeOperator> {
    let block = fine.sites() / op.window().sites();
    if block == 0 || !op.fiber_dim().is_multiple_of(block) || coarse_window(&fine, block)? != op.window() {
        return Err(Error::ShapeMismatch("coarse and fine windows do not match".into()));
    }
    LatticeOperator::new(fine, op.fiber_dim() / block, op.matrix().clone())
}

/// `A + B R + C R^*` to `A_hat + B_hat R` on blocks of two sites: the
/// operator times `R` has offsets 0, 1, 2 and regroups to the pair form.
/// Returns the pair; the original operator equals it times `R^*` (fine).
pub fn nearest_neighbor_to_abr(op: &LatticeOperator) -> Result<ABRPair> {
    let range = op.hopping_range(0.0);
    if range > 1 {
        return Err(Error::HoppingTooLong { range, block: 1 });
    }
    let r = make_shift(op.window(), op.fiber_dim(), 1)?;
    let shifted = op.mul(&r)?;
    ABRPair::from_operator(&redimerize(&shifted, 2)?, 0.0)
}

fn signed_leading(mut v: CMat) -> CMat {
    for j in 0..v.ncols() {
        let lead = v.column(j).iter().copied().find(|z| z.norm() > 1e-8);
        if let Some(z) = lead {
            let ph = z.conj() / linalg::r(z.norm());
            let mut col = v.column_mut(j);
            col *= ph;
        }
    }
    v
}

/// Frame `F` with `F^{-1} P F = 0_{K-p} (+) 1_p` for an idempotent block:
/// columns span `ker P` and then `ran P`.
fn idempotent_frame(p: &CMat, rank: usize) -> Result<CMat> {
    let k = p.nrows();
    let ran = signed_leading(linalg::range_basis(p, 0.5));
    let ker = signed_leading(linalg::right_null(p, 0.5));
    if ran.ncols() != rank || ker.ncols() != k - rank {
        return Err(Error::RankNotConstant(vec![ran.ncols(), rank]));
    }
    Ok(linalg::hstack(&ker, &ran))
}

/// `s -> M_s` in `GL(K)` from `M` at 0 to the identity at 1: polar factors
/// `W e^{...}` and `H^{1-s}` contracted separately.
fn gl_contraction(m: &CMat) -> impl Fn(f64) -> CMat {
    let w = linalg::polar_part(m, 0.0);
    let h = w.adjoint() * m;
    let h = (&h + h.adjoint()) * linalg::r(0.5);
    let (hv, hq) = linalg::herm_eig(&h);
    let (wv, wq) = linalg::unitary_eig(&w);
    move |s: f64| {
        let t = 1.0 - s;
        let hd: Vec<f64> = hv.iter().map(|&x| x.max(f64::MIN_POSITIVE).powf(t)).collect();
        let wd: Vec<C64> = wv.iter().map(|&x| C64::from_polar(1.0, t * x)).collect();
        linalg::reassemble(&wq, &wd) * linalg::reassemble_real(&hq, &hd)
    }
}

fn embed_block(block: &CMat, offset: usize, k: usize) -> CMat {
    let mut out = linalg::zeros(k, k);
    out.view_mut((offset, offset), block.shape()).copy_from(block);
    out
}

/// Normal form `D_perp + D R` with `D = 1 (x) (0_{K-p} (+) 1_p)`.
pub fn normal_form(window: Window, fiber_dim: usize, p: usize) -> Result<LatticeOperator> {
    if p > fiber_dim {
        return Err(Error::InvalidParameter(format!("rank {p} exceeds fiber dimension {fiber_dim}")));
    }
    let d = embed_block(&linalg::eye(p), fiber_dim - p, fiber_dim);
    let dp = linalg::eye(fiber_dim) - &d;
    let s = window.sites();
    Ok(abr_matrix(window, &vec![dp; s], &vec![d; s]))
}

/// Stages from `A + B R` to its normal form and the rank `p`.
fn deform_stages(pair: &ABRPair) -> Result<(Vec<Stage>, usize)> {
    let sd = stummel_direct(pair)?;
    let window = pair.window;
    let s = window.sites();
    let k = pair.fiber_dim;
    let p = sd.rank;
    let pb = site_blocks(&sd.p);
    let qb = site_blocks(&sd.q);
    let pib = site_blocks(&sd.pi);
    let eye = linalg::eye(k);
    let perp = |m: &CMat| &eye - m;

    // Decouple: Q_perp (A + (1-t) B R) P_perp + Q ((1-t) A + B R) P, written
    // as (1-t) S + t S_1 so that it starts at S even when finite-size
    // effects spoil idempotency slightly.
    let a_keep: Vec<CMat> = (0..s).map(|i| perp(&qb[i]) * &pair.a[i] * perp(&pb[i])).collect();
    let b_keep: Vec<CMat> = (0..s).map(|i| &qb[i] * &pair.b[i] * &pib[i]).collect();
    let (a0, b0, ak, bk) = (pair.a.clone(), pair.b.clone(), a_keep.clone(), b_keep.clone());
    let decouple = Stage::measured("decouple along the idempotents", move |t| {
        let mix = |x: &CMat, y: &CMat| x * linalg::r(1.0 - t) + y * linalg::r(t);
        let a: Vec<CMat> = (0..s).map(|i| mix(&a0[i], &ak[i])).collect();
        let b: Vec<CMat> = (0..s).map(|i| mix(&b0[i], &bk[i])).collect();
        abr_matrix(window, &a, &b).into_matrix()
    });

    // Frames: F_x^{-1} P_x F_x = M and G_x^{-1} Q_x G_x = M.
    let fr: Vec<CMat> = pb.iter().map(|m| idempotent_frame(m, p)).collect::<Result<_>>()?;
    let gr: Vec<CMat> = qb.iter().map(|m| idempotent_frame(m, p)).collect::<Result<_>>()?;
    let ginv: Vec<CMat> =
        gr.iter().map(|m| linalg::inverse(m).ok_or(Error::NotInvertible(0.0))).collect::<Result<_>>()?;
    let finv: Vec<CMat> =
        fr.iter().map(|m| linalg::inverse(m).ok_or(Error::NotInvertible(0.0))).collect::<Result<_>>()?;
    let prev = move |i: usize| (i + s - 1) % s;
    let a_hat: Vec<CMat> = (0..s).map(|i| &ginv[i] * &a_keep[i] * &fr[i]).collect();
    let b_hat: Vec<CMat> = (0..s).map(|i| &ginv[i] * &b_keep[i] * &fr[prev(i)]).collect();
    // Left factor G_x runs to 1, right factor F_x^{-1} runs to 1.
    let g_paths: Vec<_> = gr.iter().map(gl_contraction).collect();
    let f_paths: Vec<_> = finv.iter().map(gl_contraction).collect();
    let (ah, bh) = (a_hat.clone(), b_hat.clone());
    let frames = Stage::measured("contract the site frames", move |t| {
        let gl: Vec<CMat> = g_paths.iter().map(|f| f(t)).collect();
        let fl: Vec<CMat> = f_paths.iter().map(|f| f(t)).collect();
        let a: Vec<CMat> = (0..s).map(|i| &gl[i] * &ah[i] * &fl[i]).collect();
        let b: Vec<CMat> = (0..s).map(|i| &gl[i] * &bh[i] * &fl[prev(i)]).collect();
        abr_matrix(window, &a, &b).into_matrix()
    });

    // Blocks: A_hat on ran D_perp and B_hat on ran D contracted in GL; the
    // small remainder off these blocks is switched off linearly.
    let q0 = k - p;
    let a_paths: Vec<_> = a_hat.iter().map(|m| gl_contraction(&m.view((0, 0), (q0, q0)).into_owned())).collect();
    let b_paths: Vec<_> = b_hat.iter().map(|m| gl_contraction(&m.view((q0, q0), (p, p)).into_owned())).collect();
    let a_rest: Vec<CMat> = a_hat.iter().map(|m| m - embed_block(&m.view((0, 0), (q0, q0)).into_owned(), 0, k)).collect();
    let b_rest: Vec<CMat> = b_hat.iter().map(|m| m - embed_block(&m.view((q0, q0), (p, p)).into_owned(), q0, k)).collect();
    let blocks = Stage::measured("contract the diagonal blocks", move |t| {
        let fade = linalg::r(1.0 - t);
        let a: Vec<CMat> = (0..s).map(|i| embed_block(&a_paths[i](t), 0, k) + &a_rest[i] * fade).collect();
        let b: Vec<CMat> = (0..s).map(|i| embed_block(&b_paths[i](t), q0, k) + &b_rest[i] * fade).collect();
        abr_matrix(window, &a, &b).into_matrix()
    });
    Ok((vec![decouple, frames, blocks], p))
}

fn invertible_constraints(window: Window, index: Option<IndexValue>) -> PathConstraints {
    PathConstraints::new(PathKind::Invertible, crate::homotopy::default_cut(&window)).with_index(index)
}

/// Path of invertible `A(t) + B(t) R` from the pair to `D_perp + D R`.
pub fn abr_deform(pair: &ABRPair, samples: usize) -> Result<HomotopyPath> {
    let (stages, p) = deform_stages(pair)?;
    let start = pair.operator().into_matrix();
    let end = normal_form(pair.window, pair.fiber_dim, p)?.into_matrix();
    let constraints = invertible_constraints(pair.window, Some(IndexValue::Z(-(p as i64))));
    assemble(pair.window, pair.fiber_dim, stages, samples, constraints, Some((start, end)))
}

/// Trace-route index of an invertible operator at the default cut.
pub fn invertible_index(s: &LatticeOperator) -> Result<i64> {
    let cut = crate::homotopy::default_cut(&s.window());
    let lam = half_line_projection(s.window(), s.fiber_dim(), cut)?;
    Ok(index::index_trace(&polar(s), &lam)?.z())
}

/// Smallest hopping range `r` whose truncation stays within `budget`.
fn truncation_range(s: &LatticeOperator, budget: f64) -> usize {
    let max = s.hopping_range(0.0);
    (0..=max).find(|&r| linalg::norm2(&(s.matrix() - truncate(s, r).matrix())) <= budget).unwrap_or(max)
}

fn truncate(s: &LatticeOperator, r: usize) -> LatticeOperator {
    let hops: Vec<(i64, Vec<CMat>)> = s.hoppings().into_iter().filter(|(l, _)| l.unsigned_abs() as usize <= r).collect();
    LatticeOperator::from_hoppings(s.window(), s.fiber_dim(), &hops).expect("same window")
}

/// Stages from `S` to `N R^{-r}` with `N` the coarse normal form, evaluated
/// as fine-window matrices, plus the rank of the normal form.
fn reduction_stages(s: &LatticeOperator, r: usize, budget: f64) -> Result<(Vec<Stage>, usize)> {
    let window = s.window();
    let trunc = truncate(s, r);
    let mut stages = Vec::new();
    let (s0, s1) = (s.matrix().clone(), trunc.matrix().clone());
    if linalg::norm2(&(&s0 - &s1)) > budget {
        return Err(Error::NotInvertible(linalg::min_singular(s.matrix())));
    }
    stages.push(Stage::measured("truncate the hopping tail", move |t| {
        &s0 * linalg::r(1.0 - t) + &s1 * linalg::r(t)
    }));
    let shift = make_shift(window, s.fiber_dim(), r as i64)?;
    let coarse = redimerize(&trunc.mul(&shift)?, 2 * r)?;
    let pair = ABRPair::from_operator(&coarse, 0.0)?;
    let (inner, p) = deform_stages(&pair)?;
    let back = shift.adjoint().into_matrix();
    for st in inner {
        let back = back.clone();
        let name = st.name.clone();
        let eval = st.eval;
        stages.push(Stage::new(name, st.length, move |t| eval(t) * &back));
    }
    Ok((stages, p))
}

/// Path of invertible operators joining two exponentially local operators
/// of equal index through the common normal form.
pub fn abr_connect(s1: &LatticeOperator, s2: &LatticeOperator, samples: usize) -> Result<HomotopyPath> {
    s1.check_shape(s2)?;
    require_cyclic(&s1.window())?;
    let window = s1.window();
    let sig1 = linalg::min_singular(s1.matrix());
    let sig2 = linalg::min_singular(s2.matrix());
    for sig in [sig1, sig2] {
        if sig <= CIRCLE_MARGIN * s1.norm().max(s2.norm()).max(1.0) {
            return Err(Error::NotInvertible(sig));
        }
    }
    let i1 = invertible_index(s1)?;
    let i2 = invertible_index(s2)?;
    if i1 != i2 {
        return Err(Error::IndexMismatch { left: i1, right: i2 });
    }
    let constraints = invertible_constraints(window, Some(IndexValue::Z(i1)));
    let endpoints = Some((s1.matrix().clone(), s2.matrix().clone()));
    let gap = linalg::norm2(&(s1.matrix() - s2.matrix()));
    if gap < 0.5 * sig1.min(sig2) {
        let (a, b) = (s1.matrix().clone(), s2.matrix().clone());
        let line = Stage::measured("straight line", move |t| &a * linalg::r(1.0 - t) + &b * linalg::r(t));
        return assemble(window, s1.fiber_dim(), vec![line], samples, constraints, endpoints);
    }
    let b1 = 0.25 * sig1;
    let b2 = 0.25 * sig2;
    let r = truncation_range(s1, b1).max(truncation_range(s2, b2)).max(1);
    let (mut stages, p1) = reduction_stages(s1, r, b1)?;
    let (back, p2) = reduction_stages(s2, r, b2)?;
    if p1 != p2 {
        return Err(Error::IndexMismatch { left: r as i64 * s1.fiber_dim() as i64 - p1 as i64, right: r as i64 * s1.fiber_dim() as i64 - p2 as i64 });
    }
    stages.extend(back.into_iter().rev().map(Stage::reversed));
    assemble(window, s1.fiber_dim(), stages, samples, constraints, endpoints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{random_abr_pair, rng};
    use crate::homotopy::verify_path;
    use crate::models::ssh;
    use crate::symmetry::chiral_blocks;

    fn w16() -> Window {
        Window::cyclic(16)
    }

    fn constant_pair(w: Window, a: f64, b: f64) -> ABRPair {
        let s = w.sites();
        let m = |x: f64| CMat::from_element(1, 1, linalg::r(x));
        ABRPair::new(w, vec![m(a); s], vec![m(b); s]).unwrap()
    }

    #[test]
    fn quadrature_trivial_cases() {
        let w = w16();
        let id = LatticeOperator::identity(w, 1);
        let zero = LatticeOperator::zeros(w, 1);
        let out = stummel_idempotents(&id, &zero, 64).unwrap();
        assert!(out.p.norm() < 1e-14 && out.q.norm() < 1e-14);
        for (a, expect) in [(0.4, 1.0), (-0.7, 1.0), (1.6, 0.0), (-2.5, 0.0)] {
            let out = stummel_idempotents(&id.scale(linalg::r(a)), &id, 64).unwrap();
            let target = linalg::eye(16) * linalg::r(expect);
            assert!(linalg::norm2(&(out.p.matrix() - &target)) < 1e-8, "a = {a}");
        }
        assert!(matches!(stummel_idempotents(&id, &id.scale(linalg::r(-1.0)), 64), Err(Error::CircleNotInvertible { .. })));
    }

    #[test]
    fn direct_trivial_cases() {
        let w = w16();
        let shift = stummel_direct(&constant_pair(w, 0.0, 1.0)).unwrap();
        assert_eq!(shift.rank, 1);
        assert!(linalg::norm2(&(shift.p.matrix() - linalg::eye(16))) < 1e-12);
        let onsite = stummel_direct(&constant_pair(w, 1.0, 0.0)).unwrap();
        assert_eq!(onsite.rank, 0);
        assert!(onsite.p.norm() == 0.0);
    }

    #[test]
    fn direct_matches_quadrature_and_is_site_diagonal() {
        let w = w16();
        let mut g = rng(12);
        for p in 0..=2 {
            let pair = random_abr_pair(&mut g, w, 2, p, 0.5).unwrap();
            let d = stummel_direct(&pair).unwrap();
            assert_eq!(d.rank, p);
            let off = d.p.matrix() - delta(&d.p).matrix();
            assert_eq!(linalg::max_abs(&off), 0.0);
            let quad = stummel_idempotents(&pair.a(), &pair.g(), 128).unwrap();
            assert!(linalg::norm2(&(quad.p.matrix() - d.p.matrix())) < 1e-6);
            assert!(linalg::norm2(&(quad.q.matrix() - d.q.matrix())) < 1e-6);
            // Halving the node count changes P by no more than the estimate.
            let half = stummel_idempotents(&pair.a(), &pair.g(), 64).unwrap();
            assert!(linalg::norm2(&(quad.p.matrix() - half.p.matrix())) <= quad.error_estimate + 1e-12);
            let gp = pair.g().matrix() * quad.p.matrix() - quad.q.matrix() * pair.g().matrix();
            assert!(linalg::norm2(&gp) < 1e-8);
        }
    }

    #[test]
    fn redimerization_examples() {
        let w = w16();
        let id = LatticeOperator::identity(w, 1);
        let c = redimerize(&id, 2).unwrap();
        assert_eq!((c.window().sites(), c.fiber_dim()), (8, 2));
        assert!(linalg::norm2(&(c.matrix() - linalg::eye(16))) == 0.0);

        let r = make_shift(w, 1, 1).unwrap();
        let rc = redimerize(&r, 2).unwrap();
        assert_eq!(rc.hopping_range(0.0), 1);
        let idx = |op: &LatticeOperator, cut| {
            let lam = half_line_projection(op.window(), op.fiber_dim(), cut).unwrap();
            index::index_trace(op, &lam).unwrap().z()
        };
        assert_eq!(idx(&r, 0), -1);
        assert_eq!(idx(&rc, 0), -1);
        assert_eq!(undimerize(&rc, w).unwrap(), r);

        assert!(matches!(redimerize(&id, 3), Err(Error::NotDivisible { .. })));
        let r3 = make_shift(w, 1, 3).unwrap();
        assert!(matches!(redimerize(&r3, 2), Err(Error::HoppingTooLong { .. })));

        // A + B R + C R^* regroups to the pair form after multiplying by R.
        let mut g = rng(13);
        let s = w.sites();
        let blocks = |g: &mut _| -> Vec<CMat> { (0..s).map(|_| crate::ensembles::gaussian_matrix(g, 2, 2)).collect() };
        let hops = vec![(0, blocks(&mut g)), (1, blocks(&mut g)), (-1, blocks(&mut g))];
        let mut op = LatticeOperator::from_hoppings(w, 2, &hops).unwrap();
        op = op.add(&LatticeOperator::identity(w, 2).scale(linalg::r(8.0))).unwrap();
        let pair = nearest_neighbor_to_abr(&op).unwrap();
        assert_eq!(pair.fiber_dim(), 4);
        let back = undimerize(&pair.operator(), w).unwrap().mul(&make_shift(w, 2, -1).unwrap()).unwrap();
        assert!(linalg::norm2(&(back.matrix() - op.matrix())) < 1e-12);
    }

    #[test]
    fn deformation_examples() {
        let w = w16();
        let path = abr_deform(&constant_pair(w, 1.0, 0.0), 65).unwrap();
        assert!(linalg::norm2(&(path.end().matrix() - linalg::eye(16))) < 1e-12);
        assert!(verify_path(&path).all_passed());

        let path = abr_deform(&constant_pair(w, 0.0, 1.0), 65).unwrap();
        let r = make_shift(w, 1, 1).unwrap();
        assert!(linalg::norm2(&(path.end().matrix() - r.matrix())) < 1e-12);
        let rep = verify_path(&path);
        assert!(rep.all_passed(), "{:?}", rep.failures());
        assert_eq!(path.constraints.expected_index, Some(IndexValue::Z(-1)));

        let mut g = rng(14);
        let pair = random_abr_pair(&mut g, w, 2, 1, 0.5).unwrap();
        let path = abr_deform(&pair, 65).unwrap();
        for (_, o) in &path.samples {
            // Every sample keeps the diagonal-plus-shift form.
            ABRPair::from_operator(o, 0.0).unwrap();
        }
        let rep = verify_path(&path);
        assert!(rep.all_passed(), "{:?}", rep.failures());
        assert!(rep.check("invertibility").unwrap().worst > 1e-3);
    }

    fn ssh_block(v: f64, t: f64) -> LatticeOperator {
        chiral_blocks(&ssh(v, t, w16()).unwrap().hamiltonian, &linalg::pauli_z()).unwrap()
    }

    #[test]
    fn connect_examples() {
        let s = ssh_block(0.5, 1.0);
        let path = abr_connect(&s, &s, 65).unwrap();
        assert!(path.samples.iter().all(|(_, o)| linalg::norm2(&(o.matrix() - s.matrix())) < 1e-12));

        let t = ssh_block(0.2, 1.3);
        let path = abr_connect(&s, &t, 65).unwrap();
        let rep = verify_path(&path);
        assert!(rep.all_passed(), "{:?}", rep.failures());
        assert_eq!(path.constraints.expected_index, Some(IndexValue::Z(1)));

        let trivial = ssh_block(1.0, 0.4);
        assert!(matches!(abr_connect(&s, &trivial, 65), Err(Error::IndexMismatch { left: 1, right: 0 })));
    }
}
