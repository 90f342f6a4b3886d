//! Seeded random operators with prescribed symmetry structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lattice::{make_shift, LatticeOperator, Window};
use crate::linalg::{self, CMat};
use crate::symmetry::{AntiUnitary, RelationLabel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_c(rng: &mut impl Rng) -> linalg::C64 {
    linalg::c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn gaussian_matrix(rng: &mut impl Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| gaussian_c(rng))
}

/// Haar-distributed `n x n` unitary.
pub fn haar_unitary(rng: &mut impl Rng, n: usize) -> CMat {
    let g = gaussian_matrix(rng, n, n);
    linalg::polar_part(&g, 0.0)
}

/// Random Hermitian operator with hoppings up to `range`, normalised to
/// spectral norm `scale`.
pub fn banded_hermitian(rng: &mut impl Rng, window: Window, fiber_dim: usize, range: usize, scale: f64) -> LatticeOperator {
    let s = window.sites();
    let mut h = LatticeOperator::zeros(window, fiber_dim);
    for i in 0..s {
        for d in 0..=range.min(s - 1) {
            let j = match window.boundary {
                crate::lattice::Boundary::Cyclic => (i + d) % s,
                crate::lattice::Boundary::Open => {
                    if i + d >= s {
                        continue;
                    }
                    i + d
                }
            };
            let b = gaussian_matrix(rng, fiber_dim, fiber_dim);
            let cur = h.block_idx(i, j);
            h.set_block_idx(i, j, &(cur + &b));
            let cur = h.block_idx(j, i);
            h.set_block_idx(j, i, &(cur + b.adjoint()));
        }
    }
    let n = h.norm();
    if n > 0.0 {
        h = h.scale(linalg::r(scale / n));
    }
    h
}

/// `(X + s F X F^{-1}) / 2`.
pub fn f_average(x: &CMat, f: &AntiUnitary, sign: f64) -> Result<CMat> {
    let fx = f.conjugate_operator(x)?;
    Ok((x + fx * linalg::r(sign)) * linalg::r(0.5))
}

/// Random Hermitian `K` with `e^{iK}` respecting `relation` in the sense
/// needed by [`random_unitary`]: `F K F^{-1} = -K` for real/quaternionic
/// (so `e^{iK}` commutes with `F`) and `F K F^{-1} = K` for the star labels.
pub fn symmetric_generator(
    rng: &mut impl Rng,
    window: Window,
    fiber_dim: usize,
    f: Option<&AntiUnitary>,
    relation: RelationLabel,
    range: usize,
    scale: f64,
) -> Result<LatticeOperator> {
    use RelationLabel::*;
    let h = banded_hermitian(rng, window, fiber_dim, range, 1.0);
    let m = match (relation, f) {
        (Complex, _) => h.matrix().clone(),
        (Real | Quaternionic | IReal | IQuaternionic, Some(f)) => f_average(h.matrix(), f, -1.0)?,
        (StarReal | StarQuaternionic, Some(f)) => f_average(h.matrix(), f, 1.0)?,
        (_, None) => return Err(Error::InvalidAntiUnitary(format!("relation {} needs an anti-unitary", relation.name()))),
    };
    let m = (&m + m.adjoint()) * linalg::r(0.5);
    let norm = linalg::norm2(&m);
    let m = if norm > 0.0 { m * linalg::r(scale / norm) } else { m };
    Ok(h.like(m))
}

pub fn expi(k: &LatticeOperator) -> LatticeOperator {
    k.like(linalg::expi_herm(k.matrix()))
}

/// Random local unitary in the class of `relation`:
/// `e^{iK} R^k` (complex, real, quaternionic with doubled shift) or
/// `W U_0 W` with `W = e^{iK/2}` around a star generator.
#[allow(clippy::too_many_arguments)]
pub fn random_unitary(
    rng: &mut impl Rng,
    window: Window,
    fiber_dim: usize,
    f: Option<&AntiUnitary>,
    relation: RelationLabel,
    k: i64,
    range: usize,
    scale: f64,
) -> Result<LatticeOperator> {
    use RelationLabel::*;
    let gen = symmetric_generator(rng, window, fiber_dim, f, relation, range, scale)?;
    match relation {
        Complex | Real | Quaternionic => {
            let shift = make_shift(window, fiber_dim, k)?;
            expi(&gen).mul(&shift)
        }
        StarReal | StarQuaternionic => {
            let base = if relation == StarQuaternionic && k.rem_euclid(2) == 1 {
                if fiber_dim % 2 == 1 {
                    return Err(Error::OddFiber(fiber_dim));
                }
                let half = fiber_dim / 2;
                let r = make_shift(window, half, 1)?;
                r.direct_sum(&r.adjoint())?
            } else if k != 0 && relation == StarReal {
                return Err(Error::UnsupportedClass("star_real has a single class".into()));
            } else {
                LatticeOperator::identity(window, fiber_dim)
            };
            let w = expi(&gen.scale(linalg::r(0.5)));
            w.mul(&base)?.mul(&w)
        }
        IReal | IQuaternionic => Err(Error::UnsupportedClass("use random_sau for self-adjoint unitaries".into())),
    }
}

/// `W U_0 W^*` with `W = e^{iK}` commuting with `F`; preserves both the
/// self-adjoint unitary property and the imaginary relation of `U_0`.
pub fn conjugate_sau(
    rng: &mut impl Rng,
    u0: &LatticeOperator,
    f: Option<&AntiUnitary>,
    relation: RelationLabel,
    range: usize,
    scale: f64,
) -> Result<LatticeOperator> {
    let gen_rel = match relation {
        RelationLabel::IReal | RelationLabel::Real => RelationLabel::Real,
        RelationLabel::IQuaternionic | RelationLabel::Quaternionic => RelationLabel::Quaternionic,
        _ => RelationLabel::Complex,
    };
    let gen = symmetric_generator(rng, u0.window(), u0.fiber_dim(), f, gen_rel, range, scale)?;
    let w = expi(&gen);
    let out = w.mul(u0)?.mul(&w.adjoint())?;
    let m = out.matrix();
    Ok(out.like((m + m.adjoint()) * linalg::r(0.5)))
}

/// Hermitian perturbation supported on sites within `radius` of the cut,
/// respecting `relation` as a generator (see [`symmetric_generator`]).
#[allow(clippy::too_many_arguments)]
pub fn cut_localized_generator(
    rng: &mut impl Rng,
    window: Window,
    fiber_dim: usize,
    f: Option<&AntiUnitary>,
    relation: RelationLabel,
    cut: i64,
    radius: usize,
    scale: f64,
) -> Result<LatticeOperator> {
    let full = symmetric_generator(rng, window, fiber_dim, f, relation, 2, 1.0)?;
    let n = fiber_dim;
    let mut m = full.matrix().clone();
    for a in 0..m.nrows() {
        for b in 0..m.ncols() {
            let xa = window.site(a / n);
            let xb = window.site(b / n);
            if window.distance_to_cut(xa, cut) >= radius || window.distance_to_cut(xb, cut) >= radius {
                m[(a, b)] = linalg::r(0.0);
            }
        }
    }
    let norm = linalg::norm2(&m);
    let m = if norm > 0.0 { m * linalg::r(scale / norm) } else { m };
    Ok(full.like(m))
}

/// Random `K x K` matrix with singular values in `[lo, hi]`.
pub fn random_invertible(rng: &mut impl Rng, k: usize, lo: f64, hi: f64) -> CMat {
    let u = haar_unitary(rng, k);
    let v = haar_unitary(rng, k);
    let d = CMat::from_fn(k, k, |i, j| if i == j { linalg::r(rng.random_range(lo..=hi)) } else { linalg::r(0.0) });
    u * d * v
}

/// Random invertible `A + B R` of rank `p`: per-site frames `L_x`, `N_x`
/// around `D_perp + D R` plus a site-diagonal perturbation of size `eps < 1`,
/// `A_x = L_x (D_perp + E_x) N_x` and `B_x = L_x (D + F_x) N_{x-1}`.
pub fn random_abr_pair(rng: &mut impl Rng, window: Window, k: usize, p: usize, eps: f64) -> Result<crate::stummel::ABRPair> {
    if p > k || !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("need p <= K and 0 <= eps < 1, got p={p}, K={k}, eps={eps}")));
    }
    let s = window.sites();
    let mut d = linalg::zeros(k, k);
    for i in k - p..k {
        d[(i, i)] = linalg::r(1.0);
    }
    let dp = linalg::eye(k) - &d;
    let small = |rng: &mut _| {
        let g = gaussian_matrix(rng, k, k);
        let n = linalg::norm2(&g);
        g * linalg::r(0.5 * eps / n)
    };
    let l: Vec<CMat> = (0..s).map(|_| random_invertible(rng, k, 0.7, 1.4)).collect();
    let n: Vec<CMat> = (0..s).map(|_| random_invertible(rng, k, 0.7, 1.4)).collect();
    let a = (0..s).map(|i| &l[i] * (&dp + small(rng)) * &n[i]).collect();
    let b = (0..s).map(|i| &l[i] * (&d + small(rng)) * &n[(i + s - 1) % s]).collect();
    crate::stummel::ABRPair::new(window, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::check_relation;

    #[test]
    fn random_unitaries_respect_relations() {
        let w = Window::cyclic(12);
        let mut g = rng(3);
        let cases = [
            (RelationLabel::Complex, None, 1usize, 1i64),
            (RelationLabel::Real, Some(AntiUnitary::conjugation(2)), 2, -1),
            (RelationLabel::Quaternionic, Some(AntiUnitary::quaternionic(1)), 2, 2),
            (RelationLabel::StarReal, Some(AntiUnitary::conjugation(1)), 1, 0),
            (RelationLabel::StarQuaternionic, Some(AntiUnitary::quaternionic(1)), 2, 1),
        ];
        for (rel, f, n, k) in cases {
            let u = random_unitary(&mut g, w, n, f.as_ref(), rel, k, 2, 1.5).unwrap();
            assert!(linalg::unitarity_residual(u.matrix()) < 1e-10);
            if let Some(f) = &f {
                assert!(check_relation(&u, f, rel).unwrap() < 1e-10, "{rel:?}");
            }
        }
    }
}
