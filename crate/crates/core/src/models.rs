//! Concrete lattice models and the generators of each index group.
//!
//! Matrix conventions (fiber ordering and symmetry operators):
//!
//! | model  | fiber      | hopping                                         | symmetries                                 |
//! |--------|------------|-------------------------------------------------|--------------------------------------------|
//! | SSH    | `(A, B)`   | `H[B_x, A_x] = v`, `H[A_{x+1}, B_x] = w`        | `Theta = conj`, `Xi = s3 conj`, `Pi = s3`   |
//! | Kitaev | `(c, c^+)` | `H[x, x] = -mu t3`, `H[x, x+1] = -t t3 + D i t2` | `Xi = t1 conj`                              |
//!
//! The SSH chiral block is `S = v + w R^*` with symbol `v + w e^{-ik}`, so the
//! index is `+1` for `|w| > |v|` and `0` for `|w| < |v|`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::index::IndexValue;
use crate::lattice::{make_shift, Boundary, LatticeOperator, Window};
use crate::linalg::{self, CMat};
use crate::spectral::{flatten, spectral_gap};
use crate::symmetry::{classify_az, default_symmetry_tol, AntiUnitary, AzClass, RelationLabel, SymmetryTriple};

#[derive(Debug, Clone)]
pub struct ModelInstance {
    pub hamiltonian: LatticeOperator,
    pub symmetry: SymmetryTriple,
    pub declared_class: AzClass,
    pub parameters: BTreeMap<String, f64>,
    pub seed: Option<u64>,
}

impl ModelInstance {
    /// Re-runs the classification against the declared label.
    pub fn verify_class(&self) -> Result<()> {
        let got = classify_az(&self.hamiltonian, &self.symmetry, default_symmetry_tol(&self.hamiltonian))?;
        if got != self.declared_class {
            return Err(Error::ClassMismatch(format!(
                "declared {}, classified {}",
                self.declared_class.name(),
                got.name()
            )));
        }
        Ok(())
    }
}

fn m2(a: f64, b: f64, c: f64, d: f64) -> CMat {
    CMat::from_row_slice(2, 2, &[linalg::r(a), linalg::r(b), linalg::r(c), linalg::r(d)])
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn ssh_symmetry() -> SymmetryTriple {
    SymmetryTriple {
        theta: Some(AntiUnitary::conjugation(2)),
        xi: Some(AntiUnitary::new(linalg::pauli_z()).expect("sigma_z conj is an anti-unitary")),
        pi: Some(linalg::pauli_z()),
    }
}

pub fn ssh(v: f64, w: f64, window: Window) -> Result<ModelInstance> {
    let symbol = vec![
        (0, m2(0.0, v, v, 0.0)),
        (1, m2(0.0, w, 0.0, 0.0)),
        (-1, m2(0.0, 0.0, w, 0.0)),
    ];
    let h = LatticeOperator::from_symbol(window, &symbol)?;
    Ok(ModelInstance {
        hamiltonian: h,
        symmetry: ssh_symmetry(),
        declared_class: AzClass::BDI,
        parameters: params(&[("v", v), ("w", w)]),
        seed: None,
    })
}

/// Chiral-block hoppings of SSH, `v + w R^*`.
pub fn ssh_chiral_symbol(v: f64, w: f64) -> Vec<(i64, CMat)> {
    vec![(0, CMat::from_element(1, 1, linalg::r(v))), (-1, CMat::from_element(1, 1, linalg::r(w)))]
}

/// Bulk gap of SSH on `S` cells: `min_j |v + w e^{2 pi i j / S}|`.
pub fn ssh_gap_oracle(v: f64, w: f64, sites: usize) -> f64 {
    (0..sites)
        .map(|j| {
            let k = 2.0 * std::f64::consts::PI * j as f64 / sites as f64;
            (linalg::r(v) + linalg::C64::from_polar(w, -k)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Bulk index of the SSH chiral block by the trace route on its polar part.
/// The window grows with the correlation length `1 / |ln|v/w||`.
pub fn ssh_bulk_index(v: f64, w: f64) -> Result<crate::index::IndexResult> {
    let ratio = (v.abs().max(1e-300) / w.abs().max(1e-300)).ln().abs();
    let xi = if ratio > 0.0 { 1.0 / ratio } else { f64::INFINITY };
    let sites = (16.0 * xi).ceil().clamp(64.0, 512.0) as usize;
    let sites = sites + sites % 2;
    let window = Window::cyclic(sites);
    let model = ssh(v, w, window)?;
    let s = crate::symmetry::chiral_blocks(&model.hamiltonian, &linalg::pauli_z())?;
    let u = crate::spectral::polar(&s);
    let lam = crate::lattice::half_line_projection(window, 1, 1)?;
    crate::index::index_trace(&u, &lam)
}

pub fn kitaev_symmetry() -> SymmetryTriple {
    SymmetryTriple {
        theta: None,
        xi: Some(AntiUnitary::new(linalg::pauli_x()).expect("sigma_x conj is an anti-unitary")),
        pi: None,
    }
}

pub fn kitaev_chain(mu: f64, t: f64, delta: f64, window: Window) -> Result<ModelInstance> {
    let hop = m2(-t, delta, -delta, t);
    let symbol = vec![(0, m2(-mu, 0.0, 0.0, mu)), (-1, hop.clone()), (1, hop.adjoint())];
    let h = LatticeOperator::from_symbol(window, &symbol)?;
    Ok(ModelInstance {
        hamiltonian: h,
        symmetry: kitaev_symmetry(),
        declared_class: AzClass::D,
        parameters: params(&[("mu", mu), ("t", t), ("delta", delta)]),
        seed: None,
    })
}

/// Bulk gap of the Kitaev chain on `S` sites:
/// `min_k sqrt((2t cos k + mu)^2 + 4 D^2 sin^2 k)`.
pub fn kitaev_gap_oracle(mu: f64, t: f64, delta: f64, sites: usize) -> f64 {
    (0..sites)
        .map(|j| {
            let k = 2.0 * std::f64::consts::PI * j as f64 / sites as f64;
            ((2.0 * t * k.cos() + mu).powi(2) + 4.0 * delta * delta * k.sin().powi(2)).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// A generator operator together with the structure it respects.
#[derive(Debug, Clone)]
pub struct Generator {
    pub operator: LatticeOperator,
    pub f: Option<AntiUnitary>,
    pub relation: RelationLabel,
    pub invariant: IndexValue,
}

/// Representative of the index class `k_or_parity` for each relation label.
pub fn shift_generator(class: RelationLabel, k_or_parity: i64, window: Window) -> Result<Generator> {
    use RelationLabel::*;
    let parity = k_or_parity.rem_euclid(2);
    Ok(match class {
        Complex => Generator {
            operator: make_shift(window, 1, k_or_parity)?,
            f: None,
            relation: Complex,
            invariant: IndexValue::Z(-k_or_parity),
        },
        Real => Generator {
            operator: make_shift(window, 1, k_or_parity)?,
            f: Some(AntiUnitary::conjugation(1)),
            relation: Real,
            invariant: IndexValue::Z(-k_or_parity),
        },
        Quaternionic => {
            let r = make_shift(window, 1, k_or_parity)?;
            Generator {
                operator: r.direct_sum(&r)?,
                f: Some(AntiUnitary::quaternionic(1)),
                relation: Quaternionic,
                invariant: IndexValue::Z(-2 * k_or_parity),
            }
        }
        StarReal => {
            if k_or_parity != 0 {
                return Err(Error::UnsupportedClass("star_real unitaries have a single index class".into()));
            }
            Generator {
                operator: LatticeOperator::identity(window, 1),
                f: Some(AntiUnitary::conjugation(1)),
                relation: StarReal,
                invariant: IndexValue::Z2(0),
            }
        }
        StarQuaternionic => {
            let op = if parity == 1 {
                let r = make_shift(window, 1, 1)?;
                r.direct_sum(&r.adjoint())?
            } else {
                LatticeOperator::identity(window, 2)
            };
            Generator {
                operator: op,
                f: Some(AntiUnitary::quaternionic(1)),
                relation: StarQuaternionic,
                invariant: IndexValue::Z2(parity as u8),
            }
        }
        IReal => {
            let model = if parity == 1 {
                kitaev_chain(0.0, 1.0, 1.0, window)?
            } else {
                kitaev_chain(1.0, 0.0, 0.0, window)?
            };
            Generator {
                operator: flatten(&model.hamiltonian, 1e-8)?,
                f: model.symmetry.xi.clone(),
                relation: IReal,
                invariant: IndexValue::Z2(parity as u8),
            }
        }
        IQuaternionic => {
            if k_or_parity != 0 {
                return Err(Error::UnsupportedClass("i_quaternionic self-adjoint unitaries have a single class".into()));
            }
            Generator {
                operator: LatticeOperator::site_constant(window, &linalg::pauli_z())?,
                f: Some(AntiUnitary::quaternionic(1)),
                relation: IQuaternionic,
                invariant: IndexValue::Z(0),
            }
        }
    })
}

/// Projects a Hermitian fiber matrix onto the terms allowed by `sym`.
pub fn symmetrize_onsite(x: &CMat, sym: &SymmetryTriple) -> CMat {
    let mut x = (x + x.adjoint()) * linalg::r(0.5);
    if let Some(t) = &sym.theta {
        let v = t.unitary_part();
        x = (&x + v * x.conjugate() * v.adjoint()) * linalg::r(0.5);
    }
    if let Some(f) = &sym.xi {
        let v = f.unitary_part();
        x = (&x - v * x.conjugate() * v.adjoint()) * linalg::r(0.5);
    }
    if let Some(p) = &sym.pi {
        x = (&x - p * &x * p.adjoint()) * linalg::r(0.5);
    }
    x
}

/// Seeded on-site disorder, uniform in `[-strength, strength]` and projected
/// onto the symmetric terms. The resulting gap is stored as parameter `gap`.
pub fn disordered(base: &ModelInstance, strength: f64, seed: u64) -> Result<ModelInstance> {
    if strength < 0.0 || !strength.is_finite() {
        return Err(Error::Usage(format!("disorder strength {strength} must be non-negative")));
    }
    let mut out = base.clone();
    out.seed = Some(seed);
    out.parameters.insert("strength".into(), strength);
    if strength == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = base.hamiltonian.fiber_dim();
    let sites = base.hamiltonian.window().sites();
    let mut h = base.hamiltonian.clone();
    let mut any = false;
    for i in 0..sites {
        let mut x = linalg::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                x[(a, b)] = linalg::c(rng.random_range(-strength..=strength), rng.random_range(-strength..=strength));
            }
        }
        let xs = symmetrize_onsite(&x, &base.symmetry);
        if linalg::max_abs(&xs) > 1e-14 * strength {
            any = true;
        }
        let cur = h.block_idx(i, i);
        h.set_block_idx(i, i, &(cur + xs));
    }
    if !any {
        return Err(Error::SymmetryUnpreservable("no on-site term respects the symmetry".into()));
    }
    out.parameters.insert("gap".into(), spectral_gap(&h)?);
    out.hamiltonian = h;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct MobilityPair {
    pub r_op: LatticeOperator,
    pub s_op: LatticeOperator,
    pub cut: i64,
}

/// `R` and `S = (1 - Lambda) R (1 - Lambda) + Lambda R Lambda` on an open
/// window with the cut at 1.
pub fn mobility_counterexample(window: Window) -> Result<MobilityPair> {
    let w = Window { boundary: Boundary::Open, ..window };
    let cut = 1;
    let r = make_shift(w, 1, 1)?;
    let lam = crate::lattice::half_line_projection(w, 1, cut)?;
    let perp = LatticeOperator::identity(w, 1).sub(&lam)?;
    let s = perp.mul(&r)?.mul(&perp)?.add(&lam.mul(&r)?.mul(&lam)?)?;
    Ok(MobilityPair { r_op: r, s_op: s, cut })
}

/// Kernel directions of `a` whose mass lies mostly within `radius` sites of
/// the cut.
pub fn near_cut_kernel_dim(a: &LatticeOperator, cut: i64, radius: usize, tol: f64) -> usize {
    let w = a.window();
    let n = a.fiber_dim();
    let ker = linalg::right_null(a.matrix(), tol);
    let near: Vec<usize> = (0..w.sites() * n).filter(|&k| w.distance_to_cut(w.site(k / n), cut) < radius).collect();
    crate::index::edge_count(&ker, &near)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{index_kernel, index_trace, index_z2, ClassCheck, KERNEL_TOL};
    use crate::lattice::half_line_projection;

    #[test]
    fn ssh_is_bdi_and_dimerized_flat() {
        let w = Window::cyclic(16);
        let m = ssh(0.0, 1.0, w).unwrap();
        m.verify_class().unwrap();
        let vals = linalg::herm_eig(m.hamiltonian.matrix()).0;
        assert!(vals.iter().all(|x| (x.abs() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn kitaev_is_d() {
        let m = kitaev_chain(0.5, 1.0, 1.0, Window::cyclic(16)).unwrap();
        m.verify_class().unwrap();
    }

    #[test]
    fn generator_invariants() {
        let w = Window::cyclic(32);
        let lam1 = half_line_projection(w, 1, 1).unwrap();
        let lam2 = half_line_projection(w, 2, 1).unwrap();
        let g = shift_generator(RelationLabel::Complex, 2, w).unwrap();
        assert_eq!(index_trace(&g.operator, &lam1).unwrap().z(), -2);
        let g = shift_generator(RelationLabel::Quaternionic, 1, w).unwrap();
        assert_eq!(index_trace(&g.operator, &lam2).unwrap().z(), -2);
        for p in [0, 1] {
            for rel in [RelationLabel::StarQuaternionic, RelationLabel::IReal] {
                let g = shift_generator(rel, p, w).unwrap();
                let cc = ClassCheck { f: g.f.clone().unwrap(), relation: rel };
                assert_eq!(index_z2(&g.operator, &lam2, &cc).unwrap().z2(), p as u8, "{rel:?} {p}");
            }
        }
        assert!(matches!(shift_generator(RelationLabel::StarReal, 1, w), Err(Error::UnsupportedClass(_))));
    }

    #[test]
    fn mobility_pair() {
        let pair = mobility_counterexample(Window::open(32)).unwrap();
        let lam = half_line_projection(pair.r_op.window(), 1, pair.cut).unwrap();
        for op in [&pair.r_op, &pair.s_op] {
            assert_eq!(index_kernel(op, &lam, KERNEL_TOL, true).unwrap().z(), -1);
        }
        assert_eq!(near_cut_kernel_dim(&pair.r_op, pair.cut, 8, 1e-8), 0);
        assert_eq!(near_cut_kernel_dim(&pair.s_op, pair.cut, 8, 1e-8), 1);
    }

    #[test]
    fn disorder_is_deterministic() {
        let base = ssh(0.5, 1.0, Window::cyclic(16)).unwrap();
        let a = disordered(&base, 0.1, 7).unwrap();
        let b = disordered(&base, 0.1, 7).unwrap();
        assert_eq!(a.hamiltonian, b.hamiltonian);
        a.verify_class().unwrap();
        assert_eq!(disordered(&base, 0.0, 7).unwrap().hamiltonian, base.hamiltonian);
    }
}
