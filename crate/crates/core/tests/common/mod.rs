//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use topo1d::ensembles;
use topo1d::lattice::{LatticeOperator, Window};
use topo1d::linalg::{self, CMat, C64};

/// Laurent polynomial `l -> S_l` with matrix coefficients.
pub type Symbol = BTreeMap<i64, CMat>;

pub fn symbol_mul(a: &Symbol, b: &Symbol) -> Symbol {
    let mut out: Symbol = BTreeMap::new();
    for (la, ma) in a {
        for (lb, mb) in b {
            let prod = ma * mb;
            out.entry(la + lb)
                .and_modify(|m| *m += &prod)
                .or_insert(prod);
        }
    }
    out
}

pub fn symbol_list(s: &Symbol) -> Vec<(i64, CMat)> {
    s.iter().map(|(l, m)| (*l, m.clone())).collect()
}

/// Banded translation-invariant unitary built from coins and fiber-projected
/// shifts `P R^a + (1 - P) R^b`, together with its analytic winding
/// `sum(a rank P + b rank(1 - P))`.
pub fn random_walk_symbol(seed: u64, n: usize, factors: usize) -> (Symbol, i64) {
    let mut rng = ensembles::rng(seed);
    let mut sym: Symbol = BTreeMap::from([(0, linalg::eye(n))]);
    let mut winding = 0i64;
    use rand::Rng;
    for _ in 0..factors {
        let coin = ensembles::haar_unitary(&mut rng, n);
        sym = symbol_mul(&sym, &BTreeMap::from([(0, coin)]));
        let q = ensembles::haar_unitary(&mut rng, n);
        let rank = rng.random_range(0..=n);
        let basis = q.columns(0, rank).into_owned();
        let p = &basis * basis.adjoint();
        let a: i64 = rng.random_range(-2..=2);
        let b: i64 = rng.random_range(-2..=2);
        let mut step: Symbol = BTreeMap::new();
        step.entry(a).and_modify(|m| *m += &p).or_insert(p.clone());
        let pc = linalg::eye(n) - &p;
        step.entry(b).and_modify(|m| *m += &pc).or_insert(pc);
        sym = symbol_mul(&sym, &step);
        winding += a * rank as i64 + b * (n - rank) as i64;
    }
    (sym, winding)
}

pub fn lattice_from_symbol(window: Window, s: &Symbol) -> LatticeOperator {
    LatticeOperator::from_symbol(window, &symbol_list(s)).unwrap()
}

/// Riesz-type contour evaluation of `sgn(H)` via `(1/pi i) oint (z - H)^{-1} dz`
/// around the positive spectrum minus the negative one, with `m` nodes on a
/// circle of radius `rad` centred at `+-c`.
pub fn sgn_by_contour(h: &CMat, c: f64, rad: f64, m: usize) -> CMat {
    let n = h.nrows();
    let mut pos = linalg::zeros(n, n);
    let mut neg = linalg::zeros(n, n);
    for j in 0..m {
        let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / m as f64;
        let e = C64::from_polar(rad, th);
        for (centre, acc) in [(c, &mut pos), (-c, &mut neg)] {
            let z = linalg::r(centre) + e;
            let res = linalg::inverse(&(linalg::eye(n) * z - h)).unwrap();
            *acc += res * (e / linalg::r(m as f64));
        }
    }
    pos - neg
}

/// Number of open-chain BdG eigenvalues below `tol` in modulus.
pub fn zero_mode_count(h: &CMat, tol: f64) -> usize {
    linalg::herm_eig(h).0.iter().filter(|e| e.abs() < tol).count()
}
