//! Acceptance suite: one line per criterion, non-zero exit on any failure.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use topo1d::ensembles::{self, cut_localized_generator, expi, random_unitary};
use topo1d::index::{
    edge_index, index_kernel, index_trace, index_winding, index_z2, kernel_dim, schur_parity_probe, ClassCheck, EdgeClass,
    KERNEL_TOL,
};
use topo1d::lattice::{half_line_projection, make_shift, LatticeOperator, Window};
use topo1d::linalg::{self, CMat};
use topo1d::models::{self, kitaev_chain, mobility_counterexample, near_cut_kernel_dim, shift_generator, ssh};
use topo1d::spectral::{flatten, spectral_gap};
use topo1d::stummel::{abr_connect, abr_deform, stummel_direct, stummel_idempotents};
use topo1d::error::Error;
use topo1d::homotopy::{connect_saus, connect_unitaries, verify_path};
use topo1d::symmetry::{check_relation, chiral_blocks, kramers_basis, AntiUnitary, Pairing, RelationLabel};

type Outcome = Result<String, String>;

// Negated comparisons are deliberate: a NaN must fail the check.
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn timed(limit: Duration, start: Instant) -> Result<Duration, String> {
    let el = start.elapsed();
    ensure!(el <= limit, "runtime {:.2?} exceeds {:.2?}", el, limit);
    Ok(el)
}

fn crit1() -> Outcome {
    let start = Instant::now();
    let w = Window::cyclic(32);
    let lam = half_line_projection(w, 1, 1).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for k in -5..=5 {
        let u = make_shift(w, 1, k).map_err(|e| e.to_string())?;
        let r = index_trace(&u, &lam).map_err(|e| e.to_string())?;
        ensure!(r.z() == -k, "R^{k}: index {} != {}", r.z(), -k);
        let raw = r.raw_trace.unwrap();
        worst = worst.max((raw - raw.round()).abs());
    }
    ensure!(worst < 1e-9, "raw trace deviation {worst:.2e}");
    let el = timed(Duration::from_secs(1), start)?;
    Ok(format!("k in -5..=5 exact, max raw deviation {worst:.1e}, {el:.2?}"))
}

fn crit2() -> Outcome {
    let start = Instant::now();
    let w = Window::cyclic(32);
    let lam = half_line_projection(w, 2, 1).map_err(|e| e.to_string())?;
    for k in -3..=3 {
        let g = shift_generator(RelationLabel::Quaternionic, k, w).map_err(|e| e.to_string())?;
        let r = index_trace(&g.operator, &lam).map_err(|e| e.to_string())?;
        ensure!(r.z() == -2 * k, "doubled R^{k}: {}", r.z());
    }
    let j = AntiUnitary::quaternionic(1);
    let mut rng = ensembles::rng(2002);
    let mut seen = std::collections::BTreeSet::new();
    for trial in 0..200 {
        let k = rng.random_range(-2..=2);
        let u = random_unitary(&mut rng, w, 2, Some(&j), RelationLabel::Quaternionic, k, 2, 2.0).map_err(|e| e.to_string())?;
        let r = index_trace(&u, &lam).map_err(|e| format!("trial {trial}: {e}"))?;
        ensure!(r.z() % 2 == 0, "trial {trial}: odd index {}", r.z());
        ensure!(r.z() == -2 * k, "trial {trial}: index {} expected {}", r.z(), -2 * k);
        seen.insert(r.z());
    }
    let el = timed(Duration::from_secs(30), start)?;
    Ok(format!("generators -2k; 200 random all even (values {seen:?}), {el:.2?}"))
}

fn crit3() -> Outcome {
    let start = Instant::now();
    let w = Window::cyclic(48);
    let mut rng = ensembles::rng(3003);
    for trial in 0..100 {
        let n = rng.random_range(1..=2);
        let k = rng.random_range(-3..=3);
        let lam = half_line_projection(w, n, 1).map_err(|e| e.to_string())?;
        let u = random_unitary(&mut rng, w, n, None, RelationLabel::Complex, k, 2, 2.5).map_err(|e| e.to_string())?;
        let t = index_trace(&u, &lam).map_err(|e| format!("trial {trial}: {e}"))?;
        let kr = index_kernel(&u, &lam, KERNEL_TOL, true).map_err(|e| e.to_string())?;
        ensure!(t.z() == kr.z(), "trial {trial}: trace {} vs kernel {} ({:?})", t.z(), kr.z(), kr.notes);
        ensure!(t.z() == -(n as i64) * k, "trial {trial}: index {} expected {}", t.z(), -(n as i64) * k);
    }
    let el = timed(Duration::from_secs(120), start)?;
    Ok(format!("100/100 agree, {el:.2?}"))
}

fn crit4() -> Outcome {
    let w = Window::cyclic(64);
    let mut rng = ensembles::rng(4004);
    for trial in 0..100 {
        let n = rng.random_range(1..=2);
        let lam = half_line_projection(w, n, 1).map_err(|e| e.to_string())?;
        let ka = rng.random_range(-3..=3);
        let kb = rng.random_range(-3..=3);
        let u = random_unitary(&mut rng, w, n, None, RelationLabel::Complex, ka, 2, 2.0).map_err(|e| e.to_string())?;
        let v = random_unitary(&mut rng, w, n, None, RelationLabel::Complex, kb, 2, 2.0).map_err(|e| e.to_string())?;
        let uv = u.mul(&v).map_err(|e| e.to_string())?;
        let iu = index_trace(&u, &lam).map_err(|e| e.to_string())?.z();
        let iv = index_trace(&v, &lam).map_err(|e| e.to_string())?.z();
        let iuv = index_trace(&uv, &lam).map_err(|e| e.to_string())?.z();
        ensure!(iu + iv == iuv, "trial {trial}: {iu} + {iv} != {iuv}");
    }
    Ok("100/100 pairs additive".into())
}

fn crit5() -> Outcome {
    let w = Window::cyclic(48);
    let mut values = Vec::new();
    for seed in 0..20u64 {
        let n = 1 + (seed as usize % 2);
        let (sym, analytic) = common::random_walk_symbol(5000 + seed, n, 2);
        let hops = common::symbol_list(&sym);
        let wind = index_winding(&hops, 1024).map_err(|e| e.to_string())?;
        ensure!(wind.z() == -analytic, "seed {seed}: winding index {} vs analytic {}", wind.z(), -analytic);
        let u = common::lattice_from_symbol(w, &sym);
        let lam = half_line_projection(w, n, 1).map_err(|e| e.to_string())?;
        let t = index_trace(&u, &lam).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure!(t.z() == wind.z(), "seed {seed}: trace {} vs -winding {}", t.z(), wind.z());
        values.push(t.z());
    }
    Ok(format!("20/20 symbols, indices {values:?}"))
}

fn crit6() -> Outcome {
    let w64 = Window::cyclic(64);
    let mut worst_gap: f64 = 0.0;
    let mut count = 0;
    for j in 0..=20 {
        let v = 0.1 * j as f64;
        if (v - 1.0).abs() < 0.05 {
            continue;
        }
        let wv = 1.0;
        count += 1;
        let idx = models::ssh_bulk_index(v, wv).map_err(|e| format!("v={v}: {e}"))?.z();
        let expect = if wv.abs() > v.abs() { 1 } else { 0 };
        ensure!(idx.abs() == expect, "v={v}: |index| = {}", idx.abs());
        let m = ssh(v, wv, w64).map_err(|e| e.to_string())?;
        let gap = spectral_gap(&m.hamiltonian).map_err(|e| e.to_string())?;
        let oracle = models::ssh_gap_oracle(v, wv, 64);
        worst_gap = worst_gap.max((gap - oracle).abs());
    }
    ensure!(count == 20, "sweep has {count} points");
    ensure!(worst_gap < 1e-4, "gap deviation {worst_gap:.2e}");
    Ok(format!("20 points, max gap deviation {worst_gap:.1e}"))
}

fn kitaev_oracle(mu: f64) -> Result<u8, String> {
    let open = kitaev_chain(mu, 1.0, 1.0, Window::open(64)).map_err(|e| e.to_string())?;
    let zero = common::zero_mode_count(open.hamiltonian.matrix(), 1e-2);
    Ok(((zero / 2) % 2) as u8)
}

fn crit7() -> Outcome {
    let w = Window::cyclic(64);
    let lam = half_line_projection(w, 2, 1).map_err(|e| e.to_string())?;
    let mut points = 0;
    for j in 0..=32 {
        let mu = -4.0 + 0.25 * j as f64;
        if (mu.abs() - 2.0).abs() < 0.1 {
            continue;
        }
        points += 1;
        let m = kitaev_chain(mu, 1.0, 1.0, w).map_err(|e| e.to_string())?;
        let u = flatten(&m.hamiltonian, 1e-8).map_err(|e| format!("mu={mu}: {e}"))?;
        let cc = ClassCheck { f: m.symmetry.xi.clone().unwrap(), relation: RelationLabel::IReal };
        let z2 = index_z2(&u, &lam, &cc).map_err(|e| format!("mu={mu}: {e}"))?.z2();
        let expect = u8::from(mu.abs() < 2.0);
        ensure!(z2 == expect, "mu={mu}: ind2 {z2}, expected {expect}");
        let oracle = kitaev_oracle(mu)?;
        ensure!(z2 == oracle, "mu={mu}: ind2 {z2}, open-chain oracle {oracle}");
    }
    Ok(format!("{points} points match phase rule and oracle"))
}

fn crit8() -> Outcome {
    let w = Window::cyclic(32);
    let lam = half_line_projection(w, 2, 1).map_err(|e| e.to_string())?;
    let j = AntiUnitary::quaternionic(1);
    let cc = ClassCheck { f: j.clone(), relation: RelationLabel::StarQuaternionic };
    let odd = shift_generator(RelationLabel::StarQuaternionic, 1, w).map_err(|e| e.to_string())?.operator;
    let even = LatticeOperator::identity(w, 2);
    ensure!(index_z2(&odd, &lam, &cc).map_err(|e| e.to_string())?.z2() == 1, "ind2(R+R*) != 1");
    ensure!(index_z2(&even, &lam, &cc).map_err(|e| e.to_string())?.z2() == 0, "ind2(1) != 0");
    // The singular values of the compression sit at 0 and 1, so the gap is 1.
    let gap = 1.0;
    let mut rng = ensembles::rng(8008);
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        for (base, expect) in [(&odd, 1u8), (&even, 0u8)] {
            let k = cut_localized_generator(&mut rng, w, 2, Some(&j), RelationLabel::StarQuaternionic, 1, 4, 0.2)
                .map_err(|e| e.to_string())?;
            let wu = expi(&k);
            let pert = wu.mul(base).and_then(|x| x.mul(&wu)).map_err(|e| e.to_string())?;
            let size = pert.sub(base).map_err(|e| e.to_string())?.norm();
            ensure!(size < gap / 2.0, "trial {trial}: perturbation {size:.3} too large");
            worst = worst.max(size);
            let got = index_z2(&pert, &lam, &cc).map_err(|e| format!("trial {trial}: {e}"))?.z2();
            ensure!(got == expect, "trial {trial}: ind2 {got}, expected {expect}");
        }
    }
    Ok(format!("generators 1/0; 100 perturbed operators stable (max norm {worst:.3})"))
}

fn crit9() -> Outcome {
    let start = Instant::now();
    let w = Window::cyclic(16);
    let mut g = ensembles::rng(909);
    let classes = [
        (RelationLabel::Complex, None::<AntiUnitary>, [1usize, 2]),
        (RelationLabel::Real, Some(AntiUnitary::conjugation(1)), [1, 2]),
        (RelationLabel::Quaternionic, Some(AntiUnitary::quaternionic(1)), [2, 2]),
    ];
    let mut worst_unit: f64 = 0.0;
    let mut worst_sym: f64 = 0.0;
    let mut worst_end: f64 = 0.0;
    for (rel, f0, fibers) in &classes {
        for trial in 0..25 {
            let n = fibers[trial % 2];
            let f = f0.as_ref().map(|f| if f.fiber_dim() == n { f.clone() } else { AntiUnitary::conjugation(n) });
            let lam = half_line_projection(w, n, 1).map_err(|e| e.to_string())?;
            let k = (trial % 3) as i64 - 1;
            let u = random_unitary(&mut g, w, n, f.as_ref(), *rel, k, 1, 0.8).map_err(|e| e.to_string())?;
            let v = if trial % 2 == 0 {
                random_unitary(&mut g, w, n, f.as_ref(), *rel, k, 1, 0.8).map_err(|e| e.to_string())?
            } else {
                let h = cut_localized_generator(&mut g, w, n, f.as_ref(), *rel, 1, 3, 1.0).map_err(|e| e.to_string())?;
                expi(&h).mul(&u).map_err(|e| e.to_string())?
            };
            let tag = format!("{} trial {trial}", rel.name());
            let iu = index_trace(&u, &lam).map_err(|e| format!("{tag}: {e}"))?.z();
            let iv = index_trace(&v, &lam).map_err(|e| format!("{tag}: {e}"))?.z();
            ensure!(iu == iv, "{tag}: sampled pair has indices {iu} and {iv}");
            let path = connect_unitaries(&u, &v, &lam, f.as_ref(), *rel, 65).map_err(|e| format!("{tag}: {e}"))?;
            ensure!(path.len() == 65, "{tag}: {} samples", path.len());
            let report = verify_path(&path);
            ensure!(report.all_passed(), "{tag}: failed checks {:?}", report.failures());
            for (_, o) in &path.samples {
                worst_unit = worst_unit.max(linalg::unitarity_residual(o.matrix()));
                if let Some(f) = &f {
                    worst_sym = worst_sym.max(check_relation(o, f, *rel).map_err(|e| e.to_string())?);
                }
            }
            let e0 = linalg::norm2(&(path.start().matrix() - u.matrix()));
            let e1 = linalg::norm2(&(path.end().matrix() - v.matrix()));
            worst_end = worst_end.max(e0).max(e1);
        }
    }
    ensure!(worst_unit < 1e-8, "unitarity residual {worst_unit:.2e}");
    ensure!(worst_sym < 1e-8, "symmetry residual {worst_sym:.2e}");
    ensure!(worst_end < 1e-8, "endpoint error {worst_end:.2e}");
    let el = timed(Duration::from_secs(300), start)?;
    Ok(format!(
        "75/75 paths verified (unitarity {worst_unit:.1e}, symmetry {worst_sym:.1e}, endpoints {worst_end:.1e}), {el:.2?}"
    ))
}

fn fiber_kron(a: &LatticeOperator, b: &CMat) -> Result<LatticeOperator, String> {
    LatticeOperator::new(a.window(), a.fiber_dim() * b.nrows(), linalg::kron(a.matrix(), b)).map_err(|e| e.to_string())
}

fn crit10() -> Outcome {
    let start = Instant::now();
    let w = Window::cyclic(16);
    let mut g = ensembles::rng(1010);
    let flat_ssh = |v: f64, t: f64| -> Result<LatticeOperator, String> {
        flatten(&ssh(v, t, w).map_err(|e| e.to_string())?.hamiltonian, 1e-6).map_err(|e| e.to_string())
    };
    let flat_kitaev = |mu: f64| -> Result<LatticeOperator, String> {
        flatten(&kitaev_chain(mu, 1.0, 1.0, w).map_err(|e| e.to_string())?.hamiltonian, 1e-6).map_err(|e| e.to_string())
    };
    let ssh_params = [(0.5, 1.0), (0.3, 1.0), (1.0, 0.4), (1.0, 0.7), (0.8, 1.2)];
    let conj = AntiUnitary::conjugation(2);
    let j = AntiUnitary::quaternionic(2);
    let xi = AntiUnitary::new(linalg::pauli_x()).map_err(|e| e.to_string())?;
    let id2 = linalg::eye(2);
    let sz = linalg::pauli_z();

    let mut cases: Vec<(String, LatticeOperator, LatticeOperator, Option<AntiUnitary>, RelationLabel)> = Vec::new();
    for (a, pa) in ssh_params.iter().enumerate() {
        for pb in &ssh_params[a..] {
            let u = flat_ssh(pa.0, pa.1)?;
            let v = flat_ssh(pb.0, pb.1)?;
            let tag = format!("{pa:?}->{pb:?}");
            cases.push((format!("A {tag}"), u.clone(), v.clone(), None, RelationLabel::Complex));
            cases.push((format!("AI {tag}"), u.clone(), v.clone(), Some(conj.clone()), RelationLabel::Real));
            cases.push((
                format!("AII {tag}"),
                fiber_kron(&u, &id2)?,
                fiber_kron(&v, &id2)?,
                Some(j.clone()),
                RelationLabel::Quaternionic,
            ));
        }
        let u = flat_ssh(pa.0, pa.1)?;
        let uc = fiber_kron(&u, &sz)?;
        for r in 0..2 {
            let vc = ensembles::conjugate_sau(&mut g, &uc, Some(&j), RelationLabel::IQuaternionic, 1, 0.7)
                .map_err(|e| e.to_string())?;
            cases.push((format!("C {pa:?} random {r}"), uc.clone(), vc, Some(j.clone()), RelationLabel::IQuaternionic));
            let va = ensembles::conjugate_sau(&mut g, &u, None, RelationLabel::Complex, 1, 0.7).map_err(|e| e.to_string())?;
            cases.push((format!("A {pa:?} random {r}"), u.clone(), va, None, RelationLabel::Complex));
            let vr =
                ensembles::conjugate_sau(&mut g, &u, Some(&conj), RelationLabel::Real, 1, 0.7).map_err(|e| e.to_string())?;
            cases.push((format!("AI {pa:?} random {r}"), u.clone(), vr, Some(conj.clone()), RelationLabel::Real));
        }
    }
    let topological = [0.5, -1.0];
    let trivial = [3.0, -3.5];
    for group in [topological, trivial] {
        for &m1 in &group {
            for &m2 in &group {
                let u = flat_kitaev(m1)?;
                cases.push((format!("D {m1}->{m2}"), u.clone(), flat_kitaev(m2)?, Some(xi.clone()), RelationLabel::IReal));
            }
            let u = flat_kitaev(m1)?;
            let v = ensembles::conjugate_sau(&mut g, &u, Some(&xi), RelationLabel::IReal, 1, 0.7).map_err(|e| e.to_string())?;
            cases.push((format!("D {m1} random"), u, v, Some(xi.clone()), RelationLabel::IReal));
        }
    }

    let mut worst_sau: f64 = 0.0;
    let mut worst_end: f64 = 0.0;
    for (tag, u, v, f, rel) in &cases {
        let lam = half_line_projection(w, u.fiber_dim(), 1).map_err(|e| e.to_string())?;
        let path = connect_saus(u, v, &lam, f.as_ref(), *rel, 65).map_err(|e| format!("{tag}: {e}"))?;
        ensure!(path.len() == 65, "{tag}: {} samples", path.len());
        let report = verify_path(&path);
        ensure!(report.all_passed(), "{tag}: failed checks {:?}", report.failures());
        for (_, o) in &path.samples {
            let m = o.matrix();
            worst_sau = worst_sau.max(linalg::norm2(&(m - m.adjoint()))).max(linalg::unitarity_residual(m));
        }
        let e0 = linalg::norm2(&(path.start().matrix() - u.matrix()));
        let e1 = linalg::norm2(&(path.end().matrix() - v.matrix()));
        worst_end = worst_end.max(e0).max(e1);
    }
    ensure!(worst_sau < 1e-8, "self-adjoint unitarity residual {worst_sau:.2e}");
    ensure!(worst_end < 1e-8, "endpoint error {worst_end:.2e}");

    let mut rejected = 0;
    for &m1 in &topological {
        for &m2 in &trivial {
            for (a, b) in [(m1, m2), (m2, m1)] {
                let lam = half_line_projection(w, 2, 1).map_err(|e| e.to_string())?;
                match connect_saus(&flat_kitaev(a)?, &flat_kitaev(b)?, &lam, Some(&xi), RelationLabel::IReal, 65) {
                    Err(Error::Z2Mismatch { .. }) => rejected += 1,
                    Err(e) => return Err(format!("D {a}->{b}: expected a Z2 mismatch, got {e}")),
                    Ok(_) => return Err(format!("D {a}->{b}: mixed-parity pair was connected")),
                }
            }
        }
    }
    let el = timed(Duration::from_secs(300), start)?;
    Ok(format!(
        "{} paths verified (self-adjoint unitarity {worst_sau:.1e}, endpoints {worst_end:.1e}), {rejected}/8 mixed-parity pairs rejected, {el:.2?}",
        cases.len()
    ))
}

/// Contour integrals on the midpoint nodes `e^{2 pi i (j + 1/2) / m}`,
/// independent of the library's node placement: returns `(P, Q, K)`.
fn midpoint_contour(a: &CMat, g: &CMat, m: usize) -> (CMat, CMat, CMat) {
    let n = a.nrows();
    let mut p = CMat::zeros(n, n);
    let mut q = CMat::zeros(n, n);
    let mut k = CMat::zeros(n, n);
    for j in 0..m {
        let lambda = linalg::C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / m as f64);
        let sinv = (a + g * lambda).try_inverse().expect("pencil invertible on the circle");
        p += &sinv * g * lambda;
        q += g * &sinv * lambda;
        k += sinv * lambda;
    }
    let w = linalg::r(1.0 / m as f64);
    (p * w, q * w, k * w)
}

fn crit11() -> Outcome {
    let start = Instant::now();
    let w = Window::cyclic(16);
    let mut g = ensembles::rng(1111);
    let mut worst = [0.0f64; 6];
    for trial in 0..50 {
        let p = trial % 3;
        let eps = g.random_range(0.2..0.6);
        let pair = ensembles::random_abr_pair(&mut g, w, 2, p, eps).map_err(|e| e.to_string())?;
        let tag = format!("pair {trial}");
        let a = pair.a();
        let gm = pair.g();
        let quad = stummel_idempotents(&a, &gm, 128).map_err(|e| format!("{tag}: {e}"))?;
        let direct = stummel_direct(&pair).map_err(|e| format!("{tag}: {e}"))?;
        ensure!(direct.rank == p, "{tag}: rank {} != {p}", direct.rank);
        let (pm, qm) = (quad.p.matrix(), quad.q.matrix());
        let idem = linalg::norm2(&(pm * pm - pm)).max(linalg::norm2(&(qm * qm - qm)));
        let inter = linalg::norm2(&(a.matrix() * pm - qm * a.matrix()))
            .max(linalg::norm2(&(gm.matrix() * pm - qm * gm.matrix())));
        let dp = linalg::norm2(&(pm - direct.p.matrix()));
        let km = quad.k.matrix();
        let kgk = linalg::norm2(&(km * gm.matrix() * km - km));
        let (op, oq, ok) = midpoint_contour(a.matrix(), gm.matrix(), 128);
        let oracle = linalg::norm2(&(&op - direct.p.matrix()))
            .max(linalg::norm2(&(&oq - direct.q.matrix())))
            .max(linalg::norm2(&(&ok - km)));
        let n = pair.fiber_dim();
        let mut off: f64 = 0.0;
        for x in 0..w.sites() {
            for y in 0..w.sites() {
                if x != y {
                    off = off.max(linalg::max_abs(&direct.p.matrix().view((x * n, y * n), (n, n)).into_owned()));
                }
            }
        }
        ensure!(idem < 1e-8, "{tag}: idempotency residual {idem:.2e}");
        ensure!(inter < 1e-8, "{tag}: intertwining residual {inter:.2e}");
        ensure!(dp < 1e-6, "{tag}: direct vs quadrature {dp:.2e}");
        ensure!(kgk < 1e-7, "{tag}: KGK - K residual {kgk:.2e}");
        ensure!(oracle < 1e-6, "{tag}: midpoint-node oracle differs by {oracle:.2e}");
        ensure!(off == 0.0, "{tag}: direct P has off-diagonal entries up to {off:.2e}");
        for (slot, v) in worst.iter_mut().zip([idem, inter, dp, kgk, oracle, off]) {
            *slot = slot.max(v);
        }
    }
    let el = timed(Duration::from_secs(120), start)?;
    Ok(format!(
        "50 pairs: idempotency {:.1e}, intertwining {:.1e}, direct vs quadrature {:.1e}, KGK {:.1e}, oracle {:.1e}, off-diagonal {:.0e}, {el:.2?}",
        worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
    ))
}

/// `D_perp + D R` built entry by entry.
fn normal_form_oracle(w: Window, k: usize, p: usize) -> CMat {
    let s = w.sites();
    let mut m = CMat::zeros(s * k, s * k);
    for x in 0..s {
        for a in 0..k {
            if a < k - p {
                m[(x * k + a, x * k + a)] = linalg::r(1.0);
            } else {
                m[(((x + 1) % s) * k + a, x * k + a)] = linalg::r(1.0);
            }
        }
    }
    m
}

fn crit12() -> Outcome {
    let start = Instant::now();
    let w = Window::cyclic(16);
    let lam = half_line_projection(w, 2, 1).map_err(|e| e.to_string())?;
    let mut g = ensembles::rng(1212);
    let mut worst_end: f64 = 0.0;
    let mut margin = f64::INFINITY;
    for trial in 0..12 {
        let p = trial % 3;
        let pair = ensembles::random_abr_pair(&mut g, w, 2, p, 0.5).map_err(|e| e.to_string())?;
        let tag = format!("pair {trial}");
        let path = abr_deform(&pair, 65).map_err(|e| format!("{tag}: {e}"))?;
        ensure!(path.len() == 65, "{tag}: {} samples", path.len());
        let end = linalg::norm2(&(path.end().matrix() - normal_form_oracle(w, 2, p)));
        let begin = linalg::norm2(&(path.start().matrix() - pair.operator().matrix()));
        worst_end = worst_end.max(end).max(begin);
        for (t, o) in &path.samples {
            let sigma = linalg::min_singular(o.matrix());
            margin = margin.min(sigma);
            ensure!(sigma > 1e-3, "{tag}: min singular value {sigma:.2e} at t = {t:.3}");
            let polar = linalg::polar_part(o.matrix(), 0.0);
            let ind = index_trace(&o.with_matrix(polar).map_err(|e| e.to_string())?, &lam).map_err(|e| format!("{tag}: {e}"))?.z();
            ensure!(ind == -(p as i64), "{tag}: index {ind} at t = {t:.3}, expected {}", -(p as i64));
            topo1d::stummel::ABRPair::from_operator(o, 0.0).map_err(|e| format!("{tag} at t = {t:.3}: {e}"))?;
        }
        let report = verify_path(&path);
        ensure!(report.all_passed(), "{tag}: failed checks {:?}", report.failures());
    }
    ensure!(worst_end < 1e-8, "endpoint error {worst_end:.2e}");

    let block = |v: f64, t: f64| -> Result<LatticeOperator, String> {
        let h = ssh(v, t, w).map_err(|e| e.to_string())?.hamiltonian;
        chiral_blocks(&h, &linalg::pauli_z()).map_err(|e| e.to_string())
    };
    let topological = [(0.5, 1.0), (0.2, 1.3), (0.7, 1.1)];
    let trivial = [(1.0, 0.4), (1.2, 0.3), (1.0, 0.6)];
    let mut joined = 0;
    for group in [topological, trivial] {
        for (i, a) in group.iter().enumerate() {
            for b in &group[i + 1..] {
                let tag = format!("{a:?} -> {b:?}");
                let path = abr_connect(&block(a.0, a.1)?, &block(b.0, b.1)?, 65).map_err(|e| format!("{tag}: {e}"))?;
                let report = verify_path(&path);
                ensure!(report.all_passed(), "{tag}: failed checks {:?}", report.failures());
                joined += 1;
            }
        }
    }
    let mut rejected = 0;
    for a in &topological {
        for b in &trivial {
            match abr_connect(&block(a.0, a.1)?, &block(b.0, b.1)?, 65) {
                Err(Error::IndexMismatch { .. }) => rejected += 1,
                Err(e) => return Err(format!("{a:?} -> {b:?}: expected an index mismatch, got {e}")),
                Ok(_) => return Err(format!("{a:?} -> {b:?}: mixed-index pair was connected")),
            }
        }
    }
    let el = timed(Duration::from_secs(300), start)?;
    Ok(format!(
        "12 deformations (endpoints {worst_end:.1e}, min singular value {margin:.2e}), {joined} same-index pairs joined, {rejected}/9 mixed pairs rejected, {el:.2?}"
    ))
}

fn random_antisymmetric(rng: &mut impl Rng, n: usize, zeros: usize, real: bool) -> CMat {
    // Q^T Sigma Q with Sigma a direct sum of 2x2 blocks, `zeros` of them vanishing.
    let q = if real {
        let g = CMat::from_fn(n, n, |_, _| linalg::r(rng.sample::<f64, _>(rand_distr::StandardNormal)));
        linalg::polar_part(&g, 0.0)
    } else {
        ensembles::haar_unitary(rng, n)
    };
    let mut sigma = linalg::zeros(n, n);
    for b in 0..n / 2 {
        let s = if b < zeros { 0.0 } else { rng.random_range(0.5..1.5) };
        sigma[(2 * b, 2 * b + 1)] = linalg::r(s);
        sigma[(2 * b + 1, 2 * b)] = linalg::r(-s);
    }
    q.transpose() * sigma * q
}

fn crit13() -> Outcome {
    let mut rng = ensembles::rng(1313);
    let w = Window::cyclic(4);
    let j = AntiUnitary::quaternionic(1);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let m = rng.random_range(1..=3);
        let raw = ensembles::gaussian_matrix(&mut rng, 8, m);
        let span = linalg::hstack(&raw, &j.apply(&raw).unwrap());
        let sub = linalg::orthonormalize(&span, 1e-8);
        let kb = kramers_basis(&sub, &j).map_err(|e| format!("trial {trial}: {e}"))?;
        ensure!(kb.basis.ncols() % 2 == 0, "trial {trial}: odd dimension {}", kb.basis.ncols());
        ensure!(matches!(kb.pairing, Pairing::Kramers(_)), "trial {trial}: wrong pairing");
        let gram = kb.basis.adjoint() * &kb.basis - linalg::eye(kb.basis.ncols());
        let (a, b) = kb.halves();
        let pair = j.apply(&a).unwrap() - b;
        worst = worst.max(linalg::max_abs(&gram)).max(linalg::max_abs(&pair));
    }
    ensure!(worst < 1e-12, "Kramers residual {worst:.2e}");
    let mut ranks = [0usize; 3];
    for trial in 0..100 {
        let (rel, f, t, s) = if trial % 2 == 0 {
            let y = random_antisymmetric(&mut rng, 8, 1, false);
            let y2 = random_antisymmetric(&mut rng, 8, 0, false);
            let v = j.full(4);
            let eps = 1e-3;
            (RelationLabel::StarQuaternionic, j.clone(), &y * v.adjoint(), (&y + &y2 * linalg::r(eps)) * v.adjoint())
        } else {
            let k = random_antisymmetric(&mut rng, 8, 1, true);
            let k2 = random_antisymmetric(&mut rng, 8, 0, true);
            let eps = 1e-3;
            let t = &k * linalg::I;
            let s = (&k + &k2 * linalg::r(eps)) * linalg::I;
            (RelationLabel::IReal, AntiUnitary::conjugation(2), t, s)
        };
        let t = LatticeOperator::new(w, 2, t).unwrap();
        let s = LatticeOperator::new(w, 2, s).unwrap();
        let probe = schur_parity_probe(&t, &s, &f, rel).map_err(|e| format!("trial {trial}: {e}"))?;
        ensure!(probe.parity_ok && probe.rank_z % 2 == 0, "trial {trial}: rank_Z {}", probe.rank_z);
        let oracle = kernel_dim(s.matrix(), 1e-8);
        ensure!(oracle == probe.ker_s_predicted, "trial {trial}: dim ker S {oracle} vs predicted {}", probe.ker_s_predicted);
        ranks[probe.rank_z.min(2)] += 1;
    }
    Ok(format!("Kramers residual {worst:.1e}; 100 probes even (rank_Z histogram {ranks:?})"))
}

fn crit14() -> Outcome {
    let mut done = 0;
    for j in 0..20 {
        let (v, wv) = if j < 10 { (0.05 + 0.07 * j as f64, 1.0) } else { (1.0, 0.05 + 0.07 * (j - 10) as f64) };
        let bulk = models::ssh_bulk_index(v, wv).map_err(|e| format!("({v},{wv}): {e}"))?.z();
        let edge_w = Window::new(1, 81, topo1d::lattice::Boundary::Open).unwrap();
        let m = ssh(v, wv, edge_w).map_err(|e| e.to_string())?;
        let edge = edge_index(&m.hamiltonian, &EdgeClass::Aiii { pi: linalg::pauli_z() }, 1e-6)
            .map_err(|e| format!("({v},{wv}): {e}"))?
            .z();
        ensure!(bulk == edge, "({v:.2},{wv:.2}): bulk {bulk} vs edge {edge}");
        done += 1;
    }
    Ok(format!("{done}/20 parameter sets agree"))
}

fn crit15() -> Outcome {
    let pair = mobility_counterexample(Window::open(32)).map_err(|e| e.to_string())?;
    let lam = half_line_projection(pair.r_op.window(), 1, pair.cut).map_err(|e| e.to_string())?;
    let ir = index_kernel(&pair.r_op, &lam, KERNEL_TOL, true).map_err(|e| e.to_string())?.z();
    let is = index_kernel(&pair.s_op, &lam, KERNEL_TOL, true).map_err(|e| e.to_string())?.z();
    ensure!(ir == -1 && is == -1, "indices {ir}, {is}");
    let kr = near_cut_kernel_dim(&pair.r_op, pair.cut, 8, 1e-8);
    let ks = near_cut_kernel_dim(&pair.s_op, pair.cut, 8, 1e-8);
    ensure!(kr == 0 && ks == 1, "kernel dims near the cut {kr}, {ks}");
    Ok("indices -1/-1, kernel dims near the cut 0 vs 1".into())
}

fn main() {
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let crits: [(usize, fn() -> Outcome); 15] = [
        (1, crit1),
        (2, crit2),
        (3, crit3),
        (4, crit4),
        (5, crit5),
        (6, crit6),
        (7, crit7),
        (8, crit8),
        (9, crit9),
        (10, crit10),
        (11, crit11),
        (12, crit12),
        (13, crit13),
        (14, crit14),
        (15, crit15),
    ];
    let mut failed = 0;
    for (n, f) in crits {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let start = Instant::now();
        match f() {
            Ok(msg) => println!("criterion {n}: PASS ({msg}) [{:.2?}]", start.elapsed()),
            Err(msg) => {
                failed += 1;
                println!("criterion {n}: FAIL ({msg}) [{:.2?}]", start.elapsed());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
