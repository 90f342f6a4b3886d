//! Property checks of the path and contour constructions on small random
//! instances. Case counts are kept low because each case builds full paths.

use proptest::prelude::*;
use topo1d::ensembles;
use topo1d::homotopy::verify_path;
use topo1d::index::index_trace;
use topo1d::lattice::{half_line_projection, Window};
use topo1d::linalg;
use topo1d::stummel::{abr_deform, stummel_direct, stummel_idempotents};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn contour_idempotents_intertwine(seed in any::<u64>(), p in 0usize..3, eps in 0.2f64..0.6) {
        let w = Window::cyclic(8);
        let mut rng = ensembles::rng(seed);
        let pair = ensembles::random_abr_pair(&mut rng, w, 2, p, eps).unwrap();
        let (a, g) = (pair.a(), pair.g());
        let quad = stummel_idempotents(&a, &g, 64).unwrap();
        let (pm, qm, km) = (quad.p.matrix(), quad.q.matrix(), quad.k.matrix());
        prop_assert!(linalg::norm2(&(pm * pm - pm)) < 1e-8);
        prop_assert!(linalg::norm2(&(qm * qm - qm)) < 1e-8);
        prop_assert!(linalg::norm2(&(a.matrix() * pm - qm * a.matrix())) < 1e-8);
        prop_assert!(linalg::norm2(&(g.matrix() * pm - qm * g.matrix())) < 1e-8);
        prop_assert!(linalg::norm2(&(km * g.matrix() * km - km)) < 1e-7);
        let direct = stummel_direct(&pair).unwrap();
        prop_assert_eq!(direct.rank, p);
        // Doubling the node count changes the result by no more than the estimate.
        let fine = stummel_idempotents(&a, &g, 128).unwrap();
        prop_assert!(linalg::norm2(&(fine.p.matrix() - pm)) <= quad.error_estimate + 1e-10);
    }

    #[test]
    fn deformation_keeps_the_index_and_concatenates(seed in any::<u64>(), p in 0usize..3) {
        let w = Window::cyclic(8);
        let lam = half_line_projection(w, 2, 1).unwrap();
        let mut rng = ensembles::rng(seed);
        let pair = ensembles::random_abr_pair(&mut rng, w, 2, p, 0.5).unwrap();
        let path = abr_deform(&pair, 33).unwrap();
        prop_assert!(linalg::norm2(&(path.start().matrix() - pair.operator().matrix())) < 1e-9);
        let report = verify_path(&path);
        prop_assert!(report.all_passed(), "failed checks {:?}", report.failures());
        for (_, o) in &path.samples {
            let u = o.with_matrix(linalg::polar_part(o.matrix(), 0.0)).unwrap();
            prop_assert_eq!(index_trace(&u, &lam).unwrap().z(), -(p as i64));
        }
        let there_and_back = path.concat(&path.reversed()).unwrap();
        let report = verify_path(&there_and_back);
        prop_assert!(report.all_passed(), "failed checks {:?}", report.failures());
    }
}
