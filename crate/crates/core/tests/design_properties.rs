use ddi_core::designs::{
    fit_design_weights, frame_deviation, frame_operator, haar_average_estimate, is_two_design, random_stabilizing_orthogonal,
    regular_simplex, rotate_set, stabilizer_residual, WeightedStateSet,
};
use ddi_core::geometry::GeomVector;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn rotated_simplex(l: usize, seed: u64) -> WeightedStateSet {
    let o = random_stabilizing_orthogonal(l, seed).unwrap();
    rotate_set(&regular_simplex(l).unwrap(), &o, 1e-9).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stabilizers_are_orthogonal_and_fix_u(l in 2usize..=10, seed in any::<u64>()) {
        let o = random_stabilizing_orthogonal(l, seed).unwrap();
        prop_assert!(stabilizer_residual(&o) <= 1e-12);
    }

    #[test]
    fn designs_are_orthogonally_invariant(l in 2usize..=8, seed in any::<u64>()) {
        let set = rotated_simplex(l, seed);
        prop_assert!(is_two_design(&set, 1e-10).unwrap().is_design);
        prop_assert!(set.points().iter().all(|p| p.is_pure_state(1e-10)));
    }

    #[test]
    fn frame_operator_has_unit_trace(l in 2usize..=8, seed in any::<u64>()) {
        let f = frame_operator(&rotated_simplex(l, seed)).unwrap();
        prop_assert!((f.trace() - 1.0).abs() <= 1e-12);
        prop_assert!((&f - f.transpose()).amax() <= 1e-15);
    }

    #[test]
    fn mixtures_of_designs_are_designs(l in 3usize..=6, s1 in any::<u64>(), s2 in any::<u64>(), t in 0.0f64..=1.0) {
        let mixed = rotated_simplex(l, s1).mix(&rotated_simplex(l, s2), t).unwrap();
        prop_assert!(frame_deviation(&mixed).unwrap() <= 1e-10);
    }

    #[test]
    fn weight_fit_finds_hidden_design(l in 3usize..=5, s1 in any::<u64>(), s2 in any::<u64>()) {
        // a simplex hidden among random pure points admits a design weighting
        let mut points = rotated_simplex(l, s1).points().to_vec();
        let decoys = rotated_simplex(l, s2);
        points.push(decoys.points()[0].clone());
        points.push(decoys.points()[1].clone());
        let (w, dev) = fit_design_weights(l, &points).unwrap();
        prop_assert!(dev <= 1e-9);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn non_design_pairs_fail() {
    let set = WeightedStateSet::uniform(3, vec![GeomVector::basis(3, 0), GeomVector::basis(3, 1)], 1e-9).unwrap();
    let cert = is_two_design(&set, 1e-9).unwrap();
    assert!(!cert.is_design);
    assert!(cert.frame_deviation > 0.1);
}

#[test]
fn haar_estimate_converges() {
    for l in [3, 4] {
        let s = GeomVector::basis(l, 0);
        let est = haar_average_estimate(&s, 20_000, 11).unwrap();
        let target = DMatrix::identity(l, l) / l as f64;
        let dev = (est - target).symmetric_eigenvalues().amax();
        assert!(dev <= 0.05, "l = {l}: {dev}");
    }
}
