mod common;

use common::{random_density, random_hermitian, trace_product};
use ddi_core::geometry::{ball_membership, Complex, EmbeddingMap, HermitianOperator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn born_rule_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for d in 2..=4 {
        let map = EmbeddingMap::new(d).unwrap();
        for _ in 0..1000 {
            let rho = random_density(d, &mut rng);
            let e = random_hermitian(d, &mut rng);
            let s = map.embed_density(&rho).unwrap();
            let m = map.embed_effect(&e).unwrap();
            assert!((m.dot(&s) - trace_product(&e, &rho)).abs() <= 1e-10);
        }
    }
}

#[test]
fn purity_maps_to_squared_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in 2..=4 {
        let map = EmbeddingMap::new(d).unwrap();
        let l = (d * d) as f64;
        let alpha_sq = (d as f64 + 1.0) / d as f64;
        for _ in 0..200 {
            let rho = random_density(d, &mut rng);
            let s = map.embed_density(&rho).unwrap();
            let purity = trace_product(&rho, &rho);
            let expect = 1.0 / l + alpha_sq * (purity - 1.0 / d as f64);
            assert!((s.norm_squared() - expect).abs() <= 1e-10);
            assert!(s.is_state(1e-12));
            assert!(ball_membership(&s, 1e-10));
        }
    }
}

#[test]
fn pure_states_land_on_the_sphere() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for d in 2..=4 {
        let map = EmbeddingMap::new(d).unwrap();
        for _ in 0..100 {
            let psi: Vec<Complex<f64>> = (0..d).map(|_| Complex::new(common::gaussian(&mut rng), common::gaussian(&mut rng))).collect();
            let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let psi: Vec<_> = psi.iter().map(|z| z / norm).collect();
            let s = map.embed_density(&HermitianOperator::projector(&psi).unwrap()).unwrap();
            assert!(s.is_pure_state(1e-10));
        }
    }
}

#[test]
fn qubit_tetrahedron_is_a_rotated_simplex() {
    let r = 1.0 / 3f64.sqrt();
    let bloch = [[r, r, r], [r, -r, -r], [-r, r, -r], [-r, -r, r]];
    let states: Vec<_> = bloch.iter().map(|b| HermitianOperator::qubit_from_bloch(*b)).collect();
    for i in 0..4 {
        for j in 0..4 {
            let overlap = trace_product(&states[i], &states[j]);
            let expect = if i == j { 1.0 } else { 1.0 / 3.0 };
            assert!((overlap - expect).abs() <= 1e-12);
        }
    }
    let map = EmbeddingMap::new(2).unwrap();
    let v: Vec<_> = states.iter().map(|s| map.embed_density(s).unwrap()).collect();
    for i in 0..4 {
        assert!((v[i].norm_squared() - 1.0).abs() <= 1e-10);
        for j in 0..i {
            assert!(v[i].dot(&v[j]).abs() <= 1e-10);
        }
    }
}
