mod common;

use std::f64::consts::PI;

use chbiot::materials::MaterialModel;
use chbiot::mesh::{divergence, neumann_laplacian, symmetric_gradient, ScalarField};
use chbiot::oracle::{densify, OperatorId};
use common::*;
use proptest::prelude::*;

#[test]
fn laplacian_matches_dense_assembly() {
    let g = clamped(8);
    let mat = MaterialModel::default();
    let phi = smooth_phase(&g, 3);
    let dense = densify(OperatorId::MobilityLaplacian, &g, &mat, &phi).unwrap();
    let coeff = phi.map(|z| mat.mobility(z));
    for seed in 0..3 {
        let f = random_scalar(&g, seed);
        let got = neumann_laplacian(&g, &f, &coeff).unwrap();
        assert!(max_diff(got.values(), &dense.apply(f.values())) <= 1e-12);
    }
}

#[test]
fn divergence_matches_dense_assembly() {
    let g = clamped(8);
    let mat = MaterialModel::default();
    let phi = ScalarField::zeros(&g);
    let dense = densify(OperatorId::Divergence, &g, &mat, &phi).unwrap();
    for seed in 0..3 {
        let u = random_displacement(&g, seed);
        let got = divergence(&g, &u);
        assert!(max_diff(got.values(), &dense.apply(&u.to_dofs())) <= 1e-12);
    }
}

fn cosine_error(n: usize) -> f64 {
    let g = clamped(n);
    let f = ScalarField::from_fn(&g, |x, y| (PI * x).cos() * (PI * y).cos());
    let lap = neumann_laplacian(&g, &f, &ScalarField::constant(&g, 1.0)).unwrap();
    let exact = f.scaled(-2.0 * PI * PI);
    lap.max_abs_diff(&exact)
}

#[test]
fn laplacian_converges_at_second_order() {
    let e: Vec<f64> = [17, 33, 65].iter().map(|&n| cosine_error(n)).collect();
    assert!(e[0] / e[1] >= 3.5, "{e:?}");
    assert!(e[1] / e[2] >= 3.5, "{e:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weighted_laplacian_is_symmetric_and_conservative(seed in any::<u64>(), c1 in 0.0f64..3.0) {
        let g = clamped(6);
        let mut mat = MaterialModel::default();
        mat.mobility.c1 = c1;
        let phi = random_scalar(&g, seed).scaled(2.0);
        let a = densify(OperatorId::MobilityLaplacian, &g, &mat, &phi).unwrap().matrix;
        let w = g.weights();
        for i in 0..g.len() {
            let mut col = 0.0;
            for j in 0..g.len() {
                prop_assert!((w[i] * a[(i, j)] - w[j] * a[(j, i)]).abs() <= 1e-12);
                col += w[i] * a[(i, j)];
            }
            prop_assert!(col.abs() <= 1e-12);
        }
    }

    #[test]
    fn divergence_is_trace_of_strain(seed in any::<u64>()) {
        let g = clamped(7);
        let u = random_displacement(&g, seed);
        let tr = symmetric_gradient(&g, &u).trace(&g);
        prop_assert_eq!(divergence(&g, &u), tr);
    }
}
