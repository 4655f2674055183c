mod common;

use chbiot::materials::{Coefficient, MaterialModel};
use chbiot::mesh::Sym2;
use common::rng;
use proptest::prelude::*;
use rand::Rng;

const DELTA: f64 = 1e-5;
const REL_TOL: f64 = 1e-6;

fn close(analytic: f64, fd: f64, scale: f64) -> bool {
    (analytic - fd).abs() <= REL_TOL * analytic.abs().max(scale)
}

fn varied() -> MaterialModel {
    let mut m = MaterialModel::default();
    m.lame_lambda.c1 = 0.7;
    m.lame_mu.c1 = -0.3;
    m.eigenstrain.c1 = 0.05;
    m.switch_rate = 3.0;
    m
}

#[test]
fn coefficient_derivatives_match_central_differences() {
    let mat = varied();
    for which in Coefficient::ALL {
        for i in 0..=40 {
            let z = -2.0 + 0.1 * i as f64;
            for order in 1..=2u8 {
                let f = |z: f64| mat.eval(which, z, order - 1).unwrap();
                let fd = (f(z + DELTA) - f(z - DELTA)) / (2.0 * DELTA);
                let an = mat.eval(which, z, order).unwrap();
                let scale = mat.eval(which, z, 0).unwrap().abs().max(1.0);
                assert!(close(an, fd, scale), "{} order {order} at {z}: {an} vs {fd}", which.id());
            }
        }
    }
}

#[test]
fn density_derivatives_match_central_differences() {
    let mat = varied();
    let mut r = rng(11);
    for _ in 0..500 {
        let z = r.gen_range(-2.0..2.0);
        let e = Sym2::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let scale = mat.elastic_density(z, &e).max(1.0);

        let w = |z: f64| mat.elastic_density(z, &e);
        let fd = (w(z + DELTA) - w(z - DELTA)) / (2.0 * DELTA);
        assert!(close(mat.elastic_density_phase(z, &e), fd, scale));

        let ws = mat.elastic_density_strain(z, &e);
        let d = |de: Sym2| (mat.elastic_density(z, &(e + de)) - mat.elastic_density(z, &(e - de))) / (2.0 * DELTA);
        // W_{,ℰ} : dℰ with dℰ the perturbation of each independent component.
        assert!(close(ws.xx, d(Sym2::new(DELTA, 0.0, 0.0)), scale));
        assert!(close(ws.yy, d(Sym2::new(0.0, DELTA, 0.0)), scale));
        assert!(close(2.0 * ws.xy, d(Sym2::new(0.0, 0.0, DELTA)), scale));
    }
}

#[test]
fn pressure_like_derivatives_are_consistent() {
    let mat = varied();
    for i in 0..=20 {
        let z = -1.5 + 0.15 * i as f64;
        let fd = |f: &dyn Fn(f64) -> f64| (f(z + DELTA) - f(z - DELTA)) / (2.0 * DELTA);
        assert!(close(mat.modulus_prime(z), fd(&|z| mat.modulus(z)), 1.0));
        assert!(close(mat.biot_willis_prime(z), fd(&|z| mat.biot_willis(z)), 1.0));
        assert!(close(mat.psi_prime(z), fd(&|z| mat.psi(z)), 1.0));
        let sp = mat.stiffness_prime(z);
        assert!(close(sp.lambda, fd(&|z| mat.stiffness(z).lambda), 1.0));
        assert!(close(sp.mu, fd(&|z| mat.stiffness(z).mu), 1.0));
        assert!(close(mat.eigenstrain_prime(z).xx, fd(&|z| mat.eigenstrain(z).xx), 1.0));
    }
}

#[test]
fn growth_bound_holds_on_ten_thousand_samples() {
    let mat = varied();
    let c2 = mat.growth_constant();
    assert!(c2.is_finite() && c2 > 0.0);
    let mut r = rng(5);
    for _ in 0..10_000 {
        let z = r.gen_range(-2.0..2.0);
        let e = Sym2::new(r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0));
        let bound = c2 * (e.norm().powi(2) + z * z + 1.0);
        assert!(mat.elastic_density_phase(z, &e).abs() <= bound);
    }
}

proptest! {
    #[test]
    fn density_is_nonnegative(z in -2.0f64..2.0, xx in -5.0f64..5.0, yy in -5.0f64..5.0, xy in -5.0f64..5.0) {
        let mat = varied();
        prop_assert!(mat.elastic_density(z, &Sym2::new(xx, yy, xy)) >= 0.0);
    }

    #[test]
    fn growth_bound_default_model(z in -2.0f64..2.0, xx in -5.0f64..5.0, yy in -5.0f64..5.0, xy in -5.0f64..5.0) {
        let mat = MaterialModel::default();
        let e = Sym2::new(xx, yy, xy);
        let bound = mat.growth_constant() * (e.norm().powi(2) + z * z + 1.0);
        prop_assert!(mat.elastic_density_phase(z, &e).abs() <= bound);
    }

    #[test]
    fn coefficients_respect_lower_bounds(z in -50.0f64..50.0) {
        let mat = MaterialModel::default();
        prop_assert!(mat.mobility(z) >= mat.mobility.c0);
        prop_assert!(mat.permeability(z) >= mat.permeability.c0);
        prop_assert!(mat.modulus(z) >= mat.modulus_bounds().0);
        prop_assert!(mat.stiffness(z).mu > 0.0);
    }
}
