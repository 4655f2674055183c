#![allow(dead_code)]

use chbiot::config::smooth_random_field;
use chbiot::coupled::{Model, SimState, SourceSpec};
use chbiot::materials::{Affine, MaterialModel, Quadratic, Switched};
use chbiot::mesh::{EdgeTags, Grid, ScalarField, VectorField2};
use chbiot::stepper::initial_state;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn clamped(n: usize) -> Grid {
    Grid::unit_square(n, EdgeTags::clamped()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn random_scalar(grid: &Grid, seed: u64) -> ScalarField {
    let mut r = rng(seed);
    ScalarField::from_vec(grid, random_vec(&mut r, grid.len())).unwrap()
}

/// Random displacement vanishing on the Dirichlet nodes.
pub fn random_displacement(grid: &Grid, seed: u64) -> VectorField2 {
    let mut r = rng(seed);
    let n = grid.len();
    let mut u = VectorField2::from_components(grid, random_vec(&mut r, n), random_vec(&mut r, n)).unwrap();
    for k in 0..n {
        if grid.is_dirichlet_node(k) {
            u.x[k] = 0.0;
            u.y[k] = 0.0;
        }
    }
    u
}

pub fn smooth_phase(grid: &Grid, seed: u64) -> ScalarField {
    smooth_random_field(grid, 1.0, seed)
}

/// Constant coefficients, no double well, no eigenstrain.
pub fn linear_material() -> MaterialModel {
    MaterialModel {
        mobility: Quadratic::constant(1.0),
        permeability: Quadratic::constant(1.0),
        modulus: Switched::constant(1.5),
        biot_willis: Switched::constant(0.6),
        psi_scale: 1e-300,
        lame_lambda: Switched::constant(1.0),
        lame_mu: Switched::constant(1.0),
        eigenstrain: Affine { c0: 0.0, c1: 0.0 },
        ..MaterialModel::default()
    }
}

/// Default coefficients with `α ≡ 0`, `M ≡ 1` and optionally `κ ≡ 1`.
pub fn decoupled_material(unit_kappa: bool) -> MaterialModel {
    let mut m = MaterialModel {
        modulus: Switched::constant(1.0),
        biot_willis: Switched::constant(0.0),
        ..MaterialModel::default()
    };
    if unit_kappa {
        m.permeability = Quadratic::constant(1.0);
    }
    m
}

pub fn visco(mut m: MaterialModel) -> MaterialModel {
    m.rho = 1;
    m
}

pub fn model(n: usize, material: MaterialModel) -> Model {
    Model::new(clamped(n), material)
}

/// Pure phase `φ ≡ 1` with uniform fluid content, eigenstrain-free there.
pub fn pure_phase(model: &Model, theta: f64) -> SimState {
    let g = &model.grid;
    initial_state(model, ScalarField::constant(g, 1.0), ScalarField::constant(g, theta), &SourceSpec::zero(), 0.0).unwrap()
}

pub fn smooth_state(model: &Model, seed: u64, amplitude: f64) -> SimState {
    let g = &model.grid;
    let phi = smooth_random_field(g, amplitude, seed);
    let theta = smooth_random_field(g, 0.5 * amplitude, seed + 1000);
    initial_state(model, phi, theta, &SourceSpec::zero(), 0.0).unwrap()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    max_diff(a, b) / max_abs(b).max(1e-300)
}
