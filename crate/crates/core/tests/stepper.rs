mod common;

use chbiot::coupled::{FrozenOperators, Model, SourceSpec};
use chbiot::linalg::CgOptions;
use chbiot::materials::{MaterialModel, Quadratic, Switched};
use chbiot::mesh::{ScalarField, VectorField2};
use chbiot::oracle::{densify, OperatorId};
use chbiot::solvers::{mask_dirichlet, SolverKind};
use chbiot::stepper::{
    linear_substep_phi, linear_substep_theta_elastic, linear_substep_theta_visco, linear_substep_u_visco,
    mass_drift, measure_contraction, picard_window, run_simulation, StepperConfig,
};
use chbiot::Error;
use common::*;
use nalgebra::{DMatrix, DVector};

fn frozen(m: &Model, phi0: &ScalarField, dt: f64) -> FrozenOperators {
    let mut f = FrozenOperators::new(m, phi0).unwrap();
    f.prepare(m, dt).unwrap();
    f
}

fn dense_solve(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    a.clone().lu().solve(&DVector::from_column_slice(b)).unwrap().as_slice().to_vec()
}

fn dense(m: &Model, id: OperatorId, phi: &ScalarField) -> DMatrix<f64> {
    densify(id, &m.grid, &m.material, phi).unwrap().matrix
}

#[test]
fn phase_substep_examples() {
    let m = model(8, MaterialModel::default());
    let g = &m.grid;
    let dt = 2e-3;
    let phi0 = smooth_phase(g, 1);
    let fr = frozen(&m, &phi0, dt);

    let c = ScalarField::constant(g, 0.3);
    let out = linear_substep_phi(&m, &fr, &c, &ScalarField::zeros(g), dt).unwrap();
    assert!(out.max_abs_diff(&c) <= 1e-12);

    let prev = random_scalar(g, 2);
    let f1 = random_scalar(g, 3);
    let out = linear_substep_phi(&m, &fr, &prev, &f1, dt).unwrap();
    assert!((out.mean(g) - prev.mean(g) - dt * f1.mean(g)).abs() <= 1e-10);

    let mut rhs = prev.clone();
    rhs.axpy(dt, &f1);
    let a = dense(&m, OperatorId::Biharmonic(dt * m.material.epsilon), &phi0);
    assert!(max_diff(out.values(), &dense_solve(&a, rhs.values())) <= 1e-8);
}

#[test]
fn elastic_fluid_substep_matches_dense_implicit_euler() {
    let m = model(8, MaterialModel::default());
    let g = &m.grid;
    let dt = 5e-3;
    let phi0 = smooth_phase(g, 4);
    let fr = frozen(&m, &phi0, dt);
    let prev = random_scalar(g, 5);
    let f2 = random_scalar(g, 6);
    let out = linear_substep_theta_elastic(&m, &fr, &prev, &f2, dt).unwrap();
    let n = g.len();
    let a = DMatrix::identity(n, n) + dense(&m, OperatorId::Fluid, &phi0) * dt;
    let mut rhs = prev.clone();
    rhs.axpy(dt, &f2);
    assert!(max_diff(out.values(), &dense_solve(&a, rhs.values())) <= 1e-7);
}

#[test]
fn elastic_fluid_substep_reduces_to_heat_step() {
    let m = model(8, decoupled_material(false));
    let g = &m.grid;
    let dt = 5e-3;
    let phi0 = smooth_phase(g, 7);
    let fr = frozen(&m, &phi0, dt);
    let prev = random_scalar(g, 8);
    let out = linear_substep_theta_elastic(&m, &fr, &prev, &ScalarField::zeros(g), dt).unwrap();
    // With M ≡ 1 the Helmholtz coefficient κM is κ.
    let heat = dense(&m, OperatorId::Helmholtz(dt), &phi0);
    assert!(max_diff(out.values(), &dense_solve(&heat, prev.values())) <= 1e-10);

    let c = ScalarField::constant(g, -0.7);
    let out = linear_substep_theta_elastic(&m, &fr, &c, &ScalarField::zeros(g), dt).unwrap();
    assert!(out.max_abs_diff(&c) <= 1e-12);
}

#[test]
fn visco_fluid_substep_examples() {
    let m = model(8, visco(MaterialModel::default()));
    let g = &m.grid;
    let dt = 4e-3;
    let phi0 = smooth_phase(g, 9);
    let fr = frozen(&m, &phi0, dt);

    let c = ScalarField::constant(g, 1.1);
    let out = linear_substep_theta_visco(&m, &fr, &c, &ScalarField::zeros(g), dt).unwrap();
    assert!(out.max_abs_diff(&c) <= 1e-12);

    let prev = random_scalar(g, 10);
    let f3 = random_scalar(g, 11);
    let mean = f3.mean(g);
    let f3 = f3.map(|v| v - mean);
    let out = linear_substep_theta_visco(&m, &fr, &prev, &f3, dt).unwrap();
    assert!((out.mean(g) - prev.mean(g)).abs() <= 1e-12);

    let mut rhs = prev.clone();
    rhs.axpy(dt, &f3);
    let a = dense(&m, OperatorId::Helmholtz(dt), &phi0);
    assert!(max_diff(out.values(), &dense_solve(&a, rhs.values())) <= 1e-8);
}

#[test]
fn visco_displacement_substep_examples() {
    let m = model(8, visco(MaterialModel::default()));
    let g = &m.grid;
    let phi0 = smooth_phase(g, 12);
    let dt = 4e-3;
    let fr = frozen(&m, &phi0, dt);
    let zero = VectorField2::zeros(g);
    assert_eq!(linear_substep_u_visco(&m, &fr, &zero, &zero, dt).unwrap().max_abs(), 0.0);

    let prev = random_displacement(g, 13);
    let f2 = random_displacement(g, 14);
    let out = linear_substep_u_visco(&m, &fr, &prev, &f2, dt).unwrap();
    let b = dense(&m, OperatorId::ViscoB, &phi0);
    let a = &b + dense(&m, OperatorId::PlainC, &phi0) * dt;
    let mut x = prev.clone();
    x.axpy(dt, &f2);
    let mut rhs = (&b * DVector::from_vec(x.to_dofs())).as_slice().to_vec();
    mask_dirichlet(g, &mut rhs);
    assert!(max_diff(&out.to_dofs(), &dense_solve(&a, &rhs)) <= 1e-7);

    let tiny = 1e-8;
    let fr = frozen(&m, &phi0, tiny);
    let out = linear_substep_u_visco(&m, &fr, &prev, &f2, tiny).unwrap();
    assert!(out.max_abs_diff(&prev) <= 1e-6);
}

#[test]
fn pure_phase_is_a_fixed_point() {
    for mat in [MaterialModel::default(), visco(MaterialModel::default())] {
        let m = model(12, mat);
        let start = pure_phase(&m, 0.25);
        let (end, report) = picard_window(&m, &start, &StepperConfig::default(), &SourceSpec::zero()).unwrap();
        assert!(report.converged && report.iterations <= 2, "{report:?}");
        assert!(end.phi.max_abs_diff(&start.phi) <= 1e-12);
        assert!(end.theta.max_abs_diff(&start.theta) <= 1e-12);
        assert!(end.u.max_abs_diff(&start.u) <= 1e-12);
    }
}

#[test]
fn linear_configuration_converges_in_one_iteration() {
    let m = model(12, linear_material());
    let start = smooth_state(&m, 3, 0.5);
    let (_, report) = picard_window(&m, &start, &StepperConfig::default(), &SourceSpec::zero()).unwrap();
    assert_eq!(report.iterations, 1, "{report:?}");
}

#[test]
fn contraction_improves_as_the_window_shrinks() {
    let m = model(16, MaterialModel::default());
    let start = smooth_state(&m, 21, 0.9);
    let rho: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&dt| {
            let cfg = StepperConfig { dt, ..Default::default() };
            measure_contraction(&m, &start, &cfg, &SourceSpec::zero(), 8).unwrap().1
        })
        .collect();
    assert!(rho[0] > rho[1] && rho[1] > rho[2], "{rho:?}");
    assert!(rho[2] < 1.0);
}

#[test]
fn zero_length_run_holds_only_the_initial_state() {
    let m = model(8, MaterialModel::default());
    let start = smooth_state(&m, 1, 0.5);
    let traj = run_simulation(&m, start.clone(), &StepperConfig::default(), start.t, &SourceSpec::zero()).unwrap();
    assert!(traj.complete);
    assert_eq!(traj.states.len(), 1);
    assert!(traj.reports.is_empty());
    assert_eq!(traj.rows.len(), 1);
}

#[test]
fn last_window_lands_on_end_time() {
    let m = model(8, MaterialModel::default());
    let start = smooth_state(&m, 2, 0.5);
    let cfg = StepperConfig { dt: 3e-3, ..Default::default() };
    let traj = run_simulation(&m, start, &cfg, 1e-2, &SourceSpec::zero()).unwrap();
    assert_eq!(traj.reports.len(), 4);
    assert!((traj.last().t - 1e-2).abs() <= 1e-15);
    assert!((traj.reports[3].dt - 1e-3).abs() <= 1e-12);
}

#[test]
fn unconverged_window_shrinks_then_fails() {
    let m = model(12, MaterialModel::default());
    let start = smooth_state(&m, 5, 0.9);
    let cfg = StepperConfig { max_picard_iters: 2, max_shrinks: 3, ..Default::default() };
    let traj = run_simulation(&m, start, &cfg, 1e-2, &SourceSpec::zero()).unwrap();
    assert!(!traj.complete);
    let failure = traj.failure.expect("failure recorded");
    assert!(matches!(failure.error, Error::PicardFailure { shrinks: 3, .. }));
    let dts: Vec<f64> = failure.report.shrinks.iter().map(|s| s.dt).collect();
    assert_eq!(dts, vec![1e-3, 5e-4, 2.5e-4, 1.25e-4]);
}

#[test]
fn zero_source_runs_conserve_both_means() {
    for mat in [MaterialModel::default(), visco(MaterialModel::default())] {
        let m = model(16, mat);
        let start = smooth_state(&m, 8, 0.8);
        let traj = run_simulation(&m, start, &StepperConfig::default(), 2e-2, &SourceSpec::zero()).unwrap();
        assert!(traj.complete);
        for s in &traj.states {
            let (dphi, dtheta) = mass_drift(&m, s, &traj.states[0]);
            assert!(dphi <= 1e-9 && dtheta <= 1e-9);
        }
    }
}

#[test]
fn frozen_and_refreshed_linearizations_agree() {
    let m = model(12, MaterialModel::default());
    let start = smooth_state(&m, 6, 0.8);
    let run = |refresh: bool| {
        let cfg = StepperConfig { refresh_linearization: refresh, tol_picard: 1e-11, ..Default::default() };
        run_simulation(&m, start.clone(), &cfg, 1e-2, &SourceSpec::zero()).unwrap()
    };
    let (a, b) = (run(true), run(false));
    assert!(a.complete && b.complete);
    let (x, y) = (a.last(), b.last());
    assert!(x.phi.max_abs_diff(&y.phi) <= 1e-8);
    assert!(x.theta.max_abs_diff(&y.theta) <= 1e-8);
}

#[test]
fn iterative_and_direct_solvers_agree() {
    let mat = MaterialModel {
        permeability: Quadratic { c0: 1.0, c1: 0.2 },
        biot_willis: Switched { c0: 0.4, c1: 0.3 },
        ..MaterialModel::default()
    };
    let direct = model(10, mat);
    let cg = direct.clone().with_solver(SolverKind::Cg, CgOptions { rel_tol: 1e-13, abs_tol: 1e-300, max_iter: 50_000 });
    let start = smooth_state(&direct, 4, 0.8);
    let cfg = StepperConfig::default();
    let (a, _) = picard_window(&direct, &start, &cfg, &SourceSpec::zero()).unwrap();
    let (b, _) = picard_window(&cg, &start, &cfg, &SourceSpec::zero()).unwrap();
    assert!(a.phi.max_abs_diff(&b.phi) <= 1e-8);
    assert!(a.theta.max_abs_diff(&b.theta) <= 1e-8);
    assert!(a.u.max_abs_diff(&b.u) <= 1e-8);
}
