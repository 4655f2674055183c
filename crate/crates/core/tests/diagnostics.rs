mod common;

use chbiot::config::spinodal_noise;
use chbiot::coupled::{SimState, SourceSpec};
use chbiot::diagnostics::{convergence_study, pde_residual, total_energy, StudyPreset};
use chbiot::materials::{Affine, MaterialModel};
use chbiot::mesh::{ScalarField, VectorField2};
use chbiot::oracle::{densify, OperatorId};
use chbiot::stepper::{initial_state, picard_window, run_simulation, StepperConfig};
use common::*;
use nalgebra::DVector;

fn eigenstrain_free() -> MaterialModel {
    MaterialModel { eigenstrain: Affine { c0: 0.0, c1: 0.0 }, ..MaterialModel::default() }
}

#[test]
fn pure_phase_at_rest_has_no_energy() {
    let m = model(10, MaterialModel::default());
    let s = pure_phase(&m, 0.0);
    let e = total_energy(&m.grid, &m.material, &s);
    assert!(e.total.abs() <= 1e-14, "{e:?}");
}

#[test]
fn interface_alone_carries_energy() {
    let m = model(16, eigenstrain_free());
    let g = &m.grid;
    let phi = ScalarField::from_fn(g, |x, _| ((x - 0.5) / 0.1).tanh());
    let s = SimState::new(g, 0.0, phi, VectorField2::zeros(g), ScalarField::zeros(g));
    let e = total_energy(g, &m.material, &s);
    assert!(e.interface > 0.0);
    assert_eq!(e.elastic, 0.0);
    assert_eq!(e.fluid, 0.0);
}

#[test]
fn energy_matches_nodal_quadrature_oracle() {
    let m = model(8, eigenstrain_free());
    let g = &m.grid;
    let mat = &m.material;
    let phi = smooth_phase(g, 3);
    let theta = random_scalar(g, 4);
    let u = random_displacement(g, 5).scaled(0.1);
    let e = total_energy(g, mat, &SimState::new(g, 0.0, phi.clone(), u.clone(), theta.clone()));

    let w = g.weights();
    let p = DVector::from_column_slice(phi.values());
    let lap = densify(OperatorId::Laplacian, g, mat, &phi).unwrap().matrix;
    let wlp = (&lap * &p).component_mul(&DVector::from_column_slice(w));
    let grad2 = -p.dot(&wlp);
    let bulk: f64 = (0..g.len()).map(|k| w[k] * mat.psi(phi[k])).sum();
    let interface = 0.5 * mat.epsilon * grad2 + bulk / mat.epsilon;

    // With 𝒯 ≡ 0 the elastic energy is ½uᵀC(φ)u.
    let ud = DVector::from_vec(u.to_dofs());
    let c = densify(OperatorId::PlainC, g, mat, &phi).unwrap().matrix;
    let elastic = 0.5 * ud.dot(&(&c * &ud));

    let div = densify(OperatorId::Divergence, g, mat, &phi).unwrap().matrix * &ud;
    let fluid: f64 = (0..g.len())
        .map(|k| {
            let z = phi[k];
            0.5 * w[k] * mat.modulus(z) * (theta[k] - mat.biot_willis(z) * div[k]).powi(2)
        })
        .sum();

    for (a, b) in [(e.interface, interface), (e.elastic, elastic), (e.fluid, fluid)] {
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
    }
    assert_eq!(e.total, e.interface + e.elastic + e.fluid);
}

#[test]
fn converged_windows_have_small_residuals() {
    for mat in [MaterialModel::default(), visco(MaterialModel::default())] {
        let m = model(12, mat);
        let start = smooth_state(&m, 2, 0.8);
        let cfg = StepperConfig::default();
        let (end, report) = picard_window(&m, &start, &cfg, &SourceSpec::zero()).unwrap();
        let r = pde_residual(&m, &end, &start, &SourceSpec::zero()).unwrap();
        println!("{r}  final picard residual {:e}", report.final_residual());
        assert!(r.max() <= 10.0 * cfg.tol_picard / cfg.dt, "{r}");
    }
}

#[test]
fn stationary_state_has_negligible_residual() {
    let m = model(12, MaterialModel::default());
    let start = pure_phase(&m, 0.4);
    let cfg = StepperConfig::default();
    let (end, _) = picard_window(&m, &start, &cfg, &SourceSpec::zero()).unwrap();
    let r = pde_residual(&m, &end, &start, &SourceSpec::zero()).unwrap();
    assert!(r.max() <= 10.0 * cfg.tol_picard, "{r}");
}

#[test]
fn corrupted_state_is_detected() {
    let m = model(12, MaterialModel::default());
    let start = smooth_state(&m, 3, 0.8);
    let (mut end, _) = picard_window(&m, &start, &StepperConfig::default(), &SourceSpec::zero()).unwrap();
    let k = m.grid.idx(6, 6);
    end.phi[k] += 1.0;
    let r = pde_residual(&m, &end, &start, &SourceSpec::zero()).unwrap();
    assert!(r.max() > 0.1, "{r}");
}

#[test]
fn energy_does_not_increase_in_a_short_spinodal_run() {
    let m = model(16, MaterialModel::default());
    let g = &m.grid;
    let phi = spinodal_noise(g, 0.0, 0.01, 4);
    let start = initial_state(&m, phi, ScalarField::zeros(g), &SourceSpec::zero(), 0.0).unwrap();
    let cfg = StepperConfig::default();
    let traj = run_simulation(&m, start, &cfg, 2e-2, &SourceSpec::zero()).unwrap();
    assert!(traj.complete);
    let tol = 10.0 * (cfg.tol_picard + cfg.dt * cfg.dt * traj.rows[0].e_total.abs().max(1.0));
    for w in traj.rows.windows(2) {
        assert!(w[1].e_total <= w[0].e_total + tol);
    }
    for r in &traj.rows {
        assert!(r.e_interface >= 0.0 && r.e_fluid >= 0.0 && r.e_elastic >= 0.0);
        assert!(r.csv_line().split(',').all(|v| v.parse::<f64>().unwrap().is_finite()));
    }
}

#[test]
fn convergence_studies_reach_their_orders() {
    let space = convergence_study(StudyPreset::HeatSpace, &[9, 17, 33], &[1e-6]).unwrap();
    assert!((1.8..=2.2).contains(&space.order), "{space}");
    let time = convergence_study(StudyPreset::HeatTime, &[17], &[4e-3, 2e-3, 1e-3]).unwrap();
    assert!((0.85..=1.15).contains(&time.order), "{time}");
    let elastic = convergence_study(StudyPreset::ElasticityMms, &[17, 33, 65], &[]).unwrap();
    assert!(elastic.order >= 1.8, "{elastic}");
    assert_eq!(elastic.rows.len(), 3);
}
