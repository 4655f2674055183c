//! Energy, conserved quantities, discrete PDE residuals and convergence
//! studies.

use std::f64::consts::PI;
use std::fmt;

use crate::coupled::{chemical_potential, pressure, reconstruction_load, stress, Model, SimState, SourceSpec};
use crate::error::{Error, Result};
use crate::materials::{Affine, MaterialModel, Switched};
use crate::mesh::q1::{self, Q1};
use crate::mesh::{
    divergence_adjoint_dofs, divergence_dofs, EdgeTags, FluxLaplacian, Grid, ScalarField, Sym2, VectorField2,
};
use crate::solvers::{body_load, eigenstrain_load, EllipticProblem, SolverKind, Variant};
use crate::stepper::{linear_substep_theta_elastic, PicardReport};

/// The three parts of the free energy and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyParts {
    /// `∫ ε/2|∇φ|² + ψ(φ)/ε`
    pub interface: f64,
    /// `∫ W(φ, ℰ(u))`
    pub elastic: f64,
    /// `∫ M/2 (θ − α∇·u)²`
    pub fluid: f64,
    pub total: f64,
}

/// Discrete energy. The gradient term uses the flux stencil of the
/// evolution, the elastic term the Gauss points of the elasticity operator,
/// the rest nodal (trapezoidal) quadrature.
pub fn total_energy(grid: &Grid, material: &MaterialModel, state: &SimState) -> EnergyParts {
    let w = grid.weights();
    let eps = material.epsilon;
    let phi = state.phi.values();
    let lap = FluxLaplacian::unit(grid);
    let mut grad2 = 0.0;
    for (i, j, g) in lap.faces() {
        grad2 += g * (phi[i] - phi[j]).powi(2);
    }
    let bulk: f64 = phi.iter().zip(w).map(|(&z, w)| w * material.psi(z)).sum();
    let interface = 0.5 * eps * grad2 + bulk / eps;

    let dofs = state.u.to_dofs();
    let zg = q1::interp_gp(grid, phi);
    let eg = q1::strain_gp(grid, &dofs);
    let qw = Q1::new(grid.hx(), grid.hy()).w;
    let elastic: f64 =
        zg.iter().zip(&eg).map(|(z, e)| (0..4).map(|g| qw * material.elastic_density(z[g], &e[g])).sum::<f64>()).sum();

    let div = divergence_dofs(grid, &dofs);
    let fluid: f64 = (0..grid.len())
        .map(|k| {
            let z = phi[k];
            let th = state.theta[k] - material.biot_willis(z) * div[k];
            0.5 * w[k] * material.modulus(z) * th * th
        })
        .sum();
    EnergyParts { interface, elastic, fluid, total: interface + elastic + fluid }
}

/// One diagnostics CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub e_total: f64,
    pub e_interface: f64,
    pub e_elastic: f64,
    pub e_fluid: f64,
    /// Mean of `φ`.
    pub mass_phi: f64,
    /// Mean of `θ`.
    pub mass_theta: f64,
    pub picard_iters: usize,
    pub rho: f64,
    /// Largest discrete PDE residual of the window (0 for the initial row).
    pub residual: f64,
    pub dt: f64,
}

impl DiagnosticsRow {
    pub const HEADER: &'static str = "t,E_total,E_interface,E_elastic,E_fluid,mass_phi,mass_theta,picard_iters,rho,residual,dt";

    pub fn csv_line(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e},{:e},{:e}",
            self.t,
            self.e_total,
            self.e_interface,
            self.e_elastic,
            self.e_fluid,
            self.mass_phi,
            self.mass_theta,
            self.picard_iters,
            self.rho,
            self.residual,
            self.dt
        )
    }

    /// Energy, mass and residual columns, the ones expected to stay put in a
    /// stationary run.
    pub fn physical_columns(&self) -> [f64; 7] {
        [self.e_total, self.e_interface, self.e_elastic, self.e_fluid, self.mass_phi, self.mass_theta, self.residual]
    }
}

/// Row for `state`; `window` carries the previous state and the report of
/// the window that produced `state`.
pub fn diagnostics_row(
    model: &Model,
    state: &SimState,
    window: Option<(&SimState, &PicardReport)>,
    sources: &SourceSpec,
) -> Result<DiagnosticsRow> {
    let g = &model.grid;
    let e = total_energy(g, &model.material, state);
    let mut row = DiagnosticsRow {
        t: state.t,
        e_total: e.total,
        e_interface: e.interface,
        e_elastic: e.elastic,
        e_fluid: e.fluid,
        mass_phi: state.phi.mean(g),
        mass_theta: state.theta.mean(g),
        ..Default::default()
    };
    if let Some((prev, report)) = window {
        row.picard_iters = report.iterations;
        row.rho = report.rho;
        row.dt = report.dt;
        row.residual = pde_residual(model, state, prev, sources)?.max();
    }
    Ok(row)
}

/// Max-norm residuals of the discrete backward-Euler equations, one per
/// equation. Consistency checks compare cached derived fields against a
/// recomputation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PdeResidual {
    /// `(φ − φₙ)/dt − ∇·(m∇μ) − S_s`
    pub phase: f64,
    /// cached `μ` against the chemical potential of the state
    pub potential: f64,
    /// momentum balance, scaled by the lumped mass, free dofs only
    pub momentum: f64,
    /// cached `σ` against the constitutive law
    pub stress: f64,
    /// `(θ − θₙ)/dt − ∇·(κ∇p) − S_f`
    pub fluid: f64,
    /// cached `p` against `M(θ − α∇·u)`
    pub pressure: f64,
}

impl PdeResidual {
    pub fn max(&self) -> f64 {
        [self.phase, self.potential, self.momentum, self.stress, self.fluid, self.pressure].into_iter().fold(0.0, f64::max)
    }
}

impl fmt::Display for PdeResidual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "phase {:.3e}  potential {:.3e}  momentum {:.3e}  stress {:.3e}  fluid {:.3e}  pressure {:.3e}",
            self.phase, self.potential, self.momentum, self.stress, self.fluid, self.pressure
        )
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Residuals of `state` as the backward-Euler successor of `prev`.
pub fn pde_residual(model: &Model, state: &SimState, prev: &SimState, sources: &SourceSpec) -> Result<PdeResidual> {
    let g = &model.grid;
    let mat = &model.material;
    let n = g.len();
    let dt = state.t - prev.t;
    if !(dt > 0.0) {
        return Err(Error::InvalidStepper("residual needs state.t > prev.t".into()));
    }
    let w = g.weights();
    let mu = chemical_potential(g, mat, &state.phi, &state.u, &state.theta)?;
    let p = pressure(g, mat, &state.phi, &state.theta, &state.u);
    let rate = {
        let mut r = state.u.clone();
        r.axpy(-1.0, &prev.u);
        r.scaled(1.0 / dt)
    };
    let sigma = stress(g, mat, &state.phi, &state.u, &state.theta, Some(&rate))?;

    let coeff = |f: &dyn Fn(f64) -> f64| -> Vec<f64> { state.phi.values().iter().map(|&z| f(z)).collect() };
    let mut tmp = vec![0.0; n];
    FluxLaplacian::new(g, &coeff(&|z| mat.mobility(z)))?.apply(mu.values(), &mut tmp);
    let s_s = sources.solid.field(g, state.t);
    let phase = (0..n).map(|k| ((state.phi[k] - prev.phi[k]) / dt - tmp[k] - s_s[k]).abs()).fold(0.0, f64::max);

    FluxLaplacian::new(g, &coeff(&|z| mat.permeability(z)))?.apply(p.values(), &mut tmp);
    let s_f = sources.fluid.field(g, state.t);
    let fluid = (0..n).map(|k| ((state.theta[k] - prev.theta[k]) / dt - tmp[k] - s_f[k]).abs()).fold(0.0, f64::max);

    let u = state.u.to_dofs();
    let mut r = vec![0.0; u.len()];
    if mat.is_visco() {
        let b = EllipticProblem::new(g, mat, Variant::ViscoB, &state.phi).elastic_operator()?;
        b.apply_free(&rate.to_dofs(), &mut r);
        let c = EllipticProblem::new(g, mat, Variant::PlainC, &state.phi).elastic_operator()?;
        let mut cu = vec![0.0; u.len()];
        c.apply_free(&u, &mut cu);
        let ap: Vec<f64> = (0..n).map(|k| mat.biot_willis(state.phi[k]) * p[k]).collect();
        let mut load = eigenstrain_load(g, mat, &state.phi);
        for ((l, a), m) in load.iter_mut().zip(divergence_adjoint_dofs(g, &ap)).zip(sources.mechanical_load(g, state.t)) {
            *l += a + m;
        }
        for i in 0..r.len() {
            r[i] += cu[i] - load[i];
        }
    } else {
        let c = EllipticProblem::new(g, mat, Variant::AugmentedC, &state.phi).elastic_operator()?;
        c.apply_free(&u, &mut r);
        for (r, l) in r.iter_mut().zip(reconstruction_load(model, &state.phi, &state.theta, sources, state.t)) {
            *r -= l;
        }
    }
    let momentum = (0..n)
        .filter(|&k| !g.is_dirichlet_node(k))
        .map(|k| r[2 * k].abs().max(r[2 * k + 1].abs()) / w[k])
        .fold(0.0, f64::max);

    let stress_diff = if state.derived_valid() {
        let mut d: f64 = 0.0;
        for k in 0..n {
            let a = state.sigma.at(k);
            let b = sigma.at(k);
            d = d.max((a.xx - b.xx).abs()).max((a.yy - b.yy).abs()).max((a.xy - b.xy).abs());
        }
        d
    } else {
        f64::INFINITY
    };
    let cached = |c: &ScalarField, fresh: &ScalarField| {
        if state.derived_valid() {
            max_abs_diff(c.values(), fresh.values())
        } else {
            f64::INFINITY
        }
    };
    Ok(PdeResidual {
        phase,
        potential: cached(&state.mu, &mu),
        momentum,
        stress: stress_diff,
        fluid,
        pressure: cached(&state.p, &p),
    })
}

/// Verification problems for [`convergence_study`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyPreset {
    /// Fluid equation with `α ≡ 0`, `M ≡ κ ≡ 1`: spatial error against the
    /// exact decaying mode `cos(πx)cos(πy)e^{−2π²t}`.
    HeatSpace,
    /// Same problem, temporal error against the exact discrete-in-space mode.
    HeatTime,
    /// Clamped elasticity with variable stiffness and a manufactured
    /// displacement.
    ElasticityMms,
}

impl StudyPreset {
    pub fn id(&self) -> &'static str {
        match self {
            Self::HeatSpace => "heat-space",
            Self::HeatTime => "heat-time",
            Self::ElasticityMms => "elasticity-mms",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    /// Mesh width or time step.
    pub size: f64,
    pub error: f64,
}

/// Errors per refinement level and the least-squares slope of
/// `log(error)` against `log(size)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderTable {
    pub preset: StudyPreset,
    pub rows: Vec<StudyRow>,
    pub order: f64,
}

impl fmt::Display for OrderTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.preset.id())?;
        writeln!(f, "{:>12}  {:>12}", "size", "L2 error")?;
        for r in &self.rows {
            writeln!(f, "{:>12.4e}  {:>12.4e}", r.size, r.error)?;
        }
        write!(f, "observed order {:.3}", self.order)
    }
}

/// Least-squares slope of `log y` over `log x`; 0 when undetermined.
pub fn observed_order(rows: &[StudyRow]) -> f64 {
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.error > 0.0 && r.size > 0.0).map(|r| (r.size.ln(), r.error.ln())).collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx
}

/// Runs a preset over `meshes` (nodes per side) and `dts`. Space presets use
/// `dts[0]` on every mesh; the time preset uses `meshes[0]` for every step.
pub fn convergence_study(preset: StudyPreset, meshes: &[usize], dts: &[f64]) -> Result<OrderTable> {
    let rows = match preset {
        StudyPreset::HeatSpace => {
            let dt = *dts.first().ok_or_else(|| Error::InvalidStepper("no time step given".into()))?;
            meshes.iter().map(|&n| heat_error(n, dt, 1e-3, false)).collect::<Result<Vec<_>>>()?
        }
        StudyPreset::HeatTime => {
            let n = *meshes.first().ok_or_else(|| Error::InvalidStepper("no mesh given".into()))?;
            dts.iter().map(|&dt| heat_error(n, dt, 0.04, true)).collect::<Result<Vec<_>>>()?
        }
        StudyPreset::ElasticityMms => meshes.iter().map(|&n| elasticity_error(n)).collect::<Result<Vec<_>>>()?,
    };
    let order = observed_order(&rows);
    Ok(OrderTable { preset, rows, order })
}

/// Material with `α ≡ 0`, `M ≡ κ ≡ 1`.
fn heat_material() -> MaterialModel {
    MaterialModel {
        modulus: Switched::constant(1.0),
        biot_willis: Switched::constant(0.0),
        permeability: crate::materials::Quadratic { c0: 1.0, c1: 0.0 },
        eigenstrain: Affine { c0: 0.0, c1: 0.0 },
        ..Default::default()
    }
}

fn heat_error(n: usize, dt: f64, t_end: f64, discrete_reference: bool) -> Result<StudyRow> {
    let grid = Grid::unit_square(n, EdgeTags::clamped())?;
    let model = Model::new(grid.clone(), heat_material());
    let mut frozen = crate::coupled::FrozenOperators::new(&model, &ScalarField::zeros(&grid))?;
    frozen.prepare(&model, dt)?;
    let mode = ScalarField::from_fn(&grid, |x, y| (PI * x).cos() * (PI * y).cos());
    let steps = (t_end / dt).round() as usize;
    let zero = ScalarField::zeros(&grid);
    let mut theta = mode.clone();
    for _ in 0..steps {
        theta = linear_substep_theta_elastic(&model, &frozen, &theta, &zero, dt)?;
    }
    let t = steps as f64 * dt;
    let lambda = if discrete_reference {
        let h = grid.hx();
        2.0 * (2.0 - 2.0 * (PI * h).cos()) / (h * h)
    } else {
        2.0 * PI * PI
    };
    let exact = mode.scaled((-lambda * t).exp());
    let error = theta.zip_map(&exact, |a, b| a - b).norm_h(&grid);
    Ok(StudyRow { size: if discrete_reference { dt } else { grid.hx() }, error })
}

fn mms_phase(x: f64, y: f64) -> f64 {
    0.8 * (PI * x).sin() * (PI * y).cos()
}

fn mms_displacement(x: f64, y: f64) -> (f64, f64) {
    ((PI * x).sin() * (PI * y).sin(), 4.0 * x * (1.0 - x) * y * (1.0 - y))
}

/// `2ℂ(φ)ℰ(u)` of the manufactured solution.
fn mms_stress(material: &MaterialModel, x: f64, y: f64) -> Sym2 {
    let (sx, cx, sy, cy) = ((PI * x).sin(), (PI * x).cos(), (PI * y).sin(), (PI * y).cos());
    let e = Sym2::new(
        PI * cx * sy,
        4.0 * x * (1.0 - x) * (1.0 - 2.0 * y),
        0.5 * (PI * sx * cy + 4.0 * (1.0 - 2.0 * x) * y * (1.0 - y)),
    );
    material.stiffness(mms_phase(x, y)).apply(&e).scale(2.0)
}

/// `f = −∇·σ` by fourth-order central differences of the closed-form stress.
fn mms_force(material: &MaterialModel, x: f64, y: f64) -> (f64, f64) {
    let h = 1e-3;
    let d = |f: &dyn Fn(f64) -> Sym2| -> Sym2 {
        let c = [1.0 / 12.0, -2.0 / 3.0, 2.0 / 3.0, -1.0 / 12.0];
        let s = [f(-2.0 * h), f(-h), f(h), f(2.0 * h)];
        let mut out = Sym2::iso(0.0);
        for (c, s) in c.iter().zip(s) {
            out = out + s.scale(c / h);
        }
        out
    };
    let sx = d(&|s| mms_stress(material, x + s, y));
    let sy = d(&|s| mms_stress(material, x, y + s));
    (-(sx.xx + sy.xy), -(sx.xy + sy.yy))
}

fn elasticity_error(n: usize) -> Result<StudyRow> {
    let grid = Grid::unit_square(n, EdgeTags::clamped())?;
    let material = MaterialModel::default();
    let phi = ScalarField::from_fn(&grid, mms_phase);
    let force = VectorField2::from_fn(&grid, |x, y| mms_force(&material, x, y));
    let solver = EllipticProblem::new(&grid, &material, Variant::PlainC, &phi)
        .elastic_operator()?
        .into_solver(SolverKind::Direct, Default::default())?;
    let u = VectorField2::from_dofs(&grid, &solver.solve(&body_load(&grid, &force))?);
    let mut err = VectorField2::from_fn(&grid, mms_displacement);
    err.axpy(-1.0, &u);
    Ok(StudyRow { size: grid.hx(), error: err.norm_h(&grid) })
}
