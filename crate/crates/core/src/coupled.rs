//! Simulation state, derived fields, and the nonlinear right-hand sides of
//! the fixed-point map.
//!
//! The discrete energy is
//!
//! ```text
//! E = ε/2 φᵀ(−K)φ + Σ Wₖ ψ(φₖ)/ε + Σ_gp w W(φ, ℰ(u)) + Σ Wₖ Mₖ/2 (θₖ − αₖ(Du)ₖ)²
//! ```
//!
//! and [`chemical_potential`] is exactly `W⁻¹ ∂E/∂φ` at fixed `(u, θ)`, while
//! [`pressure`] is `W⁻¹ ∂E/∂θ`.

use crate::biot::BiotOperators;
use crate::error::{Error, Result};
use crate::linalg::CgOptions;
use crate::materials::MaterialModel;
use crate::mesh::q1;
use crate::mesh::{
    divergence_adjoint_dofs, divergence_dofs, symmetric_gradient, FluxLaplacian, Grid, ScalarField, Sym2, SymTensorField,
    VectorField2,
};
use crate::solvers::{
    body_load, eigenstrain_load, traction_load, BiharmonicOperator, ElasticOperator, ElasticSolver, EllipticProblem,
    HelmholtzOperator, ScalarSolver, SolverKind, Variant,
};

/// Grid, material and linear-solver settings shared by every computation.
#[derive(Debug, Clone)]
pub struct Model {
    pub grid: Grid,
    pub material: MaterialModel,
    pub solver: SolverKind,
    pub cg: CgOptions,
}

impl Model {
    pub fn new(grid: Grid, material: MaterialModel) -> Self {
        Self { grid, material, solver: SolverKind::Direct, cg: CgOptions::default() }
    }

    pub fn with_solver(mut self, solver: SolverKind, cg: CgOptions) -> Self {
        self.solver = solver;
        self.cg = cg;
        self
    }

    fn elastic_solver(&self, variant: Variant, phi: &ScalarField, shift: f64) -> Result<ElasticSolver> {
        EllipticProblem::new(&self.grid, &self.material, variant, phi)
            .with_shift(shift)
            .elastic_operator()?
            .into_solver(self.solver, self.cg)
    }
}

/// Spatial/temporal profile of a source preset.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Shape {
    #[default]
    Zero,
    Constant,
    /// `exp(−|x − c|²/width²)`
    GaussianBump { cx: f64, cy: f64, width: f64 },
    /// `min(t/ramp_time, 1)`
    TimeRamp { ramp_time: f64 },
}

impl Shape {
    pub fn eval(&self, t: f64, x: f64, y: f64) -> f64 {
        match *self {
            Shape::Zero => 0.0,
            Shape::Constant => 1.0,
            Shape::GaussianBump { cx, cy, width } => (-((x - cx).powi(2) + (y - cy).powi(2)) / (width * width)).exp(),
            Shape::TimeRamp { ramp_time } => (t / ramp_time).min(1.0),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Shape::Zero => "zero",
            Shape::Constant => "constant",
            Shape::GaussianBump { .. } => "gaussian-bump",
            Shape::TimeRamp { .. } => "time-ramp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScalarSource {
    pub shape: Shape,
    pub amplitude: f64,
}

impl ScalarSource {
    pub fn is_zero(&self) -> bool {
        self.shape == Shape::Zero || self.amplitude == 0.0
    }

    pub fn field(&self, grid: &Grid, t: f64) -> ScalarField {
        if self.is_zero() {
            return ScalarField::zeros(grid);
        }
        ScalarField::from_fn(grid, |x, y| self.amplitude * self.shape.eval(t, x, y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VectorSource {
    pub shape: Shape,
    pub amplitude: (f64, f64),
}

impl VectorSource {
    pub fn is_zero(&self) -> bool {
        self.shape == Shape::Zero || self.amplitude == (0.0, 0.0)
    }

    pub fn field(&self, grid: &Grid, t: f64) -> VectorField2 {
        if self.is_zero() {
            return VectorField2::zeros(grid);
        }
        let (ax, ay) = self.amplitude;
        VectorField2::from_fn(grid, |x, y| {
            let s = self.shape.eval(t, x, y);
            (ax * s, ay * s)
        })
    }
}

/// Mass sources `S_s`, `S_f`, body force `f` and boundary traction `g`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SourceSpec {
    pub solid: ScalarSource,
    pub fluid: ScalarSource,
    pub body_force: VectorSource,
    pub traction: VectorSource,
}

impl SourceSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.solid.is_zero() && self.fluid.is_zero() && self.body_force.is_zero() && self.traction.is_zero()
    }

    /// `∫ f·w + ∫_{Γ_N} g·w` at time `t`.
    pub fn mechanical_load(&self, grid: &Grid, t: f64) -> Vec<f64> {
        let mut load = body_load(grid, &self.body_force.field(grid, t));
        if !self.traction.is_zero() {
            for (l, g) in load.iter_mut().zip(traction_load(grid, &self.traction.field(grid, t))) {
                *l += g;
            }
        }
        load
    }
}

/// `(φ, u, θ)` at one time level plus the derived `(μ, p, σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub phi: ScalarField,
    pub u: VectorField2,
    pub theta: ScalarField,
    /// `∂ₜu`, used by the visco-elastic stress.
    pub u_dot: VectorField2,
    pub mu: ScalarField,
    pub p: ScalarField,
    pub sigma: SymTensorField,
    derived_valid: bool,
}

impl SimState {
    pub fn new(grid: &Grid, t: f64, phi: ScalarField, u: VectorField2, theta: ScalarField) -> Self {
        Self {
            t,
            phi,
            u,
            theta,
            u_dot: VectorField2::zeros(grid),
            mu: ScalarField::zeros(grid),
            p: ScalarField::zeros(grid),
            sigma: SymTensorField::zeros(grid),
            derived_valid: false,
        }
    }

    pub fn derived_valid(&self) -> bool {
        self.derived_valid
    }

    /// Recomputes `μ`, `p`, `σ` from `(φ, u, θ, u̇)`.
    pub fn refresh_derived(&mut self, grid: &Grid, material: &MaterialModel) -> Result<()> {
        self.p = pressure(grid, material, &self.phi, &self.theta, &self.u);
        self.mu = chemical_potential(grid, material, &self.phi, &self.u, &self.theta)?;
        let rate = material.is_visco().then_some(&self.u_dot);
        self.sigma = stress(grid, material, &self.phi, &self.u, &self.theta, rate)?;
        self.derived_valid = true;
        Ok(())
    }
}

/// `p = M(φ)(θ − α(φ)∇·u)`
pub fn pressure(grid: &Grid, material: &MaterialModel, phi: &ScalarField, theta: &ScalarField, u: &VectorField2) -> ScalarField {
    let div = divergence_dofs(grid, &u.to_dofs());
    let mut p = theta.clone();
    for k in 0..grid.len() {
        let z = phi[k];
        p[k] = material.modulus(z) * (theta[k] - material.biot_willis(z) * div[k]);
    }
    p
}

/// Nodal `W⁻¹ ∫ N_k W_{,φ}(φ_h, ℰ(u_h))` with Gauss-point quadrature.
pub(crate) fn projected_w_phi(grid: &Grid, material: &MaterialModel, phi: &[f64], u_dofs: &[f64]) -> Vec<f64> {
    let z = q1::interp_gp(grid, phi);
    let e = q1::strain_gp(grid, u_dofs);
    let gp: Vec<[f64; 4]> =
        z.iter().zip(&e).map(|(z, e)| std::array::from_fn(|g| material.elastic_density_phase(z[g], &e[g]))).collect();
    let mut out = q1::project(grid, &gp);
    for (o, w) in out.iter_mut().zip(grid.weights()) {
        *o /= w;
    }
    out
}

/// `μ = −εΔφ + ψ'(φ)/ε + W_{,φ} − Mθ̂α'∇·u + (M'/2)θ̂²` with `θ̂ = θ − α∇·u`.
pub fn chemical_potential(
    grid: &Grid,
    material: &MaterialModel,
    phi: &ScalarField,
    u: &VectorField2,
    theta: &ScalarField,
) -> Result<ScalarField> {
    grid.check_len(phi.len())?;
    grid.check_len(theta.len())?;
    let eps = material.epsilon;
    let dofs = u.to_dofs();
    let mut lap = vec![0.0; grid.len()];
    FluxLaplacian::unit(grid).apply(phi.values(), &mut lap);
    let w_phi = projected_w_phi(grid, material, phi.values(), &dofs);
    let div = divergence_dofs(grid, &dofs);
    let mut mu = phi.clone();
    for k in 0..grid.len() {
        let z = phi[k];
        let th = theta[k] - material.biot_willis(z) * div[k];
        mu[k] = -eps * lap[k] + material.psi_prime(z) / eps + w_phi[k]
            - material.modulus(z) * th * material.biot_willis_prime(z) * div[k]
            + 0.5 * material.modulus_prime(z) * th * th;
    }
    Ok(mu)
}

/// `σ = W_{,ℰ}(φ, ℰ(u)) + ϱ·ℂ_ν(φ)ℰ(u̇) − α(φ)p·I` at the nodes.
pub fn stress(
    grid: &Grid,
    material: &MaterialModel,
    phi: &ScalarField,
    u: &VectorField2,
    theta: &ScalarField,
    u_dot: Option<&VectorField2>,
) -> Result<SymTensorField> {
    let rate = if material.is_visco() {
        Some(symmetric_gradient(grid, u_dot.ok_or(Error::MissingStrainRate)?))
    } else {
        None
    };
    let strain = symmetric_gradient(grid, u);
    let p = pressure(grid, material, phi, theta, u);
    let mut sigma = SymTensorField::zeros(grid);
    for k in 0..grid.len() {
        let z = phi[k];
        let mut s = material.elastic_density_strain(z, &strain.at(k)) - Sym2::iso(material.biot_willis(z) * p[k]);
        if let Some(r) = &rate {
            s = s + material.visco_stiffness(z).apply(&r.at(k));
        }
        sigma.set(k, s);
    }
    Ok(sigma)
}

/// Right-hand side `eigen + DᵀW(αMθ) + f + g` of the displacement
/// reconstruction `C̃(φ)u = …`.
pub fn reconstruction_load(model: &Model, phi: &ScalarField, theta: &ScalarField, sources: &SourceSpec, t: f64) -> Vec<f64> {
    let grid = &model.grid;
    let mat = &model.material;
    let s: Vec<f64> = (0..grid.len()).map(|k| mat.biot_willis(phi[k]) * mat.modulus(phi[k]) * theta[k]).collect();
    let mut load = eigenstrain_load(grid, mat, phi);
    for ((l, a), b) in load.iter_mut().zip(divergence_adjoint_dofs(grid, &s)).zip(sources.mechanical_load(grid, t)) {
        *l += a + b;
    }
    load
}

/// Quasi-static displacement for given `(φ, θ)`: the minimizer of the energy
/// over `u`, i.e. the solution of `C̃(φ)u = eigen + DᵀW(αMθ) + f + g`.
pub fn reconstruct_displacement(
    model: &Model,
    phi: &ScalarField,
    theta: &ScalarField,
    sources: &SourceSpec,
    t: f64,
) -> Result<VectorField2> {
    let solver = model.elastic_solver(Variant::AugmentedC, phi, 0.0)?;
    let load = reconstruction_load(model, phi, theta, sources, t);
    Ok(VectorField2::from_dofs(&model.grid, &solver.solve(&load)?))
}

/// Like [`reconstruct_displacement`], but solves with CG preconditioned by a
/// frozen augmented solver; `u` holds the initial guess and the result.
pub fn reconstruct_displacement_near(
    model: &Model,
    frozen: &ElasticSolver,
    phi: &ScalarField,
    theta: &ScalarField,
    sources: &SourceSpec,
    t: f64,
    u: &mut VectorField2,
) -> Result<()> {
    let op = EllipticProblem::new(&model.grid, &model.material, Variant::AugmentedC, phi).elastic_operator()?;
    let load = reconstruction_load(model, phi, theta, sources, t);
    let mut x = u.to_dofs();
    frozen.solve_nearby(&op, &load, &mut x, &nearby_options(model))?;
    *u = VectorField2::from_dofs(&model.grid, &x);
    Ok(())
}

pub(crate) fn nearby_options(model: &Model) -> CgOptions {
    CgOptions { rel_tol: 1e-13, abs_tol: 1e-300, max_iter: model.cg.max_iter }
}

/// Operators frozen at the linearization point `φ₀` of a window.
pub struct FrozenOperators {
    pub phi0: ScalarField,
    /// `m(φ₀)`
    pub mobility0: Vec<f64>,
    pub biot: Option<BiotOperators>,
    pub visco: Option<ViscoFrozen>,
    phi_step: Option<(f64, ScalarSolver<BiharmonicOperator>)>,
}

/// Visco-elastic frozen operators.
pub struct ViscoFrozen {
    /// `B(φ₀)`
    pub b0: ElasticSolver,
    /// `C(φ₀)`
    pub c0: ElasticOperator,
    /// `κ(φ₀)M(φ₀)`
    pub kappa_m0: Vec<f64>,
    step: Option<(f64, ElasticSolver, ScalarSolver<HelmholtzOperator>)>,
}

impl FrozenOperators {
    pub fn new(model: &Model, phi0: &ScalarField) -> Result<Self> {
        let mat = &model.material;
        let mobility0 = phi0.values().iter().map(|&z| mat.mobility(z)).collect();
        let (biot, visco) = if mat.is_visco() {
            let b0 = model.elastic_solver(Variant::ViscoB, phi0, 0.0)?;
            let c0 = EllipticProblem::new(&model.grid, mat, Variant::PlainC, phi0).elastic_operator()?;
            let kappa_m0 = phi0.values().iter().map(|&z| mat.permeability(z) * mat.modulus(z)).collect();
            (None, Some(ViscoFrozen { b0, c0, kappa_m0, step: None }))
        } else {
            (Some(BiotOperators::new(&model.grid, mat, phi0, model.solver, model.cg)?), None)
        };
        Ok(Self { phi0: phi0.clone(), mobility0, biot, visco, phi_step: None })
    }

    /// Builds (or reuses) the substep solvers for window length `dt`.
    pub fn prepare(&mut self, model: &Model, dt: f64) -> Result<()> {
        if self.phi_step.as_ref().is_none_or(|(d, _)| *d != dt) {
            let op = BiharmonicOperator::new(&model.grid, &self.mobility0, dt * model.material.epsilon)?;
            self.phi_step = Some((dt, ScalarSolver::new(&model.grid, op, model.solver, model.cg)?));
        }
        if let Some(b) = &mut self.biot {
            b.prepare_conjugate(dt)?;
        }
        if let Some(v) = &mut self.visco {
            if v.step.as_ref().is_none_or(|(d, _, _)| *d != dt) {
                let u_solver = model.elastic_solver(Variant::ViscoB, &self.phi0, dt)?;
                let helm = HelmholtzOperator::new(&model.grid, &v.kappa_m0, 1.0, dt)?;
                let th_solver = ScalarSolver::new(&model.grid, helm, model.solver, model.cg)?;
                v.step = Some((dt, u_solver, th_solver));
            }
        }
        Ok(())
    }

    pub(crate) fn phi_solver(&self, dt: f64) -> Result<&ScalarSolver<BiharmonicOperator>> {
        match &self.phi_step {
            Some((d, s)) if *d == dt => Ok(s),
            _ => Err(Error::InvalidStepper("phase substep not prepared for this dt".into())),
        }
    }

    pub(crate) fn visco_solvers(&self, dt: f64) -> Result<(&ViscoFrozen, &ElasticSolver, &ScalarSolver<HelmholtzOperator>)> {
        let v = self.visco.as_ref().ok_or_else(|| Error::InvalidStepper("visco operators not built".into()))?;
        match &v.step {
            Some((d, u, th)) if *d == dt => Ok((v, u, th)),
            _ => Err(Error::InvalidStepper("visco substeps not prepared for this dt".into())),
        }
    }

    pub(crate) fn biot(&self) -> Result<&BiotOperators> {
        self.biot.as_ref().ok_or_else(|| Error::InvalidStepper("elastic-regime operators not built".into()))
    }
}

/// `F1 = εL(m(φ₀)Lφ) + ∇·(m(φ)∇μ) + S_s`, with `μ` evaluated at the state.
pub(crate) fn rhs_phase(model: &Model, state: &SimState, frozen: &FrozenOperators, mu: &ScalarField, s_s: &ScalarField) -> Result<ScalarField> {
    let grid = &model.grid;
    let mat = &model.material;
    let n = grid.len();
    let unit = FluxLaplacian::unit(grid);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    unit.apply(state.phi.values(), &mut a);
    for k in 0..n {
        a[k] *= frozen.mobility0[k];
    }
    unit.apply(&a, &mut b);
    let m: Vec<f64> = state.phi.values().iter().map(|&z| mat.mobility(z)).collect();
    FluxLaplacian::new(grid, &m)?.apply(mu.values(), &mut a);
    Ok(ScalarField::wrap(grid, (0..n).map(|k| mat.epsilon * b[k] + a[k] + s_s[k]).collect()))
}

/// `∇·(κ(φ)∇p)`
fn kappa_transport(model: &Model, phi: &ScalarField, p: &ScalarField) -> Result<Vec<f64>> {
    let kappa: Vec<f64> = phi.values().iter().map(|&z| model.material.permeability(z)).collect();
    let mut out = vec![0.0; p.len()];
    FluxLaplacian::new(&model.grid, &kappa)?.apply(p.values(), &mut out);
    Ok(out)
}

/// Elastic-regime right-hand sides at `state` (whose `u` must already be the
/// reconstructed displacement):
///
/// - `F1 = εL(m(φ₀)Lφ) + ∇·(m(φ)∇μ) + S_s`
/// - `F2 = 𝒜(φ₀)θ + ∇·(κ(φ)∇p) + S_f`
///
/// so the fixed point of `(I + dt·L_T)x = xₙ + dt·F(x)` is the implicit Euler
/// step of the full system.
pub fn rhs_elastic(
    model: &Model,
    state: &SimState,
    frozen: &FrozenOperators,
    sources: &SourceSpec,
) -> Result<(ScalarField, ScalarField)> {
    let grid = &model.grid;
    let mat = &model.material;
    let mu = chemical_potential(grid, mat, &state.phi, &state.u, &state.theta)?;
    let f1 = rhs_phase(model, state, frozen, &mu, &sources.solid.field(grid, state.t))?;
    let p = pressure(grid, mat, &state.phi, &state.theta, &state.u);
    let a0 = frozen.biot()?.fluid(state.theta.values())?;
    let tr = kappa_transport(model, &state.phi, &p)?;
    let s_f = sources.fluid.field(grid, state.t);
    let f2 = (0..grid.len()).map(|k| a0[k] + tr[k] + s_f[k]).collect();
    Ok((f1, ScalarField::wrap(grid, f2)))
}

/// Visco-elastic right-hand sides at `state`:
///
/// - `F1` as in the elastic regime,
/// - `F2 = 𝒜(φ₀)u − 𝒜(φ)u + B(φ)⁻¹(eigen + DᵀW(αp) + f + g)` with `𝒜 = B⁻¹C`,
/// - `F3 = −∇·(κ(φ₀)M(φ₀)∇θ) + ∇·(κ(φ)∇p) + S_f`.
pub fn rhs_visco(
    model: &Model,
    state: &SimState,
    frozen: &FrozenOperators,
    sources: &SourceSpec,
) -> Result<(ScalarField, VectorField2, ScalarField)> {
    let grid = &model.grid;
    let mat = &model.material;
    let v = frozen.visco.as_ref().ok_or_else(|| Error::InvalidStepper("visco operators not built".into()))?;
    let mu = chemical_potential(grid, mat, &state.phi, &state.u, &state.theta)?;
    let f1 = rhs_phase(model, state, frozen, &mu, &sources.solid.field(grid, state.t))?;

    let p = pressure(grid, mat, &state.phi, &state.theta, &state.u);
    let u = state.u.to_dofs();
    let ap: Vec<f64> = (0..grid.len()).map(|k| mat.biot_willis(state.phi[k]) * p[k]).collect();
    let mut load = eigenstrain_load(grid, mat, &state.phi);
    for ((l, a), b) in load.iter_mut().zip(divergence_adjoint_dofs(grid, &ap)).zip(sources.mechanical_load(grid, state.t)) {
        *l += a + b;
    }
    let c = EllipticProblem::new(grid, mat, Variant::PlainC, &state.phi).elastic_operator()?;
    let mut cu = vec![0.0; u.len()];
    c.apply_free(&u, &mut cu);
    for (l, c) in load.iter_mut().zip(&cu) {
        *l -= c;
    }
    let b = EllipticProblem::new(grid, mat, Variant::ViscoB, &state.phi).elastic_operator()?;
    let mut z = v.b0.solve(&load)?;
    v.b0.solve_nearby(&b, &load, &mut z, &nearby_options(model))?;
    let mut c0u = vec![0.0; u.len()];
    v.c0.apply_free(&u, &mut c0u);
    let a0u = v.b0.solve(&c0u)?;
    let f2: Vec<f64> = z.iter().zip(&a0u).map(|(a, b)| a + b).collect();

    let mut th = vec![0.0; grid.len()];
    FluxLaplacian::new(grid, &v.kappa_m0)?.apply(state.theta.values(), &mut th);
    let tr = kappa_transport(model, &state.phi, &p)?;
    let s_f = sources.fluid.field(grid, state.t);
    let f3 = (0..grid.len()).map(|k| -th[k] + tr[k] + s_f[k]).collect();
    Ok((f1, VectorField2::from_dofs(grid, &f2), ScalarField::wrap(grid, f3)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{Affine, Quadratic, Switched};
    use crate::mesh::EdgeTags;

    fn grid() -> Grid {
        Grid::unit_square(8, EdgeTags::clamped()).unwrap()
    }

    fn plain_material() -> MaterialModel {
        MaterialModel {
            modulus: Switched::constant(2.0),
            biot_willis: Switched::constant(1.0),
            eigenstrain: Affine { c0: 0.0, c1: 0.0 },
            lame_lambda: Switched::constant(1.0),
            lame_mu: Switched::constant(1.0),
            psi_scale: 1.0,
            epsilon: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn pressure_examples() {
        let g = grid();
        let mat = plain_material();
        let phi = ScalarField::from_fn(&g, |x, y| x - y);
        let theta = ScalarField::constant(&g, 3.0);
        let p = pressure(&g, &mat, &phi, &theta, &VectorField2::zeros(&g));
        assert!(p.values().iter().all(|&v| v == 6.0));

        let u = VectorField2::from_fn(&g, |x, y| (x * x, y));
        let div = divergence_dofs(&g, &u.to_dofs());
        let theta = ScalarField::wrap(&g, div);
        let p = pressure(&g, &mat, &phi, &theta, &u);
        assert!(p.max_abs() < 1e-14);
    }

    #[test]
    fn potential_of_uniform_phases() {
        let g = grid();
        let mat = plain_material();
        let z = VectorField2::zeros(&g);
        let zero = ScalarField::zeros(&g);
        let mu = chemical_potential(&g, &mat, &ScalarField::constant(&g, 0.5), &z, &zero).unwrap();
        assert!(mu.values().iter().all(|v| (v + 1.5).abs() < 1e-12));
        for pure in [-1.0, 1.0] {
            let mu = chemical_potential(&g, &mat, &ScalarField::constant(&g, pure), &z, &zero).unwrap();
            assert!(mu.max_abs() < 1e-12);
        }
    }

    #[test]
    fn stress_examples() {
        let g = grid();
        let mut mat = plain_material();
        let phi = ScalarField::zeros(&g);
        let theta = ScalarField::constant(&g, 3.0);
        let z = VectorField2::zeros(&g);
        let s = stress(&g, &mat, &phi, &z, &theta, None).unwrap();
        for k in 0..g.len() {
            assert_eq!(s.at(k), Sym2::iso(-6.0));
        }
        mat.rho = 1;
        assert!(matches!(stress(&g, &mat, &phi, &z, &theta, None), Err(Error::MissingStrainRate)));
        let s1 = stress(&g, &mat, &phi, &z, &theta, Some(&z)).unwrap();
        assert_eq!(s, s1);
    }

    #[test]
    fn rhs_vanishes_for_linear_start_state() {
        let g = grid();
        let mat = MaterialModel {
            mobility: Quadratic::constant(1.0),
            permeability: Quadratic::constant(1.0),
            modulus: Switched::constant(1.0),
            biot_willis: Switched::constant(0.0),
            eigenstrain: Affine { c0: 0.0, c1: 0.0 },
            lame_lambda: Switched::constant(1.0),
            lame_mu: Switched::constant(1.0),
            psi_scale: 1e-300,
            ..Default::default()
        };
        let model = Model::new(g.clone(), mat);
        let phi = ScalarField::from_fn(&g, |x, y| 0.3 * (3.0 * x).cos() * y);
        let theta = ScalarField::from_fn(&g, |x, y| x + y * y);
        let u = reconstruct_displacement(&model, &phi, &theta, &SourceSpec::zero(), 0.0).unwrap();
        let state = SimState::new(&g, 0.0, phi.clone(), u, theta);
        let frozen = FrozenOperators::new(&model, &phi).unwrap();
        let (f1, f2) = rhs_elastic(&model, &state, &frozen, &SourceSpec::zero()).unwrap();
        assert!(f1.max_abs() < 1e-9, "{}", f1.max_abs());
        assert!(f2.max_abs() < 1e-9, "{}", f2.max_abs());
    }
}
