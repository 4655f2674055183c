//! Linearized fixed-point time stepping.
//!
//! Each window `[tₙ, tₙ + dt]` iterates `x_k = T(x_{k−1})`, where `T` applies
//! the frozen linear substeps to the nonlinear right-hand sides evaluated at
//! `x_{k−1}`. The fixed point is the implicit Euler step of the coupled
//! system. Windows that fail to converge are retried with a smaller `dt`.

use std::fmt;
use std::str::FromStr;

use crate::biot::BiotOperators;
use crate::coupled::{
    chemical_potential, reconstruct_displacement, reconstruct_displacement_near, rhs_elastic, rhs_phase, rhs_visco,
    FrozenOperators, Model, SimState, SourceSpec,
};
use crate::diagnostics::{diagnostics_row, DiagnosticsRow};
use crate::error::{Error, Result};
use crate::mesh::{divergence_adjoint_dofs, divergence_dofs, ScalarField, VectorField2};
use crate::solvers::eigenstrain_load;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regime {
    /// Quasi-static elasticity, `u` eliminated.
    #[default]
    Elastic,
    /// Kelvin–Voigt visco-elasticity, `u` evolved.
    Visco,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Formulation {
    /// Unknowns `(φ, θ)`.
    #[default]
    Theta,
    /// Unknowns `(φ, p)`; elastic regime only.
    Pressure,
}

impl FromStr for Formulation {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "theta" => Ok(Self::Theta),
            "pressure" => Ok(Self::Pressure),
            _ => Err(format!("unknown formulation `{s}` (expected theta|pressure)")),
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Theta => "theta",
            Self::Pressure => "pressure",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub tol_picard: f64,
    pub max_picard_iters: usize,
    pub shrink_factor: f64,
    pub max_shrinks: usize,
    /// Re-freeze the linear operators at `φₙ` every window; otherwise they
    /// stay frozen at the initial phase field.
    pub refresh_linearization: bool,
    pub formulation: Formulation,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            tol_picard: 1e-9,
            max_picard_iters: 60,
            shrink_factor: 0.5,
            max_shrinks: 4,
            refresh_linearization: true,
            formulation: Formulation::Theta,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidStepper(m.into()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.tol_picard > 0.0) {
            return bad("tol_picard must be positive");
        }
        if self.max_picard_iters == 0 {
            return bad("max_picard_iters must be at least 1");
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return bad("shrink_factor must lie in (0, 1)");
        }
        Ok(())
    }
}

/// A rejected attempt inside a window.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkEvent {
    pub dt: f64,
    pub reason: String,
}

/// Per-window record of the fixed-point iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PicardReport {
    pub t_start: f64,
    /// Window length actually used.
    pub dt: f64,
    /// Fixed-point maps applied beyond the first (at least 1).
    pub iterations: usize,
    /// `‖x_k − x_{k−1}‖` of the last attempt.
    pub residuals: Vec<f64>,
    /// Median ratio of successive residuals above the roundoff floor.
    pub rho: f64,
    pub shrinks: Vec<ShrinkEvent>,
    pub converged: bool,
}

impl PicardReport {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}

/// Window that could not be completed even after shrinking `dt`.
#[derive(Debug)]
pub struct WindowFailure {
    pub report: PicardReport,
    pub error: Error,
}

impl fmt::Display for WindowFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "window at t = {} failed: {}", self.report.t_start, self.error)
    }
}

impl std::error::Error for WindowFailure {}

/// Median of `r_{k+1}/r_k` over pairs with both residuals above `floor`.
pub fn contraction_estimate(residuals: &[f64], floor: f64) -> f64 {
    let mut ratios: Vec<f64> =
        residuals.windows(2).filter(|w| w[0] > floor && w[1] > floor).map(|w| w[1] / w[0]).collect();
    if ratios.is_empty() {
        return 0.0;
    }
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len();
    if n % 2 == 1 {
        ratios[n / 2]
    } else {
        0.5 * (ratios[n / 2 - 1] + ratios[n / 2])
    }
}

fn roundoff_floor(model: &Model, state: &SimState) -> f64 {
    let scale = state.phi.norm_h(&model.grid) + state.theta.norm_h(&model.grid) + state.u.norm_h(&model.grid);
    1e3 * f64::EPSILON * scale.max(1.0)
}

fn check(field: &ScalarField, what: &'static str) -> Result<()> {
    if field.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `(I + dt·εL m(φ₀) L)φ = φ_prev + dt·F1`, followed by an exact mean
/// correction.
pub fn linear_substep_phi(
    model: &Model,
    frozen: &FrozenOperators,
    phi_prev: &ScalarField,
    f1: &ScalarField,
    dt: f64,
) -> Result<ScalarField> {
    let grid = &model.grid;
    let mut rhs = phi_prev.clone();
    rhs.axpy(dt, f1);
    let mut x = phi_prev.values().to_vec();
    frozen.phi_solver(dt)?.solve_into(rhs.values(), &mut x)?;
    let mut phi = ScalarField::wrap(grid, x);
    let shift = rhs.mean(grid) - phi.mean(grid);
    phi.values_mut().iter_mut().for_each(|v| *v += shift);
    check(&phi, "phase")?;
    Ok(phi)
}

/// `(I + dt·𝒜(φ₀))θ = θ_prev + dt·F2`, solved through its conjugate
/// `(B̃₀ − dt·L_κ₀)q = r`, `θ = r + dt·L_κ₀q`.
pub fn linear_substep_theta_elastic(
    model: &Model,
    frozen: &FrozenOperators,
    theta_prev: &ScalarField,
    f2: &ScalarField,
    dt: f64,
) -> Result<ScalarField> {
    let grid = &model.grid;
    let biot = frozen.biot()?;
    let mut r = theta_prev.clone();
    r.axpy(dt, f2);
    let mut q: Vec<f64> = theta_prev.values().iter().zip(biot.modulus()).map(|(t, m)| t * m).collect();
    biot.solve_conjugate(dt, r.values(), &mut q)?;
    let mut lq = vec![0.0; q.len()];
    biot.kappa_laplacian().apply(&q, &mut lq);
    let theta = ScalarField::wrap(grid, (0..q.len()).map(|k| r[k] + dt * lq[k]).collect());
    check(&theta, "fluid content")?;
    Ok(theta)
}

/// `(I − dt·∇·(κ₀M₀∇))θ = θ_prev + dt·F3`.
pub fn linear_substep_theta_visco(
    model: &Model,
    frozen: &FrozenOperators,
    theta_prev: &ScalarField,
    f3: &ScalarField,
    dt: f64,
) -> Result<ScalarField> {
    let grid = &model.grid;
    let (_, _, solver) = frozen.visco_solvers(dt)?;
    let mut rhs = theta_prev.clone();
    rhs.axpy(dt, f3);
    let mut x = theta_prev.values().to_vec();
    solver.solve_into(rhs.values(), &mut x)?;
    let mut theta = ScalarField::wrap(grid, x);
    let shift = rhs.mean(grid) - theta.mean(grid);
    theta.values_mut().iter_mut().for_each(|v| *v += shift);
    check(&theta, "fluid content")?;
    Ok(theta)
}

/// `(B₀ + dt·C₀)u = B₀(u_prev + dt·F2)`.
pub fn linear_substep_u_visco(
    model: &Model,
    frozen: &FrozenOperators,
    u_prev: &VectorField2,
    f2: &VectorField2,
    dt: f64,
) -> Result<VectorField2> {
    let (v, solver, _) = frozen.visco_solvers(dt)?;
    let mut x = u_prev.clone();
    x.axpy(dt, f2);
    let x = x.to_dofs();
    let mut rhs = vec![0.0; x.len()];
    v.b0.operator().apply_free(&x, &mut rhs);
    let u = VectorField2::from_dofs(&model.grid, &solver.solve(&rhs)?);
    if !u.is_finite() {
        return Err(Error::NonFinite("displacement"));
    }
    Ok(u)
}

/// Builds a consistent state from `(φ, θ)`: the quasi-static displacement is
/// reconstructed and the derived fields are filled in.
pub fn initial_state(model: &Model, phi: ScalarField, theta: ScalarField, sources: &SourceSpec, t: f64) -> Result<SimState> {
    let u = reconstruct_displacement(model, &phi, &theta, sources, t)?;
    let mut state = SimState::new(&model.grid, t, phi, u, theta);
    state.refresh_derived(&model.grid, &model.material)?;
    Ok(state)
}

/// Linearization point management across windows.
pub struct Linearization {
    refresh: bool,
    frozen: Option<FrozenOperators>,
}

impl Linearization {
    pub fn new(refresh: bool) -> Self {
        Self { refresh, frozen: None }
    }

    /// Operators for a window starting at `state`, prepared for `dt`.
    pub fn operators(&mut self, model: &Model, state: &SimState, dt: f64) -> Result<&FrozenOperators> {
        let stale = match &self.frozen {
            None => true,
            Some(f) => self.refresh && f.phi0 != state.phi,
        };
        if stale {
            self.frozen = Some(FrozenOperators::new(model, &state.phi)?);
        }
        let f = self.frozen.as_mut().expect("just built");
        f.prepare(model, dt)?;
        Ok(f)
    }
}

pub fn regime(model: &Model) -> Regime {
    if model.material.is_visco() {
        Regime::Visco
    } else {
        Regime::Elastic
    }
}

/// Iterate state of the window map.
struct Iterate {
    state: SimState,
    /// Pressure-formulation unknown.
    p: Option<ScalarField>,
}

fn diff_norm(model: &Model, a: &Iterate, b: &Iterate) -> f64 {
    let g = &model.grid;
    let dphi = a.state.phi.zip_map(&b.state.phi, |x, y| x - y).norm_h(g);
    let second = match (&a.p, &b.p) {
        (Some(pa), Some(pb)) => pa.zip_map(pb, |x, y| x - y).norm_h(g),
        _ => a.state.theta.zip_map(&b.state.theta, |x, y| x - y).norm_h(g),
    };
    let du = if regime(model) == Regime::Visco {
        let mut d = a.state.u.clone();
        d.axpy(-1.0, &b.state.u);
        d.norm_h(g)
    } else {
        0.0
    };
    (dphi * dphi + second * second + du * du).sqrt()
}

/// Pressure formulation helpers at fixed `φ`: `u = C⁻¹(L₀ + DᵀWαp)` and
/// `θ = p/M + αDu`.
fn pressure_to_state(
    model: &Model,
    biot: &BiotOperators,
    phi: &ScalarField,
    p: &ScalarField,
    sources: &SourceSpec,
    t: f64,
) -> Result<(VectorField2, ScalarField)> {
    let grid = &model.grid;
    let ap: Vec<f64> = p.values().iter().zip(biot.alpha()).map(|(p, a)| p * a).collect();
    let mut load = base_load(model, phi, sources, t);
    for (l, v) in load.iter_mut().zip(divergence_adjoint_dofs(grid, &ap)) {
        *l += v;
    }
    let u = biot.plain_solver().solve(&load)?;
    let div = divergence_dofs(grid, &u);
    let theta = (0..grid.len()).map(|k| p[k] / biot.modulus()[k] + biot.alpha()[k] * div[k]).collect();
    Ok((VectorField2::from_dofs(grid, &u), ScalarField::wrap(grid, theta)))
}

/// `eigen + f + g`
fn base_load(model: &Model, phi: &ScalarField, sources: &SourceSpec, t: f64) -> Vec<f64> {
    let mut load = eigenstrain_load(&model.grid, &model.material, phi);
    for (l, m) in load.iter_mut().zip(sources.mechanical_load(&model.grid, t)) {
        *l += m;
    }
    load
}

/// One application of the window map `T`.
fn apply_map(
    model: &Model,
    frozen: &FrozenOperators,
    start: &SimState,
    x: &Iterate,
    sources: &SourceSpec,
    dt: f64,
) -> Result<Iterate> {
    let grid = &model.grid;
    let t1 = start.t + dt;
    if let Some(p) = &x.p {
        let phi_k = &x.state.phi;
        let mut biot = BiotOperators::without_augmented(grid, &model.material, phi_k, model.solver, model.cg)?;
        let mu = chemical_potential(grid, &model.material, phi_k, &x.state.u, &x.state.theta)?;
        let f1 = rhs_phase(model, &x.state, frozen, &mu, &sources.solid.field(grid, t1))?;
        let phi = linear_substep_phi(model, frozen, &start.phi, &f1, dt)?;

        let u0 = biot.plain_solver().solve(&base_load(model, phi_k, sources, t1))?;
        let d0 = divergence_dofs(grid, &u0);
        let s_f = sources.fluid.field(grid, t1);
        let rhs: Vec<f64> =
            (0..grid.len()).map(|k| start.theta[k] + dt * s_f[k] - biot.alpha()[k] * d0[k]).collect();
        biot.prepare_conjugate(dt)?;
        let mut p_new = p.values().to_vec();
        biot.solve_conjugate(dt, &rhs, &mut p_new)?;
        let p_new = ScalarField::wrap(grid, p_new);
        check(&p_new, "pressure")?;

        let biot = BiotOperators::without_augmented(grid, &model.material, &phi, model.solver, model.cg)?;
        let (u, theta) = pressure_to_state(model, &biot, &phi, &p_new, sources, t1)?;
        let state = SimState::new(grid, t1, phi, u, theta);
        return Ok(Iterate { state, p: Some(p_new) });
    }

    let mut cur = x.state.clone();
    cur.t = t1;
    match regime(model) {
        Regime::Elastic => {
            let (f1, f2) = rhs_elastic(model, &cur, frozen, sources)?;
            let phi = linear_substep_phi(model, frozen, &start.phi, &f1, dt)?;
            let theta = linear_substep_theta_elastic(model, frozen, &start.theta, &f2, dt)?;
            let mut u = cur.u.clone();
            let aug = frozen.biot()?.augmented_solver().ok_or_else(|| Error::InvalidStepper("augmented solver missing".into()))?;
            reconstruct_displacement_near(model, aug, &phi, &theta, sources, t1, &mut u)?;
            Ok(Iterate { state: SimState::new(grid, t1, phi, u, theta), p: None })
        }
        Regime::Visco => {
            let (f1, f2, f3) = rhs_visco(model, &cur, frozen, sources)?;
            let phi = linear_substep_phi(model, frozen, &start.phi, &f1, dt)?;
            let u = linear_substep_u_visco(model, frozen, &start.u, &f2, dt)?;
            let theta = linear_substep_theta_visco(model, frozen, &start.theta, &f3, dt)?;
            Ok(Iterate { state: SimState::new(grid, t1, phi, u, theta), p: None })
        }
    }
}

fn start_iterate(model: &Model, start: &SimState, cfg: &StepperConfig) -> Result<Iterate> {
    let p = match cfg.formulation {
        Formulation::Theta => None,
        Formulation::Pressure => {
            if regime(model) == Regime::Visco {
                return Err(Error::InvalidStepper("pressure formulation needs the elastic regime".into()));
            }
            Some(crate::coupled::pressure(&model.grid, &model.material, &start.phi, &start.theta, &start.u))
        }
    };
    Ok(Iterate { state: start.clone(), p })
}

struct Attempt {
    residuals: Vec<f64>,
    end: Option<Iterate>,
    error: Option<Error>,
}

/// Runs up to `max_iters` maps. With `stop_early` the loop ends once the
/// residual drops below `tol`.
fn iterate_window(
    model: &Model,
    frozen: &FrozenOperators,
    start: &SimState,
    cfg: &StepperConfig,
    sources: &SourceSpec,
    dt: f64,
    max_iters: usize,
    stop_early: bool,
) -> Attempt {
    let mut residuals = Vec::new();
    let mut x = match start_iterate(model, start, cfg) {
        Ok(x) => x,
        Err(e) => return Attempt { residuals, end: None, error: Some(e) },
    };
    for _ in 0..max_iters {
        let next = match apply_map(model, frozen, start, &x, sources, dt) {
            Ok(n) => n,
            Err(e) => return Attempt { residuals, end: None, error: Some(e) },
        };
        let r = diff_norm(model, &next, &x);
        residuals.push(r);
        x = next;
        if !r.is_finite() {
            return Attempt { residuals, end: None, error: Some(Error::NonFinite("fixed-point residual")) };
        }
        if stop_early && r <= cfg.tol_picard {
            return Attempt { residuals, end: Some(x), error: None };
        }
    }
    let error = stop_early.then(|| Error::InvalidStepper(format!("no convergence in {max_iters} fixed-point iterations")));
    Attempt { residuals, end: Some(x), error }
}

fn finish_state(model: &Model, start: &SimState, x: Iterate, dt: f64) -> Result<SimState> {
    let mut state = x.state;
    state.t = start.t + dt;
    let mut rate = state.u.clone();
    rate.axpy(-1.0, &start.u);
    state.u_dot = rate.scaled(1.0 / dt);
    state.refresh_derived(&model.grid, &model.material)?;
    Ok(state)
}

/// Advances one window with operators from `lin`, shrinking `dt` on failure.
pub fn picard_window_with(
    model: &Model,
    start: &SimState,
    cfg: &StepperConfig,
    sources: &SourceSpec,
    lin: &mut Linearization,
) -> std::result::Result<(SimState, PicardReport), WindowFailure> {
    let mut report = PicardReport { t_start: start.t, ..Default::default() };
    if let Err(error) = cfg.validate() {
        return Err(WindowFailure { report, error });
    }
    let floor = roundoff_floor(model, start);
    let mut dt = cfg.dt;
    loop {
        let attempt = match lin.operators(model, start, dt) {
            Ok(frozen) => iterate_window(model, frozen, start, cfg, sources, dt, cfg.max_picard_iters, true),
            Err(e) => Attempt { residuals: Vec::new(), end: None, error: Some(e) },
        };
        report.dt = dt;
        report.rho = contraction_estimate(&attempt.residuals, floor);
        report.iterations = attempt.residuals.len().saturating_sub(1).max(1);
        report.residuals = attempt.residuals;
        let error = match (attempt.end, attempt.error) {
            (Some(x), None) => match finish_state(model, start, x, dt) {
                Ok(state) => {
                    report.converged = true;
                    return Ok((state, report));
                }
                Err(e) => e,
            },
            (_, Some(e)) => e,
            (None, None) => Error::InvalidStepper("empty window".into()),
        };
        report.shrinks.push(ShrinkEvent { dt, reason: error.to_string() });
        if report.shrinks.len() > cfg.max_shrinks {
            let error = Error::PicardFailure { t: start.t, dt, shrinks: cfg.max_shrinks };
            return Err(WindowFailure { report, error });
        }
        dt *= cfg.shrink_factor;
    }
}

/// Advances one window linearized at the window's own start state.
pub fn picard_window(
    model: &Model,
    start: &SimState,
    cfg: &StepperConfig,
    sources: &SourceSpec,
) -> std::result::Result<(SimState, PicardReport), WindowFailure> {
    picard_window_with(model, start, cfg, sources, &mut Linearization::new(true))
}

/// Applies exactly `iters` maps of the window linearized at `start`, without
/// stopping or shrinking, and returns the residual sequence and its
/// contraction estimate. Divergent sequences are reported, not rejected.
pub fn measure_contraction(
    model: &Model,
    start: &SimState,
    cfg: &StepperConfig,
    sources: &SourceSpec,
    iters: usize,
) -> Result<(Vec<f64>, f64)> {
    let mut lin = Linearization::new(true);
    let frozen = lin.operators(model, start, cfg.dt)?;
    let attempt = iterate_window(model, frozen, start, cfg, sources, cfg.dt, iters, false);
    let rho = contraction_estimate(&attempt.residuals, roundoff_floor(model, start));
    match attempt.error {
        Some(e) if attempt.residuals.is_empty() => Err(e),
        _ => Ok((attempt.residuals, rho)),
    }
}

/// States, reports and diagnostics of a run.
#[derive(Debug, Default)]
pub struct Trajectory {
    /// Initial state followed by one state per accepted window.
    pub states: Vec<SimState>,
    pub reports: Vec<PicardReport>,
    pub rows: Vec<DiagnosticsRow>,
    /// False when a window failed; `failure` then holds its report.
    pub complete: bool,
    pub failure: Option<WindowFailure>,
}

impl Trajectory {
    pub fn last(&self) -> &SimState {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Steps from `initial` to `t_end`. The last window is shortened to land on
/// `t_end` exactly. A failed window ends the run with `complete = false`.
pub fn run_simulation(
    model: &Model,
    initial: SimState,
    cfg: &StepperConfig,
    t_end: f64,
    sources: &SourceSpec,
) -> Result<Trajectory> {
    cfg.validate()?;
    let mut initial = initial;
    if !initial.derived_valid() {
        initial.refresh_derived(&model.grid, &model.material)?;
    }
    let mut traj = Trajectory { complete: true, ..Default::default() };
    traj.rows.push(diagnostics_row(model, &initial, None, sources)?);
    traj.states.push(initial);
    let mut lin = Linearization::new(cfg.refresh_linearization);
    let tiny = 1e-9 * cfg.dt;
    while t_end - traj.last().t > tiny {
        let start = traj.last();
        let remaining = t_end - start.t;
        let window = if remaining < cfg.dt * (1.0 + 1e-9) { StepperConfig { dt: remaining, ..cfg.clone() } } else { cfg.clone() };
        match picard_window_with(model, start, &window, sources, &mut lin) {
            Ok((state, report)) => {
                traj.rows.push(diagnostics_row(model, &state, Some((start, &report)), sources)?);
                traj.states.push(state);
                traj.reports.push(report);
            }
            Err(failure) => {
                traj.complete = false;
                traj.failure = Some(failure);
                break;
            }
        }
    }
    Ok(traj)
}

/// Absolute change of the means of `φ` and `θ` between two states.
pub fn mass_drift(model: &Model, a: &SimState, b: &SimState) -> (f64, f64) {
    let g = &model.grid;
    ((a.phi.mean(g) - b.phi.mean(g)).abs(), (a.theta.mean(g) - b.theta.mean(g)).abs())
}
