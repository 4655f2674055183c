//! Run configuration: line-oriented `key = value` text with `#` comments.
//!
//! Every key has a default, unknown keys are rejected, and
//! [`RunConfig::serialize`] writes every key so that parsing its output
//! reproduces the configuration exactly.

use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coupled::{Model, ScalarSource, Shape, SimState, SourceSpec, VectorSource};
use crate::error::{Error, Result};
use crate::linalg::CgOptions;
use crate::materials::MaterialModel;
use crate::mesh::{EdgeTag, EdgeTags, Grid, ScalarField};
use crate::solvers::SolverKind;
use crate::stepper::{initial_state, Formulation, StepperConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub tags: EdgeTags,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nx: 32, ny: 32, lx: 1.0, ly: 1.0, tags: EdgeTags::clamped() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShapeKind {
    #[default]
    Zero,
    Constant,
    Gaussian,
    Ramp,
}

impl FromStr for ShapeKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "zero" => Ok(Self::Zero),
            "constant" => Ok(Self::Constant),
            "gaussian" => Ok(Self::Gaussian),
            "ramp" => Ok(Self::Ramp),
            _ => Err(format!("unknown source kind `{s}` (expected zero|constant|gaussian|ramp)")),
        }
    }
}

impl std::fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Zero => "zero",
            Self::Constant => "constant",
            Self::Gaussian => "gaussian",
            Self::Ramp => "ramp",
        })
    }
}

/// One source preset; vector sources use both amplitudes, scalar ones only
/// `amplitude_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceConfig {
    pub kind: ShapeKind,
    pub amplitude_x: f64,
    pub amplitude_y: f64,
    pub center_x: f64,
    pub center_y: f64,
    pub width: f64,
    pub ramp_time: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self { kind: ShapeKind::Zero, amplitude_x: 0.0, amplitude_y: 0.0, center_x: 0.5, center_y: 0.5, width: 0.1, ramp_time: 0.1 }
    }
}

impl SourceConfig {
    pub fn shape(&self) -> Shape {
        match self.kind {
            ShapeKind::Zero => Shape::Zero,
            ShapeKind::Constant => Shape::Constant,
            ShapeKind::Gaussian => Shape::GaussianBump { cx: self.center_x, cy: self.center_y, width: self.width },
            ShapeKind::Ramp => Shape::TimeRamp { ramp_time: self.ramp_time },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitKind {
    Constant,
    /// `φ = tanh((x − lx/2)/width)`
    Interface,
    /// `φ = phi + amplitude·U(−1, 1)`, seeded.
    #[default]
    SpinodalNoise,
}

impl FromStr for InitKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "constant" => Ok(Self::Constant),
            "interface" => Ok(Self::Interface),
            "spinodal-noise" => Ok(Self::SpinodalNoise),
            _ => Err(format!("unknown initial data `{s}` (expected constant|interface|spinodal-noise)")),
        }
    }
}

impl std::fmt::Display for InitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::Interface => "interface",
            Self::SpinodalNoise => "spinodal-noise",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    pub kind: InitKind,
    pub phi: f64,
    pub theta: f64,
    pub amplitude: f64,
    pub seed: u64,
    pub width: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { kind: InitKind::SpinodalNoise, phi: 0.0, theta: 0.0, amplitude: 0.01, seed: 42, width: 0.1 }
    }
}

impl InitConfig {
    pub fn phase_field(&self, grid: &Grid) -> ScalarField {
        match self.kind {
            InitKind::Constant => ScalarField::constant(grid, self.phi),
            InitKind::Interface => {
                let mid = 0.5 * grid.lx();
                ScalarField::from_fn(grid, |x, _| ((x - mid) / self.width).tanh())
            }
            InitKind::SpinodalNoise => spinodal_noise(grid, self.phi, self.amplitude, self.seed),
        }
    }
}

/// `mean + amplitude·U(−1, 1)` per node from a ChaCha8 stream.
pub fn spinodal_noise(grid: &Grid, mean: f64, amplitude: f64, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::from_fn(grid, |_, _| mean + amplitude * rng.gen_range(-1.0..1.0))
}

/// Smooth random field: a seeded combination of low cosine modes scaled to
/// `max |φ| = amplitude`.
pub fn smooth_random_field(grid: &Grid, amplitude: f64, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let (lx, ly) = (grid.lx(), grid.ly());
    let raw = ScalarField::from_fn(grid, |x, y| {
        modes
            .iter()
            .map(|&(a, kx, ky, px, py)| {
                a * (std::f64::consts::PI * kx * x / lx + px).cos() * (std::f64::consts::PI * ky * y / ly + py).cos()
            })
            .sum()
    });
    let m = raw.max_abs();
    if m == 0.0 {
        raw
    } else {
        raw.scaled(amplitude / m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Snapshot every `stride` windows.
    pub stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), stride: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub material: MaterialModel,
    pub stepper: StepperConfig,
    pub t_end: f64,
    pub solver: SolverKind,
    pub tol_lin: f64,
    pub solid: SourceConfig,
    pub fluid: SourceConfig,
    pub force: SourceConfig,
    pub traction: SourceConfig,
    pub init: InitConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            material: MaterialModel::default(),
            stepper: StepperConfig::default(),
            t_end: 0.2,
            solver: SolverKind::Direct,
            tol_lin: 1e-10,
            solid: SourceConfig::default(),
            fluid: SourceConfig::default(),
            force: SourceConfig::default(),
            traction: SourceConfig::default(),
            init: InitConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String>
where
    T::Err: Display,
{
    value.parse::<T>().map_err(|e| format!("`{key}`: cannot parse `{value}`: {e}"))
}

fn parse_bool(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("`{key}`: expected true or false, got `{value}`")),
    }
}

fn parse_tag(key: &str, value: &str) -> std::result::Result<EdgeTag, String> {
    match value {
        "dirichlet" => Ok(EdgeTag::DirichletDisplacement),
        "neumann" => Ok(EdgeTag::NeumannTraction),
        _ => Err(format!("`{key}`: expected dirichlet or neumann, got `{value}`")),
    }
}

fn tag_name(t: EdgeTag) -> &'static str {
    if t.is_dirichlet() {
        "dirichlet"
    } else {
        "neumann"
    }
}

const SOURCE_NAMES: [&str; 4] = ["solid", "fluid", "force", "traction"];

impl RunConfig {
    fn source_mut(&mut self, name: &str) -> Option<&mut SourceConfig> {
        match name {
            "solid" => Some(&mut self.solid),
            "fluid" => Some(&mut self.fluid),
            "force" => Some(&mut self.force),
            "traction" => Some(&mut self.traction),
            _ => None,
        }
    }

    fn source(&self, name: &str) -> &SourceConfig {
        match name {
            "solid" => &self.solid,
            "fluid" => &self.fluid,
            "force" => &self.force,
            _ => &self.traction,
        }
    }

    /// Sets one key; the message names the key on failure.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let m = &mut self.material;
        match key {
            "m0" => m.mobility.c0 = parse(key, value)?,
            "m1" => m.mobility.c1 = parse(key, value)?,
            "kappa0" => m.permeability.c0 = parse(key, value)?,
            "kappa1" => m.permeability.c1 = parse(key, value)?,
            "modulus0" => m.modulus.c0 = parse(key, value)?,
            "modulus1" => m.modulus.c1 = parse(key, value)?,
            "alpha0" => m.biot_willis.c0 = parse(key, value)?,
            "alpha1" => m.biot_willis.c1 = parse(key, value)?,
            "psi_scale" => m.psi_scale = parse(key, value)?,
            "lambda0" => m.lame_lambda.c0 = parse(key, value)?,
            "lambda1" => m.lame_lambda.c1 = parse(key, value)?,
            "mu0" => m.lame_mu.c0 = parse(key, value)?,
            "mu1" => m.lame_mu.c1 = parse(key, value)?,
            "nu_lambda0" => m.visco_lambda.c0 = parse(key, value)?,
            "nu_lambda1" => m.visco_lambda.c1 = parse(key, value)?,
            "nu_mu0" => m.visco_mu.c0 = parse(key, value)?,
            "nu_mu1" => m.visco_mu.c1 = parse(key, value)?,
            "tau0" => m.eigenstrain.c0 = parse(key, value)?,
            "tau1" => m.eigenstrain.c1 = parse(key, value)?,
            "epsilon" => m.epsilon = parse(key, value)?,
            "rho" => m.rho = parse(key, value)?,
            "switch_rate" => m.switch_rate = parse(key, value)?,

            "grid.nx" => self.grid.nx = parse(key, value)?,
            "grid.ny" => self.grid.ny = parse(key, value)?,
            "grid.lx" => self.grid.lx = parse(key, value)?,
            "grid.ly" => self.grid.ly = parse(key, value)?,
            "grid.left" => self.grid.tags.left = parse_tag(key, value)?,
            "grid.right" => self.grid.tags.right = parse_tag(key, value)?,
            "grid.bottom" => self.grid.tags.bottom = parse_tag(key, value)?,
            "grid.top" => self.grid.tags.top = parse_tag(key, value)?,

            "stepper.dt" => self.stepper.dt = parse(key, value)?,
            "stepper.t_end" => self.t_end = parse(key, value)?,
            "stepper.tol_picard" => self.stepper.tol_picard = parse(key, value)?,
            "stepper.max_picard_iters" => self.stepper.max_picard_iters = parse(key, value)?,
            "stepper.shrink_factor" => self.stepper.shrink_factor = parse(key, value)?,
            "stepper.max_shrinks" => self.stepper.max_shrinks = parse(key, value)?,
            "stepper.refresh_linearization" => self.stepper.refresh_linearization = parse_bool(key, value)?,
            "stepper.formulation" => self.stepper.formulation = parse::<Formulation>(key, value)?,
            "stepper.solver" => self.solver = parse(key, value)?,
            "stepper.tol_lin" => self.tol_lin = parse(key, value)?,

            "init.kind" => self.init.kind = parse(key, value)?,
            "init.phi" => self.init.phi = parse(key, value)?,
            "init.theta" => self.init.theta = parse(key, value)?,
            "init.amplitude" => self.init.amplitude = parse(key, value)?,
            "init.seed" => self.init.seed = parse(key, value)?,
            "init.width" => self.init.width = parse(key, value)?,

            "output.dir" => self.output.dir = PathBuf::from(value),
            "output.stride" => self.output.stride = parse(key, value)?,

            _ => return self.set_source(key, value),
        }
        Ok(())
    }

    fn set_source(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let unknown = || format!("unknown key `{key}`");
        let rest = key.strip_prefix("source.").ok_or_else(unknown)?;
        let (name, field) = rest.split_once('.').ok_or_else(unknown)?;
        let scalar = matches!(name, "solid" | "fluid");
        let s = self.source_mut(name).ok_or_else(unknown)?;
        match field {
            "kind" => s.kind = parse(key, value)?,
            "amplitude" if scalar => s.amplitude_x = parse(key, value)?,
            "amplitude_x" if !scalar => s.amplitude_x = parse(key, value)?,
            "amplitude_y" if !scalar => s.amplitude_y = parse(key, value)?,
            "center_x" => s.center_x = parse(key, value)?,
            "center_y" => s.center_y = parse(key, value)?,
            "width" => s.width = parse(key, value)?,
            "ramp_time" => s.ramp_time = parse(key, value)?,
            _ => return Err(unknown()),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let m = &self.material;
        let g = &self.grid;
        let s = &self.stepper;
        let mut out: Vec<(String, String)> = [
            ("m0", m.mobility.c0.to_string()),
            ("m1", m.mobility.c1.to_string()),
            ("kappa0", m.permeability.c0.to_string()),
            ("kappa1", m.permeability.c1.to_string()),
            ("modulus0", m.modulus.c0.to_string()),
            ("modulus1", m.modulus.c1.to_string()),
            ("alpha0", m.biot_willis.c0.to_string()),
            ("alpha1", m.biot_willis.c1.to_string()),
            ("psi_scale", m.psi_scale.to_string()),
            ("lambda0", m.lame_lambda.c0.to_string()),
            ("lambda1", m.lame_lambda.c1.to_string()),
            ("mu0", m.lame_mu.c0.to_string()),
            ("mu1", m.lame_mu.c1.to_string()),
            ("nu_lambda0", m.visco_lambda.c0.to_string()),
            ("nu_lambda1", m.visco_lambda.c1.to_string()),
            ("nu_mu0", m.visco_mu.c0.to_string()),
            ("nu_mu1", m.visco_mu.c1.to_string()),
            ("tau0", m.eigenstrain.c0.to_string()),
            ("tau1", m.eigenstrain.c1.to_string()),
            ("epsilon", m.epsilon.to_string()),
            ("rho", m.rho.to_string()),
            ("switch_rate", m.switch_rate.to_string()),
            ("grid.nx", g.nx.to_string()),
            ("grid.ny", g.ny.to_string()),
            ("grid.lx", g.lx.to_string()),
            ("grid.ly", g.ly.to_string()),
            ("grid.left", tag_name(g.tags.left).to_string()),
            ("grid.right", tag_name(g.tags.right).to_string()),
            ("grid.bottom", tag_name(g.tags.bottom).to_string()),
            ("grid.top", tag_name(g.tags.top).to_string()),
            ("stepper.dt", s.dt.to_string()),
            ("stepper.t_end", self.t_end.to_string()),
            ("stepper.tol_picard", s.tol_picard.to_string()),
            ("stepper.max_picard_iters", s.max_picard_iters.to_string()),
            ("stepper.shrink_factor", s.shrink_factor.to_string()),
            ("stepper.max_shrinks", s.max_shrinks.to_string()),
            ("stepper.refresh_linearization", s.refresh_linearization.to_string()),
            ("stepper.formulation", s.formulation.to_string()),
            ("stepper.solver", self.solver.to_string()),
            ("stepper.tol_lin", self.tol_lin.to_string()),
            ("init.kind", self.init.kind.to_string()),
            ("init.phi", self.init.phi.to_string()),
            ("init.theta", self.init.theta.to_string()),
            ("init.amplitude", self.init.amplitude.to_string()),
            ("init.seed", self.init.seed.to_string()),
            ("init.width", self.init.width.to_string()),
            ("output.dir", self.output.dir.display().to_string()),
            ("output.stride", self.output.stride.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        for name in SOURCE_NAMES {
            let s = self.source(name);
            let p = |f: &str| format!("source.{name}.{f}");
            out.push((p("kind"), s.kind.to_string()));
            if matches!(name, "solid" | "fluid") {
                out.push((p("amplitude"), s.amplitude_x.to_string()));
            } else {
                out.push((p("amplitude_x"), s.amplitude_x.to_string()));
                out.push((p("amplitude_y"), s.amplitude_y.to_string()));
            }
            out.push((p("center_x"), s.center_x.to_string()));
            out.push((p("center_y"), s.center_y.to_string()));
            out.push((p("width"), s.width.to_string()));
            out.push((p("ramp_time"), s.ramp_time.to_string()));
        }
        out
    }

    pub fn serialize(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Checks cross-field invariants.
    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        self.stepper.validate()?;
        if !self.grid.tags.any_dirichlet() {
            return Err(Error::NoDirichletBoundary);
        }
        self.build_grid()?;
        let bad = |m: &str| Err(Error::InvalidStepper(m.into()));
        if !(self.t_end >= 0.0) {
            return bad("t_end must be non-negative");
        }
        if !(self.tol_lin > 0.0) {
            return bad("tol_lin must be positive");
        }
        if self.output.stride == 0 {
            return bad("output.stride must be at least 1");
        }
        if self.stepper.formulation == Formulation::Pressure && self.material.is_visco() {
            return bad("the pressure formulation requires rho = 0");
        }
        for name in SOURCE_NAMES {
            let s = self.source(name);
            if s.kind == ShapeKind::Gaussian && !(s.width > 0.0) {
                return Err(Error::InvalidStepper(format!("source.{name}.width must be positive")));
            }
            if s.kind == ShapeKind::Ramp && !(s.ramp_time > 0.0) {
                return Err(Error::InvalidStepper(format!("source.{name}.ramp_time must be positive")));
            }
        }
        if self.init.kind == InitKind::Interface && !(self.init.width > 0.0) {
            return bad("init.width must be positive");
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly, self.grid.tags)
    }

    pub fn model(&self) -> Result<Model> {
        let cg = CgOptions { rel_tol: self.tol_lin, ..CgOptions::default() };
        Ok(Model::new(self.build_grid()?, self.material.clone()).with_solver(self.solver, cg))
    }

    pub fn sources(&self) -> SourceSpec {
        let scalar = |s: &SourceConfig| ScalarSource { shape: s.shape(), amplitude: s.amplitude_x };
        let vector = |s: &SourceConfig| VectorSource { shape: s.shape(), amplitude: (s.amplitude_x, s.amplitude_y) };
        SourceSpec {
            solid: scalar(&self.solid),
            fluid: scalar(&self.fluid),
            body_force: vector(&self.force),
            traction: vector(&self.traction),
        }
    }

    /// Initial state at `t = 0` with the reconstructed displacement.
    pub fn initial_state(&self, model: &Model) -> Result<SimState> {
        let phi = self.init.phase_field(&model.grid);
        let theta = ScalarField::constant(&model.grid, self.init.theta);
        initial_state(model, phi, theta, &self.sources(), 0.0)
    }
}

/// Parses a configuration, applying defaults for absent keys.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config { line: i + 1, message: format!("expected `key = value`, got `{line}`") })?;
        cfg.set(key.trim(), value.trim()).map_err(|message| Error::Config { line: i + 1, message })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Applies `KEY=VALUE` overrides on top of a parsed configuration.
pub fn apply_overrides(cfg: &mut RunConfig, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config { line: 0, message: format!("override `{o}` is not KEY=VALUE") })?;
        cfg.set(k.trim(), v.trim()).map_err(|message| Error::Config { line: 0, message })?;
    }
    cfg.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
        assert_eq!(parse_config("# only a comment\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn rho_enables_visco() {
        assert!(parse_config("rho = 1").unwrap().material.is_visco());
    }

    #[test]
    fn negative_mobility_names_assumption() {
        let msg = parse_config("m0 = -1").unwrap_err().to_string();
        assert!(msg.contains("m(z) >= m0 > 0"), "{msg}");
    }

    #[test]
    fn unknown_and_malformed_keys() {
        assert!(matches!(parse_config("m00 = 1"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_config("\ngrid.nx = many"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(parse_config("source.solid.amplitude_y = 1"), Err(Error::Config { .. })));
        assert!(matches!(parse_config("epsilon"), Err(Error::Config { .. })));
    }

    #[test]
    fn all_neumann_rejected() {
        let text = "grid.left = neumann\ngrid.right = neumann\ngrid.bottom = neumann\ngrid.top = neumann";
        assert!(matches!(parse_config(text), Err(Error::NoDirichletBoundary)));
    }

    #[test]
    fn serialize_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.material.epsilon = 0.1 + 0.2;
        cfg.stepper.dt = 1.0 / 3.0;
        cfg.force.kind = ShapeKind::Gaussian;
        cfg.force.amplitude_y = -2.5e-7;
        cfg.grid.tags.top = EdgeTag::NeumannTraction;
        cfg.output.dir = PathBuf::from("runs/a b");
        let back = parse_config(&cfg.serialize()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.serialize(), cfg.serialize());
    }

    #[test]
    fn noise_is_seeded() {
        let g = Grid::unit_square(6, EdgeTags::clamped()).unwrap();
        let a = spinodal_noise(&g, 0.0, 0.01, 3);
        assert_eq!(a, spinodal_noise(&g, 0.0, 0.01, 3));
        assert_ne!(a, spinodal_noise(&g, 0.0, 0.01, 4));
        assert!(a.max_abs() <= 0.01);
    }
}
