//! Elliptic solves: the vector elasticity operators and zero-flux scalar
//! operators.
//!
//! Vector operators act on interleaved displacement dofs `[x0, y0, x1, ...]`.
//! Dirichlet dofs are eliminated symmetrically: the operator is `PKP + (I−P)`
//! with `P` the projection onto free dofs, so it stays symmetric positive
//! definite and right-hand sides must vanish on Dirichlet dofs.
//!
//! Scalar operators are self-adjoint in the lumped inner product
//! `⟨a, b⟩ = Σ Wₖ aₖ bₖ`; CG runs in that inner product, and the direct path
//! factors the symmetric matrix `W·A`.

use crate::error::{Error, Result, SolverFailure};
use crate::linalg::{jacobi, pcg, BandLdl, CgOptions, SymBand};
use crate::materials::{Lame, MaterialModel};
use crate::mesh::q1::{self, gather_dofs};
use crate::mesh::{divergence_adjoint_dofs, DivMatrix, Edge, FluxLaplacian, Grid, ScalarField, Sym2, VectorField2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `∫ 2ℂ(φ)ℰ(v):ℰ(w)`
    PlainC,
    /// `PlainC + ∫ α²(φ)M(φ) ∇·v ∇·w`
    AugmentedC,
    /// `∫ (ℂ_ν(φ) + 2s·ℂ(φ))ℰ(v):ℰ(w)`, i.e. `B + s·C`
    ViscoB,
    /// `I − s·∇·(κ(φ)∇·)` with zero flux
    ScalarHelmholtz,
}

impl Variant {
    pub fn is_vector(self) -> bool {
        !matches!(self, Variant::ScalarHelmholtz)
    }
}

/// How frozen operators are inverted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Banded `LDLᵀ` factorization, reused for every solve.
    #[default]
    Direct,
    /// Jacobi-preconditioned CG for every solve.
    Cg,
}

impl std::str::FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "direct" => Ok(SolverKind::Direct),
            "cg" => Ok(SolverKind::Cg),
            _ => Err(format!("expected `direct` or `cg`, got `{s}`")),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Direct => "direct",
            SolverKind::Cg => "cg",
        })
    }
}

#[derive(Debug, Clone)]
pub struct EllipticProblem<'a> {
    pub grid: &'a Grid,
    pub material: &'a MaterialModel,
    pub variant: Variant,
    pub phi: &'a ScalarField,
    /// `s` in `B + s·C` or `I − s·∇·(κ∇·)`.
    pub shift: f64,
    pub tol_lin: f64,
    pub max_iter: usize,
}

impl<'a> EllipticProblem<'a> {
    pub const DEFAULT_TOL: f64 = 1e-10;

    pub fn new(grid: &'a Grid, material: &'a MaterialModel, variant: Variant, phi: &'a ScalarField) -> Self {
        Self { grid, material, variant, phi, shift: 0.0, tol_lin: Self::DEFAULT_TOL, max_iter: 20_000 }
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn with_tolerance(mut self, tol_lin: f64, max_iter: usize) -> Self {
        self.tol_lin = tol_lin;
        self.max_iter = max_iter;
        self
    }

    pub fn cg_options(&self) -> CgOptions {
        CgOptions { rel_tol: self.tol_lin, abs_tol: 1e-300, max_iter: self.max_iter }
    }

    /// The matrix-free vector operator of a vector variant.
    pub fn elastic_operator(&self) -> Result<ElasticOperator> {
        self.grid.check_len(self.phi.len())?;
        if !self.grid.has_dirichlet_edge() {
            return Err(Error::NoDirichletBoundary);
        }
        let mat = self.material;
        let s = self.shift;
        let lame_at = |z: f64| -> Lame {
            match self.variant {
                Variant::PlainC | Variant::AugmentedC => mat.stiffness(z).scaled(2.0),
                Variant::ViscoB => mat.visco_stiffness(z).plus(&mat.stiffness(z).scaled(2.0 * s)),
                Variant::ScalarHelmholtz => unreachable!(),
            }
        };
        if !self.variant.is_vector() {
            return Err(Error::InvalidStepper("scalar variant has no vector operator".into()));
        }
        let lame = q1::interp_gp(self.grid, self.phi.values())
            .into_iter()
            .map(|z| [lame_at(z[0]), lame_at(z[1]), lame_at(z[2]), lame_at(z[3])])
            .collect();
        let aug = match self.variant {
            Variant::AugmentedC => {
                let w = self.grid.weights();
                let coeff = (0..self.grid.len())
                    .map(|k| {
                        let z = self.phi[k];
                        let a = mat.biot_willis(z);
                        w[k] * a * a * mat.modulus(z)
                    })
                    .collect();
                Some(coeff)
            }
            _ => None,
        };
        Ok(ElasticOperator::new(self.grid, lame, aug))
    }

    /// The scalar operator `I − s·∇·(κ(φ)∇·)` of [`Variant::ScalarHelmholtz`].
    pub fn helmholtz_operator(&self) -> Result<HelmholtzOperator> {
        let kappa: Vec<f64> = self.phi.values().iter().map(|&z| self.material.permeability(z)).collect();
        HelmholtzOperator::new(self.grid, &kappa, 1.0, self.shift)
    }
}

/// Symmetric elasticity-type operator on interleaved dofs.
#[derive(Debug, Clone)]
pub struct ElasticOperator {
    grid: Grid,
    /// Lamé pair at each Gauss point, per element.
    lame: Vec<[Lame; 4]>,
    /// `D` and the nodal weights `Wₖ·aₖ` of the `Dᵀ W a D` term.
    aug: Option<(DivMatrix, Vec<f64>)>,
}

#[inline]
fn unit_strains(q: &q1::Q1, g: usize) -> [[Sym2; 2]; 4] {
    let mut e = [[Sym2::ZERO; 2]; 4];
    for a in 0..4 {
        e[a][0] = Sym2::new(q.dx[g][a], 0.0, 0.5 * q.dy[g][a]);
        e[a][1] = Sym2::new(0.0, q.dy[g][a], 0.5 * q.dx[g][a]);
    }
    e
}

impl ElasticOperator {
    pub(crate) fn new(grid: &Grid, lame: Vec<[Lame; 4]>, aug: Option<Vec<f64>>) -> Self {
        let aug = aug.map(|a| (DivMatrix::new(grid), a));
        Self { grid: grid.clone(), lame, aug }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dofs(&self) -> usize {
        2 * self.grid.len()
    }

    fn is_fixed(&self, dof: usize) -> bool {
        self.grid.is_dirichlet_node(dof / 2)
    }

    /// Unconstrained bilinear form `K x` (no Dirichlet elimination).
    pub(crate) fn apply_free(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let q = self.grid.q1();
        for (e, nodes) in q1::elements(&self.grid) {
            let (ux, uy) = gather_dofs(&nodes, x);
            for g in 0..4 {
                let s = self.lame[e][g].apply(&q.strain(g, &ux, &uy));
                q.scatter_stress(g, &s, &nodes, out);
            }
        }
        if let Some((d, a)) = &self.aug {
            let mut div = vec![0.0; self.grid.len()];
            d.apply(x, &mut div);
            for (v, c) in div.iter_mut().zip(a) {
                *v *= c;
            }
            d.add_transpose(&div, out);
        }
    }

    /// `out = (PKP + I − P) x`
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mut xp = x.to_vec();
        for (k, &fixed) in self.grid.dirichlet_mask().iter().enumerate() {
            if fixed {
                xp[2 * k] = 0.0;
                xp[2 * k + 1] = 0.0;
            }
        }
        self.apply_free(&xp, out);
        for (k, &fixed) in self.grid.dirichlet_mask().iter().enumerate() {
            if fixed {
                out[2 * k] = x[2 * k];
                out[2 * k + 1] = x[2 * k + 1];
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut diag = vec![0.0; self.dofs()];
        let q = self.grid.q1();
        for (e, nodes) in q1::elements(&self.grid) {
            for g in 0..4 {
                let eps = unit_strains(q, g);
                for a in 0..4 {
                    for c in 0..2 {
                        let s = self.lame[e][g].apply(&eps[a][c]);
                        diag[2 * nodes[a] + c] += q.w * s.ddot(&eps[a][c]);
                    }
                }
            }
        }
        if let Some((d, a)) = &self.aug {
            for (row, &ak) in d.rows().iter().zip(a) {
                for &(dof, c) in row {
                    diag[dof] += ak * c * c;
                }
            }
        }
        for (i, v) in diag.iter_mut().enumerate() {
            if self.is_fixed(i) {
                *v = 1.0;
            }
        }
        diag
    }

    /// Half-bandwidth of the assembled matrix in the interleaved ordering.
    pub fn bandwidth(&self) -> usize {
        let nx = self.grid.nx();
        if self.aug.is_some() {
            2 * (2 * nx + 2) + 1
        } else {
            2 * (nx + 1) + 1
        }
    }

    /// Visits every lower-triangle entry `(i, j, v)`, `j ≤ i`, of the
    /// constrained operator (entries may repeat and must be summed).
    pub(crate) fn for_each_entry(&self, mut f: impl FnMut(usize, usize, f64)) {
        let q = self.grid.q1();
        let fixed = |dof: usize| self.is_fixed(dof);
        for (e, nodes) in q1::elements(&self.grid) {
            for g in 0..4 {
                let eps = unit_strains(q, g);
                for a in 0..4 {
                    for ca in 0..2 {
                        let i = 2 * nodes[a] + ca;
                        if fixed(i) {
                            continue;
                        }
                        let s = self.lame[e][g].apply(&eps[a][ca]);
                        for b in 0..4 {
                            for cb in 0..2 {
                                let j = 2 * nodes[b] + cb;
                                if j > i || fixed(j) {
                                    continue;
                                }
                                f(i, j, q.w * s.ddot(&eps[b][cb]));
                            }
                        }
                    }
                }
            }
        }
        if let Some((d, a)) = &self.aug {
            for (row, &ak) in d.rows().iter().zip(a) {
                for &(i, ci) in row {
                    if fixed(i) {
                        continue;
                    }
                    for &(j, cj) in row {
                        if j > i || fixed(j) {
                            continue;
                        }
                        f(i, j, ak * ci * cj);
                    }
                }
            }
        }
        for dof in 0..self.dofs() {
            if fixed(dof) {
                f(dof, dof, 1.0);
            }
        }
    }

    /// The constrained operator as a symmetric band matrix.
    pub fn assemble_band(&self) -> SymBand {
        let mut m = SymBand::zeros(self.dofs(), self.bandwidth());
        self.for_each_entry(|i, j, v| m.add(i, j, v));
        m
    }

    pub fn solve_cg(&self, rhs: &[f64], x: &mut [f64], opts: &CgOptions) -> std::result::Result<(), SolverFailure> {
        let inv: Vec<f64> = self.diagonal().iter().map(|d| 1.0 / d).collect();
        pcg(|v, out| self.apply(v, out), jacobi(&inv), None, rhs, x, opts, "elasticity CG")?;
        Ok(())
    }

    /// Prepares repeated solves with the chosen strategy.
    pub fn into_solver(self, kind: SolverKind, opts: CgOptions) -> Result<ElasticSolver> {
        let factor = match kind {
            SolverKind::Direct => Some(self.assemble_band().factor_spd()?),
            SolverKind::Cg => None,
        };
        let inv_diag = match kind {
            SolverKind::Cg => self.diagonal().iter().map(|d| 1.0 / d).collect(),
            SolverKind::Direct => Vec::new(),
        };
        Ok(ElasticSolver { op: self, factor, inv_diag, opts })
    }
}

/// A frozen vector operator together with its inversion strategy.
#[derive(Debug, Clone)]
pub struct ElasticSolver {
    op: ElasticOperator,
    factor: Option<BandLdl>,
    inv_diag: Vec<f64>,
    opts: CgOptions,
}

impl ElasticSolver {
    pub fn operator(&self) -> &ElasticOperator {
        &self.op
    }

    /// Solves with Dirichlet dofs of `rhs` forced to zero.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut b = rhs.to_vec();
        mask_dirichlet(self.op.grid(), &mut b);
        match &self.factor {
            Some(f) => {
                f.solve_in_place(&mut b);
                Ok(b)
            }
            None => {
                let mut x = vec![0.0; b.len()];
                pcg(|v, out| self.op.apply(v, out), jacobi(&self.inv_diag), None, &b, &mut x, &self.opts, "elasticity CG")?;
                Ok(x)
            }
        }
    }

    /// Solves `op·x = rhs` by CG preconditioned with this solver. Cheap when
    /// `op` is close to the frozen operator. `x` is the initial guess.
    pub fn solve_nearby(&self, op: &ElasticOperator, rhs: &[f64], x: &mut [f64], opts: &CgOptions) -> Result<()> {
        let mut b = rhs.to_vec();
        mask_dirichlet(self.op.grid(), &mut b);
        let precond = |r: &[f64], z: &mut [f64]| match &self.factor {
            Some(f) => {
                z.copy_from_slice(r);
                f.solve_in_place(z);
            }
            None => {
                for ((z, r), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
                    *z = r * d;
                }
            }
        };
        pcg(|v, out| op.apply(v, out), precond, None, &b, x, opts, "preconditioned elasticity CG")?;
        Ok(())
    }
}

/// Zeroes the Dirichlet dofs of an interleaved vector.
pub fn mask_dirichlet(grid: &Grid, dofs: &mut [f64]) {
    for (k, &fixed) in grid.dirichlet_mask().iter().enumerate() {
        if fixed {
            dofs[2 * k] = 0.0;
            dofs[2 * k + 1] = 0.0;
        }
    }
}

/// Lumped body-force load `∫ f·w`.
pub fn body_load(grid: &Grid, f: &VectorField2) -> Vec<f64> {
    let w = grid.weights();
    let mut out = vec![0.0; 2 * grid.len()];
    for k in 0..grid.len() {
        out[2 * k] = w[k] * f.x[k];
        out[2 * k + 1] = w[k] * f.y[k];
    }
    out
}

/// Trapezoidal traction load `∫_{Γ_N} g·w`; only boundary values on
/// Neumann-tagged edges are read.
pub fn traction_load(grid: &Grid, g: &VectorField2) -> Vec<f64> {
    let mut out = vec![0.0; 2 * grid.len()];
    for edge in Edge::ALL {
        if grid.tags().get(edge).is_dirichlet() {
            continue;
        }
        let nodes = grid.edge_nodes(edge);
        let h = grid.edge_spacing(edge);
        let last = nodes.len() - 1;
        for (i, &k) in nodes.iter().enumerate() {
            let wt = if i == 0 || i == last { 0.5 * h } else { h };
            out[2 * k] += wt * g.x[k];
            out[2 * k + 1] += wt * g.y[k];
        }
    }
    out
}

/// Eigenstrain load `∫ 2ℂ(φ)𝒯(φ):ℰ(w)` with Gauss-point coefficients.
pub fn eigenstrain_load(grid: &Grid, material: &MaterialModel, phi: &ScalarField) -> Vec<f64> {
    let gp: Vec<[Sym2; 4]> = q1::interp_gp(grid, phi.values())
        .into_iter()
        .map(|z| z.map(|z| material.stiffness(z).apply(&material.eigenstrain(z)).scale(2.0)))
        .collect();
    q1::stress_load(grid, &gp)
}

/// Pressure-type load `∫ s ∇·w` (the weak form of `−∇s`).
pub fn pressure_load(grid: &Grid, s: &[f64]) -> Vec<f64> {
    divergence_adjoint_dofs(grid, s)
}

/// Solves the vector problem `K v = ∫ f·w + ∫_{Γ_N} g·w` with `v = 0` on Γ_D
/// by Jacobi-preconditioned CG.
pub fn solve_elasticity(
    problem: &EllipticProblem<'_>,
    body_force: &VectorField2,
    traction: &VectorField2,
) -> Result<VectorField2> {
    if !problem.variant.is_vector() {
        return Err(Error::InvalidStepper("solve_elasticity needs a vector variant".into()));
    }
    let op = problem.elastic_operator()?;
    let grid = problem.grid;
    let mut rhs = body_load(grid, body_force);
    for (r, t) in rhs.iter_mut().zip(traction_load(grid, traction)) {
        *r += t;
    }
    mask_dirichlet(grid, &mut rhs);
    let mut x = vec![0.0; rhs.len()];
    op.solve_cg(&rhs, &mut x, &problem.cg_options())?;
    Ok(VectorField2::from_dofs(grid, &x))
}

/// Scalar operator, self-adjoint and positive (semi)definite in the lumped
/// inner product.
pub trait ScalarOperator {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn apply(&self, x: &[f64], out: &mut [f64]);

    fn diagonal(&self) -> Vec<f64>;

    /// Whether constants span the kernel.
    fn constants_in_kernel(&self) -> bool {
        false
    }

    /// `W·A` as a symmetric band matrix, when the operator is sparse.
    fn weighted_band(&self) -> Option<SymBand> {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityOperator {
    pub n: usize,
}

impl ScalarOperator for IdentityOperator {
    fn len(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }

    fn diagonal(&self) -> Vec<f64> {
        vec![1.0; self.n]
    }
}

/// `a·I − s·∇·(c∇·)` with zero flux; `a = 0` gives the semidefinite
/// Neumann operator.
#[derive(Debug, Clone)]
pub struct HelmholtzOperator {
    lap: FluxLaplacian,
    weights: Vec<f64>,
    nx: usize,
    mass: f64,
    shift: f64,
}

impl HelmholtzOperator {
    pub fn new(grid: &Grid, coeff: &[f64], mass: f64, shift: f64) -> Result<Self> {
        let lap = FluxLaplacian::new(grid, coeff)?;
        Ok(Self { lap, weights: grid.weights().to_vec(), nx: grid.nx(), mass, shift })
    }
}

impl ScalarOperator for HelmholtzOperator {
    fn len(&self) -> usize {
        self.weights.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.lap.apply(x, out);
        for (o, v) in out.iter_mut().zip(x) {
            *o = self.mass * v - self.shift * *o;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.lap.diagonal().iter().map(|d| self.mass - self.shift * d).collect()
    }

    fn constants_in_kernel(&self) -> bool {
        self.mass == 0.0
    }

    fn weighted_band(&self) -> Option<SymBand> {
        let n = self.len();
        let mut m = SymBand::zeros(n, self.nx);
        for (k, w) in self.weights.iter().enumerate() {
            m.add(k, k, self.mass * w);
        }
        for (i, j, g) in self.lap.faces() {
            let c = self.shift * g;
            m.add(i, i, c);
            m.add(j, j, c);
            m.add(i, j, -c);
        }
        Some(m)
    }
}

/// `I + s·∇·∇·(c∇·∇·)`, i.e. `I + s·L diag(c) L` with the unit zero-flux
/// Laplacian `L`.
#[derive(Debug, Clone)]
pub struct BiharmonicOperator {
    lap: FluxLaplacian,
    coeff: Vec<f64>,
    weights: Vec<f64>,
    nx: usize,
    shift: f64,
}

impl BiharmonicOperator {
    pub fn new(grid: &Grid, coeff: &[f64], shift: f64) -> Result<Self> {
        grid.check_len(coeff.len())?;
        if let Some((node, &value)) = coeff.iter().enumerate().find(|(_, c)| !(**c > 0.0)) {
            return Err(Error::CoefficientNotPositive { node, value });
        }
        Ok(Self {
            lap: FluxLaplacian::unit(grid),
            coeff: coeff.to_vec(),
            weights: grid.weights().to_vec(),
            nx: grid.nx(),
            shift,
        })
    }

    /// Sparse columns of the flux matrix `K`: `(row, value)` per node.
    fn flux_columns(&self) -> Vec<Vec<(usize, f64)>> {
        let n = self.len();
        let mut cols: Vec<Vec<(usize, f64)>> = (0..n).map(|k| vec![(k, 0.0)]).collect();
        for (i, j, g) in self.lap.faces() {
            cols[i][0].1 -= g;
            cols[j][0].1 -= g;
            cols[i].push((j, g));
            cols[j].push((i, g));
        }
        cols
    }
}

impl ScalarOperator for BiharmonicOperator {
    fn len(&self) -> usize {
        self.weights.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mut t = vec![0.0; x.len()];
        self.lap.apply(x, &mut t);
        for (t, c) in t.iter_mut().zip(&self.coeff) {
            *t *= c;
        }
        self.lap.apply(&t, out);
        for (o, v) in out.iter_mut().zip(x) {
            *o = v + self.shift * *o;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.len()];
        for (m, col) in self.flux_columns().iter().enumerate() {
            let f = self.coeff[m] / self.weights[m];
            for &(i, kim) in col {
                d[i] += f * kim * kim;
            }
        }
        d.iter().zip(&self.weights).map(|(d, w)| 1.0 + self.shift * d / w).collect()
    }

    fn weighted_band(&self) -> Option<SymBand> {
        let n = self.len();
        let mut m = SymBand::zeros(n, 2 * self.nx);
        for (k, w) in self.weights.iter().enumerate() {
            m.add(k, k, *w);
        }
        for (c, col) in self.flux_columns().iter().enumerate() {
            let f = self.shift * self.coeff[c] / self.weights[c];
            for &(i, ki) in col {
                for &(j, kj) in col {
                    if j <= i {
                        m.add(i, j, f * ki * kj);
                    }
                }
            }
        }
        Some(m)
    }
}

/// Solves `A x = rhs` by CG in the lumped inner product. For operators with
/// constants in the kernel the right-hand side is projected to zero mean and
/// the zero-mean solution is returned.
pub fn solve_scalar_spd(
    grid: &Grid,
    op: &dyn ScalarOperator,
    rhs: &ScalarField,
    opts: &CgOptions,
) -> Result<ScalarField> {
    grid.check_len(rhs.len())?;
    grid.check_len(op.len())?;
    let w = grid.weights();
    let mut b = rhs.values().to_vec();
    let kernel = op.constants_in_kernel();
    if kernel {
        let m = rhs.mean(grid);
        b.iter_mut().for_each(|v| *v -= m);
    }
    let inv: Vec<f64> = op.diagonal().iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = vec![0.0; b.len()];
    pcg(|v, out| op.apply(v, out), jacobi(&inv), Some(w), &b, &mut x, opts, "scalar CG")?;
    if kernel {
        let m = ScalarField::wrap(grid, x.clone()).mean(grid);
        x.iter_mut().for_each(|v| *v -= m);
    }
    Ok(ScalarField::wrap(grid, x))
}

/// A frozen scalar operator with its inversion strategy.
pub struct ScalarSolver<O: ScalarOperator> {
    op: O,
    weights: Vec<f64>,
    factor: Option<BandLdl>,
    inv_diag: Vec<f64>,
    opts: CgOptions,
}

impl<O: ScalarOperator> ScalarSolver<O> {
    pub fn new(grid: &Grid, op: O, kind: SolverKind, opts: CgOptions) -> Result<Self> {
        let factor = match (kind, op.constants_in_kernel()) {
            (SolverKind::Direct, false) => op.weighted_band().map(|m| m.factor_spd()).transpose()?,
            _ => None,
        };
        let inv_diag = op.diagonal().iter().map(|d| 1.0 / d).collect();
        Ok(Self { op, weights: grid.weights().to_vec(), factor, inv_diag, opts })
    }

    pub fn operator(&self) -> &O {
        &self.op
    }

    /// Solves `A x = rhs`, using `x` as the initial guess on the CG path.
    pub fn solve_into(&self, rhs: &[f64], x: &mut [f64]) -> Result<()> {
        match &self.factor {
            Some(f) => {
                for i in 0..rhs.len() {
                    x[i] = self.weights[i] * rhs[i];
                }
                f.solve_in_place(x);
            }
            None => {
                pcg(|v, out| self.op.apply(v, out), jacobi(&self.inv_diag), Some(&self.weights), rhs, x, &self.opts, "scalar CG")?;
            }
        }
        Ok(())
    }
}
