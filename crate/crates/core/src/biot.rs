//! Pressure and fluid-content operators of the quasi-static Biot system.
//!
//! With `C = C(φ)` the plain elasticity operator, `C̃` its augmented variant,
//! `D` the nodal divergence and `W` the lumped mass:
//!
//! - `B̃ q = q/M + α D C⁻¹ Dᵀ W (α q)` maps pressure to fluid content,
//! - `Ã θ = M (θ − α D C̃⁻¹ Dᵀ W (α M θ))` maps fluid content to pressure,
//! - `𝒜 θ = −∇·(κ ∇(Ã θ))` is the fluid operator.
//!
//! `B̃` and `Ã` are self-adjoint and positive definite in the lumped inner
//! product and inverse to each other (Sherman–Morrison–Woodbury).

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::linalg::{jacobi, pcg, BandLdl, CgOptions, SymBand};
use crate::materials::MaterialModel;
use crate::mesh::{divergence_adjoint_dofs, DivMatrix, FluxLaplacian, Grid, ScalarField};
use crate::solvers::{EllipticProblem, ElasticSolver, SolverKind, Variant};

/// Frozen `B̃(φ)`, `Ã(φ)`, `L_κ(φ)` at one phase field.
#[derive(Debug, Clone)]
pub struct BiotOperators {
    grid: Grid,
    div: DivMatrix,
    modulus: Vec<f64>,
    alpha: Vec<f64>,
    kappa: FluxLaplacian,
    plain: ElasticSolver,
    aug: Option<ElasticSolver>,
    kind: SolverKind,
    opts: CgOptions,
    conjugate: Option<(f64, BandLdl)>,
}

impl BiotOperators {
    /// Builds every operator; `opts` controls the CG path (inner elasticity
    /// solves use a tolerance 100 times tighter).
    pub fn new(grid: &Grid, material: &MaterialModel, phi: &ScalarField, kind: SolverKind, opts: CgOptions) -> Result<Self> {
        Self::build(grid, material, phi, kind, opts, true)
    }

    /// Without the augmented operator: `Ã` is unavailable.
    pub fn without_augmented(
        grid: &Grid,
        material: &MaterialModel,
        phi: &ScalarField,
        kind: SolverKind,
        opts: CgOptions,
    ) -> Result<Self> {
        Self::build(grid, material, phi, kind, opts, false)
    }

    fn build(
        grid: &Grid,
        material: &MaterialModel,
        phi: &ScalarField,
        kind: SolverKind,
        opts: CgOptions,
        with_aug: bool,
    ) -> Result<Self> {
        grid.check_len(phi.len())?;
        let inner = CgOptions { rel_tol: opts.rel_tol * 1e-2, ..opts };
        let plain = EllipticProblem::new(grid, material, Variant::PlainC, phi).elastic_operator()?.into_solver(kind, inner)?;
        let aug = if with_aug {
            Some(EllipticProblem::new(grid, material, Variant::AugmentedC, phi).elastic_operator()?.into_solver(kind, inner)?)
        } else {
            None
        };
        let kappa: Vec<f64> = phi.values().iter().map(|&z| material.permeability(z)).collect();
        Ok(Self {
            grid: grid.clone(),
            div: DivMatrix::new(grid),
            modulus: phi.values().iter().map(|&z| material.modulus(z)).collect(),
            alpha: phi.values().iter().map(|&z| material.biot_willis(z)).collect(),
            kappa: FluxLaplacian::new(grid, &kappa)?,
            plain,
            aug,
            kind,
            opts,
            conjugate: None,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn modulus(&self) -> &[f64] {
        &self.modulus
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn plain_solver(&self) -> &ElasticSolver {
        &self.plain
    }

    pub fn augmented_solver(&self) -> Option<&ElasticSolver> {
        self.aug.as_ref()
    }

    /// `L_κ x = ∇·(κ∇x)`
    pub fn kappa_laplacian(&self) -> &FluxLaplacian {
        &self.kappa
    }

    /// `B̃ q`
    pub fn b_tilde(&self, q: &[f64]) -> Result<Vec<f64>> {
        let aq: Vec<f64> = q.iter().zip(&self.alpha).map(|(q, a)| a * q).collect();
        let v = self.plain.solve(&divergence_adjoint_dofs(&self.grid, &aq))?;
        let mut dv = vec![0.0; q.len()];
        self.div.apply(&v, &mut dv);
        Ok((0..q.len()).map(|k| q[k] / self.modulus[k] + self.alpha[k] * dv[k]).collect())
    }

    /// `Ã θ`
    pub fn a_tilde(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let aug = self.aug.as_ref().ok_or_else(|| Error::InvalidStepper("augmented operator not built".into()))?;
        let s: Vec<f64> = (0..theta.len()).map(|k| self.alpha[k] * self.modulus[k] * theta[k]).collect();
        let v = aug.solve(&divergence_adjoint_dofs(&self.grid, &s))?;
        let mut dv = vec![0.0; theta.len()];
        self.div.apply(&v, &mut dv);
        Ok((0..theta.len()).map(|k| self.modulus[k] * (theta[k] - self.alpha[k] * dv[k])).collect())
    }

    /// `𝒜 θ = −L_κ(Ã θ)`
    pub fn fluid(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let p = self.a_tilde(theta)?;
        let mut out = vec![0.0; p.len()];
        self.kappa.apply(&p, &mut out);
        out.iter_mut().for_each(|v| *v = -*v);
        Ok(out)
    }

    /// Factors the conjugate system `B̃ − dt·L_κ` on the direct path. The CG
    /// path needs no preparation.
    pub fn prepare_conjugate(&mut self, dt: f64) -> Result<()> {
        if self.kind == SolverKind::Direct && self.conjugate.as_ref().is_none_or(|(d, _)| *d != dt) {
            let f = self.assemble_saddle(dt).factor()?;
            self.conjugate = Some((dt, f));
        }
        Ok(())
    }

    /// Quasi-definite saddle form of `W(B̃ − dt·L_κ)` with unknowns
    /// `(q, v)`, `v = C⁻¹DᵀWαq`, ordered `[q_k, vx_k, vy_k]` per node:
    ///
    /// ```text
    /// [ W/M − dt·K_κ   WαD ] [q]   [W r]
    /// [ DᵀWα           −C  ] [v] = [ 0 ]
    /// ```
    fn assemble_saddle(&self, dt: f64) -> SymBand {
        let n = self.grid.len();
        let nx = self.grid.nx();
        let w = self.grid.weights();
        let mut m = SymBand::zeros(3 * n, 3 * nx + 5);
        let vidx = |dof: usize| 3 * (dof / 2) + 1 + dof % 2;
        for k in 0..n {
            m.add(3 * k, 3 * k, w[k] / self.modulus[k]);
        }
        for (i, j, g) in self.kappa.faces() {
            m.add(3 * i, 3 * i, dt * g);
            m.add(3 * j, 3 * j, dt * g);
            m.add(3 * i, 3 * j, -dt * g);
        }
        for (k, row) in self.div.rows().iter().enumerate() {
            let c = w[k] * self.alpha[k];
            for &(dof, d) in row {
                if !self.grid.is_dirichlet_node(dof / 2) {
                    m.add(3 * k, vidx(dof), c * d);
                }
            }
        }
        self.plain.operator().for_each_entry(|i, j, v| m.add(vidx(i), vidx(j), -v));
        m
    }

    /// Solves `(B̃ − dt·L_κ) q = r`. `q` is the initial guess on the CG path.
    pub fn solve_conjugate(&self, dt: f64, r: &[f64], q: &mut [f64]) -> Result<()> {
        if let Some((d, f)) = &self.conjugate {
            if *d == dt {
                let n = r.len();
                let w = self.grid.weights();
                let mut x = vec![0.0; 3 * n];
                for k in 0..n {
                    x[3 * k] = w[k] * r[k];
                }
                f.solve_in_place(&mut x);
                for k in 0..n {
                    q[k] = x[3 * k];
                }
                return Ok(());
            }
        }
        let lap_diag = self.kappa.diagonal();
        let inv: Vec<f64> = (0..r.len()).map(|k| 1.0 / (1.0 / self.modulus[k] - dt * lap_diag[k])).collect();
        let failure = RefCell::new(None);
        let mut lap = vec![0.0; r.len()];
        let apply = |x: &[f64], out: &mut [f64]| match self.b_tilde(x) {
            Ok(b) => {
                self.kappa.apply(x, &mut lap);
                for k in 0..x.len() {
                    out[k] = b[k] - dt * lap[k];
                }
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                out.iter_mut().for_each(|o| *o = f64::NAN);
            }
        };
        let res = pcg(apply, jacobi(&inv), Some(self.grid.weights()), r, q, &self.opts, "conjugate fluid CG");
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        res?;
        Ok(())
    }
}

/// `B̃(φ) q`, one elasticity solve per application.
pub fn apply_b_tilde(grid: &Grid, material: &MaterialModel, phi: &ScalarField, q: &ScalarField) -> Result<ScalarField> {
    let ops = BiotOperators::without_augmented(grid, material, phi, SolverKind::Direct, CgOptions::default())?;
    Ok(ScalarField::wrap(grid, ops.b_tilde(q.values())?))
}

/// `Ã(φ) θ`, one augmented elasticity solve per application.
pub fn apply_a_tilde(grid: &Grid, material: &MaterialModel, phi: &ScalarField, theta: &ScalarField) -> Result<ScalarField> {
    let ops = BiotOperators::new(grid, material, phi, SolverKind::Direct, CgOptions::default())?;
    Ok(ScalarField::wrap(grid, ops.a_tilde(theta.values())?))
}

/// `𝒜(φ) θ = −∇·(κ(φ)∇(Ã(φ)θ))`.
///
/// The space `H` in which `𝒜` is self-adjoint is weighted by `Ã(φ₀)`; that
/// choice does not change the strong form, so only `φ` enters here.
pub fn apply_fluid_operator(
    grid: &Grid,
    material: &MaterialModel,
    phi: &ScalarField,
    theta: &ScalarField,
) -> Result<ScalarField> {
    let ops = BiotOperators::new(grid, material, phi, SolverKind::Direct, CgOptions::default())?;
    Ok(ScalarField::wrap(grid, ops.fluid(theta.values())?))
}

/// Fluid-content space with the inner product `(u, v)_H = (u, Ã(φ₀)v)`.
#[derive(Debug, Clone)]
pub struct WeightedSpaceH {
    ops: BiotOperators,
}

impl WeightedSpaceH {
    pub fn new(grid: &Grid, material: &MaterialModel, phi0: &ScalarField) -> Result<Self> {
        Ok(Self { ops: BiotOperators::new(grid, material, phi0, SolverKind::Direct, CgOptions::default())? })
    }

    pub fn operators(&self) -> &BiotOperators {
        &self.ops
    }

    pub fn inner(&self, u: &ScalarField, v: &ScalarField) -> Result<f64> {
        let av = self.ops.a_tilde(v.values())?;
        Ok(self.ops.grid().weights().iter().zip(u.values()).zip(&av).map(|((w, a), b)| w * a * b).sum())
    }

    pub fn norm(&self, u: &ScalarField) -> Result<f64> {
        Ok(self.inner(u, u)?.max(0.0).sqrt())
    }
}

/// `(u, v)_H`
pub fn inner_h(space: &WeightedSpaceH, u: &ScalarField, v: &ScalarField) -> Result<f64> {
    space.inner(u, v)
}
