//! Dense reference matrices on small grids.
//!
//! Operators are densified column by column from their matrix-free
//! application, or composed from dense building blocks with LU solves. Dense
//! factorizations and eigen-decompositions come from `nalgebra` and share no
//! code with the solvers they check.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::biot::BiotOperators;
use crate::error::{Error, Result};
use crate::linalg::CgOptions;
use crate::materials::MaterialModel;
use crate::mesh::{divergence_adjoint_dofs, divergence_dofs, FluxLaplacian, Grid, ScalarField};
use crate::solvers::{
    BiharmonicOperator, EllipticProblem, HelmholtzOperator, ScalarOperator, SolverKind, Variant,
};

/// Largest grid side (nodes) accepted by [`densify`].
pub const MAX_SIDE: usize = 12;

/// Operators with a dense counterpart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorId {
    Identity,
    /// `∇·∇` with natural boundary conditions.
    Laplacian,
    /// `∇·(m(φ)∇)`
    MobilityLaplacian,
    /// `∇·(κ(φ)∇)`
    KappaLaplacian,
    /// Nodal divergence, vector to scalar.
    Divergence,
    /// Constrained plain elasticity `C(φ)`.
    PlainC,
    /// Constrained augmented elasticity `C̃(φ)`.
    AugmentedC,
    /// Constrained viscous operator `B(φ)`.
    ViscoB,
    BTilde,
    ATilde,
    /// `𝒜(φ) = −∇·(κ∇Ã·)`
    Fluid,
    /// `I − s·∇·(κ(φ)M(φ)∇)`
    Helmholtz(f64),
    /// `I + s·L m(φ) L`
    Biharmonic(f64),
}

impl OperatorId {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Laplacian => "laplacian",
            Self::MobilityLaplacian => "mobility-laplacian",
            Self::KappaLaplacian => "kappa-laplacian",
            Self::Divergence => "divergence",
            Self::PlainC => "plain-c",
            Self::AugmentedC => "augmented-c",
            Self::ViscoB => "visco-b",
            Self::BTilde => "b-tilde",
            Self::ATilde => "a-tilde",
            Self::Fluid => "fluid",
            Self::Helmholtz(_) => "helmholtz",
            Self::Biharmonic(_) => "biharmonic",
        }
    }

    /// Every operator, with unit shift for the shifted ones.
    pub fn all() -> [OperatorId; 13] {
        [
            Self::Identity,
            Self::Laplacian,
            Self::MobilityLaplacian,
            Self::KappaLaplacian,
            Self::Divergence,
            Self::PlainC,
            Self::AugmentedC,
            Self::ViscoB,
            Self::BTilde,
            Self::ATilde,
            Self::Fluid,
            Self::Helmholtz(1e-2),
            Self::Biharmonic(1e-3),
        ]
    }

    fn layout(&self) -> (Layout, Layout) {
        match self {
            Self::Divergence => (Layout::Scalar, Layout::Vector),
            Self::PlainC | Self::AugmentedC | Self::ViscoB => (Layout::Vector, Layout::Vector),
            _ => (Layout::Scalar, Layout::Scalar),
        }
    }
}

impl FromStr for OperatorId {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::all().into_iter().find(|o| o.label() == s).ok_or_else(|| format!("unknown operator `{s}`"))
    }
}

/// How matrix rows or columns map to grid unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// One value per node, row-major.
    Scalar,
    /// Interleaved `(x, y)` per node.
    Vector,
}

impl Layout {
    fn size(&self, grid: &Grid) -> usize {
        match self {
            Self::Scalar => grid.len(),
            Self::Vector => 2 * grid.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub matrix: DMatrix<f64>,
    pub rows: Layout,
    pub cols: Layout,
    pub label: &'static str,
}

impl DenseOperator {
    fn from_columns(
        grid: &Grid,
        rows: Layout,
        cols: Layout,
        label: &'static str,
        mut apply: impl FnMut(&[f64], &mut [f64]) -> Result<()>,
    ) -> Result<Self> {
        let (m, n) = (rows.size(grid), cols.size(grid));
        let mut matrix = DMatrix::zeros(m, n);
        let mut e = vec![0.0; n];
        let mut out = vec![0.0; m];
        for j in 0..n {
            e[j] = 1.0;
            out.iter_mut().for_each(|v| *v = 0.0);
            apply(&e, &mut out)?;
            e[j] = 0.0;
            for i in 0..m {
                matrix[(i, j)] = out[i];
            }
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dense operator"));
        }
        Ok(Self { matrix, rows, cols, label })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(x)).as_slice().to_vec()
    }
}

fn check_size(grid: &Grid) -> Result<()> {
    if grid.nx() > MAX_SIDE || grid.ny() > MAX_SIDE {
        return Err(Error::GridTooLarge { nx: grid.nx(), ny: grid.ny(), limit: MAX_SIDE });
    }
    Ok(())
}

fn nodal(phi: &ScalarField, f: impl Fn(f64) -> f64) -> Vec<f64> {
    phi.values().iter().map(|&z| f(z)).collect()
}

/// Builds the dense matrix of `op` at `phi` by applying the matrix-free
/// operator to every unit vector.
pub fn densify(op: OperatorId, grid: &Grid, material: &MaterialModel, phi: &ScalarField) -> Result<DenseOperator> {
    check_size(grid)?;
    grid.check_len(phi.len())?;
    let (rows, cols) = op.layout();
    let label = op.label();
    let dense = |apply: &mut dyn FnMut(&[f64], &mut [f64]) -> Result<()>| {
        DenseOperator::from_columns(grid, rows, cols, label, apply)
    };
    match op {
        OperatorId::Identity => dense(&mut |x, out| {
            out.copy_from_slice(x);
            Ok(())
        }),
        OperatorId::Laplacian | OperatorId::MobilityLaplacian | OperatorId::KappaLaplacian => {
            let lap = match op {
                OperatorId::Laplacian => FluxLaplacian::unit(grid),
                OperatorId::MobilityLaplacian => FluxLaplacian::new(grid, &nodal(phi, |z| material.mobility(z)))?,
                _ => FluxLaplacian::new(grid, &nodal(phi, |z| material.permeability(z)))?,
            };
            dense(&mut |x, out| {
                lap.apply(x, out);
                Ok(())
            })
        }
        OperatorId::Divergence => dense(&mut |x, out| {
            out.copy_from_slice(&divergence_dofs(grid, x));
            Ok(())
        }),
        OperatorId::PlainC | OperatorId::AugmentedC | OperatorId::ViscoB => {
            let variant = match op {
                OperatorId::PlainC => Variant::PlainC,
                OperatorId::AugmentedC => Variant::AugmentedC,
                _ => Variant::ViscoB,
            };
            let c = EllipticProblem::new(grid, material, variant, phi).elastic_operator()?;
            dense(&mut |x, out| {
                c.apply(x, out);
                Ok(())
            })
        }
        OperatorId::BTilde | OperatorId::ATilde | OperatorId::Fluid => {
            let ops = BiotOperators::new(grid, material, phi, SolverKind::Direct, CgOptions::default())?;
            dense(&mut |x, out| {
                let v = match op {
                    OperatorId::BTilde => ops.b_tilde(x)?,
                    OperatorId::ATilde => ops.a_tilde(x)?,
                    _ => ops.fluid(x)?,
                };
                out.copy_from_slice(&v);
                Ok(())
            })
        }
        OperatorId::Helmholtz(s) => {
            let c = nodal(phi, |z| material.permeability(z) * material.modulus(z));
            let h = HelmholtzOperator::new(grid, &c, 1.0, s)?;
            dense(&mut |x, out| {
                h.apply(x, out);
                Ok(())
            })
        }
        OperatorId::Biharmonic(s) => {
            let b = BiharmonicOperator::new(grid, &nodal(phi, |z| material.mobility(z)), s)?;
            dense(&mut |x, out| {
                b.apply(x, out);
                Ok(())
            })
        }
    }
}

/// Dense `C(φ)`, `C̃(φ)` without constraints, the divergence `D` and the
/// masked adjoint `PDᵀW`.
struct Blocks {
    plain: DMatrix<f64>,
    aug: DMatrix<f64>,
    div: DMatrix<f64>,
    div_adj: DMatrix<f64>,
}

fn blocks(grid: &Grid, material: &MaterialModel, phi: &ScalarField) -> Result<Blocks> {
    let plain = densify(OperatorId::PlainC, grid, material, phi)?.matrix;
    let aug = densify(OperatorId::AugmentedC, grid, material, phi)?.matrix;
    let div = densify(OperatorId::Divergence, grid, material, phi)?.matrix;
    let n = grid.len();
    let mut div_adj = DMatrix::zeros(2 * n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = divergence_adjoint_dofs(grid, &e);
        e[j] = 0.0;
        for (i, v) in col.iter().enumerate() {
            if !grid.is_dirichlet_node(i / 2) {
                div_adj[(i, j)] = *v;
            }
        }
    }
    Ok(Blocks { plain, aug, div, div_adj })
}

fn lu_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone().lu().solve(b).ok_or(Error::NotPositiveDefinite { row: 0, pivot: 0.0 })
}

/// `B̃ = M⁻¹ + αD C⁻¹ PDᵀW α` composed from dense blocks with LU solves.
pub fn compose_b_tilde(grid: &Grid, material: &MaterialModel, phi: &ScalarField) -> Result<DMatrix<f64>> {
    check_size(grid)?;
    let b = blocks(grid, material, phi)?;
    let alpha = DMatrix::from_diagonal(&DVector::from_vec(nodal(phi, |z| material.biot_willis(z))));
    let inv_m = DMatrix::from_diagonal(&DVector::from_vec(nodal(phi, |z| 1.0 / material.modulus(z))));
    let y = lu_solve(&b.plain, &(&b.div_adj * &alpha))?;
    Ok(inv_m + &alpha * &b.div * y)
}

/// `Ã = M(I − αD C̃⁻¹ PDᵀW αM)` composed from dense blocks with LU solves.
pub fn compose_a_tilde(grid: &Grid, material: &MaterialModel, phi: &ScalarField) -> Result<DMatrix<f64>> {
    check_size(grid)?;
    let b = blocks(grid, material, phi)?;
    let n = grid.len();
    let alpha = DMatrix::from_diagonal(&DVector::from_vec(nodal(phi, |z| material.biot_willis(z))));
    let m = DMatrix::from_diagonal(&DVector::from_vec(nodal(phi, |z| material.modulus(z))));
    let y = lu_solve(&b.aug, &(&b.div_adj * &alpha * &m))?;
    Ok(&m * (DMatrix::identity(n, n) - &alpha * &b.div * y))
}

/// `𝒜 = −L_κ Ã` from dense blocks.
pub fn compose_fluid(grid: &Grid, material: &MaterialModel, phi: &ScalarField) -> Result<DMatrix<f64>> {
    let lap = densify(OperatorId::KappaLaplacian, grid, material, phi)?.matrix;
    Ok(-lap * compose_a_tilde(grid, material, phi)?)
}

/// Dense solve of `A x = b` by partial-pivoting LU.
pub fn dense_solve(a: &DenseOperator, b: &[f64]) -> Result<Vec<f64>> {
    let x = a.matrix.clone().lu().solve(&DVector::from_column_slice(b)).ok_or(Error::NotPositiveDefinite { row: 0, pivot: 0.0 })?;
    Ok(x.as_slice().to_vec())
}

/// The lumped-mass Gram matrix `W`.
pub fn mass_matrix(grid: &Grid) -> DenseOperator {
    DenseOperator {
        matrix: DMatrix::from_diagonal(&DVector::from_column_slice(grid.weights())),
        rows: Layout::Scalar,
        cols: Layout::Scalar,
        label: "mass",
    }
}

/// Spectrum of `G·A` symmetrized by the Cholesky factor of the Gram matrix
/// `G` (`L⁻¹ G A L⁻ᵀ`); plain `A` without a weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    /// Ascending eigenvalues of the symmetric part.
    pub eigenvalues: Vec<f64>,
    /// Largest `|Im λ|` of the unsymmetrized matrix, relative to its scale.
    pub imaginary: f64,
    /// `‖S − Sᵀ‖ / ‖S‖` in the max norm.
    pub asymmetry: f64,
}

impl SpectralReport {
    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Non-real residue above `1e−8`.
    pub fn flagged(&self) -> bool {
        self.imaginary > 1e-8
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Relative asymmetry `‖A − Aᵀ‖ / ‖A‖` in the max norm.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    max_abs(&(m - m.transpose())) / max_abs(m).max(f64::MIN_POSITIVE)
}

pub fn spectral_check(matrix: &DenseOperator, weight: Option<&DenseOperator>) -> Result<SpectralReport> {
    let s = match weight {
        None => matrix.matrix.clone(),
        Some(w) => {
            let g = &w.matrix;
            if asymmetry(g) > 1e-8 {
                return Err(Error::IndefiniteWeight);
            }
            let g = (g + g.transpose()) * 0.5;
            let l = g.clone().cholesky().ok_or(Error::IndefiniteWeight)?.l();
            let l_inv = l.clone().try_inverse().ok_or(Error::IndefiniteWeight)?;
            &l_inv * (&g * &matrix.matrix) * l_inv.transpose()
        }
    };
    let scale = max_abs(&s).max(f64::MIN_POSITIVE);
    let imaginary = s.clone().complex_eigenvalues().iter().fold(0.0, |a: f64, z| a.max(z.im.abs())) / scale;
    let asym = asymmetry(&s);
    let sym = (&s + s.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(SpectralReport { eigenvalues, imaginary, asymmetry: asym })
}

/// Outcome of [`verify_operator_identities`].
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    /// `‖ÃB̃ − I‖_max`
    pub ab_defect: f64,
    /// `‖B̃Ã − I‖_max`
    pub ba_defect: f64,
    /// Relative asymmetry of `WB̃` and `WÃ`.
    pub b_symmetry: f64,
    pub a_symmetry: f64,
    /// Smallest eigenvalues of `B̃`, `Ã` in the lumped inner product.
    pub b_min_eig: f64,
    pub a_min_eig: f64,
    /// Norm-equivalence constants: `c‖θ‖² ≤ ‖θ‖²_H ≤ C‖θ‖²`.
    pub c_lower: f64,
    pub c_upper: f64,
    /// `−β` bounds the `H`-symmetrized spectrum of `𝒜` from below.
    pub beta: f64,
    /// Non-real residue of that spectrum.
    pub fluid_imaginary: f64,
}

/// Thresholds used for the PASS/FAIL column.
pub const IDENTITY_TOL: f64 = 1e-7;
pub const SYMMETRY_TOL: f64 = 1e-9;
pub const SPECTRUM_TOL: f64 = 1e-8;

impl IdentityReport {
    /// `(name, value, threshold, pass)` per check.
    pub fn checks(&self) -> Vec<(&'static str, f64, f64, bool)> {
        vec![
            ("ab_defect", self.ab_defect, IDENTITY_TOL, self.ab_defect <= IDENTITY_TOL),
            ("ba_defect", self.ba_defect, IDENTITY_TOL, self.ba_defect <= IDENTITY_TOL),
            ("b_symmetry", self.b_symmetry, SYMMETRY_TOL, self.b_symmetry <= SYMMETRY_TOL),
            ("a_symmetry", self.a_symmetry, SYMMETRY_TOL, self.a_symmetry <= SYMMETRY_TOL),
            ("b_min_eig", self.b_min_eig, 0.0, self.b_min_eig > 0.0),
            ("a_min_eig", self.a_min_eig, 0.0, self.a_min_eig > 0.0),
            ("c_lower", self.c_lower, 0.0, self.c_lower > 0.0 && self.c_lower <= self.c_upper),
            ("c_upper", self.c_upper, f64::INFINITY, self.c_upper.is_finite()),
            ("beta", self.beta, f64::INFINITY, self.beta.is_finite()),
            ("fluid_imaginary", self.fluid_imaginary, SPECTRUM_TOL, self.fluid_imaginary <= SPECTRUM_TOL),
        ]
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.3)
    }

    /// `check,value,threshold,pass` lines without a header.
    pub fn csv_rows(&self) -> Vec<String> {
        self.checks().iter().map(|(n, v, t, p)| format!("{n},{v:e},{t:e},{}", if *p { "PASS" } else { "FAIL" })).collect()
    }
}

impl fmt::Display for IdentityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<16} {:>12} {:>12}  result", "check", "value", "threshold")?;
        for (n, v, t, p) in self.checks() {
            writeln!(f, "{n:<16} {v:>12.3e} {t:>12.3e}  {}", if p { "PASS" } else { "FAIL" })?;
        }
        Ok(())
    }
}

/// `W^{1/2} A W^{-1/2}` for a matrix self-adjoint in the lumped product.
fn symmetrize(grid: &Grid, a: &DMatrix<f64>) -> DMatrix<f64> {
    let w = grid.weights();
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| w[i].sqrt() * a[(i, j)] / w[j].sqrt())
}

/// Dense conjugacy, symmetry, norm-equivalence and dissipativity checks of
/// the Biot operators at `phi`.
pub fn verify_operator_identities(grid: &Grid, material: &MaterialModel, phi: &ScalarField) -> Result<IdentityReport> {
    let b = densify(OperatorId::BTilde, grid, material, phi)?;
    let a = densify(OperatorId::ATilde, grid, material, phi)?;
    let fluid = densify(OperatorId::Fluid, grid, material, phi)?;
    let n = grid.len();
    let id = DMatrix::<f64>::identity(n, n);
    let ab_defect = max_abs(&(&a.matrix * &b.matrix - &id));
    let ba_defect = max_abs(&(&b.matrix * &a.matrix - &id));

    let bs = symmetrize(grid, &b.matrix);
    let as_ = symmetrize(grid, &a.matrix);
    let eig = |m: &DMatrix<f64>| {
        let mut e: Vec<f64> = ((m + m.transpose()) * 0.5).symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    };
    let be = eig(&bs);
    let ae = eig(&as_);

    let mass = mass_matrix(grid);
    let gram = DenseOperator { matrix: &mass.matrix * &a.matrix, ..mass };
    let gram = DenseOperator { matrix: (&gram.matrix + gram.matrix.transpose()) * 0.5, ..gram };
    let spec = spectral_check(&fluid, Some(&gram))?;
    Ok(IdentityReport {
        ab_defect,
        ba_defect,
        b_symmetry: asymmetry(&bs),
        a_symmetry: asymmetry(&as_),
        b_min_eig: be[0],
        a_min_eig: ae[0],
        c_lower: ae[0],
        c_upper: ae[n - 1],
        beta: (-spec.min()).max(0.0),
        fluid_imaginary: spec.imaginary,
    })
}
