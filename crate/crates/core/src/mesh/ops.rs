use super::q1::{self, gather_dofs};
use super::{Grid, ScalarField, Sym2, SymTensorField, VectorField2};
use crate::error::{Error, Result};

/// Zero-flux second-order operator `∇·(c∇·)` in flux form.
///
/// Face coefficients are arithmetic means of the nodal coefficient; boundary
/// nodes own half (or quarter) control volumes, which is the same stencil as
/// ghost-node reflection. `apply_flux` returns `K u` with `K` symmetric
/// negative semidefinite and `K·1 = 0`; `apply` returns `W⁻¹ K u`.
#[derive(Debug, Clone)]
pub struct FluxLaplacian {
    nx: usize,
    ny: usize,
    /// conductance of the face between `(i, j)` and `(i+1, j)`, index `j·(nx−1)+i`
    gx: Vec<f64>,
    /// conductance of the face between `(i, j)` and `(i, j+1)`, index `j·nx+i`
    gy: Vec<f64>,
    inv_w: Vec<f64>,
}

impl FluxLaplacian {
    pub fn new(grid: &Grid, coeff: &[f64]) -> Result<Self> {
        grid.check_len(coeff.len())?;
        if let Some((node, &value)) = coeff.iter().enumerate().find(|(_, c)| !(**c > 0.0) || !c.is_finite()) {
            return Err(Error::CoefficientNotPositive { node, value });
        }
        let (nx, ny) = (grid.nx(), grid.ny());
        let (hx, hy) = (grid.hx(), grid.hy());
        let mut gx = vec![0.0; (nx - 1) * ny];
        for j in 0..ny {
            let len = if j == 0 || j == ny - 1 { 0.5 * hy } else { hy };
            for i in 0..nx - 1 {
                let k = grid.idx(i, j);
                gx[j * (nx - 1) + i] = 0.5 * (coeff[k] + coeff[k + 1]) * len / hx;
            }
        }
        let mut gy = vec![0.0; nx * (ny - 1)];
        for j in 0..ny - 1 {
            for i in 0..nx {
                let len = if i == 0 || i == nx - 1 { 0.5 * hx } else { hx };
                let k = grid.idx(i, j);
                gy[j * nx + i] = 0.5 * (coeff[k] + coeff[k + nx]) * len / hy;
            }
        }
        let inv_w = grid.weights().iter().map(|w| 1.0 / w).collect();
        Ok(Self { nx, ny, gx, gy, inv_w })
    }

    pub fn unit(grid: &Grid) -> Self {
        Self::new(grid, &vec![1.0; grid.len()]).expect("unit coefficient is positive")
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `out = K u` (flux balance, not divided by control volumes).
    pub fn apply_flux(&self, u: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        out.iter_mut().for_each(|o| *o = 0.0);
        for j in 0..ny {
            for i in 0..nx - 1 {
                let k = j * nx + i;
                let f = self.gx[j * (nx - 1) + i] * (u[k + 1] - u[k]);
                out[k] += f;
                out[k + 1] -= f;
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx {
                let k = j * nx + i;
                let f = self.gy[k] * (u[k + nx] - u[k]);
                out[k] += f;
                out[k + nx] -= f;
            }
        }
    }

    /// `out = W⁻¹ K u ≈ ∇·(c∇u)`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        self.apply_flux(u, out);
        for (o, iw) in out.iter_mut().zip(&self.inv_w) {
            *o *= iw;
        }
    }

    pub fn apply_field(&self, grid: &Grid, u: &ScalarField) -> ScalarField {
        let mut out = vec![0.0; u.len()];
        self.apply(u.values(), &mut out);
        ScalarField::wrap(grid, out)
    }

    /// Diagonal of `W⁻¹ K` (non-positive).
    pub fn diagonal(&self) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut d = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx - 1 {
                let g = self.gx[j * (nx - 1) + i];
                d[j * nx + i] -= g;
                d[j * nx + i + 1] -= g;
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx {
                let g = self.gy[j * nx + i];
                d[j * nx + i] -= g;
                d[(j + 1) * nx + i] -= g;
            }
        }
        d.iter().zip(&self.inv_w).map(|(a, b)| a * b).collect()
    }

    /// `(i, j, K_ij)` for every stored off-diagonal face coupling.
    pub(crate) fn faces(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let (nx, ny) = (self.nx, self.ny);
        let xs = (0..ny).flat_map(move |j| {
            (0..nx - 1).map(move |i| (j * nx + i, j * nx + i + 1, self.gx[j * (nx - 1) + i]))
        });
        let ys = (0..ny - 1).flat_map(move |j| (0..nx).map(move |i| (j * nx + i, (j + 1) * nx + i, self.gy[j * nx + i])));
        xs.chain(ys)
    }
}

/// `∇_h·(c ∇_h field)` with zero normal flux.
pub fn neumann_laplacian(grid: &Grid, field: &ScalarField, coeff: &ScalarField) -> Result<ScalarField> {
    grid.check_len(field.len())?;
    let op = FluxLaplacian::new(grid, coeff.values())?;
    Ok(op.apply_field(grid, field))
}

/// Lumped L² projection of the element strains onto the nodes: `(xx, yy, xy)`.
fn projected_strain(grid: &Grid, dofs: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let q = grid.q1();
    let n = grid.len();
    let (mut xx, mut yy, mut xy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (_, nodes) in q1::elements(grid) {
        let (ux, uy) = gather_dofs(&nodes, dofs);
        for g in 0..4 {
            let e = q.strain(g, &ux, &uy);
            for a in 0..4 {
                let s = q.w * q.n[g][a];
                xx[nodes[a]] += s * e.xx;
                yy[nodes[a]] += s * e.yy;
                xy[nodes[a]] += s * e.xy;
            }
        }
    }
    let w = grid.weights();
    for k in 0..n {
        xx[k] /= w[k];
        yy[k] /= w[k];
        xy[k] /= w[k];
    }
    (xx, yy, xy)
}

/// Nodal strain `ℰ_h(u)`: the lumped projection of the bilinear strain.
///
/// Centered in the interior (with a 1-4-1 transverse average); one-sided at
/// the boundary. Exact for linear displacements.
pub fn symmetric_gradient(grid: &Grid, u: &VectorField2) -> SymTensorField {
    let (xx, yy, xy) = projected_strain(grid, &u.to_dofs());
    let mut out = SymTensorField::zeros(grid);
    out.xx = xx;
    out.yy = yy;
    out.xy = xy;
    out
}

/// Nodal divergence, the trace of [`symmetric_gradient`].
pub fn divergence(grid: &Grid, u: &VectorField2) -> ScalarField {
    ScalarField::wrap(grid, divergence_dofs(grid, &u.to_dofs()))
}

pub(crate) fn divergence_dofs(grid: &Grid, dofs: &[f64]) -> Vec<f64> {
    let (xx, yy, _) = projected_strain(grid, dofs);
    xx.iter().zip(&yy).map(|(a, b)| a + b).collect()
}

/// `Dᵀ W s`, i.e. the load `w ↦ ∫ s_h ∇·w` (a weak `−∇s`), interleaved dofs.
pub(crate) fn divergence_adjoint_dofs(grid: &Grid, s: &[f64]) -> Vec<f64> {
    // Dᵀ W s = Σ_k s_k ∫ N_k ∇·w, and Σ_k s_k N_k is the interpolant of s.
    let gp: Vec<[Sym2; 4]> = q1::interp_gp(grid, s)
        .into_iter()
        .map(|v| [Sym2::iso(v[0]), Sym2::iso(v[1]), Sym2::iso(v[2]), Sym2::iso(v[3])])
        .collect();
    let q = grid.q1();
    // σ = s·I scattered against ℰ(w) has an off-diagonal of zero, so the
    // result is ∫ s (∂x w_x + ∂y w_y).
    let mut out = vec![0.0; 2 * grid.len()];
    for (e, nodes) in q1::elements(grid) {
        for g in 0..4 {
            q.scatter_stress(g, &gp[e][g], &nodes, &mut out);
        }
    }
    out
}

/// Adjoint of [`divergence`] in the lumped inner product: the nodal load
/// `∫ s_h ∇·w` as a vector field.
pub fn divergence_adjoint(grid: &Grid, s: &ScalarField) -> VectorField2 {
    VectorField2::from_dofs(grid, &divergence_adjoint_dofs(grid, s.values()))
}

/// Sparse rows of the nodal divergence `D` acting on interleaved dofs.
#[derive(Debug, Clone)]
pub(crate) struct DivMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl DivMatrix {
    pub fn new(grid: &Grid) -> Self {
        let q = grid.q1();
        let w = grid.weights();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(18); grid.len()];
        for (_, nodes) in q1::elements(grid) {
            for g in 0..4 {
                for a in 0..4 {
                    let s = q.w * q.n[g][a] / w[nodes[a]];
                    let row = &mut rows[nodes[a]];
                    for b in 0..4 {
                        for (dof, c) in [(2 * nodes[b], s * q.dx[g][b]), (2 * nodes[b] + 1, s * q.dy[g][b])] {
                            match row.iter_mut().find(|(d, _)| *d == dof) {
                                Some(e) => e.1 += c,
                                None => row.push((dof, c)),
                            }
                        }
                    }
                }
            }
        }
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
        }
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    /// `D x`
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(d, c)| c * x[d]).sum();
        }
    }

    /// `out += Dᵀ s`
    pub fn add_transpose(&self, s: &[f64], out: &mut [f64]) {
        for (row, &sk) in self.rows.iter().zip(s) {
            for &(d, c) in row {
                out[d] += c * sk;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::EdgeTags;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::unit_square(n, EdgeTags::clamped()).unwrap()
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let g = grid(7);
        let f = ScalarField::constant(&g, 5.0);
        let c = ScalarField::from_fn(&g, |x, y| 1.0 + x * y);
        let out = neumann_laplacian(&g, &f, &c).unwrap();
        assert!(out.max_abs() < 1e-12);
    }

    #[test]
    fn nonpositive_coefficient_is_rejected() {
        let g = grid(5);
        let f = ScalarField::zeros(&g);
        let mut c = ScalarField::constant(&g, 1.0);
        c[7] = 0.0;
        match neumann_laplacian(&g, &f, &c) {
            Err(Error::CoefficientNotPositive { node: 7, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cosine_mode_second_derivative() {
        let g = grid(64);
        let f = ScalarField::from_fn(&g, |x, _| (PI * x).cos());
        let one = ScalarField::constant(&g, 1.0);
        let out = neumann_laplacian(&g, &f, &one).unwrap();
        let err = (0..g.len())
            .map(|k| {
                let (x, _) = g.point(k);
                (out[k] + PI * PI * (PI * x).cos()).abs()
            })
            .fold(0.0, f64::max);
        let h = g.hx();
        // leading truncation term is π⁴h²/12
        assert!(err <= PI.powi(4) / 12.0 * h * h * 1.01, "err {err}");
    }

    #[test]
    fn flux_form_is_symmetric_with_zero_row_sums() {
        let g = Grid::new(5, 6, 1.0, 1.3, EdgeTags::clamped()).unwrap();
        let c: Vec<f64> = (0..g.len()).map(|k| 1.0 + 0.1 * k as f64).collect();
        let op = FluxLaplacian::new(&g, &c).unwrap();
        let n = g.len();
        let mut k_mat = vec![vec![0.0; n]; n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            op.apply_flux(&e, &mut col);
            for i in 0..n {
                k_mat[i][j] = col[i];
            }
            e[j] = 0.0;
        }
        for i in 0..n {
            assert!(k_mat[i].iter().sum::<f64>().abs() < 1e-12);
            for j in 0..n {
                assert!((k_mat[i][j] - k_mat[j][i]).abs() < 1e-12);
            }
        }
        let d = op.diagonal();
        for i in 0..n {
            assert!((d[i] - k_mat[i][i] / g.weights()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn strain_of_linear_fields() {
        let g = Grid::new(6, 5, 2.0, 1.0, EdgeTags::clamped()).unwrap();
        let stretch = VectorField2::from_fn(&g, |x, y| (x, y));
        let e = symmetric_gradient(&g, &stretch);
        for k in 0..g.len() {
            let s = e.at(k);
            assert!((s.xx - 1.0).abs() < 1e-12 && (s.yy - 1.0).abs() < 1e-12 && s.xy.abs() < 1e-12);
        }
        let div = divergence(&g, &stretch);
        assert!(div.values().iter().all(|v| (v - 2.0).abs() < 1e-12));

        let rot = VectorField2::from_fn(&g, |x, y| (-y, x));
        let e = symmetric_gradient(&g, &rot);
        assert!(e.max_abs_diff(&SymTensorField::zeros(&g)) < 1e-12);
        assert!(divergence(&g, &rot).max_abs() < 1e-12);

        let zero = VectorField2::zeros(&g);
        assert_eq!(symmetric_gradient(&g, &zero), SymTensorField::zeros(&g));
    }

    #[test]
    fn divergence_is_trace_of_strain() {
        let g = grid(6);
        let u = VectorField2::from_fn(&g, |x, y| ((3.0 * x * y).sin(), x * x - y));
        let e = symmetric_gradient(&g, &u);
        let d = divergence(&g, &u);
        for k in 0..g.len() {
            assert_eq!(d[k], e.xx[k] + e.yy[k]);
        }
    }

    #[test]
    fn divergence_adjoint_matches_weighted_transpose() {
        let g = Grid::new(5, 4, 1.0, 0.7, EdgeTags::clamped()).unwrap();
        let u = VectorField2::from_fn(&g, |x, y| (x.sin() + y, x * y * y));
        let s = ScalarField::from_fn(&g, |x, y| (2.0 * x - y).cos());
        let lhs = divergence(&g, &u).inner_h(&g, &s);
        let load = divergence_adjoint(&g, &s).to_dofs();
        let rhs: f64 = load.iter().zip(u.to_dofs()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-13, "{lhs} vs {rhs}");
    }

    #[test]
    fn sparse_divergence_matches() {
        let g = Grid::new(6, 5, 1.0, 0.8, EdgeTags::clamped()).unwrap();
        let u = VectorField2::from_fn(&g, |x, y| ((2.0 * x).sin() * y, x - y * y));
        let dofs = u.to_dofs();
        let d = DivMatrix::new(&g);
        let mut out = vec![0.0; g.len()];
        d.apply(&dofs, &mut out);
        let reference = divergence_dofs(&g, &dofs);
        for k in 0..g.len() {
            assert!((out[k] - reference[k]).abs() < 1e-12);
        }
        let s: Vec<f64> = (0..g.len()).map(|k| (k as f64).sin()).collect();
        let ws: Vec<f64> = s.iter().zip(g.weights()).map(|(a, b)| a * b).collect();
        let mut t = vec![0.0; 2 * g.len()];
        d.add_transpose(&ws, &mut t);
        let reference = divergence_adjoint_dofs(&g, &s);
        for i in 0..t.len() {
            assert!((t[i] - reference[i]).abs() < 1e-12);
        }
    }
}
