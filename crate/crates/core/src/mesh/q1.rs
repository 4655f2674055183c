//! Bilinear (Q1) element kernel on the uniform grid with 2×2 Gauss quadrature.
//!
//! Every element has the same geometry, so shape-function values and
//! derivatives at the four Gauss points are computed once per grid.

use super::{Grid, Sym2};

/// Reference coordinates of the local nodes (counter-clockwise from lower-left).
const XI: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
const ETA: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Q1 {
    /// Physical quadrature weight, identical for all four points.
    pub w: f64,
    /// `n[g][a]`: shape function `a` at Gauss point `g`.
    pub n: [[f64; 4]; 4],
    pub dx: [[f64; 4]; 4],
    pub dy: [[f64; 4]; 4],
}

impl Q1 {
    pub fn new(hx: f64, hy: f64) -> Self {
        let s = 1.0 / 3f64.sqrt();
        let gp = [(-s, -s), (s, -s), (s, s), (-s, s)];
        let mut n = [[0.0; 4]; 4];
        let mut dx = [[0.0; 4]; 4];
        let mut dy = [[0.0; 4]; 4];
        for (g, &(xi, eta)) in gp.iter().enumerate() {
            for a in 0..4 {
                n[g][a] = 0.25 * (1.0 + XI[a] * xi) * (1.0 + ETA[a] * eta);
                dx[g][a] = 0.25 * XI[a] * (1.0 + ETA[a] * eta) * 2.0 / hx;
                dy[g][a] = 0.25 * ETA[a] * (1.0 + XI[a] * xi) * 2.0 / hy;
            }
        }
        Self { w: 0.25 * hx * hy, n, dx, dy }
    }

    #[inline]
    pub fn strain(&self, g: usize, ux: &[f64; 4], uy: &[f64; 4]) -> Sym2 {
        let mut e = Sym2::ZERO;
        for a in 0..4 {
            e.xx += self.dx[g][a] * ux[a];
            e.yy += self.dy[g][a] * uy[a];
            e.xy += 0.5 * (self.dy[g][a] * ux[a] + self.dx[g][a] * uy[a]);
        }
        e
    }

    #[inline]
    pub fn interp(&self, g: usize, v: &[f64; 4]) -> f64 {
        self.n[g][0] * v[0] + self.n[g][1] * v[1] + self.n[g][2] * v[2] + self.n[g][3] * v[3]
    }

    /// Adds `w·σ : ℰ(N_a e_c)` for every local dof into `out` (interleaved).
    #[inline]
    pub fn scatter_stress(&self, g: usize, s: &Sym2, nodes: &[usize; 4], out: &mut [f64]) {
        for a in 0..4 {
            let k = nodes[a];
            out[2 * k] += self.w * (s.xx * self.dx[g][a] + s.xy * self.dy[g][a]);
            out[2 * k + 1] += self.w * (s.yy * self.dy[g][a] + s.xy * self.dx[g][a]);
        }
    }
}

#[inline]
pub(crate) fn gather(nodes: &[usize; 4], v: &[f64]) -> [f64; 4] {
    [v[nodes[0]], v[nodes[1]], v[nodes[2]], v[nodes[3]]]
}

#[inline]
pub(crate) fn gather_dofs(nodes: &[usize; 4], d: &[f64]) -> ([f64; 4], [f64; 4]) {
    let mut ux = [0.0; 4];
    let mut uy = [0.0; 4];
    for a in 0..4 {
        ux[a] = d[2 * nodes[a]];
        uy[a] = d[2 * nodes[a] + 1];
    }
    (ux, uy)
}

/// Visits elements in a fixed order, yielding `(element index, nodes)`.
pub(crate) fn elements(grid: &Grid) -> impl Iterator<Item = (usize, [usize; 4])> + '_ {
    let ex = grid.nx() - 1;
    (0..grid.ny() - 1).flat_map(move |ej| (0..ex).map(move |ei| (ej * ex + ei, grid.element_nodes(ei, ej))))
}

/// Values of the bilinear interpolant of `nodal` at every Gauss point.
pub(crate) fn interp_gp(grid: &Grid, nodal: &[f64]) -> Vec<[f64; 4]> {
    let q = grid.q1();
    elements(grid)
        .map(|(_, nodes)| {
            let v = gather(&nodes, nodal);
            [q.interp(0, &v), q.interp(1, &v), q.interp(2, &v), q.interp(3, &v)]
        })
        .collect()
}

/// Strain of the bilinear interpolant of interleaved displacement dofs.
pub(crate) fn strain_gp(grid: &Grid, dofs: &[f64]) -> Vec<[Sym2; 4]> {
    let q = grid.q1();
    elements(grid)
        .map(|(_, nodes)| {
            let (ux, uy) = gather_dofs(&nodes, dofs);
            [q.strain(0, &ux, &uy), q.strain(1, &ux, &uy), q.strain(2, &ux, &uy), q.strain(3, &ux, &uy)]
        })
        .collect()
}

/// `∫ N_k s` for Gauss-point data `s`, per node (not divided by the lumped mass).
pub(crate) fn project(grid: &Grid, gp: &[[f64; 4]]) -> Vec<f64> {
    let q = grid.q1();
    let mut out = vec![0.0; grid.len()];
    for (e, nodes) in elements(grid) {
        for g in 0..4 {
            let s = q.w * gp[e][g];
            for a in 0..4 {
                out[nodes[a]] += s * q.n[g][a];
            }
        }
    }
    out
}

/// `∫ σ : ℰ(w)` for every displacement dof `w`, given Gauss-point stresses.
pub(crate) fn stress_load(grid: &Grid, gp: &[[Sym2; 4]]) -> Vec<f64> {
    let q = grid.q1();
    let mut out = vec![0.0; 2 * grid.len()];
    for (e, nodes) in elements(grid) {
        for g in 0..4 {
            q.scatter_stress(g, &gp[e][g], &nodes, &mut out);
        }
    }
    out
}
