//! Structured rectangular grid, nodal fields, and the discrete differential
//! operators shared by every solver.
//!
//! Unknowns live on the `nx × ny` vertices of a uniform rectangle, numbered
//! row-major (`k = j·nx + i`, `i` along x). The discrete L² inner product uses
//! trapezoidal weights, i.e. the lumped mass of bilinear elements; all
//! "self-adjoint" statements for scalar operators refer to that inner product.

mod fields;
mod ops;
pub(crate) mod q1;

pub use fields::{ScalarField, Sym2, SymTensorField, VectorField2};
pub use ops::{divergence, divergence_adjoint, neumann_laplacian, symmetric_gradient, FluxLaplacian};
pub(crate) use ops::{divergence_adjoint_dofs, divergence_dofs, DivMatrix};

use crate::error::{Error, Result};

/// Boundary condition class of a whole rectangle edge for the displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeTag {
    DirichletDisplacement,
    NeumannTraction,
}

impl EdgeTag {
    pub fn is_dirichlet(self) -> bool {
        matches!(self, EdgeTag::DirichletDisplacement)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    /// x = 0
    Left,
    /// x = lx
    Right,
    /// y = 0
    Bottom,
    /// y = ly
    Top,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeTags {
    pub left: EdgeTag,
    pub right: EdgeTag,
    pub bottom: EdgeTag,
    pub top: EdgeTag,
}

impl EdgeTags {
    pub fn all(tag: EdgeTag) -> Self {
        Self { left: tag, right: tag, bottom: tag, top: tag }
    }

    pub fn clamped() -> Self {
        Self::all(EdgeTag::DirichletDisplacement)
    }

    pub fn get(&self, edge: Edge) -> EdgeTag {
        match edge {
            Edge::Left => self.left,
            Edge::Right => self.right,
            Edge::Bottom => self.bottom,
            Edge::Top => self.top,
        }
    }

    pub fn any_dirichlet(&self) -> bool {
        Edge::ALL.iter().any(|&e| self.get(e).is_dirichlet())
    }
}

impl Default for EdgeTags {
    fn default() -> Self {
        Self::clamped()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
    tags: EdgeTags,
    weights: Vec<f64>,
    dirichlet: Vec<bool>,
    q1: q1::Q1,
}

impl Grid {
    pub const MIN_NODES: usize = 4;

    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, tags: EdgeTags) -> Result<Self> {
        if nx < Self::MIN_NODES || ny < Self::MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {m}x{m} nodes, got {nx}x{ny}",
                m = Self::MIN_NODES
            )));
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(Error::InvalidGrid(format!("extents must be positive, got {lx} x {ly}")));
        }
        let hx = lx / (nx - 1) as f64;
        let hy = ly / (ny - 1) as f64;

        let mut weights = vec![0.0; nx * ny];
        let mut dirichlet = vec![false; nx * ny];
        for j in 0..ny {
            let wy = if j == 0 || j == ny - 1 { 0.5 * hy } else { hy };
            for i in 0..nx {
                let wx = if i == 0 || i == nx - 1 { 0.5 * hx } else { hx };
                let k = j * nx + i;
                weights[k] = wx * wy;
                // corners take the Dirichlet tag if either adjacent edge has it
                dirichlet[k] = (i == 0 && tags.left.is_dirichlet())
                    || (i == nx - 1 && tags.right.is_dirichlet())
                    || (j == 0 && tags.bottom.is_dirichlet())
                    || (j == ny - 1 && tags.top.is_dirichlet());
            }
        }
        Ok(Self { nx, ny, lx, ly, hx, hy, tags, weights, dirichlet, q1: q1::Q1::new(hx, hy) })
    }

    /// `n × n` nodes on the unit square.
    pub fn unit_square(n: usize, tags: EdgeTags) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0, tags)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn tags(&self) -> EdgeTags {
        self.tags
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_elements(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx - 1 {
            self.lx
        } else {
            i as f64 * self.hx
        }
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny - 1 {
            self.ly
        } else {
            j as f64 * self.hy
        }
    }

    pub fn point(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.ij(k);
        (self.x(i), self.y(j))
    }

    /// Trapezoidal quadrature weights (lumped mass).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn is_dirichlet_node(&self, k: usize) -> bool {
        self.dirichlet[k]
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn has_dirichlet_edge(&self) -> bool {
        self.tags.any_dirichlet()
    }

    /// Node indices along an edge, ordered by increasing coordinate.
    pub fn edge_nodes(&self, edge: Edge) -> Vec<usize> {
        match edge {
            Edge::Left => (0..self.ny).map(|j| self.idx(0, j)).collect(),
            Edge::Right => (0..self.ny).map(|j| self.idx(self.nx - 1, j)).collect(),
            Edge::Bottom => (0..self.nx).map(|i| self.idx(i, 0)).collect(),
            Edge::Top => (0..self.nx).map(|i| self.idx(i, self.ny - 1)).collect(),
        }
    }

    /// Spacing along an edge.
    pub fn edge_spacing(&self, edge: Edge) -> f64 {
        match edge {
            Edge::Left | Edge::Right => self.hy,
            Edge::Bottom | Edge::Top => self.hx,
        }
    }

    pub(crate) fn q1(&self) -> &q1::Q1 {
        &self.q1
    }

    /// Node indices of element `(ei, ej)` in counter-clockwise order from the
    /// lower-left corner.
    #[inline]
    pub(crate) fn element_nodes(&self, ei: usize, ej: usize) -> [usize; 4] {
        let k = self.idx(ei, ej);
        [k, k + 1, k + 1 + self.nx, k + self.nx]
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::FieldShape { expected: self.len(), got: len });
        }
        Ok(())
    }
}
